#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pneumo/featurestore.hpp"

namespace pneumo {

enum class ScoreMethod { kRelieff, kChiSquare, kUnknown };

const char* score_method_name(ScoreMethod method) noexcept;
ScoreMethod parse_score_method(const std::string& name);

struct ScoreVector {
  std::vector<double> scores;
  ScoreMethod method = ScoreMethod::kUnknown;
  // relieff: k_neighbors, sample_rounds, seed. chi2: n_bins.
  std::vector<std::pair<std::string, double>> params;

  std::size_t size() const noexcept { return scores.size(); }
};

struct ReliefOptions {
  std::size_t k_neighbors = 10;
  /// 0 (or n) visits every instance once in index order.
  std::size_t sample_rounds = 0;
  std::uint64_t seed = 0;
};

/// ReliefF with k nearest hits and k nearest misses per other class.
///
/// Features are min-max normalized over the given rows, distances are
/// Manhattan on the normalized values, and neighbours with equal distance
/// are ordered by ascending row index. Miss contributions are weighted by
/// P(C) / (1 - P(class(R))) using the class frequencies of the given rows.
/// A zero-range feature contributes nothing and scores exactly 0.
ScoreVector relieff_scores(const FeatureMatrix& matrix, const LabelVector& labels,
                           const ReliefOptions& options = {});

/// Equal-frequency discretization into at most `n_bins` bins. Returns a
/// compact bin id per value (empty bins never get an id).
std::vector<std::size_t> equal_frequency_bins(std::span<const float> column, std::size_t n_bins);

/// Pearson chi-square of an observed table, rows = bins, cols = classes.
/// All-zero rows and columns are skipped.
double chi_square_statistic(const std::vector<std::vector<double>>& observed);

ScoreVector chi_square_scores(const FeatureMatrix& matrix, const LabelVector& labels,
                              std::size_t n_bins = 10);

/// Permutation of feature indices, scores descending, ties by ascending index.
struct Ranking {
  std::vector<Index> order;
};

Ranking rank_features(const ScoreVector& scores);

/// Scores along the ranking.
std::vector<double> ranked_scores(const ScoreVector& scores, const Ranking& ranking);

/// Perpendicular distance of each point of the normalized ranked-score curve
/// to the chord joining its endpoints. Both axes are min-max scaled to [0,1].
std::vector<double> chord_distances(std::span<const double> sorted_scores);

/// Distances within this of the maximum count as ties.
inline constexpr double kElbowTieTolerance = 1e-12;

/// Knee of a non-increasing curve: 1 + the smallest index whose chord
/// distance attains the maximum. Endpoints have distance 0, so a straight
/// or flat curve gives 1.
std::size_t elbow_cutoff(std::span<const double> sorted_scores);

struct SelectionResult {
  std::size_t cutoff_k = 0;
  std::vector<Index> selected;
};

SelectionResult select_top(const Ranking& ranking, std::size_t k);
SelectionResult select_elbow(const ScoreVector& scores);

/// Column slice in the given order.
FeatureMatrix select_subset(const FeatureMatrix& matrix, std::span<const Index> columns);

struct ReductionSummary {
  std::size_t initial = 0;
  std::size_t retained = 0;

  double ratio() const noexcept {
    return initial == 0 ? 0.0 : 1.0 - static_cast<double>(retained) / static_cast<double>(initial);
  }
};

// CSV columns: feature_index,score,rank (rank is 1-based).
std::string scores_to_csv(const ScoreVector& scores);
ScoreVector scores_from_csv(const std::string& text);
void write_scores_csv(const ScoreVector& scores, const std::filesystem::path& path);
ScoreVector read_scores_csv(const std::filesystem::path& path);

/// Ranked-score curve: rank,feature_index,score,normalized_rank,normalized_score,chord_distance
std::string score_curve_csv(const ScoreVector& scores);

}  // namespace pneumo
