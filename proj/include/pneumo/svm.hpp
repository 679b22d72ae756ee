#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "pneumo/error.hpp"
#include "pneumo/featurestore.hpp"

namespace pneumo {

struct SvmHyperparams {
  double C = 1.0;
  double gamma = 1.0;

  /// Throws invalid-input unless both are finite and strictly positive.
  void validate() const;
};

struct SmoOptions {
  /// Stop once the maximal KKT violation m(a) - M(a) drops below this.
  double tol = 1e-3;
  /// Sweep budget; one sweep is n pair updates. 0 means 10 * n.
  std::size_t max_passes = 0;
};

/// Full Gram matrix is cached up to this many training rows; above it, rows
/// are computed on demand through a bounded LRU cache.
inline constexpr std::size_t kFullKernelCacheLimit = 4096;

struct SvmModel {
  /// Support vectors, in the (possibly standardized) space the model was trained in.
  FeatureMatrix support;
  /// alpha_i * y_i per support vector.
  std::vector<double> dual_coefs;
  double bias = 0.0;
  SvmHyperparams hyperparams;
  /// Applied to inputs before the kernel; empty means identity.
  StandardizationParams standardizer;
  /// Class id for decision sign -1 and +1.
  std::array<ClassId, 2> label_map = {-1, 1};

  // Training diagnostics, not serialized.
  double dual_objective = 0.0;
  double kkt_gap = 0.0;
  std::size_t iterations = 0;

  std::size_t n_features() const noexcept { return support.cols(); }
  std::size_t n_support() const noexcept { return dual_coefs.size(); }
};

/// Thrown when SMO exhausts its sweep budget. Carries the last iterate.
class ConvergenceError : public Error {
 public:
  ConvergenceError(SvmModel best, double residual);

  const SvmModel& best() const noexcept { return best_; }
  double residual() const noexcept { return residual_; }

 private:
  SvmModel best_;
  double residual_;
};

/// exp(-gamma * |x - z|^2).
double rbf_kernel(std::span<const float> x, std::span<const float> z, double gamma);

/// Soft-margin dual solved by SMO. The first index of each pair is the
/// maximal violator; the second maximizes the second-order decrease of the
/// dual. Index scans are in ascending order, so training is deterministic.
///
/// `y` holds -1/+1. The bias is the mean of y_i - f_0(x_i) over free support
/// vectors; with none it is the midpoint of the feasible interval.
SvmModel smo_train(const FeatureMatrix& X, std::span<const int> y, const SvmHyperparams& params,
                   const SmoOptions& options = {});

/// Standardizes on X, trains, and attaches the standardizer and label map.
SvmModel fit_svm(const FeatureMatrix& X, std::span<const int> y, const SvmHyperparams& params,
                 std::array<ClassId, 2> label_map = {-1, 1}, const SmoOptions& options = {});

/// Dual objective sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j k(x_i, x_j)
/// evaluated for the given multipliers.
double dual_objective(const FeatureMatrix& X, std::span<const int> y, std::span<const double> alpha,
                      double gamma);

std::vector<double> decision_values(const SvmModel& model, const FeatureMatrix& X);

/// -1/+1 per row; a decision value of exactly 0 maps to +1.
std::vector<int> predict_signs(const SvmModel& model, const FeatureMatrix& X);

/// Class ids through the model's label map.
std::vector<ClassId> predict(const SvmModel& model, const FeatureMatrix& X);

struct CvSpec {
  std::size_t folds = 10;
  std::uint64_t seed = 0;
};

/// Stratified fold id per row: each class is shuffled, then dealt round-robin.
std::vector<std::size_t> stratified_folds(std::span<const int> y, std::size_t folds,
                                          std::uint64_t seed);

/// Mean 0-1 error over stratified folds. Each fold refits the standardizer
/// on its own training part.
double cv_loss(const FeatureMatrix& X, std::span<const int> y, const SvmHyperparams& params,
               const CvSpec& spec = {}, const SmoOptions& options = {});

// SVM1 container.
std::vector<std::uint8_t> encode_model(const SvmModel& model);
SvmModel decode_model(std::span<const std::uint8_t> bytes);
void save_model(const SvmModel& model, const std::filesystem::path& path);
SvmModel load_model(const std::filesystem::path& path);

}  // namespace pneumo
