#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pneumo/error.hpp"
#include "pneumo/svm.hpp"

namespace pneumo {

/// Box in (log10 C, log10 gamma).
struct SearchSpace {
  std::array<double, 2> lower = {-3.0, -5.0};
  std::array<double, 2> upper = {3.0, 1.0};

  void validate() const;
  bool contains(const std::array<double, 2>& point) const noexcept;
  SvmHyperparams to_hyperparams(const std::array<double, 2>& point) const noexcept;
};

struct Observation {
  std::array<double, 2> point;  // log10 C, log10 gamma
  double loss = 0.0;
};

/// Squared-exponential kernel s^2 exp(-1/2 sum_k (x_k - z_k)^2 / l_k^2).
struct GpKernelParams {
  std::vector<double> length_scales;
  double signal_variance = 1.0;
  double noise_variance = 1e-6;
};

struct GpFitOptions {
  /// Candidate length scales, used for every input dimension.
  std::vector<double> length_scales = {0.05, 0.1057371263440564, 0.22360679774997896,
                                       0.47287080450158786, 1.0};
  /// Candidate signal variances as multiples of the sample variance of the targets.
  std::vector<double> signal_variance_factors = {0.1, 0.31622776601683794, 1.0,
                                                 3.1622776601683795, 10.0};
  /// Floor applied to the sample variance before scaling.
  double min_signal_variance = 1e-6;
  double noise_variance = 1e-6;
  double max_jitter = 1e-4;
};

struct GpPrediction {
  double mean = 0.0;
  double variance = 0.0;
};

/// GP regression with a constant prior mean equal to the target average.
class GpPosterior {
 public:
  /// Fixed kernel parameters. Throws numeric error if the covariance cannot
  /// be factorized even after adding `max_jitter` to the diagonal.
  GpPosterior(std::vector<std::vector<double>> points, std::vector<double> targets,
              GpKernelParams params, double max_jitter = 1e-4);

  GpPrediction predict(std::span<const double> point) const;

  double log_marginal_likelihood() const noexcept { return log_ml_; }
  const GpKernelParams& params() const noexcept { return params_; }
  double prior_mean() const noexcept { return prior_mean_; }
  double jitter() const noexcept { return jitter_; }
  const std::vector<std::vector<double>>& points() const noexcept { return points_; }
  const std::vector<double>& targets() const noexcept { return targets_; }

  double kernel(std::span<const double> a, std::span<const double> b) const;

 private:
  std::vector<std::vector<double>> points_;
  std::vector<double> targets_;
  GpKernelParams params_;
  double prior_mean_ = 0.0;
  double jitter_ = 0.0;
  double log_ml_ = 0.0;
  Eigen::MatrixXd chol_;  // lower factor of K + (noise + jitter) I
  Eigen::VectorXd weights_;  // (K + noise I)^-1 (y - mean)
};

/// Picks the kernel parameters on the length-scale x length-scale x signal
/// variance grid with the highest log marginal likelihood. Needs >= 2 points.
GpPosterior gp_fit(const std::vector<std::vector<double>>& points, std::span<const double> targets,
                   const GpFitOptions& options = {});

double normal_pdf(double z) noexcept;
double normal_cdf(double z) noexcept;

/// Expected improvement for minimization; max(0, best - mean) when sigma < 1e-12.
double expected_improvement(double mean, double sigma, double best_loss) noexcept;
double expected_improvement(const GpPosterior& gp, std::span<const double> point, double best_loss);

struct TuneOptions {
  std::size_t budget = 30;
  std::size_t initial_points = 4;
  std::size_t candidate_pool = 1000;
  /// UCB weight for the final pick.
  double kappa = 2.0;
  std::uint64_t seed = 0;
  GpFitOptions gp;
};

struct TuneResult {
  SearchSpace space;
  std::uint64_t seed = 0;
  std::size_t budget = 0;
  double kappa = 2.0;
  std::vector<Observation> history;
  std::size_t best_index = 0;
  std::array<double, 2> best_point{};
  SvmHyperparams best;
  double criterion_value = 0.0;
  /// Posterior mean and standard deviation at each visited point under the final GP.
  std::vector<double> final_mean;
  std::vector<double> final_sd;
};

/// Raised when the objective fails; the history gathered so far is kept.
class TuneAborted : public Error {
 public:
  TuneAborted(ErrorCode code, const std::string& what, std::vector<Observation> history)
      : Error(code, what), history_(std::move(history)) {}
  const std::vector<Observation>& history() const noexcept { return history_; }

 private:
  std::vector<Observation> history_;
};

using TuneObjective = std::function<double(const std::array<double, 2>& log_point)>;

/// Initial design: a randomly shifted Halton(2,3) sequence. After that, each
/// proposal maximizes EI over a fresh pool of uniform candidates. The result
/// is the visited point minimizing mean + kappa * sd under the final GP.
TuneResult tune(const TuneObjective& objective, const SearchSpace& space,
                const TuneOptions& options = {});

/// Tunes (C, gamma) on 10-fold stratified CV loss seeded with options.seed.
TuneResult tune_svm(const FeatureMatrix& X, std::span<const int> y, const SearchSpace& space,
                    const TuneOptions& options = {}, std::size_t folds = 10,
                    const SmoOptions& smo = {});

std::string tune_result_to_json(const TuneResult& result);

}  // namespace pneumo
