#include "pneumo/bayesopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>

#include <json.hpp>

#include "pneumo/random.hpp"

namespace pneumo {

void SearchSpace::validate() const {
  for (int k = 0; k < 2; ++k)
    require(std::isfinite(lower[k]) && std::isfinite(upper[k]) && lower[k] < upper[k],
            "search space bounds must satisfy lower < upper");
}

bool SearchSpace::contains(const std::array<double, 2>& p) const noexcept {
  return p[0] >= lower[0] && p[0] <= upper[0] && p[1] >= lower[1] && p[1] <= upper[1];
}

SvmHyperparams SearchSpace::to_hyperparams(const std::array<double, 2>& p) const noexcept {
  return {std::pow(10.0, p[0]), std::pow(10.0, p[1])};
}

// --- GP --------------------------------------------------------------------------

double GpPosterior::kernel(std::span<const double> a, std::span<const double> b) const {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = (a[k] - b[k]) / params_.length_scales[k];
    s += d * d;
  }
  return params_.signal_variance * std::exp(-0.5 * s);
}

GpPosterior::GpPosterior(std::vector<std::vector<double>> points, std::vector<double> targets,
                         GpKernelParams params, double max_jitter)
    : points_(std::move(points)), targets_(std::move(targets)), params_(std::move(params)) {
  const std::size_t n = points_.size();
  require(n >= 1 && targets_.size() == n, "GP needs matching points and targets");
  const std::size_t dim = points_.front().size();
  for (const auto& p : points_) require(p.size() == dim, "GP points have mixed dimensions");
  require(params_.length_scales.size() == dim, "one length scale per input dimension");

  prior_mean_ = std::accumulate(targets_.begin(), targets_.end(), 0.0) / static_cast<double>(n);

  Eigen::MatrixXd K(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) K(i, j) = K(j, i) = kernel(points_[i], points_[j]);

  Eigen::LLT<Eigen::MatrixXd> llt;
  for (double jitter = 0.0;;) {
    Eigen::MatrixXd A = K;
    A.diagonal().array() += params_.noise_variance + jitter;
    llt.compute(A);
    if (llt.info() == Eigen::Success) {
      jitter_ = jitter;
      break;
    }
    jitter = jitter == 0.0 ? 1e-10 : jitter * 10.0;
    if (jitter > max_jitter * (1.0 + 1e-9))
      throw Error(ErrorCode::kNumeric, "GP covariance is not positive definite even with jitter");
  }
  chol_ = llt.matrixL();

  Eigen::VectorXd r(n);
  for (std::size_t i = 0; i < n; ++i) r(i) = targets_[i] - prior_mean_;
  weights_ = llt.solve(r);
  log_ml_ = -0.5 * r.dot(weights_) - chol_.diagonal().array().log().sum() -
            0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
}

GpPrediction GpPosterior::predict(std::span<const double> point) const {
  const std::size_t n = points_.size();
  Eigen::VectorXd k(n);
  for (std::size_t i = 0; i < n; ++i) k(i) = kernel(points_[i], point);
  GpPrediction out;
  out.mean = prior_mean_ + k.dot(weights_);
  const Eigen::VectorXd v = chol_.triangularView<Eigen::Lower>().solve(k);
  out.variance = params_.signal_variance - v.squaredNorm();
  if (out.variance < 1e-12) out.variance = std::max(out.variance, 0.0);
  return out;
}

GpPosterior gp_fit(const std::vector<std::vector<double>>& points, std::span<const double> targets,
                   const GpFitOptions& options) {
  require(points.size() >= 2, "GP fit needs at least 2 observations");
  require(targets.size() == points.size(), "GP needs one target per point");
  const std::size_t dim = points.front().size();
  require(dim >= 1, "GP points need at least one coordinate");

  const double n = static_cast<double>(targets.size());
  const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / n;
  double var = 0.0;
  for (double t : targets) var += (t - mean) * (t - mean);
  var = std::max(var / n, options.min_signal_variance);

  const std::vector<double> values(targets.begin(), targets.end());
  std::optional<GpPosterior> best;
  std::optional<Error> last_error;

  // Odometer over length scales for every dimension, then signal variance.
  std::vector<std::size_t> digit(dim, 0);
  for (;;) {
    for (double factor : options.signal_variance_factors) {
      GpKernelParams params;
      for (std::size_t k = 0; k < dim; ++k) params.length_scales.push_back(options.length_scales[digit[k]]);
      params.signal_variance = factor * var;
      params.noise_variance = options.noise_variance;
      try {
        GpPosterior gp(points, values, params, options.max_jitter);
        if (!best || gp.log_marginal_likelihood() > best->log_marginal_likelihood())
          best.emplace(std::move(gp));
      } catch (const Error& e) {
        last_error = e;
      }
    }
    std::size_t k = 0;
    while (k < dim && ++digit[k] == options.length_scales.size()) digit[k++] = 0;
    if (k == dim) break;
  }
  if (!best) throw last_error ? *last_error : Error(ErrorCode::kNumeric, "GP fit failed");
  return std::move(*best);
}

double normal_pdf(double z) noexcept {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double expected_improvement(double mean, double sigma, double best_loss) noexcept {
  const double improvement = best_loss - mean;
  if (sigma < 1e-12) return std::max(0.0, improvement);
  const double z = improvement / sigma;
  return std::max(0.0, improvement * normal_cdf(z) + sigma * normal_pdf(z));
}

double expected_improvement(const GpPosterior& gp, std::span<const double> point, double best_loss) {
  const GpPrediction p = gp.predict(point);
  return expected_improvement(p.mean, std::sqrt(p.variance), best_loss);
}

// --- tuner -------------------------------------------------------------------------

namespace {

double radical_inverse(std::size_t i, std::size_t base) {
  double inv = 1.0 / static_cast<double>(base), f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

std::vector<double> to_unit(const SearchSpace& s, const std::array<double, 2>& p) {
  return {(p[0] - s.lower[0]) / (s.upper[0] - s.lower[0]),
          (p[1] - s.lower[1]) / (s.upper[1] - s.lower[1])};
}

std::array<double, 2> from_unit(const SearchSpace& s, double u0, double u1) {
  return {s.lower[0] + u0 * (s.upper[0] - s.lower[0]), s.lower[1] + u1 * (s.upper[1] - s.lower[1])};
}

GpPosterior fit_history(const SearchSpace& space, const std::vector<Observation>& history,
                        const GpFitOptions& options) {
  std::vector<std::vector<double>> pts;
  std::vector<double> losses;
  for (const Observation& o : history) {
    pts.push_back(to_unit(space, o.point));
    losses.push_back(o.loss);
  }
  return gp_fit(pts, losses, options);
}

}  // namespace

TuneResult tune(const TuneObjective& objective, const SearchSpace& space,
                const TuneOptions& options) {
  space.validate();
  require(options.budget >= 5, "tuning budget must be at least 5 evaluations");
  require(options.initial_points >= 2 && options.initial_points <= options.budget,
          "initial design needs between 2 and budget points");
  require(options.candidate_pool >= 1, "candidate pool must not be empty");

  Rng rng(options.seed);
  TuneResult result;
  result.space = space;
  result.seed = options.seed;
  result.budget = options.budget;
  result.kappa = options.kappa;

  auto evaluate = [&](const std::array<double, 2>& p) {
    double loss = 0.0;
    try {
      loss = objective(p);
    } catch (const Error& e) {
      throw TuneAborted(e.code(), std::string("objective failed: ") + e.what(), result.history);
    }
    if (!std::isfinite(loss))
      throw TuneAborted(ErrorCode::kNumeric, "objective returned a non-finite loss", result.history);
    result.history.push_back({p, loss});
  };

  const double shift0 = rng.uniform(), shift1 = rng.uniform();
  for (std::size_t i = 1; i <= options.initial_points; ++i) {
    const double u0 = std::fmod(radical_inverse(i, 2) + shift0, 1.0);
    const double u1 = std::fmod(radical_inverse(i, 3) + shift1, 1.0);
    evaluate(from_unit(space, u0, u1));
  }

  while (result.history.size() < options.budget) {
    const GpPosterior gp = fit_history(space, result.history, options.gp);
    double best_loss = result.history.front().loss;
    for (const Observation& o : result.history) best_loss = std::min(best_loss, o.loss);

    std::array<double, 2> proposal{};
    double best_ei = -1.0;
    for (std::size_t c = 0; c < options.candidate_pool; ++c) {
      const double u0 = rng.uniform(), u1 = rng.uniform();
      const double ei = expected_improvement(gp, std::vector<double>{u0, u1}, best_loss);
      if (ei > best_ei) {
        best_ei = ei;
        proposal = from_unit(space, u0, u1);
      }
    }
    evaluate(proposal);
  }

  const GpPosterior final_gp = fit_history(space, result.history, options.gp);
  double best_ucb = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < result.history.size(); ++i) {
    const GpPrediction p = final_gp.predict(to_unit(space, result.history[i].point));
    const double sd = std::sqrt(p.variance);
    result.final_mean.push_back(p.mean);
    result.final_sd.push_back(sd);
    const double ucb = p.mean + options.kappa * sd;
    if (ucb < best_ucb) {
      best_ucb = ucb;
      result.best_index = i;
    }
  }
  result.criterion_value = best_ucb;
  result.best_point = result.history[result.best_index].point;
  result.best = space.to_hyperparams(result.best_point);
  return result;
}

TuneResult tune_svm(const FeatureMatrix& X, std::span<const int> y, const SearchSpace& space,
                    const TuneOptions& options, std::size_t folds, const SmoOptions& smo) {
  const CvSpec spec{folds, options.seed};
  // Validate the fold count before spending any evaluations.
  stratified_folds(y, spec.folds, spec.seed);
  return tune(
      [&](const std::array<double, 2>& p) {
        return cv_loss(X, y, space.to_hyperparams(p), spec, smo);
      },
      space, options);
}

std::string tune_result_to_json(const TuneResult& r) {
  using nlohmann::json;
  json history = json::array();
  for (std::size_t i = 0; i < r.history.size(); ++i) {
    const Observation& o = r.history[i];
    json entry = {{"log10_C", o.point[0]},
                  {"log10_gamma", o.point[1]},
                  {"C", std::pow(10.0, o.point[0])},
                  {"gamma", std::pow(10.0, o.point[1])},
                  {"loss", o.loss}};
    if (i < r.final_mean.size()) {
      entry["posterior_mean"] = r.final_mean[i];
      entry["posterior_sd"] = r.final_sd[i];
    }
    history.push_back(entry);
  }
  json j = {{"bounds",
             {{"log10_C", {r.space.lower[0], r.space.upper[0]}},
              {"log10_gamma", {r.space.lower[1], r.space.upper[1]}}}},
            {"seed", r.seed},
            {"budget", r.budget},
            {"kappa", r.kappa},
            {"history", history},
            {"best",
             {{"index", r.best_index},
              {"log10_C", r.best_point[0]},
              {"log10_gamma", r.best_point[1]},
              {"C", r.best.C},
              {"gamma", r.best.gamma}}},
            {"criterion", "min over visited points of posterior mean + kappa * sd"},
            {"criterion_value", r.criterion_value}};
  return j.dump(2) + "\n";
}

}  // namespace pneumo
