#include "pneumo/svm.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <list>
#include <numeric>
#include <unordered_map>

#include "pneumo/random.hpp"

namespace pneumo {

void SvmHyperparams::validate() const {
  require(std::isfinite(C) && C > 0.0, "C must be finite and > 0");
  require(std::isfinite(gamma) && gamma > 0.0, "gamma must be finite and > 0");
}

ConvergenceError::ConvergenceError(SvmModel best, double residual)
    : Error(ErrorCode::kConvergence,
            "SMO did not reach the KKT tolerance within its sweep budget (residual " +
                std::to_string(residual) + ")"),
      best_(std::move(best)),
      residual_(residual) {}

double rbf_kernel(std::span<const float> x, std::span<const float> z, double gamma) {
  require(x.size() == z.size(), "kernel arguments have different dimensions");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(z[i]);
    s += d * d;
  }
  return std::exp(-gamma * s);
}

namespace {

class KernelCache {
 public:
  KernelCache(const FeatureMatrix& X, double gamma) : X_(X), gamma_(gamma), n_(X.rows()) {
    if (n_ <= kFullKernelCacheLimit) {
      full_.resize(n_ * n_);
      for (std::size_t i = 0; i < n_; ++i) {
        full_[i * n_ + i] = rbf_kernel(X.row(i), X.row(i), gamma);
        for (std::size_t j = 0; j < i; ++j)
          full_[i * n_ + j] = full_[j * n_ + i] = rbf_kernel(X.row(i), X.row(j), gamma);
      }
    } else {
      constexpr std::size_t kBudgetBytes = std::size_t{512} << 20;
      capacity_ = std::max<std::size_t>(2, kBudgetBytes / (n_ * sizeof(double)));
    }
  }

  std::span<const double> row(std::size_t i) {
    if (!full_.empty()) return {full_.data() + i * n_, n_};
    if (auto it = index_.find(i); it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      return lru_.front().second;
    }
    if (lru_.size() >= capacity_) {
      index_.erase(lru_.back().first);
      lru_.pop_back();
    }
    std::vector<double> r(n_);
    for (std::size_t j = 0; j < n_; ++j) r[j] = rbf_kernel(X_.row(i), X_.row(j), gamma_);
    lru_.emplace_front(i, std::move(r));
    index_[i] = lru_.begin();
    return lru_.front().second;
  }

 private:
  const FeatureMatrix& X_;
  double gamma_;
  std::size_t n_;
  std::vector<double> full_;
  std::size_t capacity_ = 0;
  std::list<std::pair<std::size_t, std::vector<double>>> lru_;
  std::unordered_map<std::size_t, decltype(lru_)::iterator> index_;
};

constexpr double kTau = 1e-12;

}  // namespace

SvmModel smo_train(const FeatureMatrix& X, std::span<const int> y, const SvmHyperparams& params,
                   const SmoOptions& options) {
  params.validate();
  const std::size_t n = X.rows();
  require(n >= 2, "SVM training needs at least 2 samples");
  require(y.size() == n, "label count does not match matrix rows");
  bool has_pos = false, has_neg = false;
  for (int v : y) {
    require(v == 1 || v == -1, "SVM labels must be -1 or +1");
    (v > 0 ? has_pos : has_neg) = true;
  }
  require(has_pos && has_neg, "SVM training needs both labels present");
  require(options.tol > 0.0, "SMO tolerance must be positive");

  const double C = params.C;
  KernelCache kernel(X, params.gamma);
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = kernel.row(i)[i];

  std::vector<double> alpha(n, 0.0);
  std::vector<double> grad(n, -1.0);  // Q alpha - e
  auto upper = [&](std::size_t t) { return alpha[t] >= C; };
  auto lower = [&](std::size_t t) { return alpha[t] <= 0.0; };

  const std::size_t passes = options.max_passes == 0 ? 10 * n : options.max_passes;
  const std::size_t max_iter = passes * n;
  std::size_t iter = 0;
  double gap = std::numeric_limits<double>::infinity();
  bool converged = false;

  while (iter < max_iter) {
    // First index: maximal violator in I_up.
    double gmax = -std::numeric_limits<double>::infinity();
    std::size_t i = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      const bool in_up = y[t] > 0 ? !upper(t) : !lower(t);
      if (in_up && v >= gmax) {
        gmax = v;
        i = t;
      }
    }
    if (i == n) {
      gap = 0.0;
      converged = true;
      break;
    }
    // Second index: best second-order decrease among I_low.
    const auto Ki = kernel.row(i);
    double gmax2 = -std::numeric_limits<double>::infinity();
    double best_obj = std::numeric_limits<double>::infinity();
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const bool in_low = y[t] > 0 ? !lower(t) : !upper(t);
      if (!in_low) continue;
      const double v = y[t] * grad[t];
      gmax2 = std::max(gmax2, v);
      const double grad_diff = gmax + v;
      if (grad_diff > 0.0) {
        double quad = diag[i] + diag[t] - 2.0 * Ki[t];
        if (quad <= 0.0) quad = kTau;
        const double obj = -(grad_diff * grad_diff) / quad;
        if (obj <= best_obj) {
          best_obj = obj;
          j = t;
        }
      }
    }
    gap = gmax + gmax2;
    if (gap < options.tol || j == n) {
      converged = true;
      break;
    }
    ++iter;

    const auto Kj = kernel.row(j);
    const double ai_old = alpha[i], aj_old = alpha[j];
    double ai = ai_old, aj = aj_old;
    double quad = diag[i] + diag[j] - 2.0 * Ki[j];
    if (quad <= 0.0) quad = kTau;
    if (y[i] != y[j]) {
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0.0) {
        if (aj < 0.0) { aj = 0.0; ai = diff; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = -diff; }
      }
      if (diff > 0.0) {
        if (ai > C) { ai = C; aj = C - diff; }
      } else {
        if (aj > C) { aj = C; ai = C + diff; }
      }
    } else {
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > C) {
        if (ai > C) { ai = C; aj = sum - C; }
      } else {
        if (aj < 0.0) { aj = 0.0; ai = sum; }
      }
      if (sum > C) {
        if (aj > C) { aj = C; ai = sum - C; }
      } else {
        if (ai < 0.0) { ai = 0.0; aj = sum; }
      }
    }
    alpha[i] = ai;
    alpha[j] = aj;
    const double dai = ai - ai_old, daj = aj - aj_old;
    for (std::size_t t = 0; t < n; ++t)
      grad[t] += y[t] * (y[i] * Ki[t] * dai + y[j] * Kj[t] * daj);
  }

  // Bias from free vectors, else the midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t n_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (upper(t)) {
      if (y[t] < 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (lower(t)) {
      if (y[t] > 0) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      free_sum += yg;
      ++n_free;
    }
  }
  const double rho = n_free > 0 ? free_sum / static_cast<double>(n_free) : (ub + lb) / 2.0;

  SvmModel model;
  model.hyperparams = params;
  model.bias = -rho;
  model.iterations = iter;
  model.kkt_gap = gap;
  double objective = 0.0;
  IndexList sv;
  for (std::size_t t = 0; t < n; ++t) {
    objective += 0.5 * alpha[t] - 0.5 * alpha[t] * grad[t];
    if (alpha[t] > 0.0) {
      sv.push_back(t);
      model.dual_coefs.push_back(alpha[t] * y[t]);
    }
  }
  model.dual_objective = objective;
  model.support = X.take_rows(sv);
  model.support.origin.reset();

  if (!converged) throw ConvergenceError(std::move(model), gap);
  return model;
}

SvmModel fit_svm(const FeatureMatrix& X, std::span<const int> y, const SvmHyperparams& params,
                 std::array<ClassId, 2> label_map, const SmoOptions& options) {
  StandardizationParams standardizer = fit_standardizer(X);
  SvmModel model = smo_train(apply_standardizer(standardizer, X), y, params, options);
  model.standardizer = std::move(standardizer);
  model.label_map = label_map;
  return model;
}

double dual_objective(const FeatureMatrix& X, std::span<const int> y, std::span<const double> alpha,
                      double gamma) {
  require(alpha.size() == X.rows() && y.size() == X.rows(), "dual objective shape mismatch");
  double linear = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    linear += alpha[i];
    if (alpha[i] == 0.0) continue;
    for (std::size_t j = 0; j < X.rows(); ++j) {
      if (alpha[j] == 0.0) continue;
      quad += alpha[i] * alpha[j] * y[i] * y[j] * rbf_kernel(X.row(i), X.row(j), gamma);
    }
  }
  return linear - 0.5 * quad;
}

std::vector<double> decision_values(const SvmModel& model, const FeatureMatrix& X) {
  require(X.cols() == model.n_features(),
          "feature dimension " + std::to_string(X.cols()) + " does not match model dimension " +
              std::to_string(model.n_features()));
  const FeatureMatrix* input = &X;
  FeatureMatrix scaled;
  if (!model.standardizer.empty()) {
    scaled = apply_standardizer(model.standardizer, X);
    input = &scaled;
  }
  std::vector<double> out(X.rows(), model.bias);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    double f = 0.0;
    for (std::size_t s = 0; s < model.n_support(); ++s)
      f += model.dual_coefs[s] *
           rbf_kernel(model.support.row(s), input->row(r), model.hyperparams.gamma);
    out[r] += f;
  }
  return out;
}

std::vector<int> predict_signs(const SvmModel& model, const FeatureMatrix& X) {
  const auto f = decision_values(model, X);
  std::vector<int> out(f.size());
  std::transform(f.begin(), f.end(), out.begin(), [](double v) { return v >= 0.0 ? 1 : -1; });
  return out;
}

std::vector<ClassId> predict(const SvmModel& model, const FeatureMatrix& X) {
  const auto s = predict_signs(model, X);
  std::vector<ClassId> out(s.size());
  std::transform(s.begin(), s.end(), out.begin(),
                 [&](int v) { return model.label_map[v > 0 ? 1 : 0]; });
  return out;
}

std::vector<std::size_t> stratified_folds(std::span<const int> y, std::size_t folds,
                                          std::uint64_t seed) {
  require(folds >= 2, "cross-validation needs at least 2 folds");
  IndexList neg, pos;
  for (std::size_t i = 0; i < y.size(); ++i) (y[i] > 0 ? pos : neg).push_back(i);
  require(folds <= std::min(neg.size(), pos.size()),
          "folds=" + std::to_string(folds) + " exceeds the smallest class count " +
              std::to_string(std::min(neg.size(), pos.size())));
  std::vector<std::size_t> fold(y.size());
  Rng rng(seed);
  for (IndexList* members : {&neg, &pos}) {
    rng.shuffle(std::span<Index>(*members));
    for (std::size_t k = 0; k < members->size(); ++k) fold[(*members)[k]] = k % folds;
  }
  return fold;
}

double cv_loss(const FeatureMatrix& X, std::span<const int> y, const SvmHyperparams& params,
               const CvSpec& spec, const SmoOptions& options) {
  params.validate();
  require(y.size() == X.rows(), "label count does not match matrix rows");
  const auto fold = stratified_folds(y, spec.folds, spec.seed);
  double total = 0.0;
  for (std::size_t k = 0; k < spec.folds; ++k) {
    IndexList train, held;
    for (std::size_t i = 0; i < y.size(); ++i) (fold[i] == k ? held : train).push_back(i);
    std::vector<int> y_train;
    for (Index i : train) y_train.push_back(y[i]);
    const SvmModel model = fit_svm(X.take_rows(train), y_train, params, {-1, 1}, options);
    const auto pred = predict_signs(model, X.take_rows(held));
    std::size_t wrong = 0;
    for (std::size_t h = 0; h < held.size(); ++h) wrong += pred[h] != y[held[h]];
    total += static_cast<double>(wrong) / static_cast<double>(held.size());
  }
  return total / static_cast<double>(spec.folds);
}

// --- SVM1 container ----------------------------------------------------------

namespace {

constexpr char kSvmMagic[4] = {'S', 'V', 'M', '1'};
constexpr std::uint32_t kSvmVersion = 1;

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    auto b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  const std::uint8_t* take(std::size_t n) {
    if (b_.size() - pos_ < n) throw Error(ErrorCode::kFormatTruncated, "SVM1 model truncated");
    const std::uint8_t* p = b_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32() {
    const auto* p = take(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = v << 8 | p[i];
    return v;
  }
  std::uint64_t u64() {
    const auto* p = take(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = v << 8 | p[i];
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  float f32() { return std::bit_cast<float>(u32()); }
  bool done() const { return pos_ == b_.size(); }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_model(const SvmModel& m) {
  Writer w;
  w.bytes(kSvmMagic, 4);
  w.u32(kSvmVersion);
  w.u32(static_cast<std::uint32_t>(m.n_features()));
  w.f64(m.hyperparams.C);
  w.f64(m.hyperparams.gamma);
  w.f64(m.bias);
  w.u32(static_cast<std::uint32_t>(m.label_map[0]));
  w.u32(static_cast<std::uint32_t>(m.label_map[1]));
  const std::uint8_t has_std = m.standardizer.empty() ? 0 : 1;
  const std::uint8_t header_tail[4] = {has_std, 0, 0, 0};
  w.bytes(header_tail, 4);
  if (has_std) {
    for (double v : m.standardizer.mean) w.f64(v);
    for (double v : m.standardizer.stddev) w.f64(v);
  }
  w.u32(static_cast<std::uint32_t>(m.n_support()));
  for (double c : m.dual_coefs) w.f64(c);
  for (float v : m.support.values()) w.f32(v);
  return std::move(w.out);
}

SvmModel decode_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kSvmMagic, 4) != 0)
    throw Error(ErrorCode::kFormatBadMagic, "not an SVM1 model (bad magic)");
  Reader r(bytes);
  r.take(4);
  const std::uint32_t version = r.u32();
  if (version != kSvmVersion)
    throw Error(ErrorCode::kFormatBadHeader, "unsupported SVM1 version " + std::to_string(version));
  SvmModel m;
  const std::size_t d = r.u32();
  m.hyperparams.C = r.f64();
  m.hyperparams.gamma = r.f64();
  m.bias = r.f64();
  m.label_map[0] = static_cast<ClassId>(r.u32());
  m.label_map[1] = static_cast<ClassId>(r.u32());
  const std::uint8_t* tail = r.take(4);
  if (tail[0] > 1 || tail[1] || tail[2] || tail[3])
    throw Error(ErrorCode::kFormatBadHeader, "SVM1 reserved bytes not zero");
  if (tail[0]) {
    m.standardizer.mean.resize(d);
    m.standardizer.stddev.resize(d);
    for (double& v : m.standardizer.mean) v = r.f64();
    for (double& v : m.standardizer.stddev) v = r.f64();
  }
  const std::size_t n_sv = r.u32();
  m.dual_coefs.resize(n_sv);
  for (double& c : m.dual_coefs) c = r.f64();
  std::vector<float> values(n_sv * d);
  for (float& v : values) v = r.f32();
  if (!r.done()) throw Error(ErrorCode::kFormatBadHeader, "SVM1 model has trailing bytes");
  m.support = FeatureMatrix(n_sv, d, std::move(values));
  if (!std::isfinite(m.bias) || !m.support.all_finite())
    throw Error(ErrorCode::kFormatNonFinite, "SVM1 model contains non-finite values");
  try {
    m.hyperparams.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kFormatBadHeader, std::string("SVM1 model: ") + e.what());
  }
  return m;
}

void save_model(const SvmModel& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_model(model));
}

SvmModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes(std::istreambuf_iterator<char>(in), {});
  try {
    return decode_model(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

}  // namespace pneumo
