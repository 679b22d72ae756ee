// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>

#include <json.hpp>

#include "oracles.hpp"
#include "pneumo/bayesopt.hpp"
#include "pneumo/featurestore.hpp"
#include "pneumo/metrics.hpp"
#include "pneumo/random.hpp"
#include "pneumo/runner.hpp"
#include "pneumo/selection.hpp"
#include "pneumo/svm.hpp"
#include "support.hpp"

using namespace pneumo;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

int g_failed = 0;

void criterion(const char* name, const std::function<Outcome()>& check) {
  const auto start = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("%s  %-28s %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
  std::fflush(stdout);
  if (!o.pass) ++g_failed;
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

double elapsed_since(std::chrono::steady_clock::time_point t) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

Outcome smo_vs_qp() {
  const auto start = std::chrono::steady_clock::now();
  double worst_obj = 0.0, worst_f = 0.0;
  const int instances = 120;
  SmoOptions solver;
  solver.tol = 1e-5;
  for (int seed = 0; seed < instances; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed) * 7919 + 1);
    const std::size_t n = 2 + rng.below(19), d = 1 + rng.below(5);
    FeatureMatrix X(n, d);
    for (float& v : X.values()) v = static_cast<float>(rng.normal());
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = rng.uniform() < 0.5 ? 1 : -1;
    y[0] = 1;
    y[1] = -1;
    const SvmHyperparams p{std::pow(10.0, rng.uniform(-1.0, 1.5)), std::pow(10.0, rng.uniform(-1.5, 0.5))};

    const SvmModel m = smo_train(X, y, p, solver);
    const auto ref = oracle::svm_dual(X, y, p.C, p.gamma);
    worst_obj = std::max(worst_obj, std::abs(m.dual_objective - ref.objective));
    FeatureMatrix probes = X;
    for (float& v : probes.values()) v += static_cast<float>(0.3 * rng.normal());
    for (const FeatureMatrix* Q : {&X, &probes}) {
      const auto f = decision_values(m, *Q);
      for (std::size_t i = 0; i < Q->rows(); ++i)
        worst_f = std::max(worst_f, std::abs(f[i] - oracle::svm_decision(X, y, ref, p.gamma, Q->row(i))));
    }
  }
  const double secs = elapsed_since(start);
  return {worst_obj <= 1e-4 && worst_f <= 1e-3 && secs < 60.0,
          fmt("%d instances at tol %.0e, max |dual gap| %.2e, max |f diff| %.2e", instances, solver.tol, worst_obj, worst_f)};
}

Outcome relieff_vs_naive() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed + 100);
    const std::size_t n = 10 + rng.below(41), d = 1 + rng.below(10);
    const std::size_t classes = 2 + rng.below(2);
    FeatureMatrix X = testing::uniform_matrix(n, d, seed);
    if (seed % 5 == 0)
      for (float& v : X.values()) v = std::round(v * 4.0f) / 4.0f;
    LabelVector y;
    for (std::size_t i = 0; i < n; ++i)
      y.labels.push_back(static_cast<ClassId>(i < 3 * classes ? i % classes : rng.below(classes)));
    std::size_t smallest = n;
    for (std::size_t c = 0; c < classes; ++c)
      smallest = std::min<std::size_t>(smallest, std::count(y.labels.begin(), y.labels.end(), static_cast<ClassId>(c)));
    const std::size_t k = 1 + rng.below(std::min<std::size_t>(smallest - 1, 10));
    const auto s = relieff_scores(X, y, {k, 0, seed});
    const auto ref = oracle::relieff(X, y, k);
    for (std::size_t f = 0; f < d; ++f) worst = std::max(worst, std::abs(s.scores[f] - ref[f]));
  }
  const double secs = elapsed_since(start);
  return {worst <= 1e-10 && secs < 60.0, fmt("50 seeds, max |diff| %.2e", worst)};
}

Outcome chi_square() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed + 200);
    const std::size_t n = 8 + rng.below(120), d = 1 + rng.below(8), bins = 2 + rng.below(15);
    FeatureMatrix X = testing::uniform_matrix(n, d, seed + 9);
    if (seed % 4 == 0)
      for (float& v : X.values()) v = std::floor(v * 3.0f);
    LabelVector y;
    const std::size_t classes = 2 + rng.below(3);
    for (std::size_t i = 0; i < n; ++i) y.labels.push_back(static_cast<ClassId>(rng.below(classes)));
    const auto s = chi_square_scores(X, y, bins);
    for (std::size_t f = 0; f < d; ++f) {
      std::vector<float> col;
      for (std::size_t i = 0; i < n; ++i) col.push_back(X(i, f));
      worst = std::max(worst, std::abs(s.scores[f] - oracle::chi_square_column(col, y.labels, bins)));
    }
  }
  bool constant_zero = true, perfect = true;
  for (std::size_t n : {10, 20, 64, 500}) {
    FeatureMatrix X(n, 2);
    LabelVector y;
    for (std::size_t i = 0; i < n; ++i) {
      y.labels.push_back(static_cast<ClassId>(i % 2));
      X(i, 0) = 7.5f;
      X(i, 1) = static_cast<float>(i % 2);
    }
    const auto s = chi_square_scores(X, y, 10);
    constant_zero = constant_zero && s.scores[0] == 0.0;
    perfect = perfect && std::abs(s.scores[1] - static_cast<double>(n)) <= 1e-9 * static_cast<double>(n);
  }
  return {worst <= 1e-9 && constant_zero && perfect,
          fmt("max |diff| %.2e, constant->0 %s, perfect 2x2->n %s", worst, constant_zero ? "yes" : "no",
              perfect ? "yes" : "no")};
}

Outcome elbow() {
  int matches = 0;
  for (int c = 0; c < 20; ++c) {
    const double ratio = 0.5 + 0.02 * c;
    const std::size_t transition = 3 + static_cast<std::size_t>(c) * 2, length = transition + 20 + c;
    std::vector<double> s;
    for (std::size_t i = 0; i < length; ++i)
      s.push_back(10.0 * std::pow(ratio, static_cast<double>(std::min(i, transition))));
    const auto k = elbow_cutoff(s);
    matches += k == oracle::elbow(s) && k <= transition + 1;
  }
  const bool linear = elbow_cutoff(std::vector<double>{1.0, 0.8, 0.6, 0.4, 0.2}) == 1;
  return {matches == 20 && linear, fmt("%d/20 curves match the oracle, linear -> k=1 %s", matches, linear ? "yes" : "no")};
}

Outcome gp() {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Rng rng(seed + 300);
    const std::size_t n = 2 + rng.below(9), dim = 1 + rng.below(2);
    std::vector<std::vector<double>> pts(n, std::vector<double>(dim));
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (double& v : pts[i]) v = rng.uniform();
      t[i] = rng.uniform(0.0, 0.5);
    }
    const auto fit = gp_fit(pts, t);
    for (int q = 0; q < 10; ++q) {
      std::vector<double> x(dim);
      for (double& v : x) v = rng.uniform();
      const auto p = fit.predict(x);
      const auto ref = oracle::gp_dense(pts, t, fit.params(), fit.jitter(), x);
      worst = std::max({worst, std::abs(p.mean - ref.mean), std::abs(p.variance - std::max(ref.variance, 0.0))});
    }
  }
  const double best = 0.3, sigma = 1.0;
  const double ei = expected_improvement(best - sigma, sigma, best);
  const double closed = 0.5 * (1.0 + std::erf(1.0 / std::numbers::sqrt2)) + std::exp(-0.5) / std::sqrt(2.0 * std::numbers::pi);
  return {worst <= 1e-8 && std::abs(ei - 1.08332) <= 1e-5 && std::abs(ei - closed) <= 1e-12,
          fmt("max |diff| vs dense solve %.2e, EI %.6f", worst, ei)};
}

Outcome tuner() {
  const auto start = std::chrono::steady_clock::now();
  int hits = 0;
  std::string dists;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto bowl = oracle::seeded_bowl(seed);
    TuneOptions opt;
    opt.seed = seed;
    opt.budget = 30;
    const auto r = tune(bowl, SearchSpace{}, opt);
    const double dist = std::hypot(r.best_point[0] - bowl.center[0], r.best_point[1] - bowl.center[1]);
    hits += dist <= 0.5;
    dists += fmt("%s%.2f", seed ? " " : "", dist);
  }
  const double secs = elapsed_since(start);
  return {hits >= 8 && secs < 120.0, fmt("%d/10 seeds within 0.5 log-units [%s]", hits, dists.c_str())};
}

Outcome f1_arithmetic() {
  const double a = 100.0 * f1_score(0.9773, 0.9803), b = 100.0 * f1_score(0.9426, 0.9266);
  return {std::abs(a - 97.88) <= 0.01 && std::abs(b - 93.45) <= 0.01, fmt("F1 %.4f%%, %.4f%%", a, b)};
}

Outcome split() {
  LabelVector l;
  for (int i = 0; i < 4500; ++i) l.labels.push_back(static_cast<ClassId>(i % 3));
  IndexList all(4500);
  for (Index i = 0; i < all.size(); ++i) all[i] = i;
  const auto p = split_holdout(all, l, 2024);
  std::vector<bool> seen(4500, false);
  bool disjoint = true, stratified = true;
  for (const IndexList* s : {&p.train, &p.val, &p.test1, &p.test2}) {
    std::size_t per[3] = {0, 0, 0};
    for (Index i : *s) {
      disjoint = disjoint && !seen[i];
      seen[i] = true;
      ++per[l[i]];
    }
    stratified = stratified && per[0] == per[1] && per[1] == per[2];
  }
  const bool sizes = p.test2.size() == 450 && p.train.size() == 2430 && p.val.size() == 810 && p.test1.size() == 810;
  return {sizes && disjoint && stratified,
          fmt("%zu/%zu/%zu/%zu, disjoint %s, stratified %s", p.test2.size(), p.train.size(), p.val.size(),
              p.test1.size(), disjoint ? "yes" : "no", stratified ? "yes" : "no")};
}

Outcome reduction() {
  ExperimentReport r;
  r.reduction = {100000, 6000};
  const std::string text = render_report(r, ReportFormat::kText);
  const std::string pct = format_percent(r.reduction.ratio());
  return {pct == "94.00%" && text.find("100000 -> 6000 (94.00% reduction)") != std::string::npos,
          "6000 of 100000 -> " + pct};
}

int run_cli(const std::string& args, std::string& out) {
  FILE* p = popen((std::string(PNEUMO_CLI) + " " + args).c_str(), "r");
  if (!p) return -1;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, p)) > 0) out.append(buf, got);
  const int status = pclose(p);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome determinism() {
  testing::TempDir dir("acceptance-determinism");
  const auto s = testing::three_class_blobs(40, 60, 2.0, 5);
  write_fmx(s.features, dir / "x.fmx");
  write_labels(s.labels, dir / "y.txt");
  const nlohmann::json config = {{"schema_version", 1},
                                 {"name", "determinism"},
                                 {"task", "normal_vs_pneumonia"},
                                 {"pipeline", "reduce_relieff_svm"},
                                 {"inputs", {{"features", "x.fmx"}, {"labels", "y.txt"}}},
                                 {"seed", 11},
                                 {"tune", {{"budget", 10}}},
                                 {"output_dir", "out"}};
  testing::spit(dir / "exp.json", config.dump(2));
  std::string first, second;
  const int a = run_cli("experiment --config '" + (dir / "exp.json").string() + "'", first);
  const std::string report1 = testing::slurp(dir / "out" / "report.txt");
  const std::string csv1 = testing::slurp(dir / "out" / "report.csv");
  fs::remove_all(dir / "out");
  const int b = run_cli("experiment --config '" + (dir / "exp.json").string() + "'", second);
  const std::string report2 = testing::slurp(dir / "out" / "report.txt");
  const std::string csv2 = testing::slurp(dir / "out" / "report.csv");
  const bool same = a == 0 && b == 0 && !report1.empty() && report1 == report2 && csv1 == csv2 && first == second;
  return {same, fmt("exit codes %d/%d, report %zu bytes, identical %s", a, b, report1.size(), same ? "yes" : "no")};
}

Outcome planted() {
  const auto start = std::chrono::steady_clock::now();
  int good = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::vector<std::size_t> informative = {17, 230, 411, 650, 998};
    const auto s = testing::planted(100, 1000, informative, 5.0, seed + 40);
    ExperimentConfig c;
    c.name = "planted";
    c.task = Task::kNormalVsPneumonia;
    c.pipeline = Pipeline::kReduceRelieffSvm;
    c.seed = seed;
    const auto out = run_experiment(c, s.features, s.labels);
    const auto& sel = out.selection->selected;
    int kept = 0;
    for (std::size_t f : informative) kept += std::find(sel.begin(), sel.end(), f) != sel.end();
    const double acc = out.report.splits[1].metrics.accuracy;
    good += acc >= 0.95 && kept >= 4;
    per_seed += fmt("%s%.2f/%d/%zu", seed ? " " : "", acc, kept, sel.size());
  }
  const double secs = elapsed_since(start);
  return {good >= 9 && secs < 300.0, fmt("%d/10 seeds ok [val acc/planted kept/selected: %s]", good, per_seed.c_str())};
}

}  // namespace

int main() {
  criterion("smo-qp-equivalence", smo_vs_qp);
  criterion("relieff-oracle", relieff_vs_naive);
  criterion("chi-square", chi_square);
  criterion("elbow", elbow);
  criterion("gp-posterior-and-ei", gp);
  criterion("tuner-efficacy", tuner);
  criterion("f1-arithmetic", f1_arithmetic);
  criterion("split-arithmetic", split);
  criterion("reduction-ratio", reduction);
  criterion("experiment-determinism", determinism);
  criterion("planted-signal-pipeline", planted);
  std::printf("%s: %d criteria failed\n", g_failed ? "FAIL" : "PASS", g_failed);
  return g_failed ? 1 : 0;
}
