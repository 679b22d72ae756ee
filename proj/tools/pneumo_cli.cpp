// pneumo-cli: command-line front end over the pneumo C API.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pneumo/pneumo.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitNumeric = 3;

struct CliFailure {
  pn_status status;
};

int exit_code(pn_status s) {
  switch (s) {
    case PN_OK: return kExitOk;
    case PN_ERR_INVALID_INPUT:
    case PN_ERR_IO:
    case PN_ERR_FORMAT: return kExitInvalid;
    case PN_ERR_NUMERIC:
    case PN_ERR_CONVERGENCE: return kExitNumeric;
    case PN_ERR_INTERNAL: break;
  }
  return kExitInternal;
}

void check(pn_status s) {
  if (s == PN_OK) return;
  std::fprintf(stderr, "error: %s: %s\n", pn_status_string(s), pn_last_error_message());
  throw CliFailure{s};
}

template <typename T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Matrix = std::unique_ptr<pn_matrix, Deleter<pn_matrix, pn_matrix_free>>;
using Labels = std::unique_ptr<pn_labels, Deleter<pn_labels, pn_labels_free>>;
using Indices = std::unique_ptr<pn_indices, Deleter<pn_indices, pn_indices_free>>;
using Split = std::unique_ptr<pn_split, Deleter<pn_split, pn_split_free>>;
using Scores = std::unique_ptr<pn_scores, Deleter<pn_scores, pn_scores_free>>;
using Svm = std::unique_ptr<pn_svm, Deleter<pn_svm, pn_svm_free>>;
using Cascade = std::unique_ptr<pn_cascade, Deleter<pn_cascade, pn_cascade_free>>;

Matrix read_matrix(const std::string& path) {
  pn_matrix* m = nullptr;
  check(pn_matrix_read_fmx(path.c_str(), &m));
  return Matrix(m);
}

Labels read_labels(const std::string& path) {
  pn_labels* l = nullptr;
  check(pn_labels_read(path.c_str(), &l));
  return Labels(l);
}

// Default positive class: the larger of the two ids present.
int32_t positive_class(const pn_labels* labels, std::optional<int32_t> requested) {
  if (requested) return *requested;
  const int32_t* data = pn_labels_data(labels);
  const std::size_t n = pn_labels_size(labels);
  if (n == 0) return 1;
  return *std::max_element(data, data + n);
}

void print_metrics(const pn_metrics& m, std::size_t samples) {
  std::printf("samples    %zu\n", samples);
  std::printf("positive   %d\n", m.positive_class);
  std::printf("accuracy   %.2f%%\n", 100.0 * m.accuracy);
  std::printf("precision  %.2f%%\n", 100.0 * m.precision);
  std::printf("recall     %.2f%%\n", 100.0 * m.recall);
  std::printf("f1         %.2f%%\n", 100.0 * m.f1);
  std::printf("confusion  tp=%zu fp=%zu fn=%zu tn=%zu\n", m.tp, m.fp, m.fn, m.tn);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pneumonia classification pipeline over pre-extracted CNN features"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pn_version()));

  // balance
  std::string labels_path, out_path, input_path, indices_path, scores_path, model_path;
  std::uint64_t seed = 0;
  auto* balance = app.add_subcommand("balance", "Down-sample every class to the smallest class size");
  balance->add_option("--labels", labels_path, "Label file (one class id per line)")->required();
  balance->add_option("--seed", seed, "Random seed");
  balance->add_option("--out", out_path, "Output index list")->required();

  // split
  auto* split = app.add_subcommand("split", "Stratified 60/20/20 split after a 10% Test 2 hold-out");
  split->add_option("--labels", labels_path, "Label file")->required();
  split->add_option("--indices", indices_path, "Row subset to split (default: all rows)");
  split->add_option("--seed", seed, "Random seed");
  split->add_option("--out", out_path, "Output split.json")->required();

  // score
  std::string method = "relieff";
  std::size_t k_neighbors = 10, bins = 10, sample_rounds = 0;
  auto* score = app.add_subcommand("score", "Score features with ReliefF or chi-square");
  score->add_option("--method", method, "relieff or chi2")
      ->check(CLI::IsMember({"relieff", "chi2"}));
  score->add_option("--input", input_path, "Feature matrix (FMX)")->required();
  score->add_option("--labels", labels_path, "Label file")->required();
  score->add_option("--out", out_path, "Output scores CSV")->required();
  score->add_option("--k-neighbors", k_neighbors, "ReliefF neighbours per class");
  score->add_option("--sample-rounds", sample_rounds, "ReliefF sampled rows (0: every row)");
  score->add_option("--bins", bins, "Chi-square equal-frequency bins");
  score->add_option("--seed", seed, "Random seed for ReliefF sampling");

  // select
  std::string select_method = "elbow";
  std::size_t top_k = 0;
  auto* select = app.add_subcommand("select", "Choose features from a score file");
  select->add_option("--scores", scores_path, "Scores CSV")->required();
  select->add_option("--method", select_method, "elbow or top")
      ->check(CLI::IsMember({"elbow", "top"}));
  select->add_option("--k", top_k, "Number of features for --method top");
  select->add_option("--out", out_path, "Output index list")->required();

  // plot-scores
  auto* plot = app.add_subcommand("plot-scores", "Write the ranked score curve as CSV");
  plot->add_option("--scores", scores_path, "Scores CSV")->required();
  plot->add_option("--out", out_path, "Output curve CSV")->required();

  // svm
  auto* svm = app.add_subcommand("svm", "Train, evaluate or tune an RBF SVM");
  svm->require_subcommand(1);
  double c = 1.0, gamma = 0.1;
  std::optional<int32_t> positive;
  auto* train = svm->add_subcommand("train", "Train a binary SVM");
  train->add_option("--input", input_path, "Feature matrix (FMX)")->required();
  train->add_option("--labels", labels_path, "Label file with two classes")->required();
  train->add_option("--c", c, "Box constraint C")->required();
  train->add_option("--gamma", gamma, "RBF gamma")->required();
  train->add_option("--positive", positive, "Positive class id (default: larger id)");
  train->add_option("--out", out_path, "Output model (SVM1)")->required();

  std::string predictions_path;
  auto* eval = svm->add_subcommand("eval", "Evaluate a trained model");
  eval->add_option("--model", model_path, "Model file (SVM1)")->required();
  eval->add_option("--input", input_path, "Feature matrix (FMX)")->required();
  eval->add_option("--labels", labels_path, "Label file")->required();
  eval->add_option("--predictions", predictions_path, "Write predicted labels here");

  std::size_t budget = 30, folds = 10;
  auto* tune = svm->add_subcommand("tune", "Bayesian optimization of C and gamma on CV loss");
  tune->add_option("--input", input_path, "Feature matrix (FMX)")->required();
  tune->add_option("--labels", labels_path, "Label file with two classes")->required();
  tune->add_option("--budget", budget, "Objective evaluations");
  tune->add_option("--folds", folds, "Cross-validation folds");
  tune->add_option("--seed", seed, "Random seed");
  tune->add_option("--positive", positive, "Positive class id (default: larger id)");
  tune->add_option("--out", out_path, "Output tune.json")->required();

  // experiment
  std::string config_path;
  auto* experiment = app.add_subcommand("experiment", "Run a configured experiment");
  experiment->add_option("--config", config_path, "Experiment config (JSON)")->required();

  // cascade
  auto* cascade = app.add_subcommand("cascade", "Two-stage normal / bacterial / viral prediction");
  cascade->require_subcommand(1);
  std::string stage1_dir, stage2_dir;
  auto* cascade_predict = cascade->add_subcommand("predict", "Predict three-way labels");
  cascade_predict->add_option("--stage1", stage1_dir, "normal_vs_pneumonia output dir")->required();
  cascade_predict->add_option("--stage2", stage2_dir, "viral_vs_bacterial output dir")->required();
  cascade_predict->add_option("--input", input_path, "Feature matrix (FMX)")->required();
  cascade_predict->add_option("--out", out_path, "Output label file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*balance) {
      auto labels = read_labels(labels_path);
      pn_indices* out = nullptr;
      check(pn_balance_downsample(labels.get(), seed, &out));
      Indices kept(out);
      check(pn_indices_write(kept.get(), out_path.c_str()));
      std::printf("kept %zu of %zu rows\n", pn_indices_size(kept.get()), pn_labels_size(labels.get()));
    } else if (*split) {
      auto labels = read_labels(labels_path);
      Indices rows;
      pn_indices* tmp = nullptr;
      if (!indices_path.empty()) {
        check(pn_indices_read(indices_path.c_str(), &tmp));
      } else {
        std::vector<size_t> all(pn_labels_size(labels.get()));
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        check(pn_indices_create(all.size(), all.data(), &tmp));
      }
      rows.reset(tmp);
      pn_split* s = nullptr;
      check(pn_split_holdout(rows.get(), labels.get(), seed, &s));
      Split plan(s);
      check(pn_split_write_json(plan.get(), out_path.c_str()));
      std::printf("train %zu  val %zu  test1 %zu  test2 %zu\n",
                  pn_split_size(plan.get(), PN_STRATUM_TRAIN), pn_split_size(plan.get(), PN_STRATUM_VAL),
                  pn_split_size(plan.get(), PN_STRATUM_TEST1), pn_split_size(plan.get(), PN_STRATUM_TEST2));
    } else if (*score) {
      auto matrix = read_matrix(input_path);
      auto labels = read_labels(labels_path);
      pn_scores* s = nullptr;
      if (method == "relieff")
        check(pn_score_relieff(matrix.get(), labels.get(), k_neighbors, sample_rounds, seed, &s));
      else
        check(pn_score_chi2(matrix.get(), labels.get(), bins, &s));
      Scores scores(s);
      check(pn_scores_write_csv(scores.get(), out_path.c_str()));
    } else if (*select) {
      pn_scores* s = nullptr;
      check(pn_scores_read_csv(scores_path.c_str(), &s));
      Scores scores(s);
      pn_indices* out = nullptr;
      if (select_method == "elbow") check(pn_select_elbow(scores.get(), &out));
      else check(pn_select_top(scores.get(), top_k, &out));
      Indices selected(out);
      check(pn_indices_write(selected.get(), out_path.c_str()));
      const std::size_t total = pn_scores_size(scores.get()), kept = pn_indices_size(selected.get());
      std::printf("selected %zu of %zu features (%.2f%% reduction)\n", kept, total,
                  total == 0 ? 0.0 : 100.0 * static_cast<double>(total - kept) / static_cast<double>(total));
    } else if (*plot) {
      pn_scores* s = nullptr;
      check(pn_scores_read_csv(scores_path.c_str(), &s));
      Scores scores(s);
      check(pn_scores_write_curve_csv(scores.get(), out_path.c_str()));
    } else if (*train) {
      auto matrix = read_matrix(input_path);
      auto labels = read_labels(labels_path);
      pn_svm* m = nullptr;
      check(pn_svm_train(matrix.get(), labels.get(), positive_class(labels.get(), positive), c, gamma, &m));
      Svm model(m);
      check(pn_svm_save(model.get(), out_path.c_str()));
      std::printf("support vectors %zu\n", pn_svm_support_count(model.get()));
    } else if (*eval) {
      pn_svm* m = nullptr;
      check(pn_svm_load(model_path.c_str(), &m));
      Svm model(m);
      auto matrix = read_matrix(input_path);
      auto labels = read_labels(labels_path);
      pn_metrics metrics{};
      check(pn_svm_evaluate(model.get(), matrix.get(), labels.get(), &metrics));
      print_metrics(metrics, pn_matrix_rows(matrix.get()));
      if (!predictions_path.empty()) {
        pn_labels* p = nullptr;
        check(pn_svm_predict(model.get(), matrix.get(), &p));
        Labels predicted(p);
        check(pn_labels_write(predicted.get(), predictions_path.c_str()));
      }
    } else if (*tune) {
      auto matrix = read_matrix(input_path);
      auto labels = read_labels(labels_path);
      pn_tune_result r{};
      check(pn_svm_tune(matrix.get(), labels.get(), positive_class(labels.get(), positive), budget, folds,
                        seed, out_path.c_str(), &r));
      std::printf("C %.6g  gamma %.6g  (log10 %.4f, %.4f)  criterion %.6f  evaluations %zu\n", r.c,
                  r.gamma, r.log10_c, r.log10_gamma, r.criterion_value, r.evaluations);
    } else if (*experiment) {
      char* text = nullptr;
      check(pn_experiment_run(config_path.c_str(), &text));
      std::fputs(text, stdout);
      pn_string_free(text);
    } else if (*cascade_predict) {
      pn_cascade* cm = nullptr;
      check(pn_cascade_load(stage1_dir.c_str(), stage2_dir.c_str(), &cm));
      Cascade model(cm);
      auto matrix = read_matrix(input_path);
      pn_labels* p = nullptr;
      check(pn_cascade_predict(model.get(), matrix.get(), &p));
      Labels predicted(p);
      check(pn_labels_write(predicted.get(), out_path.c_str()));
    }
  } catch (const CliFailure& f) {
    return exit_code(f.status);
  }
  return kExitOk;
}
