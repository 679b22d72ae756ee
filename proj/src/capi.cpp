#include "pneumo/pneumo.h"

#include <cmath>
#include <cstring>
#include <new>
#include <string>

#include "pneumo/bayesopt.hpp"
#include "pneumo/featurestore.hpp"
#include "pneumo/metrics.hpp"
#include "pneumo/runner.hpp"
#include "pneumo/selection.hpp"
#include "pneumo/svm.hpp"

struct pn_matrix {
  pneumo::FeatureMatrix value;
};
struct pn_labels {
  pneumo::LabelVector value;
};
struct pn_indices {
  pneumo::IndexList value;
};
struct pn_split {
  pneumo::SplitPlan value;
};
struct pn_scores {
  pneumo::ScoreVector value;
};
struct pn_svm {
  pneumo::SvmModel value;
};
struct pn_cascade {
  pneumo::CascadeModel value;
};

namespace {

thread_local std::string g_last_error;
thread_local pn_format_error g_last_format = PN_FORMAT_NONE;

pn_status fail(pn_status status, const char* message, pn_format_error format = PN_FORMAT_NONE) {
  g_last_error = message;
  g_last_format = format;
  return status;
}

pn_status translate(const pneumo::Error& e) {
  using pneumo::ErrorCode;
  switch (e.code()) {
    case ErrorCode::kInvalidInput: return fail(PN_ERR_INVALID_INPUT, e.what());
    case ErrorCode::kIo: return fail(PN_ERR_IO, e.what());
    case ErrorCode::kFormatBadMagic: return fail(PN_ERR_FORMAT, e.what(), PN_FORMAT_BAD_MAGIC);
    case ErrorCode::kFormatTruncated: return fail(PN_ERR_FORMAT, e.what(), PN_FORMAT_TRUNCATED);
    case ErrorCode::kFormatNonFinite: return fail(PN_ERR_FORMAT, e.what(), PN_FORMAT_NON_FINITE);
    case ErrorCode::kFormatBadDtype: return fail(PN_ERR_FORMAT, e.what(), PN_FORMAT_BAD_DTYPE);
    case ErrorCode::kFormatBadHeader: return fail(PN_ERR_FORMAT, e.what(), PN_FORMAT_BAD_HEADER);
    case ErrorCode::kNumeric: return fail(PN_ERR_NUMERIC, e.what());
    case ErrorCode::kConvergence: return fail(PN_ERR_CONVERGENCE, e.what());
  }
  return fail(PN_ERR_INTERNAL, e.what());
}

template <typename Fn>
pn_status guard(Fn&& fn) noexcept {
  try {
    fn();
    g_last_error.clear();
    g_last_format = PN_FORMAT_NONE;
    return PN_OK;
  } catch (const pneumo::Error& e) {
    return translate(e);
  } catch (const std::bad_alloc&) {
    return fail(PN_ERR_INTERNAL, "out of memory");
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(PN_ERR_IO, e.what());
  } catch (const std::exception& e) {
    return fail(PN_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(PN_ERR_INTERNAL, "unknown error");
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) pneumo::throw_invalid(std::string(what) + " must not be NULL");
}

// -1/+1 for a two-class label vector, `positive` -> +1.
std::vector<int> binary_signs(const pneumo::LabelVector& labels, int32_t positive,
                              std::array<pneumo::ClassId, 2>& label_map) {
  const auto classes = labels.classes();
  pneumo::require(classes.size() == 2, "binary SVM needs exactly two classes, found " +
                                           std::to_string(classes.size()));
  pneumo::require(classes[0] == positive || classes[1] == positive,
                  "positive class " + std::to_string(positive) + " is not present");
  label_map = {classes[0] == positive ? classes[1] : classes[0], positive};
  std::vector<int> y;
  y.reserve(labels.size());
  for (auto id : labels.labels) y.push_back(id == positive ? 1 : -1);
  return y;
}

pn_metrics to_c(const pneumo::ConfusionMatrix& cm, const pneumo::MetricsReport& m) {
  return {m.accuracy, m.precision, m.recall, m.f1, cm.tp, cm.fp, cm.fn, cm.tn, cm.positive_class};
}

const pneumo::IndexList& stratum(const pneumo::SplitPlan& plan, pn_stratum s) {
  switch (s) {
    case PN_STRATUM_TRAIN: return plan.train;
    case PN_STRATUM_VAL: return plan.val;
    case PN_STRATUM_TEST1: return plan.test1;
    case PN_STRATUM_TEST2: break;
  }
  return plan.test2;
}

}  // namespace

extern "C" {

const char* pn_version(void) { return "1.0.0"; }

const char* pn_status_string(pn_status status) {
  switch (status) {
    case PN_OK: return "ok";
    case PN_ERR_INVALID_INPUT: return "invalid input";
    case PN_ERR_IO: return "i/o error";
    case PN_ERR_FORMAT: return "format error";
    case PN_ERR_NUMERIC: return "numeric error";
    case PN_ERR_CONVERGENCE: return "convergence failure";
    case PN_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* pn_last_error_message(void) { return g_last_error.c_str(); }
pn_format_error pn_last_format_error(void) { return g_last_format; }

// --- matrices ---

pn_status pn_matrix_create(uint32_t rows, uint32_t cols, const float* values, pn_matrix** out) {
  return guard([&] {
    need(out, "out");
    const std::size_t n = std::size_t{rows} * cols;
    if (n > 0) need(values, "values");
    std::vector<float> v(values, values + n);
    for (float x : v) pneumo::require(std::isfinite(x), "matrix values must be finite");
    *out = new pn_matrix{pneumo::FeatureMatrix(rows, cols, std::move(v))};
  });
}

pn_status pn_matrix_read_fmx(const char* path, pn_matrix** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new pn_matrix{pneumo::read_fmx(path)};
  });
}

pn_status pn_matrix_write_fmx(const pn_matrix* matrix, const char* path) {
  return guard([&] {
    need(matrix, "matrix");
    need(path, "path");
    pneumo::write_fmx(matrix->value, path);
  });
}

uint32_t pn_matrix_rows(const pn_matrix* m) { return m ? static_cast<uint32_t>(m->value.rows()) : 0; }
uint32_t pn_matrix_cols(const pn_matrix* m) { return m ? static_cast<uint32_t>(m->value.cols()) : 0; }
const float* pn_matrix_data(const pn_matrix* m) { return m ? m->value.values().data() : nullptr; }
void pn_matrix_free(pn_matrix* m) { delete m; }

// --- labels ---

pn_status pn_labels_create(size_t n, const int32_t* ids, pn_labels** out) {
  return guard([&] {
    need(out, "out");
    if (n > 0) need(ids, "ids");
    pneumo::LabelVector l;
    l.labels.assign(ids, ids + n);
    for (auto id : l.labels) {
      pneumo::require(id >= 0, "class ids must be non-negative");
      while (l.class_names.size() <= static_cast<std::size_t>(id))
        l.class_names.push_back("class_" + std::to_string(l.class_names.size()));
    }
    *out = new pn_labels{std::move(l)};
  });
}

pn_status pn_labels_read(const char* path, pn_labels** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new pn_labels{pneumo::read_labels(path)};
  });
}

pn_status pn_labels_write(const pn_labels* labels, const char* path) {
  return guard([&] {
    need(labels, "labels");
    need(path, "path");
    pneumo::write_labels(labels->value, path);
  });
}

size_t pn_labels_size(const pn_labels* l) { return l ? l->value.size() : 0; }
const int32_t* pn_labels_data(const pn_labels* l) { return l ? l->value.labels.data() : nullptr; }
void pn_labels_free(pn_labels* l) { delete l; }

// --- indices ---

pn_status pn_indices_create(size_t n, const size_t* values, pn_indices** out) {
  return guard([&] {
    need(out, "out");
    if (n > 0) need(values, "values");
    *out = new pn_indices{pneumo::IndexList(values, values + n)};
  });
}

pn_status pn_indices_read(const char* path, pn_indices** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new pn_indices{pneumo::read_indices(path)};
  });
}

pn_status pn_indices_write(const pn_indices* indices, const char* path) {
  return guard([&] {
    need(indices, "indices");
    need(path, "path");
    pneumo::write_indices(indices->value, path);
  });
}

size_t pn_indices_size(const pn_indices* i) { return i ? i->value.size() : 0; }
const size_t* pn_indices_data(const pn_indices* i) { return i ? i->value.data() : nullptr; }
void pn_indices_free(pn_indices* i) { delete i; }

// --- balancing and splitting ---

pn_status pn_balance_downsample(const pn_labels* labels, uint64_t seed, pn_indices** out) {
  return guard([&] {
    need(labels, "labels");
    need(out, "out");
    *out = new pn_indices{pneumo::balance_downsample(labels->value, seed)};
  });
}

pn_status pn_split_holdout(const pn_indices* indices, const pn_labels* labels, uint64_t seed,
                           pn_split** out) {
  return guard([&] {
    need(indices, "indices");
    need(labels, "labels");
    need(out, "out");
    *out = new pn_split{pneumo::split_holdout(indices->value, labels->value, seed)};
  });
}

pn_status pn_split_read_json(const char* path, pn_split** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new pn_split{pneumo::split_plan_from_json(pneumo::read_text_file(path))};
  });
}

pn_status pn_split_write_json(const pn_split* split, const char* path) {
  return guard([&] {
    need(split, "split");
    need(path, "path");
    pneumo::write_file_atomic(path, pneumo::split_plan_to_json(split->value));
  });
}

size_t pn_split_size(const pn_split* s, pn_stratum which) {
  return s ? stratum(s->value, which).size() : 0;
}
const size_t* pn_split_data(const pn_split* s, pn_stratum which) {
  return s ? stratum(s->value, which).data() : nullptr;
}
void pn_split_free(pn_split* s) { delete s; }

// --- scores ---

pn_status pn_score_relieff(const pn_matrix* matrix, const pn_labels* labels, size_t k_neighbors,
                           size_t sample_rounds, uint64_t seed, pn_scores** out) {
  return guard([&] {
    need(matrix, "matrix");
    need(labels, "labels");
    need(out, "out");
    *out = new pn_scores{
        pneumo::relieff_scores(matrix->value, labels->value, {k_neighbors, sample_rounds, seed})};
  });
}

pn_status pn_score_chi2(const pn_matrix* matrix, const pn_labels* labels, size_t n_bins,
                        pn_scores** out) {
  return guard([&] {
    need(matrix, "matrix");
    need(labels, "labels");
    need(out, "out");
    *out = new pn_scores{pneumo::chi_square_scores(matrix->value, labels->value, n_bins)};
  });
}

pn_status pn_scores_read_csv(const char* path, pn_scores** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new pn_scores{pneumo::read_scores_csv(path)};
  });
}

pn_status pn_scores_write_csv(const pn_scores* scores, const char* path) {
  return guard([&] {
    need(scores, "scores");
    need(path, "path");
    pneumo::write_scores_csv(scores->value, path);
  });
}

pn_status pn_scores_write_curve_csv(const pn_scores* scores, const char* path) {
  return guard([&] {
    need(scores, "scores");
    need(path, "path");
    pneumo::write_file_atomic(path, pneumo::score_curve_csv(scores->value));
  });
}

size_t pn_scores_size(const pn_scores* s) { return s ? s->value.size() : 0; }
const double* pn_scores_data(const pn_scores* s) { return s ? s->value.scores.data() : nullptr; }
void pn_scores_free(pn_scores* s) { delete s; }

pn_status pn_select_elbow(const pn_scores* scores, pn_indices** out) {
  return guard([&] {
    need(scores, "scores");
    need(out, "out");
    *out = new pn_indices{pneumo::select_elbow(scores->value).selected};
  });
}

pn_status pn_select_top(const pn_scores* scores, size_t k, pn_indices** out) {
  return guard([&] {
    need(scores, "scores");
    need(out, "out");
    *out = new pn_indices{pneumo::select_top(pneumo::rank_features(scores->value), k).selected};
  });
}

pn_status pn_matrix_select_columns(const pn_matrix* matrix, const pn_indices* columns,
                                   pn_matrix** out) {
  return guard([&] {
    need(matrix, "matrix");
    need(columns, "columns");
    need(out, "out");
    *out = new pn_matrix{pneumo::select_subset(matrix->value, columns->value)};
  });
}

// --- SVM ---

pn_status pn_svm_train(const pn_matrix* matrix, const pn_labels* labels, int32_t positive_class,
                       double c, double gamma, pn_svm** out) {
  return guard([&] {
    need(matrix, "matrix");
    need(labels, "labels");
    need(out, "out");
    pneumo::require(labels->value.size() == matrix->value.rows(),
                    "label count does not match matrix rows");
    std::array<pneumo::ClassId, 2> label_map{};
    const auto y = binary_signs(labels->value, positive_class, label_map);
    *out = new pn_svm{pneumo::fit_svm(matrix->value, y, {c, gamma}, label_map)};
  });
}

pn_status pn_svm_load(const char* path, pn_svm** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new pn_svm{pneumo::load_model(path)};
  });
}

pn_status pn_svm_save(const pn_svm* model, const char* path) {
  return guard([&] {
    need(model, "model");
    need(path, "path");
    pneumo::save_model(model->value, path);
  });
}

pn_status pn_svm_predict(const pn_svm* model, const pn_matrix* matrix, pn_labels** out) {
  return guard([&] {
    need(model, "model");
    need(matrix, "matrix");
    need(out, "out");
    pneumo::LabelVector l;
    l.labels = pneumo::predict(model->value, matrix->value);
    *out = new pn_labels{std::move(l)};
  });
}

pn_status pn_svm_decision_values(const pn_svm* model, const pn_matrix* matrix, double* out,
                                 size_t out_len) {
  return guard([&] {
    need(model, "model");
    need(matrix, "matrix");
    need(out, "out");
    pneumo::require(out_len >= matrix->value.rows(), "output buffer too small");
    const auto f = pneumo::decision_values(model->value, matrix->value);
    std::copy(f.begin(), f.end(), out);
  });
}

pn_status pn_svm_evaluate(const pn_svm* model, const pn_matrix* matrix, const pn_labels* labels,
                          pn_metrics* out) {
  return guard([&] {
    need(model, "model");
    need(matrix, "matrix");
    need(labels, "labels");
    need(out, "out");
    const auto& map = model->value.label_map;
    pneumo::require(labels->value.size() == matrix->value.rows(),
                    "label count does not match matrix rows");
    std::vector<pneumo::ClassId> truth;
    for (auto id : labels->value.labels) {
      if (id == map[0] || id == map[1]) truth.push_back(id);
      else if (map[1] == pneumo::kPneumoniaMetaclass) truth.push_back(map[1]);
      else pneumo::throw_invalid("label " + std::to_string(id) + " is not one of the model's classes");
    }
    const auto pred = pneumo::predict(model->value, matrix->value);
    const auto cm = pneumo::confusion(truth, pred, map[1]);
    *out = to_c(cm, pneumo::compute_metrics(cm));
  });
}

size_t pn_svm_support_count(const pn_svm* m) { return m ? m->value.n_support() : 0; }
size_t pn_svm_feature_count(const pn_svm* m) { return m ? m->value.n_features() : 0; }
double pn_svm_c(const pn_svm* m) { return m ? m->value.hyperparams.C : 0.0; }
double pn_svm_gamma(const pn_svm* m) { return m ? m->value.hyperparams.gamma : 0.0; }
void pn_svm_free(pn_svm* m) { delete m; }

pn_status pn_svm_tune(const pn_matrix* matrix, const pn_labels* labels, int32_t positive_class,
                      size_t budget, size_t folds, uint64_t seed, const char* json_path,
                      pn_tune_result* out) {
  return guard([&] {
    need(matrix, "matrix");
    need(labels, "labels");
    need(out, "out");
    pneumo::require(labels->value.size() == matrix->value.rows(),
                    "label count does not match matrix rows");
    std::array<pneumo::ClassId, 2> label_map{};
    const auto y = binary_signs(labels->value, positive_class, label_map);
    pneumo::TuneOptions options;
    options.budget = budget;
    options.seed = seed;
    const auto r = pneumo::tune_svm(matrix->value, y, pneumo::SearchSpace{}, options, folds);
    if (json_path) pneumo::write_file_atomic(json_path, pneumo::tune_result_to_json(r));
    *out = {r.best.C, r.best.gamma, r.best_point[0], r.best_point[1], r.criterion_value,
            r.history.size()};
  });
}

pn_status pn_metrics_compute(const int32_t* y_true, const int32_t* y_pred, size_t n,
                             int32_t positive_class, pn_metrics* out) {
  return guard([&] {
    need(out, "out");
    if (n > 0) {
      need(y_true, "y_true");
      need(y_pred, "y_pred");
    }
    const auto cm = pneumo::confusion({y_true, n}, {y_pred, n}, positive_class);
    *out = to_c(cm, pneumo::compute_metrics(cm));
  });
}

// --- experiments ---

pn_status pn_experiment_run(const char* config_path, char** report_text) {
  return guard([&] {
    need(config_path, "config_path");
    const auto outcome = pneumo::run_experiment(pneumo::load_config(config_path));
    if (report_text) {
      const std::string text = pneumo::render_report(outcome.report, pneumo::ReportFormat::kText);
      char* buf = new char[text.size() + 1];
      std::memcpy(buf, text.c_str(), text.size() + 1);
      *report_text = buf;
    }
  });
}

void pn_string_free(char* text) { delete[] text; }

pn_status pn_cascade_load(const char* stage1_dir, const char* stage2_dir, pn_cascade** out) {
  return guard([&] {
    need(stage1_dir, "stage1_dir");
    need(stage2_dir, "stage2_dir");
    need(out, "out");
    pneumo::CascadeModel cascade;
    cascade.stage1 = pneumo::load_stage(stage1_dir);
    cascade.stage2 = pneumo::load_stage(stage2_dir);
    pneumo::require(cascade.stage1.model.label_map[1] == pneumo::kPneumoniaMetaclass,
                    "stage 1 must be a normal-vs-pneumonia model");
    cascade.normal_id = cascade.stage1.model.label_map[0];
    *out = new pn_cascade{std::move(cascade)};
  });
}

pn_status pn_cascade_predict(const pn_cascade* cascade, const pn_matrix* matrix, pn_labels** out) {
  return guard([&] {
    need(cascade, "cascade");
    need(matrix, "matrix");
    need(out, "out");
    pneumo::LabelVector l;
    l.labels = pneumo::cascade_predict(cascade->value, matrix->value);
    *out = new pn_labels{std::move(l)};
  });
}

void pn_cascade_free(pn_cascade* c) { delete c; }

}  // extern "C"
