/*
 * pneumo.h - C interface of the pneumo classification pipeline.
 *
 * Every object is an opaque handle created by a pn_*_create/read/... call and
 * released with the matching pn_*_free. Functions that can fail return a
 * pn_status; on failure the out-parameter is left untouched and a message is
 * available from pn_last_error_message() on the calling thread.
 */
#ifndef PNEUMO_PNEUMO_H
#define PNEUMO_PNEUMO_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(PNEUMO_BUILDING_LIBRARY)
#    define PN_API __declspec(dllexport)
#  else
#    define PN_API __declspec(dllimport)
#  endif
#else
#  define PN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pn_status {
  PN_OK = 0,
  PN_ERR_INVALID_INPUT = 1,
  PN_ERR_IO = 2,
  PN_ERR_FORMAT = 3,
  PN_ERR_NUMERIC = 4,
  PN_ERR_CONVERGENCE = 5,
  PN_ERR_INTERNAL = 6
} pn_status;

/* Refines PN_ERR_FORMAT. */
typedef enum pn_format_error {
  PN_FORMAT_NONE = 0,
  PN_FORMAT_BAD_MAGIC = 1,
  PN_FORMAT_TRUNCATED = 2,
  PN_FORMAT_NON_FINITE = 3,
  PN_FORMAT_BAD_DTYPE = 4,
  PN_FORMAT_BAD_HEADER = 5
} pn_format_error;

PN_API const char* pn_version(void);
PN_API const char* pn_status_string(pn_status status);
/* Message of the last failed call on this thread ("" if none). */
PN_API const char* pn_last_error_message(void);
PN_API pn_format_error pn_last_format_error(void);

/* ---- feature matrices (FMX) ---- */

typedef struct pn_matrix pn_matrix;

PN_API pn_status pn_matrix_create(uint32_t rows, uint32_t cols, const float* values,
                                  pn_matrix** out);
PN_API pn_status pn_matrix_read_fmx(const char* path, pn_matrix** out);
PN_API pn_status pn_matrix_write_fmx(const pn_matrix* matrix, const char* path);
PN_API uint32_t pn_matrix_rows(const pn_matrix* matrix);
PN_API uint32_t pn_matrix_cols(const pn_matrix* matrix);
/* Row-major, rows * cols values. */
PN_API const float* pn_matrix_data(const pn_matrix* matrix);
PN_API void pn_matrix_free(pn_matrix* matrix);

/* ---- labels (one integer class id per row) ---- */

typedef struct pn_labels pn_labels;

PN_API pn_status pn_labels_create(size_t n, const int32_t* ids, pn_labels** out);
PN_API pn_status pn_labels_read(const char* path, pn_labels** out);
PN_API pn_status pn_labels_write(const pn_labels* labels, const char* path);
PN_API size_t pn_labels_size(const pn_labels* labels);
PN_API const int32_t* pn_labels_data(const pn_labels* labels);
PN_API void pn_labels_free(pn_labels* labels);

/* ---- index lists ---- */

typedef struct pn_indices pn_indices;

PN_API pn_status pn_indices_create(size_t n, const size_t* values, pn_indices** out);
PN_API pn_status pn_indices_read(const char* path, pn_indices** out);
PN_API pn_status pn_indices_write(const pn_indices* indices, const char* path);
PN_API size_t pn_indices_size(const pn_indices* indices);
PN_API const size_t* pn_indices_data(const pn_indices* indices);
PN_API void pn_indices_free(pn_indices* indices);

/* ---- balancing and hold-out split ---- */

PN_API pn_status pn_balance_downsample(const pn_labels* labels, uint64_t seed, pn_indices** out);

typedef struct pn_split pn_split;

typedef enum pn_stratum {
  PN_STRATUM_TRAIN = 0,
  PN_STRATUM_VAL = 1,
  PN_STRATUM_TEST1 = 2,
  PN_STRATUM_TEST2 = 3
} pn_stratum;

PN_API pn_status pn_split_holdout(const pn_indices* indices, const pn_labels* labels,
                                  uint64_t seed, pn_split** out);
PN_API pn_status pn_split_read_json(const char* path, pn_split** out);
PN_API pn_status pn_split_write_json(const pn_split* split, const char* path);
PN_API size_t pn_split_size(const pn_split* split, pn_stratum stratum);
PN_API const size_t* pn_split_data(const pn_split* split, pn_stratum stratum);
PN_API void pn_split_free(pn_split* split);

/* ---- feature scoring and selection ---- */

typedef struct pn_scores pn_scores;

/* sample_rounds = 0 visits every row once. */
PN_API pn_status pn_score_relieff(const pn_matrix* matrix, const pn_labels* labels,
                                  size_t k_neighbors, size_t sample_rounds, uint64_t seed,
                                  pn_scores** out);
PN_API pn_status pn_score_chi2(const pn_matrix* matrix, const pn_labels* labels, size_t n_bins,
                               pn_scores** out);
PN_API pn_status pn_scores_read_csv(const char* path, pn_scores** out);
PN_API pn_status pn_scores_write_csv(const pn_scores* scores, const char* path);
/* Ranked-score curve with chord distances, for plotting. */
PN_API pn_status pn_scores_write_curve_csv(const pn_scores* scores, const char* path);
PN_API size_t pn_scores_size(const pn_scores* scores);
PN_API const double* pn_scores_data(const pn_scores* scores);
PN_API void pn_scores_free(pn_scores* scores);

/* Selected feature indices in ranking order. */
PN_API pn_status pn_select_elbow(const pn_scores* scores, pn_indices** out);
PN_API pn_status pn_select_top(const pn_scores* scores, size_t k, pn_indices** out);
PN_API pn_status pn_matrix_select_columns(const pn_matrix* matrix, const pn_indices* columns,
                                          pn_matrix** out);

/* ---- SVM ---- */

typedef struct pn_svm pn_svm;

typedef struct pn_metrics {
  double accuracy;
  double precision;
  double recall;
  double f1;
  size_t tp;
  size_t fp;
  size_t fn;
  size_t tn;
  int32_t positive_class;
} pn_metrics;

/* Labels must contain exactly two classes; `positive_class` maps to +1.
 * Features are standardized with training statistics stored in the model. */
PN_API pn_status pn_svm_train(const pn_matrix* matrix, const pn_labels* labels,
                              int32_t positive_class, double c, double gamma, pn_svm** out);
PN_API pn_status pn_svm_load(const char* path, pn_svm** out);
PN_API pn_status pn_svm_save(const pn_svm* model, const char* path);
PN_API pn_status pn_svm_predict(const pn_svm* model, const pn_matrix* matrix, pn_labels** out);
/* Writes pn_matrix_rows(matrix) values into `out`. */
PN_API pn_status pn_svm_decision_values(const pn_svm* model, const pn_matrix* matrix, double* out,
                                        size_t out_len);
PN_API pn_status pn_svm_evaluate(const pn_svm* model, const pn_matrix* matrix,
                                 const pn_labels* labels, pn_metrics* out);
PN_API size_t pn_svm_support_count(const pn_svm* model);
PN_API size_t pn_svm_feature_count(const pn_svm* model);
PN_API double pn_svm_c(const pn_svm* model);
PN_API double pn_svm_gamma(const pn_svm* model);
PN_API void pn_svm_free(pn_svm* model);

typedef struct pn_tune_result {
  double c;
  double gamma;
  double log10_c;
  double log10_gamma;
  double criterion_value;
  size_t evaluations;
} pn_tune_result;

/* Bayesian optimization of (C, gamma) on stratified `folds`-fold CV loss.
 * json_path may be NULL. */
PN_API pn_status pn_svm_tune(const pn_matrix* matrix, const pn_labels* labels,
                             int32_t positive_class, size_t budget, size_t folds, uint64_t seed,
                             const char* json_path, pn_tune_result* out);

PN_API pn_status pn_metrics_compute(const int32_t* y_true, const int32_t* y_pred, size_t n,
                                    int32_t positive_class, pn_metrics* out);

/* ---- experiments and cascade ---- */

/* Runs a JSON-configured experiment; *report_text receives the rendered
 * text report (release with pn_string_free). report_text may be NULL. */
PN_API pn_status pn_experiment_run(const char* config_path, char** report_text);
PN_API void pn_string_free(char* text);

typedef struct pn_cascade pn_cascade;

/* Each directory holds model.svm1 and, for reduced pipelines, selected.txt. */
PN_API pn_status pn_cascade_load(const char* stage1_dir, const char* stage2_dir,
                                 pn_cascade** out);
PN_API pn_status pn_cascade_predict(const pn_cascade* cascade, const pn_matrix* matrix,
                                    pn_labels** out);
PN_API void pn_cascade_free(pn_cascade* cascade);

#ifdef __cplusplus
}
#endif

#endif /* PNEUMO_PNEUMO_H */
