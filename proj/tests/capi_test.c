/* Exercises the C interface from C. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "pneumo/pneumo.h"

static int failures = 0;

#define EXPECT(cond)                                                \
  do {                                                              \
    if (!(cond)) {                                                  \
      fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
      ++failures;                                                   \
    }                                                               \
  } while (0)

#define OK(call) EXPECT((call) == PN_OK)

/* Two 2-D blobs, 30 rows each, classes 1 and 2. */
static void blobs(float* x, int32_t* y) {
  unsigned state = 12345u;
  for (int i = 0; i < 60; ++i) {
    const int cls = i % 2;
    y[i] = cls ? 2 : 1;
    for (int f = 0; f < 2; ++f) {
      state = state * 1103515245u + 12345u;
      const float noise = (float)((state >> 8) % 1000) / 1000.0f - 0.5f;
      x[i * 2 + f] = noise + (cls ? 3.0f : 0.0f);
    }
  }
}

int main(int argc, char** argv) {
  const char* dir = argc > 1 ? argv[1] : ".";
  char path[1024];

  EXPECT(strcmp(pn_status_string(PN_OK), "ok") == 0);
  EXPECT(pn_version()[0] != '\0');

  float x[120];
  int32_t y[60];
  blobs(x, y);

  pn_matrix* m = NULL;
  pn_labels* l = NULL;
  OK(pn_matrix_create(60, 2, x, &m));
  OK(pn_labels_create(60, y, &l));
  EXPECT(pn_matrix_rows(m) == 60 && pn_matrix_cols(m) == 2);

  /* FMX roundtrip */
  snprintf(path, sizeof path, "%s/capi.fmx", dir);
  OK(pn_matrix_write_fmx(m, path));
  pn_matrix* back = NULL;
  OK(pn_matrix_read_fmx(path, &back));
  EXPECT(memcmp(pn_matrix_data(back), x, sizeof x) == 0);
  pn_matrix_free(back);

  /* a file with the wrong magic */
  snprintf(path, sizeof path, "%s/bad.fmx", dir);
  FILE* f = fopen(path, "wb");
  fwrite("FMX2\2\0\0\0\2\0\0\0\0\0\0\0\0\0\0\0", 1, 20, f);
  fclose(f);
  back = NULL;
  EXPECT(pn_matrix_read_fmx(path, &back) == PN_ERR_FORMAT);
  EXPECT(pn_last_format_error() == PN_FORMAT_BAD_MAGIC);
  EXPECT(back == NULL);
  EXPECT(strlen(pn_last_error_message()) > 0);

  /* balancing and splitting */
  pn_indices* kept = NULL;
  OK(pn_balance_downsample(l, 3, &kept));
  EXPECT(pn_indices_size(kept) == 60);
  pn_split* split = NULL;
  OK(pn_split_holdout(kept, l, 4, &split));
  EXPECT(pn_split_size(split, PN_STRATUM_TEST2) == 6);
  EXPECT(pn_split_size(split, PN_STRATUM_TRAIN) + pn_split_size(split, PN_STRATUM_VAL) +
             pn_split_size(split, PN_STRATUM_TEST1) == 54);
  pn_split_free(split);
  pn_indices_free(kept);

  /* scores and selection */
  pn_scores* s = NULL;
  OK(pn_score_relieff(m, l, 5, 0, 0, &s));
  EXPECT(pn_scores_size(s) == 2);
  pn_indices* sel = NULL;
  OK(pn_select_top(s, 1, &sel));
  EXPECT(pn_indices_size(sel) == 1);
  pn_matrix* sub = NULL;
  OK(pn_matrix_select_columns(m, sel, &sub));
  EXPECT(pn_matrix_cols(sub) == 1);
  pn_matrix_free(sub);
  pn_indices_free(sel);
  pn_scores_free(s);
  EXPECT(pn_score_relieff(m, l, 100, 0, 0, &s) == PN_ERR_INVALID_INPUT);

  /* SVM */
  pn_svm* model = NULL;
  OK(pn_svm_train(m, l, 2, 10.0, 0.5, &model));
  EXPECT(pn_svm_support_count(model) > 0);
  EXPECT(pn_svm_feature_count(model) == 2);
  pn_metrics met;
  OK(pn_svm_evaluate(model, m, l, &met));
  EXPECT(met.accuracy == 1.0);
  EXPECT(met.positive_class == 2);
  double dv[60];
  OK(pn_svm_decision_values(model, m, dv, 60));
  EXPECT(pn_svm_decision_values(model, m, dv, 10) == PN_ERR_INVALID_INPUT);
  snprintf(path, sizeof path, "%s/capi.svm1", dir);
  OK(pn_svm_save(model, path));
  pn_svm* loaded = NULL;
  OK(pn_svm_load(path, &loaded));
  pn_labels* pred = NULL;
  OK(pn_svm_predict(loaded, m, &pred));
  EXPECT(memcmp(pn_labels_data(pred), y, sizeof y) == 0);
  pn_labels_free(pred);
  pn_svm_free(loaded);
  pn_svm_free(model);
  EXPECT(pn_svm_train(m, l, 2, -1.0, 0.5, &model) == PN_ERR_INVALID_INPUT);
  EXPECT(pn_svm_train(m, l, 7, 1.0, 0.5, &model) == PN_ERR_INVALID_INPUT);

  /* tuning */
  pn_tune_result tr;
  snprintf(path, sizeof path, "%s/tune.json", dir);
  OK(pn_svm_tune(m, l, 2, 6, 5, 1, path, &tr));
  EXPECT(tr.evaluations == 6);
  EXPECT(fabs(pow(10.0, tr.log10_c) - tr.c) < 1e-9 * tr.c);

  /* metrics */
  const int32_t t[4] = {1, 1, 0, 0}, p[4] = {1, 0, 0, 1};
  OK(pn_metrics_compute(t, p, 4, 1, &met));
  EXPECT(met.tp == 1 && met.fp == 1 && met.fn == 1 && met.tn == 1);
  EXPECT(pn_metrics_compute(t, p, 0, 1, &met) == PN_ERR_INVALID_INPUT);

  /* NULL handling */
  EXPECT(pn_matrix_read_fmx(NULL, &back) == PN_ERR_INVALID_INPUT);
  EXPECT(pn_matrix_rows(NULL) == 0);
  pn_matrix_free(NULL);

  pn_labels_free(l);
  pn_matrix_free(m);

  if (failures) fprintf(stderr, "%d C API checks failed\n", failures);
  else printf("C API checks passed\n");
  return failures ? 1 : 0;
}
