#include "pneumo/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "pneumo/error.hpp"

namespace pneumo {

const char* split_tag_name(SplitTag tag) noexcept {
  switch (tag) {
    case SplitTag::kTraining: return "Training";
    case SplitTag::kValidation: return "Validation";
    case SplitTag::kTest1: return "Test 1";
    case SplitTag::kTest2: return "Test 2";
  }
  return "?";
}

ConfusionMatrix confusion(std::span<const ClassId> y_true, std::span<const ClassId> y_pred,
                          ClassId positive_class) {
  require(y_true.size() == y_pred.size(), "true and predicted label counts differ");
  std::set<ClassId> distinct(y_true.begin(), y_true.end());
  require(distinct.size() <= 2, "confusion matrix is for two-class tasks only");
  ConfusionMatrix cm;
  cm.positive_class = positive_class;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const bool actual = y_true[i] == positive_class;
    const bool predicted = y_pred[i] == positive_class;
    if (actual && predicted) ++cm.tp;
    else if (actual) ++cm.fn;
    else if (predicted) ++cm.fp;
    else ++cm.tn;
  }
  return cm;
}

double f1_score(double precision, double recall) noexcept {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

MetricsReport compute_metrics(const ConfusionMatrix& cm, SplitTag split) {
  require(cm.total() > 0, "cannot compute metrics of an empty confusion matrix");
  MetricsReport r;
  r.split = split;
  const auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  r.accuracy = ratio(cm.tp + cm.tn, cm.total());
  r.precision = ratio(cm.tp, cm.tp + cm.fp);
  r.recall = ratio(cm.tp, cm.tp + cm.fn);
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

std::string format_percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", fraction * 100.0);
  return buf;
}

}  // namespace pneumo
