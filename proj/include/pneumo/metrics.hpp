#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "pneumo/featurestore.hpp"

namespace pneumo {

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  ClassId positive_class = 1;

  std::size_t total() const noexcept { return tp + fp + fn + tn; }
  /// Same counts seen from the other class.
  ConfusionMatrix swapped(ClassId new_positive) const noexcept {
    return {tn, fn, fp, tp, new_positive};
  }
};

enum class SplitTag { kTraining, kValidation, kTest1, kTest2 };

const char* split_tag_name(SplitTag tag) noexcept;

struct MetricsReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  SplitTag split = SplitTag::kValidation;
};

/// Rows whose true label equals `positive_class` are positives; everything
/// else is negative. At most two distinct true labels are allowed.
ConfusionMatrix confusion(std::span<const ClassId> y_true, std::span<const ClassId> y_pred,
                          ClassId positive_class);

/// Harmonic mean; 0 when precision + recall is 0.
double f1_score(double precision, double recall) noexcept;

/// Precision is 0 when tp + fp = 0, recall is 0 when tp + fn = 0.
MetricsReport compute_metrics(const ConfusionMatrix& cm, SplitTag split = SplitTag::kValidation);

/// "97.88%" style, two decimals.
std::string format_percent(double fraction);

}  // namespace pneumo
