#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pneumo {

using Index = std::size_t;
using IndexList = std::vector<Index>;
using ClassId = std::int32_t;

struct FeatureOrigin {
  std::string backbone;
  std::string layer;
};

/// Dense row-major f32 matrix: one row per image, one column per activation.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols);
  FeatureMatrix(std::size_t rows, std::size_t cols, std::vector<float> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0 || cols_ == 0; }

  float operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  float& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }

  std::span<const float> row(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<float> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }

  std::span<const float> values() const noexcept { return values_; }
  std::span<float> values() noexcept { return values_; }

  /// Copies the given rows, in order.
  FeatureMatrix take_rows(std::span<const Index> rows) const;

  bool all_finite() const noexcept;

  std::optional<FeatureOrigin> origin;

  friend bool operator==(const FeatureMatrix& a, const FeatureMatrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.values_ == b.values_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> values_;
};

/// Default label taxonomy of the chest X-ray dataset.
inline constexpr ClassId kNormal = 0;
inline constexpr ClassId kBacterial = 1;
inline constexpr ClassId kViral = 2;

struct LabelVector {
  std::vector<ClassId> labels;
  /// Indexed by class id.
  std::vector<std::string> class_names = {"normal", "bacterial", "viral"};

  std::size_t size() const noexcept { return labels.size(); }
  ClassId operator[](std::size_t i) const { return labels[i]; }

  /// Distinct ids, ascending.
  std::vector<ClassId> classes() const;
  LabelVector take(std::span<const Index> rows) const;
  /// Throws invalid-input if an id is negative or has no class name.
  void validate() const;
};

struct SplitFractions {
  double test2 = 0.10;
  double train = 0.60;
  double val = 0.20;
  double test1 = 0.20;
};

struct SplitPlan {
  IndexList train;
  IndexList val;
  IndexList test1;
  IndexList test2;
  std::uint64_t seed = 0;
  SplitFractions fractions;
};

struct StandardizationParams {
  std::vector<double> mean;
  std::vector<double> stddev;

  bool empty() const noexcept { return mean.empty(); }
  friend bool operator==(const StandardizationParams&, const StandardizationParams&) = default;
};

struct Manifest {
  std::string dataset_name;
  std::vector<std::string> class_names;
  std::string backbone;
  std::string layer;
  std::vector<std::string> image_ids;
};

// --- balancing and splitting ---------------------------------------------

/// Random downsampling to the smallest class count. Output sorted ascending.
IndexList balance_downsample(const LabelVector& labels, std::uint64_t seed);

/// Stratified hold-out split: test2 is carved out first, the remainder is
/// divided into train/val/test1. Per-class counts use largest-remainder
/// rounding; ties go to the earlier stratum. Each list is sorted ascending.
SplitPlan split_holdout(std::span<const Index> indices, const LabelVector& labels,
                        std::uint64_t seed, const SplitFractions& fractions = {});

/// Largest-remainder apportionment of `total` items by `weights`.
std::vector<std::size_t> apportion(std::size_t total, std::span<const double> weights);

// --- standardization -------------------------------------------------------

StandardizationParams fit_standardizer(const FeatureMatrix& matrix,
                                       std::span<const Index> train_rows);
StandardizationParams fit_standardizer(const FeatureMatrix& matrix);
FeatureMatrix apply_standardizer(const StandardizationParams& params,
                                 const FeatureMatrix& matrix);

// --- I/O -------------------------------------------------------------------

void write_fmx(const FeatureMatrix& matrix, const std::filesystem::path& path);
FeatureMatrix read_fmx(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_fmx(const FeatureMatrix& matrix);
FeatureMatrix decode_fmx(std::span<const std::uint8_t> bytes);

LabelVector read_labels(const std::filesystem::path& path);
void write_labels(const LabelVector& labels, const std::filesystem::path& path);

IndexList read_indices(const std::filesystem::path& path);
void write_indices(std::span<const Index> indices, const std::filesystem::path& path);

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

std::string split_plan_to_json(const SplitPlan& plan);
SplitPlan split_plan_from_json(const std::string& text);

/// Writes to a sibling temp file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace pneumo
