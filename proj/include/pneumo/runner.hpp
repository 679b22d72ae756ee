#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pneumo/bayesopt.hpp"
#include "pneumo/featurestore.hpp"
#include "pneumo/metrics.hpp"
#include "pneumo/selection.hpp"
#include "pneumo/svm.hpp"

namespace pneumo {

/// Label id used for the merged viral + bacterial class in stage-1 models.
inline constexpr ClassId kPneumoniaMetaclass = -1;

enum class Task { kNormalVsPneumonia, kViralVsBacterial };
enum class Pipeline { kSvmDirect, kReduceRelieffSvm, kReduceChi2Svm };

const char* task_name(Task task) noexcept;
const char* pipeline_name(Pipeline pipeline) noexcept;
Task parse_task(const std::string& name);
Pipeline parse_pipeline(const std::string& name);

inline constexpr int kConfigSchemaVersion = 1;

struct SelectionConfig {
  std::size_t k_neighbors = 10;
  std::size_t sample_rounds = 0;
  std::size_t bins = 10;
  /// nullopt: elbow cutoff. 0: keep every feature. k: top k.
  std::optional<std::size_t> top_k;
};

struct ExperimentConfig {
  int schema_version = kConfigSchemaVersion;
  std::string name = "experiment";
  Task task = Task::kNormalVsPneumonia;
  Pipeline pipeline = Pipeline::kSvmDirect;
  std::filesystem::path features;
  std::filesystem::path labels;
  std::filesystem::path manifest;  // optional
  std::uint64_t seed = 0;
  std::size_t tune_budget = 30;
  std::size_t cv_folds = 10;
  SearchSpace space;
  SelectionConfig selection;
  std::filesystem::path output_dir;  // empty: nothing is written
};

/// Parses the JSON config; relative paths resolve against `base_dir`.
ExperimentConfig parse_config(const std::string& json_text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

struct SplitMetrics {
  SplitTag split = SplitTag::kTraining;
  std::size_t samples = 0;
  MetricsReport metrics;
};

struct ExperimentReport {
  std::string name;
  Task task = Task::kNormalVsPneumonia;
  Pipeline pipeline = Pipeline::kSvmDirect;
  std::uint64_t seed = 0;
  std::string positive_name;
  std::string negative_name;
  std::array<SplitMetrics, 4> splits;
  ReductionSummary reduction;
  SvmHyperparams tuned;
  double criterion_value = 0.0;
  std::size_t n_support = 0;
  /// Wall-clock seconds per stage. Kept out of the rendered report so that
  /// reports are byte-identical across runs.
  std::vector<std::pair<std::string, double>> timings;
};

/// One binary stage: optional column subset, then an SVM.
struct StageModel {
  std::vector<Index> columns;  // ascending; empty means all columns
  SvmModel model;

  std::vector<ClassId> predict(const FeatureMatrix& features) const;
  std::size_t min_input_columns() const noexcept;
};

struct ExperimentOutcome {
  ExperimentReport report;
  StageModel stage;
  IndexList balanced;
  SplitPlan plan;
  std::optional<ScoreVector> scores;
  std::optional<SelectionResult> selection;
  TuneResult tune;
};

/// Reads inputs named in the config and runs the pipeline.
ExperimentOutcome run_experiment(const ExperimentConfig& config);

/// Runs on in-memory data. Writes artifacts when config.output_dir is set.
ExperimentOutcome run_experiment(const ExperimentConfig& config, const FeatureMatrix& features,
                                 const LabelVector& labels);

struct CascadeModel {
  StageModel stage1;  // normal vs pneumonia metaclass
  StageModel stage2;  // viral vs bacterial
  ClassId normal_id = kNormal;
};

/// Stage 1 decides normal vs pneumonia; pneumonia rows go to stage 2.
std::vector<ClassId> cascade_predict(const CascadeModel& cascade, const FeatureMatrix& features);

/// Loads model.svm1 (and selected.txt, if present) from an experiment directory.
StageModel load_stage(const std::filesystem::path& dir);

enum class ReportFormat { kText, kCsv };

std::string render_report(const ExperimentReport& report, ReportFormat format);

}  // namespace pneumo
