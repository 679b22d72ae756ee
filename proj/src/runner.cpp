#include "pneumo/runner.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <set>

#include <json.hpp>

namespace pneumo {

namespace fs = std::filesystem;
using nlohmann::json;

const char* task_name(Task task) noexcept {
  switch (task) {
    case Task::kNormalVsPneumonia: return "normal_vs_pneumonia";
    case Task::kViralVsBacterial: return "viral_vs_bacterial";
  }
  return "?";
}

const char* pipeline_name(Pipeline pipeline) noexcept {
  switch (pipeline) {
    case Pipeline::kSvmDirect: return "svm_direct";
    case Pipeline::kReduceRelieffSvm: return "reduce_relieff_svm";
    case Pipeline::kReduceChi2Svm: return "reduce_chi2_svm";
  }
  return "?";
}

Task parse_task(const std::string& name) {
  if (name == "normal_vs_pneumonia") return Task::kNormalVsPneumonia;
  if (name == "viral_vs_bacterial") return Task::kViralVsBacterial;
  throw_invalid("unknown task '" + name + "'");
}

Pipeline parse_pipeline(const std::string& name) {
  if (name == "svm_direct") return Pipeline::kSvmDirect;
  if (name == "reduce_relieff_svm") return Pipeline::kReduceRelieffSvm;
  if (name == "reduce_chi2_svm") return Pipeline::kReduceChi2Svm;
  throw_invalid("unknown pipeline '" + name + "'");
}

// --- config ---------------------------------------------------------------------

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const char* where) {
  for (const auto& [key, value] : obj.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw_invalid(std::string("unknown key '") + key + "' in " + where);
  }
}

std::array<double, 2> bounds_from(const json& j) {
  const auto v = j.get<std::vector<double>>();
  require(v.size() == 2, "bounds must be [lower, upper]");
  return {v[0], v[1]};
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text, const fs::path& base_dir) {
  ExperimentConfig c;
  try {
    const json j = json::parse(json_text);
    require(j.is_object(), "config must be a JSON object");
    reject_unknown(j, {"schema_version", "name", "task", "pipeline", "inputs", "seed", "tune",
                       "selection", "output_dir"},
                   "config");
    c.schema_version = j.at("schema_version").get<int>();
    require(c.schema_version == kConfigSchemaVersion,
            "unsupported config schema_version " + std::to_string(c.schema_version));
    c.name = j.value("name", c.name);
    c.task = parse_task(j.at("task").get<std::string>());
    c.pipeline = parse_pipeline(j.at("pipeline").get<std::string>());

    const json& in = j.at("inputs");
    reject_unknown(in, {"features", "labels", "manifest"}, "inputs");
    c.features = resolve(base_dir, in.at("features").get<std::string>());
    c.labels = resolve(base_dir, in.at("labels").get<std::string>());
    c.manifest = resolve(base_dir, in.value("manifest", ""));

    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("tune")) {
      const json& t = j.at("tune");
      reject_unknown(t, {"budget", "folds", "log10_C", "log10_gamma"}, "tune");
      c.tune_budget = t.value("budget", c.tune_budget);
      c.cv_folds = t.value("folds", c.cv_folds);
      if (t.contains("log10_C")) {
        const auto b = bounds_from(t.at("log10_C"));
        c.space.lower[0] = b[0];
        c.space.upper[0] = b[1];
      }
      if (t.contains("log10_gamma")) {
        const auto b = bounds_from(t.at("log10_gamma"));
        c.space.lower[1] = b[0];
        c.space.upper[1] = b[1];
      }
    }
    if (j.contains("selection")) {
      const json& s = j.at("selection");
      reject_unknown(s, {"k_neighbors", "sample_rounds", "bins", "cutoff"}, "selection");
      c.selection.k_neighbors = s.value("k_neighbors", c.selection.k_neighbors);
      c.selection.sample_rounds = s.value("sample_rounds", c.selection.sample_rounds);
      c.selection.bins = s.value("bins", c.selection.bins);
      if (s.contains("cutoff")) {
        const json& cut = s.at("cutoff");
        if (cut.is_string()) {
          const auto v = cut.get<std::string>();
          if (v == "all") c.selection.top_k = 0;
          else require(v == "elbow", "selection.cutoff must be \"elbow\", \"all\" or a count");
        } else {
          const auto k = cut.get<std::size_t>();
          require(k >= 1, "selection.cutoff count must be at least 1");
          c.selection.top_k = k;
        }
      }
    }
    c.output_dir = resolve(base_dir, j.value("output_dir", ""));
  } catch (const json::exception& e) {
    throw_invalid(std::string("malformed config: ") + e.what());
  }
  c.space.validate();
  require(c.tune_budget >= 5, "tune.budget must be at least 5");
  require(c.cv_folds >= 2, "tune.folds must be at least 2");
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  return parse_config(read_text_file(path), path.parent_path());
}

// --- stages ----------------------------------------------------------------------

std::vector<ClassId> StageModel::predict(const FeatureMatrix& features) const {
  require(features.cols() >= min_input_columns(),
          "feature dimension " + std::to_string(features.cols()) + " is too small for this stage");
  if (columns.empty()) return pneumo::predict(model, features);
  return pneumo::predict(model, select_subset(features, columns));
}

std::size_t StageModel::min_input_columns() const noexcept {
  return columns.empty() ? model.n_features() : columns.back() + 1;
}

std::vector<ClassId> cascade_predict(const CascadeModel& cascade, const FeatureMatrix& features) {
  const std::size_t need =
      std::max(cascade.stage1.min_input_columns(), cascade.stage2.min_input_columns());
  require(features.cols() >= need, "feature dimension " + std::to_string(features.cols()) +
                                       " does not match the cascade (needs " +
                                       std::to_string(need) + ")");
  if (cascade.stage1.columns.empty() && cascade.stage2.columns.empty())
    require(features.cols() == need, "feature dimension does not match the cascade");

  std::vector<ClassId> out = cascade.stage1.predict(features);
  IndexList pneumonia;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (out[i] != cascade.normal_id) pneumonia.push_back(i);
  if (pneumonia.empty()) return out;
  const auto second = cascade.stage2.predict(features.take_rows(pneumonia));
  for (std::size_t k = 0; k < pneumonia.size(); ++k) out[pneumonia[k]] = second[k];
  return out;
}

StageModel load_stage(const fs::path& dir) {
  StageModel stage;
  stage.model = load_model(dir / "model.svm1");
  if (fs::exists(dir / "selected.txt")) {
    stage.columns = read_indices(dir / "selected.txt");
    std::sort(stage.columns.begin(), stage.columns.end());
    require(stage.columns.size() == stage.model.n_features(),
            "selected.txt does not match the model dimension in " + dir.string());
  }
  return stage;
}

// --- experiment -------------------------------------------------------------------

namespace {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over (seed, stream)
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

ClassId class_id_named(const LabelVector& labels, const std::string& name) {
  const auto it = std::find(labels.class_names.begin(), labels.class_names.end(), name);
  require(it != labels.class_names.end(), "class '" + name + "' is missing from the class table");
  return static_cast<ClassId>(it - labels.class_names.begin());
}

template <typename Fn>
auto run_stage(const char* name, ExperimentReport& report, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  auto done = [&] {
    report.timings.emplace_back(
        name, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  };
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      done();
    } else {
      auto result = fn();
      done();
      return result;
    }
  } catch (const Error& e) {
    throw Error(e.code(), std::string("stage '") + name + "': " + e.what());
  }
}

std::string timings_json(const ExperimentReport& report) {
  json j = json::object();
  for (const auto& [stage, seconds] : report.timings) j[stage] = seconds;
  return j.dump(2) + "\n";
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& config) {
  ExperimentReport scratch;
  FeatureMatrix features = run_stage("load", scratch, [&] { return read_fmx(config.features); });
  LabelVector labels = run_stage("load", scratch, [&] {
    LabelVector l = read_labels(config.labels);
    require(l.size() == features.rows(),
            "labels file has " + std::to_string(l.size()) + " rows but the feature matrix has " +
                std::to_string(features.rows()));
    if (!config.manifest.empty()) {
      const Manifest m = read_manifest(config.manifest);
      if (!m.class_names.empty()) l.class_names = m.class_names;
      require(m.image_ids.empty() || m.image_ids.size() == features.rows(),
              "manifest image_ids do not match the feature matrix rows");
      l.validate();
    }
    return l;
  });
  return run_experiment(config, features, labels);
}

ExperimentOutcome run_experiment(const ExperimentConfig& config, const FeatureMatrix& features,
                                 const LabelVector& labels) {
  ExperimentOutcome out;
  ExperimentReport& report = out.report;
  report.name = config.name;
  report.task = config.task;
  report.pipeline = config.pipeline;
  report.seed = config.seed;

  const bool write = !config.output_dir.empty();
  const fs::path dir = config.output_dir;
  if (write) fs::create_directories(dir);

  // Task label mapping. Stage-1 merges viral and bacterial into one metaclass.
  std::set<ClassId> task_classes;
  std::array<ClassId, 2> label_map{};
  ClassId normal = 0, bacterial = 0, viral = 0;
  run_stage("load", report, [&] {
    require(labels.size() == features.rows(), "label count does not match feature rows");
    require(features.all_finite(), "feature matrix has non-finite values");
    labels.validate();
    bacterial = class_id_named(labels, "bacterial");
    viral = class_id_named(labels, "viral");
    if (config.task == Task::kNormalVsPneumonia) {
      normal = class_id_named(labels, "normal");
      task_classes = {normal, bacterial, viral};
      label_map = {normal, kPneumoniaMetaclass};
      report.negative_name = labels.class_names[normal];
      report.positive_name = "pneumonia";
    } else {
      task_classes = {bacterial, viral};
      label_map = {bacterial, viral};
      report.negative_name = labels.class_names[bacterial];
      report.positive_name = labels.class_names[viral];
    }
  });
  auto task_label = [&](ClassId id) {
    if (config.task == Task::kNormalVsPneumonia) return id == normal ? normal : kPneumoniaMetaclass;
    return id;
  };
  auto sign_of = [&](ClassId id) { return task_label(id) == label_map[1] ? 1 : -1; };

  out.balanced = run_stage("balance", report, [&] {
    IndexList rows;
    for (Index i = 0; i < labels.size(); ++i)
      if (task_classes.count(labels[i])) rows.push_back(i);
    const IndexList picked = balance_downsample(labels.take(rows), derive_seed(config.seed, 0));
    IndexList balanced;
    balanced.reserve(picked.size());
    for (Index p : picked) balanced.push_back(rows[p]);
    return balanced;
  });
  if (write) write_indices(out.balanced, dir / "balanced.txt");

  out.plan = run_stage("split", report,
                       [&] { return split_holdout(out.balanced, labels, derive_seed(config.seed, 1)); });
  if (write) write_file_atomic(dir / "split.json", split_plan_to_json(out.plan));

  const FeatureMatrix train_full = features.take_rows(out.plan.train);
  std::vector<int> y_train;
  for (Index i : out.plan.train) y_train.push_back(sign_of(labels[i]));

  // Feature selection on training rows only.
  std::vector<Index> columns;
  report.reduction = {features.cols(), features.cols()};
  if (config.pipeline != Pipeline::kSvmDirect) {
    out.scores = run_stage("score", report, [&] {
      LabelVector binary;
      binary.class_names = {"negative", "positive"};
      for (int s : y_train) binary.labels.push_back(s > 0 ? 1 : 0);
      if (config.pipeline == Pipeline::kReduceRelieffSvm)
        return relieff_scores(train_full, binary,
                              {config.selection.k_neighbors, config.selection.sample_rounds,
                               derive_seed(config.seed, 2)});
      return chi_square_scores(train_full, binary, config.selection.bins);
    });
    if (write) write_scores_csv(*out.scores, dir / "scores.csv");

    out.selection = run_stage("select", report, [&] {
      const Ranking ranking = rank_features(*out.scores);
      if (!config.selection.top_k) return select_elbow(*out.scores);
      const std::size_t k = *config.selection.top_k == 0
                                ? features.cols()
                                : std::min(*config.selection.top_k, features.cols());
      return select_top(ranking, k);
    });
    if (write) write_indices(out.selection->selected, dir / "selected.txt");
    columns = out.selection->selected;
    std::sort(columns.begin(), columns.end());
    report.reduction.retained = columns.size();
    if (columns.size() == features.cols()) columns.clear();
  }

  const FeatureMatrix train = columns.empty() ? train_full : select_subset(train_full, columns);

  out.tune = run_stage("tune", report, [&] {
    TuneOptions options;
    options.budget = config.tune_budget;
    options.seed = derive_seed(config.seed, 3);
    try {
      return tune_svm(train, y_train, config.space, options, config.cv_folds);
    } catch (const TuneAborted& aborted) {
      if (write) {
        TuneResult partial;
        partial.space = config.space;
        partial.seed = options.seed;
        partial.budget = config.tune_budget;
        partial.history = aborted.history();
        write_file_atomic(dir / "tune.partial.json", tune_result_to_json(partial));
      }
      throw;
    }
  });
  if (write) write_file_atomic(dir / "tune.json", tune_result_to_json(out.tune));
  report.tuned = out.tune.best;
  report.criterion_value = out.tune.criterion_value;

  out.stage.columns = columns;
  out.stage.model = run_stage("train", report, [&] {
    return fit_svm(train, y_train, out.tune.best, label_map);
  });
  report.n_support = out.stage.model.n_support();
  if (write) save_model(out.stage.model, dir / "model.svm1");

  run_stage("evaluate", report, [&] {
    const std::array<std::pair<SplitTag, const IndexList*>, 4> parts = {
        std::pair{SplitTag::kTraining, &out.plan.train},
        std::pair{SplitTag::kValidation, &out.plan.val},
        std::pair{SplitTag::kTest1, &out.plan.test1},
        std::pair{SplitTag::kTest2, &out.plan.test2}};
    for (std::size_t s = 0; s < parts.size(); ++s) {
      const auto& [tag, rows] = parts[s];
      const auto predicted = out.stage.predict(features.take_rows(*rows));
      std::vector<ClassId> truth;
      for (Index i : *rows) truth.push_back(task_label(labels[i]));
      const ConfusionMatrix cm = confusion(truth, predicted, label_map[1]);
      report.splits[s] = {tag, rows->size(), compute_metrics(cm, tag)};
    }
  });

  if (write) {
    write_file_atomic(dir / "report.txt", render_report(report, ReportFormat::kText));
    write_file_atomic(dir / "report.csv", render_report(report, ReportFormat::kCsv));
    write_file_atomic(dir / "timings.json", timings_json(report));
  }
  return out;
}

// --- rendering ----------------------------------------------------------------------

namespace {

std::string fmt(const char* pattern, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

}  // namespace

std::string render_report(const ExperimentReport& r, ReportFormat format) {
  if (format == ReportFormat::kCsv) {
    std::string out = "split,samples,accuracy,precision,recall,f1\n";
    for (const SplitMetrics& s : r.splits)
      out += fmt("%s,%zu,%.2f,%.2f,%.2f,%.2f\n", split_tag_name(s.split), s.samples,
                 s.metrics.accuracy * 100.0, s.metrics.precision * 100.0,
                 s.metrics.recall * 100.0, s.metrics.f1 * 100.0);
    return out;
  }

  std::string out;
  out += "Experiment: " + r.name + "\n";
  out += std::string("Task: ") + task_name(r.task) + " (positive class: " + r.positive_name +
         ", negative class: " + r.negative_name + ")\n";
  out += std::string("Pipeline: ") + pipeline_name(r.pipeline) + "\n";
  out += fmt("Seed: %llu\n", static_cast<unsigned long long>(r.seed));
  out += fmt("Features: %zu -> %zu (%s reduction)\n", r.reduction.initial, r.reduction.retained,
             format_percent(r.reduction.ratio()).c_str());
  out += fmt("Hyperparameters: C = %.6g, gamma = %.6g (UCB criterion %.6g)\n", r.tuned.C,
             r.tuned.gamma, r.criterion_value);
  out += fmt("Support vectors: %zu\n", r.n_support);
  out += "Zero-denominator precision/recall are reported as 0.00%.\n\n";
  out += fmt("%-12s %8s %10s %10s %10s %10s\n", "Split", "Samples", "Accuracy", "Precision",
             "Recall", "F1 Score");
  for (const SplitMetrics& s : r.splits)
    out += fmt("%-12s %8zu %10s %10s %10s %10s\n", split_tag_name(s.split), s.samples,
               format_percent(s.metrics.accuracy).c_str(),
               format_percent(s.metrics.precision).c_str(),
               format_percent(s.metrics.recall).c_str(), format_percent(s.metrics.f1).c_str());
  return out;
}

}  // namespace pneumo
