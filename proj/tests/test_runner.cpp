#include <doctest.h>

#include <fstream>
#include <sstream>

#include "pneumo/error.hpp"
#include "pneumo/runner.hpp"
#include "support.hpp"

using namespace pneumo;
namespace fs = std::filesystem;

namespace {

ExperimentConfig quick_config(Task task, Pipeline pipeline, std::uint64_t seed) {
  ExperimentConfig c;
  c.name = "unit";
  c.task = task;
  c.pipeline = pipeline;
  c.seed = seed;
  c.tune_budget = 8;
  c.cv_folds = 5;
  return c;
}

std::string config_json(const fs::path& features, const fs::path& labels, const std::string& pipeline,
                        const std::string& out) {
  return R"({"schema_version": 1, "name": "determinism", "task": "viral_vs_bacterial",
  "pipeline": ")" + pipeline + R"(", "inputs": {"features": ")" + features.string() +
         R"(", "labels": ")" + labels.string() + R"("}, "seed": 42,
  "tune": {"budget": 8, "folds": 5}, "selection": {"k_neighbors": 5},
  "output_dir": ")" + out + R"("})";
}

double accuracy(const std::vector<ClassId>& a, const std::vector<ClassId>& b) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == b[i];
  return static_cast<double>(hit) / static_cast<double>(a.size());
}

}  // namespace

TEST_CASE("config parsing") {
  const std::string base = R"({"schema_version": 1, "task": "normal_vs_pneumonia",
    "pipeline": "reduce_chi2_svm", "inputs": {"features": "x.fmx", "labels": "y.txt"},
    "seed": 5, "tune": {"budget": 12, "log10_C": [-1, 2]}, "selection": {"bins": 8, "cutoff": 100}})";
  const auto c = parse_config(base, "/data");
  CHECK(c.task == Task::kNormalVsPneumonia);
  CHECK(c.pipeline == Pipeline::kReduceChi2Svm);
  CHECK(c.features == fs::path("/data/x.fmx"));
  CHECK(c.tune_budget == 12);
  CHECK(c.space.lower[0] == -1.0);
  CHECK(c.space.upper[1] == 1.0);
  CHECK(c.selection.bins == 8);
  CHECK(c.selection.top_k == std::optional<std::size_t>(100));

  auto with = [&](const std::string& from, const std::string& to) {
    std::string s = base;
    s.replace(s.find(from), from.size(), to);
    return s;
  };
  CHECK(parse_config(with("100", "\"all\"")).selection.top_k == std::optional<std::size_t>(0));
  CHECK(!parse_config(with("100", "\"elbow\"")).selection.top_k);
  CHECK_THROWS_AS(parse_config(with("\"seed\"", "\"sead\"")), Error);
  CHECK_THROWS_AS(parse_config(with("\"schema_version\": 1", "\"schema_version\": 2")), Error);
  CHECK_THROWS_AS(parse_config(with("reduce_chi2_svm", "cnn")), Error);
  CHECK_THROWS_AS(parse_config(with("12", "3")), Error);
  CHECK_THROWS_AS(parse_config(with("[-1, 2]", "[2, -1]")), Error);
  CHECK_THROWS_AS(parse_config("{not json"), Error);
}

TEST_CASE("svm_direct separates Gaussian blobs") {
  const auto s = testing::planted(100, 50, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9}, 1.6, 8, {kBacterial, kViral});
  auto c = quick_config(Task::kViralVsBacterial, Pipeline::kSvmDirect, 3);
  c.tune_budget = 15;
  const auto out = run_experiment(c, s.features, s.labels);
  CHECK(out.report.splits[1].split == SplitTag::kValidation);
  CHECK(out.report.splits[1].metrics.accuracy >= 0.95);
  CHECK(out.report.reduction.initial == 50);
  CHECK(out.report.reduction.retained == 50);
  CHECK(out.report.positive_name == "viral");
  for (const auto& sm : out.report.splits) CHECK(sm.samples > 0);
}

TEST_CASE("no information flows from held-out rows into fitted artifacts") {
  const auto clean = testing::planted(40, 30, {0, 1, 2}, 3.0, 4, {kBacterial, kViral});
  auto c = quick_config(Task::kViralVsBacterial, Pipeline::kReduceRelieffSvm, 9);
  c.selection.k_neighbors = 5;

  testing::TempDir a("canary-a"), b("canary-b");
  c.output_dir = a.path();
  const auto first = run_experiment(c, clean.features, clean.labels);

  FeatureMatrix corrupted = clean.features;
  for (const IndexList* rows : {&first.plan.val, &first.plan.test1, &first.plan.test2})
    for (Index i : *rows)
      for (float& v : corrupted.row(i)) v = 1000.0f - v * 37.0f;
  c.output_dir = b.path();
  run_experiment(c, corrupted, clean.labels);

  for (const char* f : {"balanced.txt", "split.json", "scores.csv", "selected.txt", "tune.json", "model.svm1"}) {
    CAPTURE(f);
    CHECK(testing::slurp(a / f) == testing::slurp(b / f));
  }
  CHECK(testing::slurp(a / "report.txt") != testing::slurp(b / "report.txt"));
}

TEST_CASE("cutoff 'all' reproduces svm_direct") {
  const auto s = testing::planted(30, 12, {0, 3}, 2.0, 6, {kBacterial, kViral});
  auto direct = quick_config(Task::kViralVsBacterial, Pipeline::kSvmDirect, 5);
  auto reduced = quick_config(Task::kViralVsBacterial, Pipeline::kReduceChi2Svm, 5);
  reduced.selection.top_k = 0;
  const auto a = run_experiment(direct, s.features, s.labels);
  const auto b = run_experiment(reduced, s.features, s.labels);
  CHECK(encode_model(a.stage.model) == encode_model(b.stage.model));
  CHECK(render_report(a.report, ReportFormat::kCsv) == render_report(b.report, ReportFormat::kCsv));
}

TEST_CASE("experiments from config files are byte-identical across runs") {
  testing::TempDir dir("determinism");
  const auto s = testing::planted(30, 40, {1, 5, 9}, 2.5, 2, {kBacterial, kViral});
  write_fmx(s.features, dir / "x.fmx");
  write_labels(s.labels, dir / "y.txt");
  for (const char* run : {"run1", "run2"})
    testing::spit(dir / (std::string(run) + ".json"),
                  config_json(dir / "x.fmx", dir / "y.txt", "reduce_relieff_svm", run));
  run_experiment(load_config(dir / "run1.json"));
  run_experiment(load_config(dir / "run2.json"));
  for (const char* f : {"report.txt", "report.csv", "scores.csv", "selected.txt", "tune.json", "model.svm1"}) {
    CAPTURE(f);
    const auto one = testing::slurp(dir / "run1" / f);
    CHECK(!one.empty());
    CHECK(one == testing::slurp(dir / "run2" / f));
  }
}

TEST_CASE("stage errors name the stage and keep the error category") {
  testing::TempDir dir("errors");
  testing::spit(dir / "c.json", config_json(dir / "missing.fmx", dir / "y.txt", "svm_direct", "out"));
  try {
    run_experiment(load_config(dir / "c.json"));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIo);
    CHECK(std::string(e.what()).find("stage 'load'") != std::string::npos);
  }

  const auto s = testing::planted(6, 3, {0}, 2.0, 1, {kBacterial, kViral});
  try {
    run_experiment(quick_config(Task::kViralVsBacterial, Pipeline::kSvmDirect, 1), s.features, s.labels);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidInput);
    CHECK(std::string(e.what()).find("stage 'split'") != std::string::npos);
  }
}

TEST_CASE("cascade") {
  SUBCASE("composition rules") {
    CascadeModel cm;
    auto constant = [](double bias, std::array<ClassId, 2> map) {
      StageModel st;
      st.model.support = FeatureMatrix(1, 2, {0, 0});
      st.model.dual_coefs = {0.0};
      st.model.bias = bias;
      st.model.label_map = map;
      return st;
    };
    const FeatureMatrix x(3, 2, {0, 1, 2, 3, 4, 5});
    cm.stage1 = constant(-1.0, {kNormal, kPneumoniaMetaclass});
    cm.stage2 = constant(-1.0, {kBacterial, kViral});
    CHECK(cascade_predict(cm, x) == std::vector<ClassId>{kNormal, kNormal, kNormal});
    cm.stage1.model.bias = 1.0;
    CHECK(cascade_predict(cm, x) == std::vector<ClassId>{kBacterial, kBacterial, kBacterial});
    CHECK_THROWS_AS(cascade_predict(cm, FeatureMatrix(1, 3)), Error);
  }
  SUBCASE("three-class blobs") {
    testing::TempDir dir("cascade");
    const auto s = testing::three_class_blobs(60, 6, 4.0, 21);
    auto c1 = quick_config(Task::kNormalVsPneumonia, Pipeline::kReduceRelieffSvm, 1);
    c1.selection.k_neighbors = 5;
    c1.output_dir = dir / "stage1";
    auto c2 = quick_config(Task::kViralVsBacterial, Pipeline::kSvmDirect, 1);
    c2.output_dir = dir / "stage2";
    run_experiment(c1, s.features, s.labels);
    run_experiment(c2, s.features, s.labels);

    CascadeModel cm{load_stage(dir / "stage1"), load_stage(dir / "stage2"), kNormal};
    const auto predicted = cascade_predict(cm, s.features);

    std::vector<ClassId> t1, p1 = cm.stage1.predict(s.features);
    for (ClassId y : s.labels.labels) t1.push_back(y == kNormal ? kNormal : kPneumoniaMetaclass);
    IndexList sick;
    std::vector<ClassId> t2;
    for (Index i = 0; i < s.labels.size(); ++i)
      if (s.labels[i] != kNormal) {
        sick.push_back(i);
        t2.push_back(s.labels[i]);
      }
    const double a1 = accuracy(t1, p1);
    const double a2 = accuracy(t2, cm.stage2.predict(s.features.take_rows(sick)));
    CHECK(accuracy(s.labels.labels, predicted) >= a1 * a2 - 0.02);
  }
}

TEST_CASE("report rendering") {
  ExperimentReport r;
  r.name = "golden";
  r.task = Task::kNormalVsPneumonia;
  r.pipeline = Pipeline::kReduceRelieffSvm;
  r.seed = 2024;
  r.positive_name = "pneumonia";
  r.negative_name = "normal";
  r.reduction = {100000, 6000};
  r.tuned = {12.5, 0.00031};
  r.criterion_value = 0.0612;
  r.n_support = 417;
  r.splits = {SplitMetrics{SplitTag::kTraining, 2430, {1.0, 1.0, 1.0, 1.0, SplitTag::kTraining}},
              SplitMetrics{SplitTag::kValidation, 810, {0.9102, 0.9773, 0.9803, 0.97879, SplitTag::kValidation}},
              SplitMetrics{SplitTag::kTest1, 810, {0.9, 0.0, 0.0, 0.0, SplitTag::kTest1}},
              SplitMetrics{SplitTag::kTest2, 450, {0.93456, 0.9426, 0.9266, 0.93453, SplitTag::kTest2}}};

  CHECK(render_report(r, ReportFormat::kText) == testing::slurp(fs::path(PNEUMO_GOLDEN_DIR) / "report.txt"));
  CHECK(render_report(r, ReportFormat::kText).find("100.00%") != std::string::npos);
  CHECK(render_report(r, ReportFormat::kText).find("94.00% reduction") != std::string::npos);

  std::istringstream csv(render_report(r, ReportFormat::kCsv));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "split,samples,accuracy,precision,recall,f1");
  for (const SplitMetrics& sm : r.splits) {
    std::getline(csv, line);
    std::istringstream row(line);
    std::string name, cell;
    std::getline(row, name, ',');
    CHECK(name == split_tag_name(sm.split));
    std::getline(row, cell, ',');
    CHECK(std::stoul(cell) == sm.samples);
    for (double v : {sm.metrics.accuracy, sm.metrics.precision, sm.metrics.recall, sm.metrics.f1}) {
      std::getline(row, cell, ',');
      CHECK(std::abs(std::stod(cell) - 100.0 * v) <= 0.005 + 1e-9);
    }
  }
}
