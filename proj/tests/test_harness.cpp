#include "monotta/harness.hpp"
#include "monotta/training.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <unistd.h>

using namespace monotta;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("monotta_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// A briefly trained detector; good enough to produce detections, cheap enough for unit tests.
struct Fixture {
  DetectorCheckpoint checkpoint;
  Dataset val;
};

const Fixture& fixture() {
  static const Fixture f = [] {
    TrainConfig cfg;
    cfg.n_train = 96;
    cfg.n_val = 24;
    cfg.epochs = 3;
    cfg.target_map = 0;
    const auto splits = make_toy_splits(cfg);
    auto trained = train_detector(splits.train, splits.val, cfg);
    return Fixture{{std::move(trained.model), cfg, trained.clean_map}, splits.val};
  }();
  return f;
}

ExperimentConfig small_experiment(const fs::path& out) {
  ExperimentConfig c;
  c.conditions = {Condition{}, Condition{CorruptionKind::kGaussianNoise, 2}};
  c.policies = {PolicyKind::kMonoTta, PolicyKind::kSourceOnly};
  c.seeds = {1, 0};
  c.tta.batch_size = 8;
  c.output_dir = out;
  c.threads = 2;
  return c;
}

class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    if (value) {
      ::setenv(name, value, 1);
    } else {
      ::unsetenv(name);
    }
  }
  ~ScopedEnv() {
    if (old_) {
      ::setenv(name_, old_->c_str(), 1);
    } else {
      ::unsetenv(name_);
    }
  }

 private:
  const char* name_;
  std::optional<std::string> old_;
};

}  // namespace

TEST(Condition, Labels) {
  EXPECT_EQ(Condition{}.label(), "clean");
  EXPECT_EQ((Condition{CorruptionKind::kFog, 3}).label(), "fog@3");
}

TEST(ExperimentJson, RoundTrip) {
  ExperimentConfig c = small_experiment("out/dir");
  c.checkpoint = "model.ckpt";
  c.tta.lambda_balance = 0.5;
  c.tta.seed = 12;
  c.iou_threshold = 0.6;
  c.histogram_bins = 8;
  const auto back = experiment_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.conditions, c.conditions);
  EXPECT_EQ(back.policies, c.policies);
  EXPECT_EQ(back.tta.lambda_balance, 0.5);
  EXPECT_EQ(back.output_dir, fs::path("out/dir"));
}

TEST(ExperimentJson, MissingKeysKeepDefaults) {
  const auto c = experiment_from_json(nlohmann::json::parse(R"({"policies": ["bn_adapt"], "tta": {"beta": 0.3}})"));
  EXPECT_EQ(c.policies, std::vector<PolicyKind>{PolicyKind::kBnAdapt});
  EXPECT_EQ(c.tta.beta, 0.3);
  EXPECT_EQ(c.tta.eta, TTAConfig{}.eta);
  EXPECT_EQ(c.output_dir, fs::path("results"));
}

TEST(ExperimentJson, RejectsUnknownOrMalformedEntries) {
  EXPECT_THROW(experiment_from_json(nlohmann::json::parse(R"({"polices": []})")), std::invalid_argument);
  EXPECT_THROW(experiment_from_json(nlohmann::json::parse(R"({"tta": {"alpha": 0.3}})")), std::invalid_argument);
  EXPECT_THROW(experiment_from_json(nlohmann::json::parse(R"({"policies": ["tent"]})")), std::invalid_argument);
  EXPECT_THROW(experiment_from_json(nlohmann::json::parse(R"({"conditions": [{"kind": "rain", "severity": 1}]})")),
               std::invalid_argument);
  EXPECT_THROW(experiment_from_json(nlohmann::json::parse(R"({"seeds": "zero"})")), std::invalid_argument);
  EXPECT_THROW(experiment_from_json(nlohmann::json::array()), std::invalid_argument);
}

TEST(ExperimentJson, LoadReportsBadFiles) {
  const auto dir = scratch_dir("json");
  std::ofstream(dir / "bad.json") << "{ not json";
  EXPECT_THROW(load_experiment(dir / "bad.json"), std::invalid_argument);
  EXPECT_THROW(load_experiment(dir / "absent.json"), std::invalid_argument);
  fs::remove_all(dir);
}

TEST(ExperimentConfig, Validate) {
  auto c = small_experiment("x");
  EXPECT_NO_THROW(c.validate());
  auto no_policy = c;
  no_policy.policies.clear();
  EXPECT_THROW(no_policy.validate(), std::invalid_argument);
  auto bad_severity = c;
  bad_severity.conditions = {Condition{CorruptionKind::kFog, 9}};
  EXPECT_THROW(bad_severity.validate(), std::invalid_argument);
  auto bad_tta = c;
  bad_tta.tta.gamma = 0.01;
  EXPECT_THROW(bad_tta.validate(), std::invalid_argument);
}

TEST(OutputRoot, EnvironmentOverride) {
  {
    ScopedEnv env(kOutputRootEnv, "/tmp/root");
    EXPECT_EQ(resolve_output("results"), fs::path("/tmp/root/results"));
    EXPECT_EQ(resolve_output("/abs/out"), fs::path("/abs/out"));
  }
  {
    ScopedEnv env(kOutputRootEnv, nullptr);
    EXPECT_EQ(resolve_output("results"), fs::path("results"));
  }
}

TEST(Report, SingleRecordHasZeroSourceGain) {
  MetricsRecord r;
  r.policy = PolicyKind::kSourceOnly;
  r.ap.mean_ap = 0.5;
  const auto table = render_report(std::span(&r, 1));
  std::istringstream lines(table.csv);
  std::string header, row, extra;
  std::getline(lines, header);
  std::getline(lines, row);
  EXPECT_FALSE(std::getline(lines, extra));
  EXPECT_EQ(header, "condition,source_only,gain_source_only");
  ASSERT_EQ(row.substr(0, 6), "clean,");
  const auto comma = row.find(',', 6);
  EXPECT_DOUBLE_EQ(std::stod(row.substr(6, comma - 6)), 0.5);
  EXPECT_DOUBLE_EQ(std::stod(row.substr(comma + 1)), 0.0);
  EXPECT_NE(table.text.find("50.00"), std::string::npos);
}

TEST(Report, AveragesSeedsAndComputesGain) {
  std::vector<MetricsRecord> records(3);
  records[0].policy = PolicyKind::kSourceOnly;
  records[0].ap.mean_ap = 0.4;
  records[1].policy = PolicyKind::kMonoTta;
  records[1].ap.mean_ap = 0.5;
  records[1].seed = 0;
  records[2].policy = PolicyKind::kMonoTta;
  records[2].ap.mean_ap = 0.7;
  records[2].seed = 1;
  const auto table = render_report(records);
  EXPECT_NE(table.csv.find("clean,0.4"), std::string::npos);
  EXPECT_NE(table.text.find("60.00 (+50.0%)"), std::string::npos);
}

TEST(DetectionsCsv, RoundTrip) {
  const auto dir = scratch_dir("dets");
  std::vector<Detection> dets(2);
  dets[0].image_index = 1;
  dets[0].class_id = 2;
  dets[0].score = 0.625;
  dets[0].box = {10.5, 20.25, 8, 6};
  dets[1].score = 0.3;
  dets[1].box = {1, 2, 3, 4};
  const std::vector<std::string> names{"a.png", "b.png"};
  {
    std::ofstream out(dir / "d.csv");
    write_detections_csv(dets, names, out);
  }
  const auto back = read_detections_csv(dir / "d.csv", names);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].image_index, 1);
  EXPECT_EQ(back[0].class_id, 2);
  EXPECT_NEAR(back[0].score, 0.625, 1e-9);
  EXPECT_NEAR(back[0].box.cy, 20.25, 1e-9);
  EXPECT_EQ(back[1].image_index, 0);
  const std::vector<std::string> other{"zzz.png"};
  EXPECT_ANY_THROW(read_detections_csv(dir / "d.csv", other));
  fs::remove_all(dir);
}

TEST(RunCell, SourceOnlyOnCleanDataReproducesCheckpointMap) {
  const auto& f = fixture();
  ExperimentConfig c = small_experiment("unused");
  const auto rec = run_cell(f.checkpoint, f.val, c, PolicyKind::kSourceOnly, Condition{}, 0);
  ASSERT_TRUE(rec.ok) << rec.error;
  EXPECT_EQ(rec.ap.mean_ap, f.checkpoint.clean_map);
  EXPECT_TRUE(rec.frozen_unchanged);
  EXPECT_EQ(rec.images, 24);
  EXPECT_EQ(rec.batches, 3);
  EXPECT_EQ(rec.updates, 0);
}

TEST(RunCell, MonoTtaKeepsFrozenWeights) {
  const auto& f = fixture();
  const auto rec = run_cell(f.checkpoint, f.val, small_experiment("unused"), PolicyKind::kMonoTta,
                            Condition{CorruptionKind::kGaussianNoise, 3}, 4);
  ASSERT_TRUE(rec.ok) << rec.error;
  EXPECT_TRUE(rec.frozen_unchanged);
  EXPECT_EQ(*rec.alpha_first, 0.2);
  EXPECT_GE(*rec.alpha_min, 0.0);
  EXPECT_EQ(rec.log.size(), 3u);
  int detections = 0;
  for (int q = 0; q < kQuintiles; ++q) detections += rec.detections_above_gamma[static_cast<std::size_t>(q)];
  EXPECT_GE(rec.histogram.at_or_above_gamma, detections);
}

TEST(RunCell, FailureIsCapturedNotThrown) {
  const auto& f = fixture();
  Dataset odd(1);
  odd[0].image = Image::constant(32, 32, 0.5f);
  const auto rec = run_cell(f.checkpoint, odd, small_experiment("unused"), PolicyKind::kBnAdapt, Condition{}, 0);
  EXPECT_FALSE(rec.ok);
  EXPECT_FALSE(rec.error.empty());
}

TEST(RunExperiment, RepeatRunsWriteIdenticalReports) {
  const auto& f = fixture();
  const auto dir = scratch_dir("experiment");
  std::vector<std::string> first;
  for (int run = 0; run < 2; ++run) {
    const auto out = dir / ("run" + std::to_string(run));
    const auto result = run_experiment(small_experiment(out), f.checkpoint, f.val);
    ASSERT_FALSE(result.any_failed());
    ASSERT_EQ(result.records.size(), 8u);
    EXPECT_EQ(result.records.front().condition.label(), "clean");
    EXPECT_EQ(result.records.front().policy, PolicyKind::kSourceOnly);
    EXPECT_EQ(result.records.front().seed, 1u);  // seeds keep their configured order
    std::vector<std::string> files;
    for (const char* name : {"records.csv", "comparison.csv", "comparison.txt", "alpha.csv", "histograms.csv",
                             "metrics/monotta__gaussian_noise@2__seed0.jsonl"}) {
      ASSERT_TRUE(fs::exists(out / name)) << name;
      files.push_back(read_text(out / name));
    }
    EXPECT_TRUE(fs::exists(out / "timing.json"));
    if (run == 0) {
      first = files;
    } else {
      EXPECT_EQ(files, first);
    }
  }
  fs::remove_all(dir);
}

TEST(RunExperiment, RelativeOutputFollowsEnvironmentRoot) {
  const auto& f = fixture();
  const auto root = scratch_dir("envroot");
  ScopedEnv env(kOutputRootEnv, root.c_str());
  auto c = small_experiment("nested/out");
  c.conditions = {Condition{}};
  c.policies = {PolicyKind::kSourceOnly};
  c.seeds = {0};
  run_experiment(c, f.checkpoint, f.val);
  EXPECT_TRUE(fs::exists(root / "nested/out/comparison.csv"));
  fs::remove_all(root);
}
