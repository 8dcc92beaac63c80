#pragma once

#include "monotta/baselines.hpp"
#include "monotta/checkpoint.hpp"
#include "monotta/corruption.hpp"
#include "monotta/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace monotta {

/// Environment variable that, when set, replaces the output root of every command.
inline constexpr const char* kOutputRootEnv = "MONOTTA_OUTPUT_ROOT";

/// One test condition: a corruption at a severity, or the clean images when kind is empty.
struct Condition {
  std::optional<CorruptionKind> kind;
  int severity = 0;

  std::string label() const;
  bool operator==(const Condition&) const = default;
};

struct ExperimentConfig {
  std::filesystem::path checkpoint;
  /// Labeled dataset directory (images/ + annotations.csv). Empty: regenerate the
  /// checkpoint's own validation split.
  std::filesystem::path data;
  std::vector<Condition> conditions;
  std::vector<PolicyKind> policies;
  TTAConfig tta;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path output_dir = "results";
  double iou_threshold = 0.5;
  int histogram_bins = 20;
  /// Worker threads for independent cells; 0 picks the hardware concurrency.
  int threads = 0;

  /// Throws std::invalid_argument when the config cannot be run.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);

nlohmann::json to_json(const TTAConfig& config);
/// Applies the keys present in j on top of base.
TTAConfig tta_from_json(const nlohmann::json& j, TTAConfig base = {});

inline constexpr int kQuintiles = 5;

/// Result of one (policy, condition, seed) cell.
struct MetricsRecord {
  PolicyKind policy = PolicyKind::kSourceOnly;
  Condition condition;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;

  APResult ap;
  std::optional<double> alpha_first, alpha_last, alpha_min, alpha_max;
  int images = 0;
  int batches = 0;
  int updates = 0;
  /// Per stream quintile (by image position).
  std::array<int, kQuintiles> detections_above_gamma{};
  std::array<std::optional<double>, kQuintiles> mean_score{};
  /// Per stream quintile (by the position of each batch's first image).
  std::array<int, kQuintiles> n_high{};
  std::array<int, kQuintiles> n_low{};
  std::array<std::optional<double>, kQuintiles> negative_mean_score{};
  bool frozen_unchanged = true;
  double wall_seconds = 0;

  std::vector<BatchMetrics> log;
  ScoreHistogram histogram;
};

struct ExperimentResult {
  std::vector<MetricsRecord> records;  // sorted by condition, policy, seed
  bool any_failed() const;
};

/// Detections at or above gamma scored against ground truth.
APResult evaluate_stream(std::span<const Detection> detections, std::span<const LabeledImage> ground_truth,
                         int classes, double gamma, double iou_threshold);

/// Runs one cell from a pristine copy of the checkpoint model.
MetricsRecord run_cell(const DetectorCheckpoint& checkpoint, const Dataset& data, const ExperimentConfig& config,
                       PolicyKind policy, const Condition& condition, std::uint64_t seed);

/// Runs every cell (in parallel across cells) and writes all reports into config.output_dir.
ExperimentResult run_experiment(const ExperimentConfig& config);
/// The same, for a caller that already holds the model and data.
ExperimentResult run_experiment(const ExperimentConfig& config, const DetectorCheckpoint& checkpoint,
                                const Dataset& data);

/// Seed-averaged comparison: rows = conditions, columns = policies, with gain vs source_only.
struct ReportTable {
  std::string csv;
  std::string text;
};
ReportTable render_report(std::span<const MetricsRecord> records);

/// Writes records.csv, comparison.csv/.txt, alpha.csv, histograms.csv, metrics/*.jsonl and timing.json.
void write_reports(const ExperimentResult& result, const std::filesystem::path& dir);

/// image,name,class_id,score,cx,cy,w,h per detection.
void write_detections_csv(std::span<const Detection> detections, std::span<const std::string> names,
                          std::ostream& out);
/// Reads write_detections_csv output; image indices are resolved by name against `names`.
std::vector<Detection> read_detections_csv(const std::filesystem::path& path, std::span<const std::string> names);

/// Applies the output-root override to a path given on the command line or in a config.
std::filesystem::path resolve_output(const std::filesystem::path& path);

}  // namespace monotta
