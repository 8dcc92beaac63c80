#include "monotta/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace monotta {

namespace {

std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string fmt(const std::optional<double>& v, int digits = 6) { return v ? fmt(*v, digits) : ""; }

int condition_rank(const Condition& c) { return c.kind ? 1 + static_cast<int>(*c.kind) : 0; }

bool condition_less(const Condition& a, const Condition& b) {
  if (condition_rank(a) != condition_rank(b)) return condition_rank(a) < condition_rank(b);
  return a.severity < b.severity;
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

// Forwards batches while remembering where each one starts in the stream.
template <typename Source>
class RecordingSource {
 public:
  explicit RecordingSource(Source& inner) : inner_(inner) {}
  std::optional<ImageBatch> next() {
    auto batch = inner_.next();
    if (batch && !batch->images.empty()) first_indices.push_back(batch->indices.front());
    return batch;
  }
  std::vector<int> first_indices;

 private:
  Source& inner_;
};

int quintile(int index, int count) { return std::min(kQuintiles - 1, index * kQuintiles / std::max(1, count)); }

void summarize(MetricsRecord& rec, const AdaptationRun& run, std::span<const int> batch_starts, int images,
               const ExperimentConfig& config) {
  rec.images = images;
  rec.batches = static_cast<int>(run.log.size());
  std::array<double, kQuintiles> score_sum{};
  std::array<int, kQuintiles> score_n{};
  for (const auto& d : run.detections) {
    const int q = quintile(d.image_index, images);
    score_sum[q] += d.score;
    ++score_n[q];
    if (d.score >= config.tta.gamma) ++rec.detections_above_gamma[q];
  }
  std::array<double, kQuintiles> neg_sum{};
  std::array<int, kQuintiles> neg_n{};
  for (std::size_t b = 0; b < run.log.size(); ++b) {
    const auto& m = run.log[b];
    const int q = quintile(batch_starts[b], images);
    rec.n_high[q] += m.loss.n_high;
    rec.n_low[q] += m.loss.n_low;
    if (m.loss.negative_mean_score) {
      neg_sum[q] += *m.loss.negative_mean_score;
      ++neg_n[q];
    }
    if (m.updated) ++rec.updates;
    if (m.alpha) {
      if (!rec.alpha_first) rec.alpha_first = m.alpha;
      rec.alpha_last = m.alpha;
      rec.alpha_min = std::min(rec.alpha_min.value_or(*m.alpha), *m.alpha);
      rec.alpha_max = std::max(rec.alpha_max.value_or(*m.alpha), *m.alpha);
    }
  }
  for (int q = 0; q < kQuintiles; ++q) {
    if (score_n[q]) rec.mean_score[q] = score_sum[q] / score_n[q];
    if (neg_n[q]) rec.negative_mean_score[q] = neg_sum[q] / neg_n[q];
  }
  rec.histogram = score_histogram(run.detections, config.histogram_bins, config.tta.eta, config.tta.gamma,
                                  rec.alpha_last.value_or(config.tta.gamma));
}

std::string cell_stem(const MetricsRecord& r) {
  return std::string(policy_name(r.policy)) + "__" + r.condition.label() + "__seed" + std::to_string(r.seed);
}

}  // namespace

std::string Condition::label() const {
  return kind ? std::string(corruption_name(*kind)) + "@" + std::to_string(severity) : "clean";
}

void ExperimentConfig::validate() const {
  if (policies.empty()) throw std::invalid_argument("experiment needs at least one policy");
  if (seeds.empty()) throw std::invalid_argument("experiment needs at least one seed");
  if (conditions.empty()) throw std::invalid_argument("experiment needs at least one condition");
  for (const auto& c : conditions) {
    if (c.kind && (c.severity < 1 || c.severity > 5)) {
      throw std::invalid_argument("severity must be in 1..5 for " + std::string(corruption_name(*c.kind)));
    }
  }
  if (!(iou_threshold > 0 && iou_threshold < 1)) throw std::invalid_argument("iou_threshold must be in (0, 1)");
  if (histogram_bins < 2) throw std::invalid_argument("histogram_bins must be >= 2");
  if (threads < 0) throw std::invalid_argument("threads must be >= 0");
  tta.validate();
}

nlohmann::json to_json(const TTAConfig& c) {
  return {{"lambda", c.lambda_balance}, {"beta", c.beta},
          {"eta", c.eta},               {"gamma", c.gamma},
          {"n_max", c.n_max},           {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate}, {"momentum", c.momentum},
          {"seed", c.seed}};
}

TTAConfig tta_from_json(const nlohmann::json& j, TTAConfig c) {
  if (!j.is_object()) throw std::invalid_argument("tta config must be an object");
  const nlohmann::json known = to_json(TTAConfig{});
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw std::invalid_argument("unknown tta key: " + key);
  }
  auto read = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  read("lambda", c.lambda_balance);
  read("beta", c.beta);
  read("eta", c.eta);
  read("gamma", c.gamma);
  read("n_max", c.n_max);
  read("batch_size", c.batch_size);
  read("learning_rate", c.learning_rate);
  read("momentum", c.momentum);
  read("seed", c.seed);
  return c;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json conditions = nlohmann::json::array();
  for (const auto& cond : c.conditions) {
    if (cond.kind) {
      conditions.push_back({{"kind", corruption_name(*cond.kind)}, {"severity", cond.severity}});
    } else {
      conditions.push_back({{"kind", "clean"}});
    }
  }
  nlohmann::json policies = nlohmann::json::array();
  for (auto p : c.policies) policies.push_back(policy_name(p));
  return {{"checkpoint", c.checkpoint.string()},
          {"data", c.data.string()},
          {"conditions", conditions},
          {"policies", policies},
          {"tta", to_json(c.tta)},
          {"seeds", c.seeds},
          {"output_dir", c.output_dir.string()},
          {"iou_threshold", c.iou_threshold},
          {"histogram_bins", c.histogram_bins},
          {"threads", c.threads}};
}

ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("experiment config must be an object");
  const nlohmann::json known = to_json(ExperimentConfig{});
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw std::invalid_argument("unknown experiment key: " + key);
  }
  ExperimentConfig c;
  try {
    if (j.contains("checkpoint")) c.checkpoint = j.at("checkpoint").get<std::string>();
    if (j.contains("data")) c.data = j.at("data").get<std::string>();
    if (j.contains("conditions")) {
      for (const auto& item : j.at("conditions")) {
        const auto name = item.at("kind").get<std::string>();
        if (name == "clean") {
          c.conditions.push_back({});
          continue;
        }
        const auto kind = parse_corruption(name);
        if (!kind) throw std::invalid_argument("unknown corruption kind: " + name);
        c.conditions.push_back({kind, item.at("severity").get<int>()});
      }
    }
    if (j.contains("policies")) {
      for (const auto& item : j.at("policies")) {
        const auto name = item.get<std::string>();
        const auto policy = parse_policy(name);
        if (!policy) throw std::invalid_argument("unknown policy: " + name);
        c.policies.push_back(*policy);
      }
    }
    if (j.contains("tta")) c.tta = tta_from_json(j.at("tta"));
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("iou_threshold")) c.iou_threshold = j.at("iou_threshold").get<double>();
    if (j.contains("histogram_bins")) c.histogram_bins = j.at("histogram_bins").get<int>();
    if (j.contains("threads")) c.threads = j.at("threads").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed experiment config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config " + path.string());
  try {
    return experiment_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config " + path.string() + " is not valid JSON: " + e.what());
  }
}

bool ExperimentResult::any_failed() const {
  return std::any_of(records.begin(), records.end(), [](const MetricsRecord& r) { return !r.ok; });
}

APResult evaluate_stream(std::span<const Detection> detections, std::span<const LabeledImage> ground_truth,
                         int classes, double gamma, double iou_threshold) {
  std::vector<Detection> kept;
  for (const auto& d : detections) {
    if (d.score >= gamma) kept.push_back(d);
  }
  return average_precision_r40(kept, ground_truth, classes, iou_threshold);
}

MetricsRecord run_cell(const DetectorCheckpoint& checkpoint, const Dataset& data, const ExperimentConfig& config,
                       PolicyKind policy, const Condition& condition, std::uint64_t seed) {
  MetricsRecord rec;
  rec.policy = policy;
  rec.condition = condition;
  rec.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    ToyDetector<float> model = checkpoint.model;
    TTAConfig tta = config.tta;
    tta.seed = seed;
    auto params = select_adaptable_parameters(model);
    const std::string frozen_before = parameter_fingerprint<float>(params.frozen);
    auto adapter = make_policy(policy, model, tta);

    std::vector<Image> images;
    std::vector<std::string> names;
    for (const auto& item : data) {
      images.push_back(item.image);
      names.push_back(item.name);
    }
    AdaptationRun run;
    std::vector<int> starts;
    if (condition.kind) {
      auto stream = CorruptedStream::from_images(std::move(images), std::move(names),
                                                 {*condition.kind, condition.severity, seed}, tta.batch_size);
      RecordingSource source(stream);
      run = run_adaptation(*adapter, source);
      starts = std::move(source.first_indices);
      for (const auto& row : stream.manifest()) {
        if (row.skipped) throw std::runtime_error("stream skipped image " + row.filename);
      }
    } else {
      VectorBatchSource clean(images, tta.batch_size);
      RecordingSource source(clean);
      run = run_adaptation(*adapter, source);
      starts = std::move(source.first_indices);
    }
    rec.ap = evaluate_stream(run.detections, data, static_cast<int>(model.architecture().classes), tta.gamma,
                             config.iou_threshold);
    summarize(rec, run, starts, static_cast<int>(data.size()), config);
    rec.frozen_unchanged = parameter_fingerprint<float>(params.frozen) == frozen_before;
    rec.log = std::move(run.log);
  } catch (const std::exception& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rec;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const DetectorCheckpoint& checkpoint,
                                const Dataset& data) {
  config.validate();
  if (data.empty()) throw std::invalid_argument("experiment has no images");

  struct Cell {
    Condition condition;
    PolicyKind policy;
    std::uint64_t seed;
    std::size_t seed_order;
  };
  std::vector<Cell> cells;
  for (const auto& cond : config.conditions) {
    for (auto policy : config.policies) {
      for (std::size_t s = 0; s < config.seeds.size(); ++s) cells.push_back({cond, policy, config.seeds[s], s});
    }
  }
  std::stable_sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
    if (condition_less(a.condition, b.condition)) return true;
    if (condition_less(b.condition, a.condition)) return false;
    if (a.policy != b.policy) return a.policy < b.policy;
    return a.seed_order < b.seed_order;
  });

  ExperimentResult result;
  result.records.resize(cells.size());
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers =
      std::min<std::size_t>(cells.size(), config.threads > 0 ? static_cast<std::size_t>(config.threads) : hw);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      const auto& c = cells[i];
      result.records[i] = run_cell(checkpoint, data, config, c.policy, c.condition, c.seed);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  write_reports(result, resolve_output(config.output_dir));
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const Architecture arch;
  const DetectorCheckpoint checkpoint = load_checkpoint(config.checkpoint, &arch);
  const Dataset data = config.data.empty() ? make_toy_val(checkpoint.train_config) : load_dataset(config.data);
  return run_experiment(config, checkpoint, data);
}

ReportTable render_report(std::span<const MetricsRecord> records) {
  std::vector<Condition> conditions;
  std::vector<PolicyKind> policies;
  std::map<std::pair<std::string, PolicyKind>, std::pair<double, int>> sums;
  for (const auto& r : records) {
    if (std::find(conditions.begin(), conditions.end(), r.condition) == conditions.end()) {
      conditions.push_back(r.condition);
    }
    if (std::find(policies.begin(), policies.end(), r.policy) == policies.end()) policies.push_back(r.policy);
    if (!r.ok) continue;
    auto& [sum, n] = sums[{r.condition.label(), r.policy}];
    sum += r.ap.mean_ap;
    ++n;
  }
  std::stable_sort(conditions.begin(), conditions.end(), condition_less);
  std::sort(policies.begin(), policies.end());

  auto mean = [&](const Condition& c, PolicyKind p) -> std::optional<double> {
    auto it = sums.find({c.label(), p});
    if (it == sums.end() || it->second.second == 0) return std::nullopt;
    return it->second.first / it->second.second;
  };
  auto gain = [&](const Condition& c, PolicyKind p) -> std::optional<double> {
    const auto base = mean(c, PolicyKind::kSourceOnly), value = mean(c, p);
    if (!base || !value || *base <= 0) return std::nullopt;
    return *value / *base - 1.0;
  };

  std::ostringstream csv;
  csv << "condition";
  for (auto p : policies) csv << ',' << policy_name(p) << ",gain_" << policy_name(p);
  csv << '\n';
  for (const auto& c : conditions) {
    csv << c.label();
    for (auto p : policies) csv << ',' << fmt(mean(c, p)) << ',' << fmt(gain(c, p));
    csv << '\n';
  }

  std::ostringstream text;
  std::size_t label_width = 9;
  for (const auto& c : conditions) label_width = std::max(label_width, c.label().size());
  text << std::left << std::setw(static_cast<int>(label_width)) << "condition";
  for (auto p : policies) text << "  " << std::right << std::setw(22) << policy_name(p);
  text << '\n';
  for (const auto& c : conditions) {
    text << std::left << std::setw(static_cast<int>(label_width)) << c.label();
    for (auto p : policies) {
      std::string cell = "n/a";
      if (const auto m = mean(c, p)) {
        cell = fmt(100.0 * *m, 2);
        if (const auto g = gain(c, p)) cell += " (" + std::string(*g >= 0 ? "+" : "") + fmt(100.0 * *g, 1) + "%)";
      }
      text << "  " << std::right << std::setw(22) << cell;
    }
    text << '\n';
  }
  text << "cells are mAP (AP_R40, IoU 0.5) x100 averaged over seeds; parentheses give the gain over source_only\n";
  return {csv.str(), text.str()};
}

void write_reports(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  int classes = 0;
  for (const auto& r : result.records) classes = std::max(classes, static_cast<int>(r.ap.per_class.size()));

  {
    auto out = open_out(dir / "records.csv");
    out << "policy,condition,kind,severity,seed,status,map";
    for (int k = 0; k < classes; ++k) out << ",ap_" << shape_name(static_cast<ShapeClass>(k));
    out << ",alpha_first,alpha_last,alpha_min,alpha_max,images,batches,updates";
    for (const char* field : {"above_gamma", "mean_score", "n_high", "n_low", "negative_score"}) {
      for (int q = 1; q <= kQuintiles; ++q) out << ',' << field << "_q" << q;
    }
    out << ",hist_total,hist_below_gamma,hist_at_or_above_alpha,frozen_unchanged,error\n";
    for (const auto& r : result.records) {
      out << policy_name(r.policy) << ',' << r.condition.label() << ','
          << (r.condition.kind ? corruption_name(*r.condition.kind) : "clean") << ',' << r.condition.severity << ','
          << r.seed << ',' << (r.ok ? "ok" : "failed") << ',' << (r.ok ? fmt(r.ap.mean_ap) : "");
      for (int k = 0; k < classes; ++k) {
        out << ',' << (k < static_cast<int>(r.ap.per_class.size()) ? fmt(r.ap.per_class[k]) : "");
      }
      out << ',' << fmt(r.alpha_first) << ',' << fmt(r.alpha_last) << ',' << fmt(r.alpha_min) << ','
          << fmt(r.alpha_max) << ',' << r.images << ',' << r.batches << ',' << r.updates;
      for (int v : r.detections_above_gamma) out << ',' << v;
      for (const auto& v : r.mean_score) out << ',' << fmt(v);
      for (int v : r.n_high) out << ',' << v;
      for (int v : r.n_low) out << ',' << v;
      for (const auto& v : r.negative_mean_score) out << ',' << fmt(v);
      std::string error = r.error;
      std::replace(error.begin(), error.end(), ',', ';');
      std::replace(error.begin(), error.end(), '\n', ' ');
      out << ',' << r.histogram.total << ',' << r.histogram.below_gamma << ',' << r.histogram.at_or_above_alpha << ','
          << (r.frozen_unchanged ? "true" : "false") << ',' << error << '\n';
    }
  }

  const ReportTable table = render_report(result.records);
  open_out(dir / "comparison.csv") << table.csv;
  open_out(dir / "comparison.txt") << table.text;

  {
    auto out = open_out(dir / "alpha.csv");
    out << "policy,condition,seed,step,alpha\n";
    for (const auto& r : result.records) {
      for (const auto& m : r.log) {
        if (m.alpha) out << policy_name(r.policy) << ',' << r.condition.label() << ',' << r.seed << ',' << m.step << ','
                         << fmt(*m.alpha, 9) << '\n';
      }
    }
  }
  {
    auto out = open_out(dir / "histograms.csv");
    out << "policy,condition,seed,bin_lo,bin_hi,count\n";
    for (const auto& r : result.records) {
      for (std::size_t b = 0; b < r.histogram.counts.size(); ++b) {
        out << policy_name(r.policy) << ',' << r.condition.label() << ',' << r.seed << ','
            << fmt(r.histogram.edges[b], 4) << ',' << fmt(r.histogram.edges[b + 1], 4) << ',' << r.histogram.counts[b]
            << '\n';
      }
    }
  }
  for (const auto& r : result.records) {
    auto out = open_out(dir / "metrics" / (cell_stem(r) + ".jsonl"));
    write_metrics_jsonl(r.log, out);
  }
  {
    nlohmann::json timing = nlohmann::json::array();
    double total = 0;
    for (const auto& r : result.records) {
      timing.push_back({{"cell", cell_stem(r)}, {"wall_seconds", r.wall_seconds}});
      total += r.wall_seconds;
    }
    open_out(dir / "timing.json") << nlohmann::json{{"cells", timing}, {"total_cell_seconds", total}}.dump(2) << '\n';
  }
}

void write_detections_csv(std::span<const Detection> detections, std::span<const std::string> names,
                          std::ostream& out) {
  out << "image,name,class_id,score,cx,cy,w,h\n";
  for (const auto& d : detections) {
    const auto idx = static_cast<std::size_t>(d.image_index);
    out << d.image_index << ',' << (idx < names.size() ? names[idx] : "") << ',' << d.class_id << ','
        << fmt(d.score, 9) << ',' << fmt(d.box.cx) << ',' << fmt(d.box.cy) << ',' << fmt(d.box.w) << ','
        << fmt(d.box.h) << '\n';
  }
}

std::vector<Detection> read_detections_csv(const std::filesystem::path& path, std::span<const std::string> names) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read detections " + path.string());
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = static_cast<int>(i);
  std::vector<Detection> out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream row(line);
    for (std::string f; std::getline(row, f, ',');) fields.push_back(f);
    if (fields.size() != 8) throw std::runtime_error("malformed detection row: " + line);
    auto it = index.find(fields[1]);
    if (it == index.end()) throw std::runtime_error("detection refers to unknown image: " + fields[1]);
    Detection d;
    d.image_index = it->second;
    d.class_id = std::stoi(fields[2]);
    d.score = std::stod(fields[3]);
    d.box = {std::stod(fields[4]), std::stod(fields[5]), std::stod(fields[6]), std::stod(fields[7])};
    out.push_back(d);
  }
  return out;
}

std::filesystem::path resolve_output(const std::filesystem::path& path) {
  const char* root = std::getenv(kOutputRootEnv);
  if (!root || !*root || path.is_absolute()) return path;
  return std::filesystem::path(root) / path;
}

}  // namespace monotta
