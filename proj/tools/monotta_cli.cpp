// Command-line front end: train-toy, corrupt, adapt, evaluate, compare.
// Exit codes: 0 success, 1 a run or cell failed, 2 bad arguments or config.

#include "monotta/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

using namespace monotta;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitBadConfig = 2;

struct TtaFlags {
  TTAConfig config;
  void attach(CLI::App* cmd) {
    cmd->add_option("--lambda", config.lambda_balance, "Weight of the negative regularizer")->capture_default_str();
    cmd->add_option("--beta", config.beta, "Threshold EMA rate")->capture_default_str();
    cmd->add_option("--eta", config.eta, "Score floor for eligible slots")->capture_default_str();
    cmd->add_option("--gamma", config.gamma, "Inference score threshold")->capture_default_str();
    cmd->add_option("--n-max", config.n_max, "Peaks kept per image")->capture_default_str();
    cmd->add_option("--batch-size", config.batch_size, "Stream batch size")->capture_default_str();
    cmd->add_option("--lr", config.learning_rate, "Adaptation learning rate")->capture_default_str();
    cmd->add_option("--momentum", config.momentum, "SGD momentum")->capture_default_str();
  }
};

std::filesystem::path images_dir(const std::filesystem::path& dir) {
  return std::filesystem::is_directory(dir / "images") ? dir / "images" : dir;
}

CorruptionKind require_kind(const std::string& text) {
  const auto kind = parse_corruption(text);
  if (!kind) throw std::invalid_argument("unknown corruption kind: " + text);
  return *kind;
}

Condition parse_condition(const std::string& text) {
  if (text == "clean") return {};
  const auto at = text.find('@');
  if (at == std::string::npos) throw std::invalid_argument("condition must be KIND@SEVERITY or clean: " + text);
  return {require_kind(text.substr(0, at)), std::stoi(text.substr(at + 1))};
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

// ---- train-toy

struct TrainArgs {
  TrainConfig config;
  std::filesystem::path out = "toy_detector.ckpt";
  std::filesystem::path save_val;
};

int run_train(const TrainArgs& args) {
  const auto splits = make_toy_splits(args.config);
  std::printf("training on %zu scenes, validating on %zu\n", splits.train.size(), splits.val.size());
  auto trained = train_detector(splits.train, splits.val, args.config, [&](int epoch, double loss) {
    std::printf("epoch %d/%d loss %.4f\n", epoch + 1, args.config.epochs, loss);
    std::fflush(stdout);
  });
  const auto path = resolve_output(args.out);
  save_checkpoint({trained.model, args.config, trained.clean_map}, path);
  std::printf("clean mAP %.4f, checkpoint written to %s\n", trained.clean_map, path.c_str());
  if (!args.save_val.empty()) save_dataset(splits.val, resolve_output(args.save_val));
  return kExitOk;
}

// ---- corrupt

struct CorruptArgs {
  std::filesystem::path in, out;
  std::string kind = "gaussian_noise";
  int severity = 3;
  std::uint64_t seed = 0;
};

int run_corrupt(const CorruptArgs& args) {
  const CorruptionSpec spec{require_kind(args.kind), args.severity, args.seed};
  if (spec.severity < 1 || spec.severity > 5) throw std::invalid_argument("severity must be in 1..5");
  auto stream = CorruptedStream::from_directory(images_dir(args.in), spec, 1);
  const auto out_dir = resolve_output(args.out);
  std::filesystem::create_directories(out_dir);
  int written = 0;
  while (auto batch = stream.next()) {
    const auto stem = std::filesystem::path(batch->names.front()).stem().string();
    write_png(batch->images.front(), out_dir / (stem + ".png"));
    ++written;
  }
  auto manifest = open_out(out_dir / "manifest.csv");
  write_manifest(stream.manifest(), manifest);
  std::printf("%d images written, %zu skipped\n", written, stream.manifest().size() - written);
  return kExitOk;
}

// ---- adapt

struct AdaptArgs {
  std::filesystem::path checkpoint, in, out = "adapt";
  std::string policy = "monotta";
  std::string kind;
  int severity = 3;
  std::uint64_t seed = 0;
  TtaFlags tta;
};

int run_adapt(const AdaptArgs& args) {
  const auto policy = parse_policy(args.policy);
  if (!policy) throw std::invalid_argument("unknown policy: " + args.policy);
  TTAConfig tta = args.tta.config;
  tta.seed = args.seed;
  tta.validate();
  CorruptionSpec spec{CorruptionKind::kGaussianNoise, args.severity, args.seed};
  if (!args.kind.empty()) spec.kind = require_kind(args.kind);

  const Architecture arch;
  auto checkpoint = load_checkpoint(args.checkpoint, &arch);
  const auto dir = images_dir(args.in);
  // An empty --kind streams the images as they are.
  auto stream = CorruptedStream::from_directory(dir, spec, tta.batch_size);
  std::vector<std::string> names;
  auto adapter = make_policy(*policy, checkpoint.model, tta);
  AdaptationRun run;
  if (args.kind.empty()) {
    std::vector<Image> images;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      const auto ext = entry.path().extension().string();
      if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    for (const auto& n : names) images.push_back(read_image(dir / n));
    VectorBatchSource source(images, tta.batch_size);
    run = run_adaptation(*adapter, source);
  } else {
    run = run_adaptation(*adapter, stream);
    for (const auto& row : stream.manifest()) names.push_back(row.filename);
  }
  for (auto& n : names) n = std::filesystem::path(n).stem().string();

  const auto out_dir = resolve_output(args.out);
  auto det = open_out(out_dir / "detections.csv");
  write_detections_csv(run.detections, names, det);
  auto metrics = open_out(out_dir / "metrics.jsonl");
  write_metrics_jsonl(run.log, metrics);
  auto alpha = open_out(out_dir / "alpha.csv");
  write_alpha_csv(run.log, alpha);
  if (!args.kind.empty()) {
    auto manifest = open_out(out_dir / "manifest.csv");
    write_manifest(stream.manifest(), manifest);
  }
  std::printf("%s: %zu batches, %zu detections written to %s\n", args.policy.c_str(), run.log.size(),
              run.detections.size(), out_dir.c_str());
  return kExitOk;
}

// ---- evaluate

struct EvaluateArgs {
  std::filesystem::path detections, data, out = "evaluation";
  double gamma = 0.2, eta = 0.05, iou = 0.5;
  int bins = 20;
};

int run_evaluate(const EvaluateArgs& args) {
  const Dataset data = load_dataset(args.data);
  std::vector<std::string> names;
  for (const auto& item : data) names.push_back(item.name);
  const auto detections = read_detections_csv(args.detections, names);
  std::vector<Detection> kept;
  for (const auto& d : detections) {
    if (d.score >= args.gamma) kept.push_back(d);
  }
  constexpr int kClasses = 3;
  const auto ap = average_precision_r40(kept, data, kClasses, args.iou);
  const auto out_dir = resolve_output(args.out);
  auto ap_csv = open_out(out_dir / "ap.csv");
  write_ap_csv(ap, ap_csv);
  auto matches = open_out(out_dir / "matches.jsonl");
  write_match_jsonl(kept, data, kClasses, args.iou, matches);
  const auto hist = score_histogram(detections, args.bins, args.eta, args.gamma, args.gamma);
  auto hist_csv = open_out(out_dir / "histogram.csv");
  hist_csv << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < hist.counts.size(); ++b) {
    hist_csv << hist.edges[b] << ',' << hist.edges[b + 1] << ',' << hist.counts[b] << '\n';
  }
  std::printf("mAP %.4f over %zu images (%zu detections >= %.2f)\n", ap.mean_ap, data.size(), kept.size(), args.gamma);
  return kExitOk;
}

// ---- compare

struct CompareArgs {
  std::filesystem::path experiment, checkpoint, data, out;
  std::vector<std::string> conditions, policies;
  std::vector<std::uint64_t> seeds;
  int threads = -1;
  TtaFlags tta;
};

int run_compare(const CompareArgs& args, CLI::App* cmd) {
  ExperimentConfig config = args.experiment.empty() ? ExperimentConfig{} : load_experiment(args.experiment);
  if (!args.checkpoint.empty()) config.checkpoint = args.checkpoint;
  if (!args.data.empty()) config.data = args.data;
  if (!args.out.empty()) config.output_dir = args.out;
  if (!args.conditions.empty()) {
    config.conditions.clear();
    for (const auto& c : args.conditions) config.conditions.push_back(parse_condition(c));
  }
  if (!args.policies.empty()) {
    config.policies.clear();
    for (const auto& p : args.policies) {
      const auto policy = parse_policy(p);
      if (!policy) throw std::invalid_argument("unknown policy: " + p);
      config.policies.push_back(*policy);
    }
  }
  if (!args.seeds.empty()) config.seeds = args.seeds;
  if (args.threads >= 0) config.threads = args.threads;
  // Only flags given explicitly override the experiment file.
  const TTAConfig& flags = args.tta.config;
  auto take = [&](const char* name, auto& field, const auto& value) {
    if (cmd->count(name)) field = value;
  };
  take("--lambda", config.tta.lambda_balance, flags.lambda_balance);
  take("--beta", config.tta.beta, flags.beta);
  take("--eta", config.tta.eta, flags.eta);
  take("--gamma", config.tta.gamma, flags.gamma);
  take("--n-max", config.tta.n_max, flags.n_max);
  take("--batch-size", config.tta.batch_size, flags.batch_size);
  take("--lr", config.tta.learning_rate, flags.learning_rate);
  take("--momentum", config.tta.momentum, flags.momentum);
  if (config.checkpoint.empty()) throw std::invalid_argument("compare needs a checkpoint");
  if (!std::filesystem::is_regular_file(config.checkpoint)) {
    throw std::invalid_argument("checkpoint not found: " + config.checkpoint.string());
  }
  config.validate();

  const auto result = run_experiment(config);
  std::fputs(render_report(result.records).text.c_str(), stdout);
  for (const auto& r : result.records) {
    if (!r.ok) {
      std::fprintf(stderr, "cell %s/%s/seed %llu failed: %s\n", std::string(policy_name(r.policy)).c_str(),
                   r.condition.label().c_str(), static_cast<unsigned long long>(r.seed), r.error.c_str());
    }
  }
  std::printf("reports written to %s\n", resolve_output(config.output_dir).c_str());
  return result.any_failed() ? kExitFailed : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MonoTTA test-time adaptation toolkit"};
  app.set_config("--config", "", "TOML file with option values; sections name subcommands");
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train-toy", "Train the toy detector and write a checkpoint");
  train_cmd->add_option("--out", train.out, "Checkpoint path")->capture_default_str();
  train_cmd->add_option("--epochs", train.config.epochs, "Training epochs")->capture_default_str();
  train_cmd->add_option("--seed", train.config.seed, "Seed for scenes, init and shuffling")->capture_default_str();
  train_cmd->add_option("--n-train", train.config.n_train, "Training scenes")->capture_default_str();
  train_cmd->add_option("--n-val", train.config.n_val, "Validation scenes")->capture_default_str();
  train_cmd->add_option("--batch-size", train.config.batch_size, "Training batch size")->capture_default_str();
  train_cmd->add_option("--lr", train.config.base_learning_rate, "Base learning rate")->capture_default_str();
  train_cmd->add_option("--target-map", train.config.target_map, "Required clean mAP")->capture_default_str();
  train_cmd->add_option("--save-val", train.save_val, "Also write the validation set as a dataset directory");

  CorruptArgs corrupt;
  auto* corrupt_cmd = app.add_subcommand("corrupt", "Write a corrupted copy of an image directory");
  corrupt_cmd->add_option("--in", corrupt.in, "Clean image directory")->required()->check(CLI::ExistingDirectory);
  corrupt_cmd->add_option("--out", corrupt.out, "Output directory")->required();
  corrupt_cmd->add_option("--kind", corrupt.kind, "Corruption kind")->capture_default_str();
  corrupt_cmd->add_option("--severity", corrupt.severity, "Severity 1..5")->capture_default_str();
  corrupt_cmd->add_option("--seed", corrupt.seed, "Stream seed")->capture_default_str();

  AdaptArgs adapt;
  auto* adapt_cmd = app.add_subcommand("adapt", "Run one adaptation policy over an image stream");
  adapt_cmd->add_option("--checkpoint", adapt.checkpoint, "Checkpoint path")->required()->check(CLI::ExistingFile);
  adapt_cmd->add_option("--in", adapt.in, "Image directory (or dataset directory)")->required()->check(CLI::ExistingDirectory);
  adapt_cmd->add_option("--out", adapt.out, "Output directory")->capture_default_str();
  adapt_cmd->add_option("--policy", adapt.policy, "source_only, bn_adapt, entropy_min or monotta")
      ->capture_default_str();
  adapt_cmd->add_option("--kind", adapt.kind, "Corrupt on the fly with this kind (default: none)");
  adapt_cmd->add_option("--severity", adapt.severity, "Severity for --kind")->capture_default_str();
  adapt_cmd->add_option("--seed", adapt.seed, "Seed for corruption and negative sampling")->capture_default_str();
  adapt.tta.attach(adapt_cmd);

  EvaluateArgs evaluate;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score a detections CSV against a labeled dataset");
  evaluate_cmd->add_option("--detections", evaluate.detections, "detections.csv from adapt")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--data", evaluate.data, "Dataset directory (images/ + annotations.csv)")
      ->required()
      ->check(CLI::ExistingDirectory);
  evaluate_cmd->add_option("--out", evaluate.out, "Output directory")->capture_default_str();
  evaluate_cmd->add_option("--gamma", evaluate.gamma, "Detections below this score are dropped")
      ->capture_default_str();
  evaluate_cmd->add_option("--eta", evaluate.eta, "Histogram score floor")->capture_default_str();
  evaluate_cmd->add_option("--iou", evaluate.iou, "IoU threshold")->capture_default_str();
  evaluate_cmd->add_option("--bins", evaluate.bins, "Histogram bins")->capture_default_str();

  CompareArgs compare;
  auto* compare_cmd = app.add_subcommand("compare", "Run a policy x condition x seed experiment");
  compare_cmd->add_option("--experiment", compare.experiment, "Experiment JSON (flags below override it)")
      ->check(CLI::ExistingFile);
  compare_cmd->add_option("--checkpoint", compare.checkpoint, "Checkpoint path");
  compare_cmd->add_option("--data", compare.data, "Dataset directory (default: the checkpoint's validation split)");
  compare_cmd->add_option("--out", compare.out, "Output directory");
  compare_cmd->add_option("--conditions", compare.conditions, "KIND@SEVERITY or clean, repeatable");
  compare_cmd->add_option("--policies", compare.policies, "Policies to compare");
  compare_cmd->add_option("--seeds", compare.seeds, "Seeds");
  compare_cmd->add_option("--threads", compare.threads, "Parallel cells (0 = all cores)");
  compare.tta.attach(compare_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitBadConfig;
  }

  try {
    if (*train_cmd) return run_train(train);
    if (*corrupt_cmd) return run_corrupt(corrupt);
    if (*adapt_cmd) return run_adapt(adapt);
    if (*evaluate_cmd) return run_evaluate(evaluate);
    if (*compare_cmd) return run_compare(compare, compare_cmd);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitBadConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailed;
  }
  return kExitBadConfig;
}
