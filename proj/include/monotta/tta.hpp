#pragma once

#include "monotta/detection.hpp"
#include "monotta/image.hpp"
#include "monotta/layers.hpp"
#include "monotta/losses.hpp"
#include "monotta/optimizer.hpp"
#include "monotta/threshold.hpp"

#include <concepts>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace monotta {

/// Base learning rate the reference toy detector is trained with.
inline constexpr double kToyBaseLearningRate = 1e-3;

struct TTAConfig {
  double lambda_balance = 1.0;
  double beta = 0.1;
  double eta = 0.05;
  double gamma = 0.2;
  int n_max = 20;
  int batch_size = 16;
  double learning_rate = 0.5 * kToyBaseLearningRate;
  double momentum = 0.9;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

inline TTAConfig validated(TTAConfig config) {
  config.validate();
  return config;
}

/// Something that maps an image batch to a heatmap plus box regressions and
/// can backpropagate a heatmap gradient into its parameters.
template <typename M>
concept DetectionModel = requires(M& m, const Tensor4<typename M::Scalar_t>& x) {
  typename M::Scalar_t;
  { m.forward(x, NormMode::kBatchStats).heatmap } -> std::convertible_to<HeatmapBatch<typename M::Scalar_t>>;
  m.backward(x, x, x);
  m.zero_grad();
  { m.parameters() } -> std::same_as<std::vector<Parameter<typename M::Scalar_t>*>>;
  { m.architecture().stride } -> std::convertible_to<Index>;
};

/// The normalization-affine subset of a model's parameters (the only ones adaptation touches).
template <typename Scalar>
struct AdaptableParameterSet {
  std::vector<Parameter<Scalar>*> handles;
  std::vector<Parameter<Scalar>*> frozen;

  Index scalar_count() const {
    Index n = 0;
    for (const auto* p : handles) n += p->size();
    return n;
  }
  std::vector<Vector<Scalar>> snapshot() const {
    std::vector<Vector<Scalar>> out;
    for (const auto* p : handles) out.push_back(p->value);
    return out;
  }
  void restore(const std::vector<Vector<Scalar>>& values) {
    if (values.size() != handles.size()) throw std::invalid_argument("restore: snapshot size mismatch");
    for (std::size_t i = 0; i < handles.size(); ++i) handles[i]->value = values[i];
  }
};

template <DetectionModel Model>
AdaptableParameterSet<typename Model::Scalar_t> select_adaptable_parameters(Model& model) {
  AdaptableParameterSet<typename Model::Scalar_t> set;
  for (auto* p : model.parameters()) (p->norm_affine ? set.handles : set.frozen).push_back(p);
  if (set.handles.empty()) throw std::invalid_argument("select_adaptable_parameters: model has no normalization layers");
  return set;
}

/// Hex SHA-256 over the raw bytes of the given parameters, in order.
std::string sha256_hex(std::span<const unsigned char> bytes);

template <typename Scalar>
std::string parameter_fingerprint(std::span<Parameter<Scalar>* const> params) {
  std::vector<unsigned char> bytes;
  for (const auto* p : params) {
    const auto* raw = reinterpret_cast<const unsigned char*>(p->value.data());
    bytes.insert(bytes.end(), raw, raw + p->value.size() * static_cast<Index>(sizeof(Scalar)));
  }
  return sha256_hex(bytes);
}

struct LossBreakdown {
  double l_ao = 0;
  double l_nreg = 0;
  double total = 0;
  int n_high = 0;  // slots with s >= alpha
  int n_low = 0;   // slots with eta <= s < alpha
  std::vector<int> per_class_counts;
  /// Mean score of the sampled negative classes over valid slots with s >= eta.
  std::optional<double> negative_mean_score;
};

/// One record of the per-batch metrics log.
struct BatchMetrics {
  std::string policy;
  std::int64_t step = 0;
  std::optional<double> alpha;
  LossBreakdown loss;
  int detections = 0;
  std::optional<double> mean_score;  // mean reported detection score
  bool updated = false;              // whether a gradient step was taken
};

struct StepResult {
  std::vector<Detection> detections;
  BatchMetrics metrics;
};

/// An online test-time policy: consumes one batch, reports its detections.
template <typename Scalar>
class AdaptationPolicy {
 public:
  virtual ~AdaptationPolicy() = default;
  virtual std::string_view name() const = 0;
  virtual StepResult step(const Tensor4<Scalar>& images, int first_image_index) = 0;
};

namespace detail {

template <typename Scalar>
std::optional<double> mean_detection_score(const std::vector<Detection>& detections) {
  if (detections.empty()) return std::nullopt;
  double sum = 0;
  for (const auto& d : detections) sum += d.score;
  return sum / static_cast<double>(detections.size());
}

template <typename Scalar>
std::optional<double> negative_mean(const PeakDecoding<Scalar>& peaks, const Eigen::MatrixXi& negatives, double eta) {
  double sum = 0;
  int count = 0;
  for (Index i = 0; i < peaks.scores.batch(); ++i) {
    for (Index j = 0; j < peaks.scores.slots(); ++j) {
      if (!peaks.scores.valid(i, j) || static_cast<double>(peaks.scores.scores(i, j)) < eta) continue;
      sum += static_cast<double>(peaks.multi(i, j, negatives(i, j)));
      ++count;
    }
  }
  if (count == 0) return std::nullopt;
  return sum / count;
}

/// Zeroes all gradients and backpropagates a heatmap-only gradient.
template <typename Model, typename Output, typename Scalar>
void backward_heatmap_only(Model& model, const Output& out, const Tensor4<Scalar>& d_heatmap) {
  model.zero_grad();
  model.backward(d_heatmap, Tensor4<Scalar>(out.size.batch(), out.size.channels(), out.size.height(), out.size.width()),
                 Tensor4<Scalar>(out.offset.batch(), out.offset.channels(), out.offset.height(), out.offset.width()));
}

}  // namespace detail

/// Reliability-driven adaptation with the negative-learning regularizer.
///
/// Each step runs the model with current-batch normalization statistics,
/// reports the resulting detections, updates the adaptive threshold, then
/// takes one momentum-SGD step on the normalization affine parameters.
template <DetectionModel Model>
class MonoTtaAdapter final : public AdaptationPolicy<typename Model::Scalar_t> {
 public:
  using Scalar = typename Model::Scalar_t;

  MonoTtaAdapter(Model& model, TTAConfig config)
      : model_(model),
        config_(validated(config)),
        params_(select_adaptable_parameters(model)),
        optimizer_(params_.handles, config.learning_rate, config.momentum),
        state_(ThresholdState::initial(config.gamma, config.beta)) {}

  std::string_view name() const override { return "monotta"; }
  const ThresholdState& threshold() const { return state_; }
  const AdaptableParameterSet<Scalar>& adaptable() const { return params_; }

  StepResult step(const Tensor4<Scalar>& images, int first_image_index) override {
    if (images.batch() > config_.batch_size) throw std::invalid_argument("adapt_step: batch larger than configured");
    const auto out = model_.forward(images, NormMode::kBatchStats);
    const auto peaks = extract_peaks(out.heatmap, config_.n_max);

    StepResult result;
    result.detections = decode_detections(peaks.scores, out.size, out.offset,
                                          static_cast<double>(model_.architecture().stride), config_.eta,
                                          first_image_index);

    state_ = update_threshold(state_, peaks.scores);
    const double alpha = state_.alpha;
    const auto ao = adaptive_optimization_loss(peaks.scores, alpha);
    const auto negatives = sample_negative_classes(peaks.multi, derive_seed(config_.seed, static_cast<std::uint64_t>(state_.step)));
    const auto nreg = negative_regularization_loss(peaks.multi, peaks.scores, negatives, config_.eta, alpha);

    auto& m = result.metrics;
    m.policy = std::string(name());
    m.step = state_.step;
    m.alpha = alpha;
    m.loss.l_ao = static_cast<double>(ao.value);
    m.loss.l_nreg = static_cast<double>(nreg.value);
    m.loss.total = combined_loss(m.loss.l_ao, m.loss.l_nreg, config_.lambda_balance);
    m.loss.n_high = ao.selected;
    m.loss.n_low = nreg.selected;
    m.loss.per_class_counts = nreg.per_class_counts;
    m.loss.negative_mean_score = detail::negative_mean(peaks, negatives, config_.eta);
    m.detections = static_cast<int>(result.detections.size());
    m.mean_score = detail::mean_detection_score<Scalar>(result.detections);

    const bool has_objective = ao.selected > 0 || (config_.lambda_balance > 0 && nreg.selected > 0);
    if (has_objective) {
      Tensor4<Scalar> d_heatmap(out.heatmap.batch(), out.heatmap.classes(), out.heatmap.height(), out.heatmap.width());
      scatter_score_gradient(peaks.scores, ao.grad, d_heatmap);
      if (config_.lambda_balance > 0) {
        const RowMatrix<Scalar> scaled = nreg.grad * static_cast<Scalar>(config_.lambda_balance);
        scatter_multi_gradient(peaks.scores, scaled, d_heatmap);
      }
      detail::backward_heatmap_only(model_, out, d_heatmap);
      optimizer_.step();
      m.updated = true;
    }
    return result;
  }

 private:
  Model& model_;
  TTAConfig config_;
  AdaptableParameterSet<Scalar> params_;
  SgdMomentum<Scalar> optimizer_;
  ThresholdState state_;
};

struct AdaptationRun {
  std::vector<Detection> detections;
  std::vector<BatchMetrics> log;
};

/// Drives a policy over a batch source exactly once, in stream order.
/// Source must provide std::optional<ImageBatch> next().
template <typename Scalar, typename Source>
AdaptationRun run_adaptation(AdaptationPolicy<Scalar>& policy, Source& source) {
  AdaptationRun run;
  while (std::optional<ImageBatch> batch = source.next()) {
    if (batch->images.empty()) continue;
    StepResult step = policy.step(to_tensor<Scalar>(batch->images), 0);
    for (auto& d : step.detections) d.image_index = batch->indices.at(static_cast<std::size_t>(d.image_index));
    run.detections.insert(run.detections.end(), step.detections.begin(), step.detections.end());
    run.log.push_back(std::move(step.metrics));
  }
  return run;
}

/// Iterates fixed-size batches over an in-memory image list.
class VectorBatchSource {
 public:
  VectorBatchSource(std::span<const Image> images, int batch_size) : images_(images), batch_size_(batch_size) {
    if (batch_size < 1) throw std::invalid_argument("batch size must be positive");
  }
  std::optional<ImageBatch> next() {
    if (cursor_ >= images_.size()) return std::nullopt;
    ImageBatch batch;
    const std::size_t end = std::min(images_.size(), cursor_ + static_cast<std::size_t>(batch_size_));
    for (; cursor_ < end; ++cursor_) {
      batch.images.push_back(images_[cursor_]);
      batch.indices.push_back(static_cast<int>(cursor_));
    }
    return batch;
  }

 private:
  std::span<const Image> images_;
  int batch_size_;
  std::size_t cursor_ = 0;
};

/// {step, alpha, l_ao, l_nreg, total, n_high, n_low, per_class_counts, mean_score, ...} per line.
void write_metrics_jsonl(std::span<const BatchMetrics> log, std::ostream& out);
/// step,alpha rows for plotting.
void write_alpha_csv(std::span<const BatchMetrics> log, std::ostream& out);

}  // namespace monotta
