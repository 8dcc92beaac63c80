#pragma once

#include "monotta/tta.hpp"

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>

namespace monotta {

enum class PolicyKind { kSourceOnly, kBnAdapt, kEntropyMin, kMonoTta };

std::string_view policy_name(PolicyKind kind);
/// Parses "source_only", "bn_adapt", "entropy_min", "monotta"; nullopt otherwise.
std::optional<PolicyKind> parse_policy(std::string_view text);

namespace detail {

/// Forward pass, peak decoding and detection reporting shared by the baselines.
template <DetectionModel Model>
auto forward_and_report(Model& model, const TTAConfig& config, NormMode mode,
                        const Tensor4<typename Model::Scalar_t>& images, int first_image_index,
                        std::string_view policy, std::int64_t step) {
  auto out = model.forward(images, mode);
  auto peaks = extract_peaks(out.heatmap, config.n_max);
  StepResult result;
  result.detections = decode_detections(peaks.scores, out.size, out.offset,
                                        static_cast<double>(model.architecture().stride), config.eta,
                                        first_image_index);
  result.metrics.policy = std::string(policy);
  result.metrics.step = step;
  result.metrics.detections = static_cast<int>(result.detections.size());
  result.metrics.mean_score = mean_detection_score<typename Model::Scalar_t>(result.detections);
  return std::tuple{std::move(out), std::move(peaks), std::move(result)};
}

}  // namespace detail

/// Frozen pre-trained model with stored normalization statistics.
template <DetectionModel Model>
class SourceOnlyPolicy final : public AdaptationPolicy<typename Model::Scalar_t> {
 public:
  using Scalar = typename Model::Scalar_t;
  SourceOnlyPolicy(Model& model, const TTAConfig& config) : model_(model), config_(validated(config)) {}
  std::string_view name() const override { return "source_only"; }

  StepResult step(const Tensor4<Scalar>& images, int first_image_index) override {
    auto [out, peaks, result] =
        detail::forward_and_report(model_, config_, NormMode::kRunningStats, images, first_image_index, name(), ++step_);
    return result;
  }

 private:
  Model& model_;
  TTAConfig config_;
  std::int64_t step_ = 0;
};

/// Normalization statistics recomputed from each test batch; no parameter updates.
template <DetectionModel Model>
class BnAdaptPolicy final : public AdaptationPolicy<typename Model::Scalar_t> {
 public:
  using Scalar = typename Model::Scalar_t;
  BnAdaptPolicy(Model& model, const TTAConfig& config) : model_(model), config_(validated(config)) {}
  std::string_view name() const override { return "bn_adapt"; }

  StepResult step(const Tensor4<Scalar>& images, int first_image_index) override {
    auto [out, peaks, result] =
        detail::forward_and_report(model_, config_, NormMode::kBatchStats, images, first_image_index, name(), ++step_);
    return result;
  }

 private:
  Model& model_;
  TTAConfig config_;
  std::int64_t step_ = 0;
};

/// Entropy minimization over decoded top scores: the mean Bernoulli entropy
/// of valid slots scoring at least eta, minimized w.r.t. the normalization
/// affine parameters. Detections are reported before the update.
template <DetectionModel Model>
class EntropyMinPolicy final : public AdaptationPolicy<typename Model::Scalar_t> {
 public:
  using Scalar = typename Model::Scalar_t;
  EntropyMinPolicy(Model& model, const TTAConfig& config)
      : model_(model),
        config_(validated(config)),
        params_(select_adaptable_parameters(model)),
        optimizer_(params_.handles, config.learning_rate, config.momentum) {}
  std::string_view name() const override { return "entropy_min"; }

  StepResult step(const Tensor4<Scalar>& images, int first_image_index) override {
    auto [out, peaks, result] =
        detail::forward_and_report(model_, config_, NormMode::kBatchStats, images, first_image_index, name(), ++step_);
    const auto loss = entropy_loss(peaks.scores, config_.eta);
    result.metrics.loss.total = static_cast<double>(loss.value);
    if (loss.selected > 0) {
      Tensor4<Scalar> d_heatmap(out.heatmap.batch(), out.heatmap.classes(), out.heatmap.height(), out.heatmap.width());
      scatter_score_gradient(peaks.scores, loss.grad, d_heatmap);
      detail::backward_heatmap_only(model_, out, d_heatmap);
      optimizer_.step();
      result.metrics.updated = true;
    }
    return result;
  }

 private:
  Model& model_;
  TTAConfig config_;
  AdaptableParameterSet<Scalar> params_;
  SgdMomentum<Scalar> optimizer_;
  std::int64_t step_ = 0;
};

template <DetectionModel Model>
std::unique_ptr<AdaptationPolicy<typename Model::Scalar_t>> make_policy(PolicyKind kind, Model& model,
                                                                        const TTAConfig& config) {
  switch (kind) {
    case PolicyKind::kSourceOnly:
      return std::make_unique<SourceOnlyPolicy<Model>>(model, config);
    case PolicyKind::kBnAdapt:
      return std::make_unique<BnAdaptPolicy<Model>>(model, config);
    case PolicyKind::kEntropyMin:
      return std::make_unique<EntropyMinPolicy<Model>>(model, config);
    case PolicyKind::kMonoTta:
      return std::make_unique<MonoTtaAdapter<Model>>(model, config);
  }
  throw std::invalid_argument("unknown policy");
}

}  // namespace monotta
