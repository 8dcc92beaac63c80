#pragma once

#include "monotta/detector.hpp"
#include "monotta/evaluation.hpp"
#include "monotta/scenes.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace monotta {

struct TrainConfig {
  int n_train = 2000;
  int n_val = 500;
  std::uint64_t seed = 7;
  int epochs = 10;
  int batch_size = 16;
  double base_learning_rate = 1e-3;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  /// Epoch fraction after which the learning rate drops tenfold.
  double decay_at = 0.8;
  double target_map = 0.85;
  int n_max = 20;
  /// Detections below this score are dropped before AP (the inference threshold gamma).
  double score_floor = 0.2;
  double iou_threshold = 0.5;
};

/// Supervision for one batch on the output grid.
template <typename Scalar>
struct TrainingTargets {
  Tensor4<Scalar> heatmap;  // B x K x G x G, Gaussian splats peaking at exactly 1
  Tensor4<Scalar> size;     // B x 2 x G x G, grid units
  Tensor4<Scalar> offset;   // B x 2 x G x G
  Tensor4<Scalar> mask;     // B x 1 x G x G, 1 at object centre cells
};

/// CenterNet Gaussian radius for a box of the given extent (grid units).
double gaussian_radius(double height, double width, double min_overlap = 0.7);

TrainingTargets<float> build_targets(std::span<const LabeledImage> batch, const Architecture& arch);

struct LossParts {
  double focal = 0, size = 0, offset = 0;
  double total() const { return focal + size + offset; }
};

/// Penalty-reduced focal loss plus L1 regression; writes gradients w.r.t. logits and heads.
LossParts detection_loss(const DetectorOutput<float>& out, const TrainingTargets<float>& targets,
                         Tensor4<float>& d_logits, Tensor4<float>& d_size, Tensor4<float>& d_offset);

struct TrainResult {
  ToyDetector<float> model;
  double clean_map = 0;
  std::vector<double> epoch_losses;
};

using TrainProgress = std::function<void(int epoch, double loss)>;

/// Trains from scratch; throws std::runtime_error when clean validation mAP
/// stays below config.target_map.
TrainResult train_detector(const Dataset& train, const Dataset& val, const TrainConfig& config,
                           const TrainProgress& progress = {});

struct ToySplits {
  Dataset train;
  Dataset val;
};

/// Train and validation scenes implied by a config (disjoint scene seeds derived from config.seed).
ToySplits make_toy_splits(const TrainConfig& config);
/// Only the validation half of make_toy_splits.
Dataset make_toy_val(const TrainConfig& config);

/// Runs the detector over a dataset in batches and decodes detections.
std::vector<Detection> detect_dataset(ToyDetector<float>& model, std::span<const LabeledImage> data, NormMode mode,
                                      int n_max, double min_score, int batch_size = 64);

}  // namespace monotta
