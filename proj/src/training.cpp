#include "monotta/training.hpp"

#include "monotta/optimizer.hpp"
#include "monotta/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace monotta {

double gaussian_radius(double height, double width, double min_overlap) {
  const double b1 = height + width;
  const double c1 = width * height * (1 - min_overlap) / (1 + min_overlap);
  const double r1 = (b1 + std::sqrt(b1 * b1 - 4 * c1)) / 2;
  const double b2 = 2 * (height + width);
  const double c2 = (1 - min_overlap) * width * height;
  const double r2 = (b2 + std::sqrt(b2 * b2 - 16 * c2)) / 2;
  const double a3 = 4 * min_overlap;
  const double b3 = -2 * min_overlap * (height + width);
  const double c3 = (min_overlap - 1) * width * height;
  const double r3 = (b3 + std::sqrt(b3 * b3 - 4 * a3 * c3)) / 2;
  return std::min({r1, r2, r3});
}

TrainingTargets<float> build_targets(std::span<const LabeledImage> batch, const Architecture& arch) {
  const Index b = static_cast<Index>(batch.size()), g = arch.grid_size();
  const double stride = static_cast<double>(arch.stride);
  TrainingTargets<float> t{Tensor4<float>(b, arch.classes, g, g), Tensor4<float>(b, 2, g, g),
                           Tensor4<float>(b, 2, g, g), Tensor4<float>(b, 1, g, g)};
  for (Index n = 0; n < b; ++n) {
    for (const auto& o : batch[static_cast<std::size_t>(n)].objects) {
      const double cx = o.box.cx / stride, cy = o.box.cy / stride;
      const Index ix = std::clamp<Index>(static_cast<Index>(std::floor(cx)), 0, g - 1);
      const Index iy = std::clamp<Index>(static_cast<Index>(std::floor(cy)), 0, g - 1);
      const int radius = std::max(0, static_cast<int>(gaussian_radius(o.box.h / stride, o.box.w / stride)));
      const double sigma = (2.0 * radius + 1.0) / 6.0;
      for (Index y = std::max<Index>(0, iy - radius); y <= std::min<Index>(g - 1, iy + radius); ++y) {
        for (Index x = std::max<Index>(0, ix - radius); x <= std::min<Index>(g - 1, ix + radius); ++x) {
          const double d2 = static_cast<double>((x - ix) * (x - ix) + (y - iy) * (y - iy));
          const float v = static_cast<float>(std::exp(-d2 / (2 * sigma * sigma)));
          float& cell = t.heatmap(n, o.class_id, y, x);
          cell = std::max(cell, v);
        }
      }
      t.size(n, 0, iy, ix) = static_cast<float>(o.box.w / stride);
      t.size(n, 1, iy, ix) = static_cast<float>(o.box.h / stride);
      t.offset(n, 0, iy, ix) = static_cast<float>(cx - static_cast<double>(ix));
      t.offset(n, 1, iy, ix) = static_cast<float>(cy - static_cast<double>(iy));
      t.mask(n, 0, iy, ix) = 1.0f;
    }
  }
  return t;
}

LossParts detection_loss(const DetectorOutput<float>& out, const TrainingTargets<float>& targets,
                         Tensor4<float>& d_logits, Tensor4<float>& d_size, Tensor4<float>& d_offset) {
  const auto& p = out.heatmap.values();
  d_logits = Tensor4<float>(p.batch(), p.channels(), p.height(), p.width());
  d_size = Tensor4<float>(p.batch(), 2, p.height(), p.width());
  d_offset = Tensor4<float>(p.batch(), 2, p.height(), p.width());
  const float positives = std::max(1.0f, targets.mask.data().sum());

  LossParts loss;
  for (Index i = 0; i < p.size(); ++i) {
    const float prob = p.data()[i], gt = targets.heatmap.data()[i];
    const float lp = std::log(prob), l1p = std::log(1 - prob);
    if (gt == 1.0f) {
      const float q = 1 - prob;
      loss.focal -= q * q * lp;
      d_logits.data()[i] = q * q * (2 * prob * lp - q) / positives;
    } else {
      const float w = std::pow(1 - gt, 4.0f);
      loss.focal -= w * prob * prob * l1p;
      d_logits.data()[i] = w * prob * prob * (prob - 2 * (1 - prob) * l1p) / positives;
    }
  }
  loss.focal /= positives;

  for (Index n = 0; n < p.batch(); ++n) {
    for (Index c = 0; c < 2; ++c) {
      for (Index y = 0; y < p.height(); ++y) {
        for (Index x = 0; x < p.width(); ++x) {
          if (targets.mask(n, 0, y, x) == 0.0f) continue;
          const float ds = out.size(n, c, y, x) - targets.size(n, c, y, x);
          const float dof = out.offset(n, c, y, x) - targets.offset(n, c, y, x);
          loss.size += std::abs(ds) / positives;
          loss.offset += std::abs(dof) / positives;
          d_size(n, c, y, x) = (ds > 0 ? 1.0f : (ds < 0 ? -1.0f : 0.0f)) / positives;
          d_offset(n, c, y, x) = (dof > 0 ? 1.0f : (dof < 0 ? -1.0f : 0.0f)) / positives;
        }
      }
    }
  }
  return loss;
}

std::vector<Detection> detect_dataset(ToyDetector<float>& model, std::span<const LabeledImage> data, NormMode mode,
                                      int n_max, double min_score, int batch_size) {
  std::vector<Detection> detections;
  std::vector<Image> images;
  for (std::size_t first = 0; first < data.size(); first += static_cast<std::size_t>(batch_size)) {
    const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(batch_size), data.size() - first);
    images.clear();
    for (std::size_t i = 0; i < count; ++i) images.push_back(data[first + i].image);
    const auto out = model.forward(to_tensor<float>(images), mode);
    const auto peaks = extract_peaks(out.heatmap, n_max);
    auto batch = decode_detections(peaks.scores, out.size, out.offset, static_cast<double>(model.architecture().stride),
                                   min_score, static_cast<int>(first));
    detections.insert(detections.end(), batch.begin(), batch.end());
  }
  return detections;
}

Dataset make_toy_val(const TrainConfig& config) { return generate_scenes(config.n_val, derive_seed(config.seed, 0x7A1)); }

ToySplits make_toy_splits(const TrainConfig& config) {
  return {generate_scenes(config.n_train, derive_seed(config.seed, 0x7121)), make_toy_val(config)};
}

TrainResult train_detector(const Dataset& train, const Dataset& val, const TrainConfig& config,
                           const TrainProgress& progress) {
  if (train.empty()) throw std::invalid_argument("train_detector: empty training set");
  if (val.empty()) throw std::invalid_argument("train_detector: empty validation set");
  if (config.epochs < 1 || config.batch_size < 1) throw std::invalid_argument("train_detector: bad schedule");

  TrainResult result{ToyDetector<float>(Architecture{}, derive_seed(config.seed, 1)), 0.0, {}};
  auto& model = result.model;
  Adam<float> optimizer(model.parameters(), config.base_learning_rate, 0.9, 0.999, config.weight_decay);

  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, 2));
  const int decay_epoch = static_cast<int>(std::ceil(config.decay_at * config.epochs));

  std::vector<LabeledImage> batch;
  std::vector<Image> images;
  Tensor4<float> d_logits, d_size, d_offset;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    optimizer.set_learning_rate(epoch >= decay_epoch ? config.base_learning_rate * 0.1 : config.base_learning_rate);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0;
    int steps = 0;
    for (std::size_t first = 0; first < order.size(); first += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), order.size() - first);
      if (count < 2) continue;  // batch statistics need more than one sample
      batch.clear();
      images.clear();
      for (std::size_t i = 0; i < count; ++i) {
        batch.push_back(train[order[first + i]]);
        images.push_back(batch.back().image);
      }
      const auto targets = build_targets(batch, model.architecture());
      const auto out = model.forward(to_tensor<float>(images), NormMode::kTrain);
      const LossParts loss = detection_loss(out, targets, d_logits, d_size, d_offset);
      optimizer.zero_grad();
      model.backward_logits(d_logits, d_size, d_offset);
      optimizer.step();
      epoch_loss += loss.total();
      ++steps;
    }
    epoch_loss /= std::max(1, steps);
    result.epoch_losses.push_back(epoch_loss);
    if (progress) progress(epoch, epoch_loss);
  }

  const auto detections = detect_dataset(model, val, NormMode::kRunningStats, config.n_max, config.score_floor);
  result.clean_map = average_precision_r40(detections, val, model.architecture().classes, config.iou_threshold).mean_ap;
  if (result.clean_map < config.target_map) {
    throw std::runtime_error("train_detector: clean mAP " + std::to_string(result.clean_map) +
                             " below target " + std::to_string(config.target_map));
  }
  return result;
}

}  // namespace monotta
