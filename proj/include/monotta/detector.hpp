#pragma once

#include "monotta/detection.hpp"
#include "monotta/layers.hpp"
#include "monotta/tensor.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace monotta {

/// Fixed geometry of the toy center-point detector.
struct Architecture {
  Index input_size = 64;
  Index classes = 3;
  Index width = 16;
  Index stride = 4;
  /// Convolution stride of each conv -> norm -> softplus block.
  std::array<Index, 4> block_strides{2, 2, 1, 1};

  Index grid_size() const { return input_size / stride; }
  /// Canonical text form, stored in checkpoints and compared on load.
  std::string descriptor() const;

  bool operator==(const Architecture&) const = default;
};

template <typename Scalar>
struct DetectorOutput {
  HeatmapBatch<Scalar> heatmap;  // B x K x G x G
  Tensor4<Scalar> size;          // B x 2 x G x G, box extent in grid cells
  Tensor4<Scalar> offset;        // B x 2 x G x G, sub-cell centre offset
};

/// Four conv -> batch norm -> softplus blocks followed by 3x3 heads for the
/// per-class heatmap (sigmoid), box size and centre offset.
template <typename Scalar>
class ToyDetector {
 public:
  using Scalar_t = Scalar;
  static constexpr int kBlocks = 4;

  explicit ToyDetector(Architecture arch = {}, std::uint64_t seed = 0) : arch_(arch) {
    Index in = 3;
    for (int i = 0; i < kBlocks; ++i) {
      const std::string name = "block" + std::to_string(i + 1);
      convs_[i] = Conv2d<Scalar>(name + ".conv", in, arch.width, 3, arch.block_strides[static_cast<std::size_t>(i)],
                                 false);
      norms_[i] = BatchNorm2d<Scalar>(name + ".norm", arch.width);
      in = arch.width;
    }
    heat_head_ = Conv2d<Scalar>("head.heatmap", arch.width, arch.classes, 3, 1, true);
    size_head_ = Conv2d<Scalar>("head.size", arch.width, 2, 3, 1, true);
    offset_head_ = Conv2d<Scalar>("head.offset", arch.width, 2, 3, 1, true);

    std::mt19937_64 rng(seed);
    for (auto& c : convs_) c.init_he(rng);
    heat_head_.init_he(rng);
    size_head_.init_he(rng);
    offset_head_.init_he(rng);
    // Low initial confidence (prior 0.1) keeps the focal loss stable early on.
    heat_head_.bias.value.setConstant(static_cast<Scalar>(-2.19));
    heat_head_.weight.value *= Scalar(0.1);
    size_head_.bias.value.setConstant(Scalar(2.5));
    offset_head_.bias.value.setConstant(Scalar(0.5));
  }

  const Architecture& architecture() const { return arch_; }

  DetectorOutput<Scalar> forward(const Tensor4<Scalar>& images, NormMode mode) {
    if (images.channels() != 3 || images.height() != arch_.input_size || images.width() != arch_.input_size) {
      throw std::invalid_argument("ToyDetector: expected B x 3 x " + std::to_string(arch_.input_size) + " x " +
                                  std::to_string(arch_.input_size) + " input");
    }
    Tensor4<Scalar> x = images;
    for (int i = 0; i < kBlocks; ++i) {
      x = acts_[i].forward(norms_[i].forward(convs_[i].forward(x), mode));
    }
    Tensor4<Scalar> logits = heat_head_.forward(x);
    probabilities_ = logits;
    probabilities_.data() = logits.data().unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
    return {HeatmapBatch<Scalar>(probabilities_), size_head_.forward(x), offset_head_.forward(x)};
  }

  /// Backpropagates gradients given with respect to the heatmap probabilities.
  void backward(const Tensor4<Scalar>& d_heatmap, const Tensor4<Scalar>& d_size, const Tensor4<Scalar>& d_offset) {
    Tensor4<Scalar> d_logits = d_heatmap;
    d_logits.data().array() *= probabilities_.data().array() * (Scalar(1) - probabilities_.data().array());
    backward_logits(d_logits, d_size, d_offset);
  }

  /// Backpropagates gradients given with respect to the heatmap logits.
  void backward_logits(const Tensor4<Scalar>& d_logits, const Tensor4<Scalar>& d_size,
                       const Tensor4<Scalar>& d_offset) {
    Tensor4<Scalar> dx = heat_head_.backward(d_logits);
    dx.data() += size_head_.backward(d_size).data();
    dx.data() += offset_head_.backward(d_offset).data();
    for (int i = kBlocks - 1; i >= 0; --i) {
      dx = norms_[i].backward(acts_[i].backward(dx));
      dx = convs_[i].backward(dx);
    }
  }

  /// All trainable tensors in a fixed order.
  std::vector<Parameter<Scalar>*> parameters() {
    std::vector<Parameter<Scalar>*> out;
    for (int i = 0; i < kBlocks; ++i) {
      out.push_back(&convs_[i].weight);
      out.push_back(&norms_[i].gamma);
      out.push_back(&norms_[i].beta);
    }
    for (auto* head : {&heat_head_, &size_head_, &offset_head_}) {
      out.push_back(&head->weight);
      out.push_back(&head->bias);
    }
    return out;
  }

  std::vector<const Parameter<Scalar>*> parameters() const {
    auto mutable_params = const_cast<ToyDetector*>(this)->parameters();
    return {mutable_params.begin(), mutable_params.end()};
  }

  std::vector<Buffer<Scalar>*> buffers() {
    std::vector<Buffer<Scalar>*> out;
    for (auto& n : norms_) {
      out.push_back(&n.running_mean);
      out.push_back(&n.running_var);
    }
    return out;
  }

  std::vector<const Buffer<Scalar>*> buffers() const {
    auto mutable_buffers = const_cast<ToyDetector*>(this)->buffers();
    return {mutable_buffers.begin(), mutable_buffers.end()};
  }

  void zero_grad() {
    for (auto* p : parameters()) p->zero_grad();
  }

  BatchNorm2d<Scalar>& norm(int i) { return norms_[i]; }
  const BatchNorm2d<Scalar>& norm(int i) const { return norms_[i]; }

  template <typename Other>
  ToyDetector<Other> cast() const {
    ToyDetector<Other> out(arch_);
    auto dst = out.parameters();
    auto src = parameters();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value.template cast<Other>();
    auto dst_buf = out.buffers();
    auto src_buf = buffers();
    for (std::size_t i = 0; i < src_buf.size(); ++i) dst_buf[i]->value = src_buf[i]->value.template cast<Other>();
    return out;
  }

 private:
  Architecture arch_;
  std::array<Conv2d<Scalar>, kBlocks> convs_;
  std::array<BatchNorm2d<Scalar>, kBlocks> norms_;
  std::array<Softplus<Scalar>, kBlocks> acts_;
  Conv2d<Scalar> heat_head_, size_head_, offset_head_;
  Tensor4<Scalar> probabilities_;
};

}  // namespace monotta
