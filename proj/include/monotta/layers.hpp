#pragma once

#include "monotta/tensor.hpp"

#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace monotta {

/// A named trainable tensor with its gradient accumulator.
template <typename Scalar>
struct Parameter {
  std::string name;
  std::vector<Index> shape;
  Vector<Scalar> value;
  Vector<Scalar> grad;
  bool norm_affine = false;

  Parameter() = default;
  Parameter(std::string n, std::vector<Index> s, bool is_norm = false)
      : name(std::move(n)), shape(std::move(s)), norm_affine(is_norm) {
    Index count = 1;
    for (Index d : shape) count *= d;
    value = Vector<Scalar>::Zero(count);
    grad = Vector<Scalar>::Zero(count);
  }

  Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }
};

/// Non-trainable state that is persisted with a model.
template <typename Scalar>
struct Buffer {
  std::string name;
  Vector<Scalar> value;
};

/// How a normalization layer obtains its statistics.
enum class NormMode {
  kRunningStats,  ///< stored statistics (inference on the source distribution)
  kBatchStats,    ///< statistics of the current batch, stored statistics untouched
  kTrain,         ///< batch statistics and an update of the stored statistics
};

/// 2D convolution with square kernel and "same"-style padding (kernel / 2).
template <typename Scalar>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const std::string& name, Index in_channels, Index out_channels, Index kernel, Index stride,
         bool with_bias)
      : weight(name + ".weight", {out_channels, in_channels, kernel, kernel}),
        bias(name + ".bias", {with_bias ? out_channels : 0}),
        in_(in_channels),
        out_(out_channels),
        kernel_(kernel),
        stride_(stride),
        pad_(kernel / 2),
        with_bias_(with_bias) {}

  Index in_channels() const { return in_; }
  Index out_channels() const { return out_; }
  Index kernel() const { return kernel_; }
  Index stride() const { return stride_; }
  bool has_bias() const { return with_bias_; }

  Index output_extent(Index input) const { return (input + 2 * pad_ - kernel_) / stride_ + 1; }

  template <typename Rng>
  void init_he(Rng& rng) {
    const double fan_in = static_cast<double>(in_ * kernel_ * kernel_);
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (Index i = 0; i < weight.size(); ++i) weight.value[i] = static_cast<Scalar>(dist(rng));
    bias.value.setZero();
  }

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x) {
    if (x.channels() != in_) throw std::invalid_argument(weight.name + ": channel mismatch");
    in_h_ = x.height();
    in_w_ = x.width();
    const Index oh = output_extent(in_h_), ow = output_extent(in_w_);
    Tensor4<Scalar> y(x.batch(), out_, oh, ow);
    const auto w = weight_matrix();
    columns_.resize(static_cast<std::size_t>(x.batch()));
    for (Index n = 0; n < x.batch(); ++n) {
      auto& col = columns_[static_cast<std::size_t>(n)];
      im2col(x, n, oh, ow, col);
      auto out = y.sample(n);
      out.noalias() = w * col;
      if (with_bias_) out.colwise() += bias.value;
    }
    return y;
  }

  /// Accumulates weight/bias gradients; returns the input gradient.
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy) {
    const auto w = weight_matrix();
    Eigen::Map<RowMatrix<Scalar>> dw(weight.grad.data(), out_, in_ * kernel_ * kernel_);
    Tensor4<Scalar> dx(dy.batch(), in_, in_h_, in_w_);
    RowMatrix<Scalar> dcol;
    for (Index n = 0; n < dy.batch(); ++n) {
      const auto g = dy.sample(n);
      const auto& col = columns_[static_cast<std::size_t>(n)];
      dw.noalias() += g * col.transpose();
      if (with_bias_) bias.grad += g.rowwise().sum();
      dcol.noalias() = w.transpose() * g;
      col2im(dcol, dy.height(), dy.width(), n, dx);
    }
    return dx;
  }

  Parameter<Scalar> weight;
  Parameter<Scalar> bias;

 private:
  Eigen::Map<const RowMatrix<Scalar>> weight_matrix() const {
    return {weight.value.data(), out_, in_ * kernel_ * kernel_};
  }

  void im2col(const Tensor4<Scalar>& x, Index n, Index oh, Index ow, RowMatrix<Scalar>& col) const {
    col.setZero(in_ * kernel_ * kernel_, oh * ow);
    for (Index c = 0; c < in_; ++c) {
      for (Index ky = 0; ky < kernel_; ++ky) {
        for (Index kx = 0; kx < kernel_; ++kx) {
          Scalar* row = col.data() + ((c * kernel_ + ky) * kernel_ + kx) * oh * ow;
          for (Index oy = 0; oy < oh; ++oy) {
            const Index iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= in_h_) continue;
            for (Index ox = 0; ox < ow; ++ox) {
              const Index ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < in_w_) row[oy * ow + ox] = x(n, c, iy, ix);
            }
          }
        }
      }
    }
  }

  void col2im(const RowMatrix<Scalar>& col, Index oh, Index ow, Index n, Tensor4<Scalar>& dx) const {
    for (Index c = 0; c < in_; ++c) {
      for (Index ky = 0; ky < kernel_; ++ky) {
        for (Index kx = 0; kx < kernel_; ++kx) {
          const Scalar* row = col.data() + ((c * kernel_ + ky) * kernel_ + kx) * oh * ow;
          for (Index oy = 0; oy < oh; ++oy) {
            const Index iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= in_h_) continue;
            for (Index ox = 0; ox < ow; ++ox) {
              const Index ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < in_w_) dx(n, c, iy, ix) += row[oy * ow + ox];
            }
          }
        }
      }
    }
  }

  Index in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1, pad_ = 0;
  bool with_bias_ = false;
  Index in_h_ = 0, in_w_ = 0;
  std::vector<RowMatrix<Scalar>> columns_;
};

/// Per-channel batch normalization with learnable scale (gamma) and shift (beta).
template <typename Scalar>
class BatchNorm2d {
 public:
  static constexpr double kEpsilon = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, Index channels)
      : gamma(name + ".gamma", {channels}, true),
        beta(name + ".beta", {channels}, true),
        running_mean{name + ".running_mean", Vector<Scalar>::Zero(channels)},
        running_var{name + ".running_var", Vector<Scalar>::Ones(channels)} {
    gamma.value.setOnes();
  }

  Index channels() const { return gamma.size(); }

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x, NormMode mode) {
    const Index channels = this->channels();
    if (x.channels() != channels) throw std::invalid_argument(gamma.name + ": channel mismatch");
    mode_ = mode;
    normalized_ = Tensor4<Scalar>(x.batch(), channels, x.height(), x.width());
    inv_std_.resize(channels);
    Tensor4<Scalar> y(x.batch(), channels, x.height(), x.width());
    const Index count = x.batch() * x.plane();
    for (Index c = 0; c < channels; ++c) {
      Scalar mean = running_mean.value[c];
      Scalar var = running_var.value[c];
      if (mode != NormMode::kRunningStats) {
        Scalar sum = 0;
        for (Index n = 0; n < x.batch(); ++n) sum += x.sample(n).row(c).sum();
        mean = sum / static_cast<Scalar>(count);
        Scalar sq = 0;
        for (Index n = 0; n < x.batch(); ++n) {
          sq += (x.sample(n).row(c).array() - mean).square().sum();
        }
        var = sq / static_cast<Scalar>(count);
        if (mode == NormMode::kTrain) {
          const Scalar m = static_cast<Scalar>(kMomentum);
          const Scalar unbiased = count > 1 ? sq / static_cast<Scalar>(count - 1) : var;
          running_mean.value[c] = (1 - m) * running_mean.value[c] + m * mean;
          running_var.value[c] = (1 - m) * running_var.value[c] + m * unbiased;
        }
      }
      const Scalar inv_std = Scalar(1) / std::sqrt(var + static_cast<Scalar>(kEpsilon));
      inv_std_[c] = inv_std;
      for (Index n = 0; n < x.batch(); ++n) {
        auto xn = normalized_.sample(n).row(c);
        xn = (x.sample(n).row(c).array() - mean) * inv_std;
        y.sample(n).row(c) = xn.array() * gamma.value[c] + beta.value[c];
      }
    }
    return y;
  }

  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy) {
    const Index channels = this->channels();
    Tensor4<Scalar> dx(dy.batch(), channels, dy.height(), dy.width());
    const Scalar count = static_cast<Scalar>(dy.batch() * dy.plane());
    for (Index c = 0; c < channels; ++c) {
      Scalar sum_dy = 0, sum_dy_xhat = 0;
      for (Index n = 0; n < dy.batch(); ++n) {
        sum_dy += dy.sample(n).row(c).sum();
        sum_dy_xhat += dy.sample(n).row(c).dot(normalized_.sample(n).row(c));
      }
      gamma.grad[c] += sum_dy_xhat;
      beta.grad[c] += sum_dy;
      const Scalar scale = gamma.value[c] * inv_std_[c];
      for (Index n = 0; n < dy.batch(); ++n) {
        if (mode_ == NormMode::kRunningStats) {
          dx.sample(n).row(c) = dy.sample(n).row(c) * scale;
        } else {
          dx.sample(n).row(c) =
              (dy.sample(n).row(c).array() * count - sum_dy -
               normalized_.sample(n).row(c).array() * sum_dy_xhat) *
              (scale / count);
        }
      }
    }
    return dx;
  }

  /// Pre-affine activations of the most recent forward pass.
  const Tensor4<Scalar>& last_normalized() const { return normalized_; }

  Parameter<Scalar> gamma;
  Parameter<Scalar> beta;
  Buffer<Scalar> running_mean;
  Buffer<Scalar> running_var;

 private:
  NormMode mode_ = NormMode::kRunningStats;
  Tensor4<Scalar> normalized_;
  Vector<Scalar> inv_std_;
};

/// Sharpened softplus, log(1 + e^{kx}) / k. Close to a rectifier away from
/// zero but with a continuous second derivative.
template <typename Scalar>
class Softplus {
 public:
  static constexpr Scalar kSharpness = Scalar(4);

  Tensor4<Scalar> forward(const Tensor4<Scalar>& x) {
    gate_ = x.data().unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-kSharpness * v)); });
    Tensor4<Scalar> y = x;
    y.data() = x.data().unaryExpr([](Scalar v) {
      const Scalar z = kSharpness * v;
      return (z > Scalar(0) ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) / kSharpness;
    });
    return y;
  }
  Tensor4<Scalar> backward(const Tensor4<Scalar>& dy) const {
    Tensor4<Scalar> dx = dy;
    dx.data().array() *= gate_.array();
    return dx;
  }

 private:
  Vector<Scalar> gate_;
};

}  // namespace monotta
