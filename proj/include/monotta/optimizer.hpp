#pragma once

#include "monotta/layers.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace monotta {

/// SGD with heavy-ball momentum: v <- mu * v + (g + wd * w), w <- w - lr * v.
///
/// The optimizer is bound to a fixed, ordered list of parameters; velocity
/// buffers persist across steps.
template <typename Scalar>
class SgdMomentum {
 public:
  SgdMomentum(std::vector<Parameter<Scalar>*> params, double learning_rate, double momentum,
              double weight_decay = 0.0)
      : params_(std::move(params)), lr_(learning_rate), momentum_(momentum), weight_decay_(weight_decay) {
    if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
    if (!(momentum >= 0 && momentum < 1)) throw std::invalid_argument("momentum must be in [0, 1)");
    for (auto* p : params_) velocity_.push_back(Vector<Scalar>::Zero(p->size()));
  }

  void step() {
    const Scalar mu = static_cast<Scalar>(momentum_), lr = static_cast<Scalar>(lr_);
    const Scalar wd = static_cast<Scalar>(weight_decay_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto* p = params_[i];
      // Decay applies to convolution kernels only, never to norm affine terms or biases.
      const bool decay = wd != Scalar(0) && !p->norm_affine && p->shape.size() == 4;
      if (decay) {
        velocity_[i] = mu * velocity_[i] + p->grad + wd * p->value;
      } else {
        velocity_[i] = mu * velocity_[i] + p->grad;
      }
      p->value -= lr * velocity_[i];
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }
  std::span<Parameter<Scalar>* const> parameters() const { return params_; }

 private:
  std::vector<Parameter<Scalar>*> params_;
  std::vector<Vector<Scalar>> velocity_;
  double lr_, momentum_, weight_decay_;
};

}  // namespace monotta

namespace monotta {

/// Adam with bias correction and decoupled-free L2 weight decay on conv kernels.
template <typename Scalar>
class Adam {
 public:
  Adam(std::vector<Parameter<Scalar>*> params, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double weight_decay = 0.0, double epsilon = 1e-8)
      : params_(std::move(params)),
        lr_(learning_rate),
        beta1_(beta1),
        beta2_(beta2),
        weight_decay_(weight_decay),
        epsilon_(epsilon) {
    if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be positive");
    for (auto* p : params_) {
      first_.push_back(Vector<Scalar>::Zero(p->size()));
      second_.push_back(Vector<Scalar>::Zero(p->size()));
    }
  }

  void step() {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const Scalar b1 = static_cast<Scalar>(beta1_), b2 = static_cast<Scalar>(beta2_);
    const Scalar step_size = static_cast<Scalar>(lr_ * std::sqrt(c2) / c1);
    const Scalar eps = static_cast<Scalar>(epsilon_ * std::sqrt(c2));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto* p = params_[i];
      Vector<Scalar> g = p->grad;
      if (weight_decay_ != 0.0 && !p->norm_affine && p->shape.size() == 4) {
        g += static_cast<Scalar>(weight_decay_) * p->value;
      }
      first_[i] = b1 * first_[i] + (Scalar(1) - b1) * g;
      second_[i] = b2 * second_[i] + (Scalar(1) - b2) * g.cwiseAbs2();
      p->value.array() -= step_size * first_[i].array() / (second_[i].array().sqrt() + eps);
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }
  double learning_rate() const { return lr_; }
  void set_learning_rate(double lr) { lr_ = lr; }

 private:
  std::vector<Parameter<Scalar>*> params_;
  std::vector<Vector<Scalar>> first_, second_;
  double lr_, beta1_, beta2_, weight_decay_, epsilon_;
  std::int64_t t_ = 0;
};

}  // namespace monotta
