#pragma once

#include <Eigen/Core>

#include <cassert>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace monotta {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense NCHW tensor backed by a contiguous Eigen vector.
template <typename Scalar>
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(Index n, Index c, Index h, Index w)
      : n_(n), c_(c), h_(h), w_(w), data_(Vector<Scalar>::Zero(n * c * h * w)) {
    if (n < 0 || c < 0 || h < 0 || w < 0) throw std::invalid_argument("Tensor4: negative extent");
  }

  Index batch() const { return n_; }
  Index channels() const { return c_; }
  Index height() const { return h_; }
  Index width() const { return w_; }
  Index plane() const { return h_ * w_; }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Scalar& operator()(Index n, Index c, Index y, Index x) { return data_[offset(n, c, y, x)]; }
  Scalar operator()(Index n, Index c, Index y, Index x) const { return data_[offset(n, c, y, x)]; }

  Index offset(Index n, Index c, Index y, Index x) const {
    assert(n < n_ && c < c_ && y < h_ && x < w_);
    return ((n * c_ + c) * h_ + y) * w_ + x;
  }

  Vector<Scalar>& data() { return data_; }
  const Vector<Scalar>& data() const { return data_; }

  /// One sample viewed as a (channels x plane) row-major matrix.
  Eigen::Map<RowMatrix<Scalar>> sample(Index n) {
    return {data_.data() + n * c_ * plane(), c_, plane()};
  }
  Eigen::Map<const RowMatrix<Scalar>> sample(Index n) const {
    return {data_.data() + n * c_ * plane(), c_, plane()};
  }

  /// Single channel plane of one sample as a (h x w) row-major matrix.
  Eigen::Map<RowMatrix<Scalar>> plane(Index n, Index c) {
    return {data_.data() + offset(n, c, 0, 0), h_, w_};
  }
  Eigen::Map<const RowMatrix<Scalar>> plane(Index n, Index c) const {
    return {data_.data() + offset(n, c, 0, 0), h_, w_};
  }

  bool same_shape(const Tensor4& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  void set_zero() { data_.setZero(); }

  template <typename Other>
  Tensor4<Other> cast() const {
    Tensor4<Other> out(n_, c_, h_, w_);
    out.data() = data_.template cast<Other>();
    return out;
  }

  /// Copies samples [first, first + count) into a new tensor.
  Tensor4 slice(Index first, Index count) const {
    Tensor4 out(count, c_, h_, w_);
    out.data_ = data_.segment(first * c_ * plane(), count * c_ * plane());
    return out;
  }

 private:
  Index n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  Vector<Scalar> data_;
};

}  // namespace monotta
