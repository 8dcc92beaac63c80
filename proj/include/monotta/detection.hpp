#pragma once

#include "monotta/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace monotta {

/// Log arguments and squashed outputs are kept inside [kProbEpsilon, 1 - kProbEpsilon].
inline constexpr double kProbEpsilon = 1e-7;

template <typename Scalar>
Scalar clamp_probability(Scalar p) {
  return std::clamp(p, static_cast<Scalar>(kProbEpsilon), static_cast<Scalar>(1.0 - kProbEpsilon));
}

/// Per-class detection confidences, B x K x H x W, every entry in (0, 1).
template <typename Scalar>
class HeatmapBatch {
 public:
  HeatmapBatch() = default;
  explicit HeatmapBatch(Tensor4<Scalar> values) : values_(std::move(values)) {
    if (values_.batch() < 1 || values_.channels() < 1 || values_.height() < 1 || values_.width() < 1) {
      throw std::invalid_argument("HeatmapBatch: empty heatmap");
    }
    values_.data() = values_.data().unaryExpr([](Scalar v) { return clamp_probability(v); });
  }

  Index batch() const { return values_.batch(); }
  Index classes() const { return values_.channels(); }
  Index height() const { return values_.height(); }
  Index width() const { return values_.width(); }
  Scalar operator()(Index b, Index k, Index y, Index x) const { return values_(b, k, y, x); }
  const Tensor4<Scalar>& values() const { return values_; }

 private:
  Tensor4<Scalar> values_;
};

/// Top-N decoded object scores per image (s_ij) with their class and grid location.
template <typename Scalar>
struct ScoreBatch {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> scores;
  Eigen::MatrixXi class_ids;
  Eigen::MatrixXi rows;
  Eigen::MatrixXi cols;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> valid;

  ScoreBatch() = default;
  ScoreBatch(Index batch, Index n_max)
      : scores(decltype(scores)::Zero(batch, n_max)),
        class_ids(Eigen::MatrixXi::Zero(batch, n_max)),
        rows(Eigen::MatrixXi::Zero(batch, n_max)),
        cols(Eigen::MatrixXi::Zero(batch, n_max)),
        valid(decltype(valid)::Constant(batch, n_max, false)) {}

  Index batch() const { return scores.rows(); }
  Index slots() const { return scores.cols(); }
  Index valid_count() const { return valid.count(); }
};

/// Full per-class score vectors (s-hat_ijk) at every decoded slot.
template <typename Scalar>
struct MultiClassScoreBatch {
  RowMatrix<Scalar> class_scores;  // (batch * slots) x classes
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> valid;

  MultiClassScoreBatch() = default;
  MultiClassScoreBatch(Index batch, Index n_max, Index classes)
      : class_scores(RowMatrix<Scalar>::Zero(batch * n_max, classes)),
        valid(decltype(valid)::Constant(batch, n_max, false)) {}

  Index batch() const { return valid.rows(); }
  Index slots() const { return valid.cols(); }
  Index classes() const { return class_scores.cols(); }

  Scalar& operator()(Index i, Index j, Index k) { return class_scores(i * slots() + j, k); }
  Scalar operator()(Index i, Index j, Index k) const { return class_scores(i * slots() + j, k); }
  auto row(Index i, Index j) const { return class_scores.row(i * slots() + j); }
};

template <typename Scalar>
struct PeakDecoding {
  ScoreBatch<Scalar> scores;
  MultiClassScoreBatch<Scalar> multi;
};

namespace detail {

template <typename Scalar>
bool is_spatial_peak(const HeatmapBatch<Scalar>& h, Index b, Index k, Index y, Index x) {
  const Scalar v = h(b, k, y, x);
  for (Index dy = -1; dy <= 1; ++dy) {
    for (Index dx = -1; dx <= 1; ++dx) {
      const Index ny = y + dy, nx = x + dx;
      if (ny < 0 || nx < 0 || ny >= h.height() || nx >= h.width()) continue;
      if (h(b, k, ny, nx) > v) return false;
    }
  }
  return true;
}

/// Lowest class index holding the maximum confidence at one grid cell.
template <typename Scalar>
Index dominant_class(const HeatmapBatch<Scalar>& h, Index b, Index y, Index x) {
  Index best = 0;
  for (Index k = 1; k < h.classes(); ++k) {
    if (h(b, k, y, x) > h(b, best, y, x)) best = k;
  }
  return best;
}

}  // namespace detail

/// Decodes 3x3 local maxima into per-image ranked slots.
///
/// A cell (k, y, x) qualifies when its value is >= every existing neighbour in
/// channel k and k is the dominant class at (y, x), so each slot's score is
/// the maximum of its class vector. Candidates are pooled across classes,
/// sorted by descending score with ties in (row, col, class) order, and the
/// first n_max are kept. Unused slots stay invalid with score 0.
template <typename Scalar>
PeakDecoding<Scalar> extract_peaks(const HeatmapBatch<Scalar>& heatmap, Index n_max) {
  if (n_max <= 0) throw std::invalid_argument("extract_peaks: n_max must be positive");
  if (heatmap.values().empty()) throw std::invalid_argument("extract_peaks: empty heatmap");
  const Index batch = heatmap.batch(), classes = heatmap.classes();
  PeakDecoding<Scalar> out{ScoreBatch<Scalar>(batch, n_max),
                           MultiClassScoreBatch<Scalar>(batch, n_max, classes)};

  struct Candidate {
    Scalar score;
    Index y, x, k;
  };
  std::vector<Candidate> candidates;
  for (Index b = 0; b < batch; ++b) {
    candidates.clear();
    for (Index y = 0; y < heatmap.height(); ++y) {
      for (Index x = 0; x < heatmap.width(); ++x) {
        const Index k = detail::dominant_class(heatmap, b, y, x);
        if (detail::is_spatial_peak(heatmap, b, k, y, x)) {
          candidates.push_back({heatmap(b, k, y, x), y, x, k});
        }
      }
    }
    // Candidates are generated in (row, col) order, so a stable sort keeps the tie order.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Candidate& a, const Candidate& c) { return a.score > c.score; });
    const Index kept = std::min<Index>(n_max, static_cast<Index>(candidates.size()));
    for (Index j = 0; j < kept; ++j) {
      const auto& cand = candidates[static_cast<std::size_t>(j)];
      out.scores.scores(b, j) = cand.score;
      out.scores.class_ids(b, j) = static_cast<int>(cand.k);
      out.scores.rows(b, j) = static_cast<int>(cand.y);
      out.scores.cols(b, j) = static_cast<int>(cand.x);
      out.scores.valid(b, j) = true;
      out.multi.valid(b, j) = true;
      for (Index k = 0; k < classes; ++k) out.multi(b, j, k) = heatmap(b, k, cand.y, cand.x);
    }
  }
  return out;
}

/// Adds d(loss)/d(s_ij) back onto the heatmap cells the scores were gathered from.
template <typename Scalar, typename Derived>
void scatter_score_gradient(const ScoreBatch<Scalar>& scores, const Eigen::MatrixBase<Derived>& grad,
                            Tensor4<Scalar>& heatmap_grad) {
  for (Index b = 0; b < scores.batch(); ++b) {
    for (Index j = 0; j < scores.slots(); ++j) {
      if (!scores.valid(b, j) || grad(b, j) == Scalar(0)) continue;
      heatmap_grad(b, scores.class_ids(b, j), scores.rows(b, j), scores.cols(b, j)) += grad(b, j);
    }
  }
}

/// Adds d(loss)/d(s-hat_ijk) back onto the heatmap; grad has the layout of class_scores.
template <typename Scalar>
void scatter_multi_gradient(const ScoreBatch<Scalar>& scores, const RowMatrix<Scalar>& grad,
                            Tensor4<Scalar>& heatmap_grad) {
  const Index slots = scores.slots();
  for (Index b = 0; b < scores.batch(); ++b) {
    for (Index j = 0; j < slots; ++j) {
      if (!scores.valid(b, j)) continue;
      for (Index k = 0; k < grad.cols(); ++k) {
        const Scalar g = grad(b * slots + j, k);
        if (g != Scalar(0)) heatmap_grad(b, k, scores.rows(b, j), scores.cols(b, j)) += g;
      }
    }
  }
}

/// Axis-aligned box: centre and extent in image pixels.
struct Box {
  double cx = 0, cy = 0, w = 0, h = 0;

  double x0() const { return cx - 0.5 * w; }
  double x1() const { return cx + 0.5 * w; }
  double y0() const { return cy - 0.5 * h; }
  double y1() const { return cy + 0.5 * h; }
  double area() const { return w * h; }
};

struct Detection {
  int image_index = 0;
  int class_id = 0;
  double score = 0;
  Box box;
  std::vector<double> payload;
};

/// Turns valid slots scoring at least min_score into boxes.
///
/// size and offset are the regression heads (B x 2 x H x W); sizes are in
/// grid units, offsets in sub-cell units, stride maps grid to pixels.
template <typename Scalar>
std::vector<Detection> decode_detections(const ScoreBatch<Scalar>& scores, const Tensor4<Scalar>& size,
                                         const Tensor4<Scalar>& offset, double stride, double min_score,
                                         int first_image_index = 0) {
  std::vector<Detection> out;
  for (Index b = 0; b < scores.batch(); ++b) {
    for (Index j = 0; j < scores.slots(); ++j) {
      if (!scores.valid(b, j) || static_cast<double>(scores.scores(b, j)) < min_score) continue;
      const Index y = scores.rows(b, j), x = scores.cols(b, j);
      Detection d;
      d.image_index = first_image_index + static_cast<int>(b);
      d.class_id = scores.class_ids(b, j);
      d.score = static_cast<double>(scores.scores(b, j));
      d.box.cx = (static_cast<double>(x) + static_cast<double>(offset(b, 0, y, x))) * stride;
      d.box.cy = (static_cast<double>(y) + static_cast<double>(offset(b, 1, y, x))) * stride;
      d.box.w = std::max(1.0, static_cast<double>(size(b, 0, y, x)) * stride);
      d.box.h = std::max(1.0, static_cast<double>(size(b, 1, y, x)) * stride);
      out.push_back(std::move(d));
    }
  }
  return out;
}

}  // namespace monotta
