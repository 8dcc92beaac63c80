#pragma once

// Slow, literal re-derivations used to check the production code. Nothing here
// calls into the functions it is meant to verify.

#include "monotta/detection.hpp"
#include "monotta/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <tuple>
#include <vector>

namespace oracle {

using monotta::Index;

inline double clamp01(double p) { return std::min(std::max(p, 1e-7), 1.0 - 1e-7); }

/// -(1/B) * sum over valid slots with s >= alpha of log s.
template <typename Scalar>
double adaptive_loss(const monotta::ScoreBatch<Scalar>& sb, double alpha) {
  double total = 0;
  for (Index i = 0; i < sb.batch(); ++i) {
    for (Index j = 0; j < sb.slots(); ++j) {
      const double s = static_cast<double>(sb.scores(i, j));
      if (sb.valid(i, j) && s >= alpha) total += -std::log(clamp01(s));
    }
  }
  return total / static_cast<double>(sb.batch());
}

/// d adaptive_loss / d s_ij.
template <typename Scalar>
double adaptive_grad(const monotta::ScoreBatch<Scalar>& sb, double alpha, Index i, Index j) {
  const double s = static_cast<double>(sb.scores(i, j));
  if (!sb.valid(i, j) || s < alpha || s <= 1e-7 || s >= 1.0 - 1e-7) return 0.0;
  return -1.0 / (static_cast<double>(sb.batch()) * s);
}

/// sum_k (1/n_k) * sum_{slots with negative k, eta <= s < alpha} -(1 - q) log(1 - q), q the negative-class score.
template <typename Scalar>
double negative_loss(const monotta::MultiClassScoreBatch<Scalar>& multi, const monotta::ScoreBatch<Scalar>& sb,
                     const Eigen::MatrixXi& neg, double eta, double alpha) {
  std::map<int, std::vector<double>> per_class;
  for (Index i = 0; i < sb.batch(); ++i) {
    for (Index j = 0; j < sb.slots(); ++j) {
      const double s = static_cast<double>(sb.scores(i, j));
      if (!sb.valid(i, j) || s < eta || s >= alpha || neg(i, j) < 0) continue;
      const double q = static_cast<double>(multi(i, j, neg(i, j)));
      per_class[neg(i, j)].push_back(-(1.0 - q) * std::log(clamp01(1.0 - q)));
    }
  }
  double total = 0;
  for (const auto& [k, terms] : per_class) {
    double e = 0;
    for (double t : terms) e += t;
    total += e / static_cast<double>(terms.size());
  }
  return total;
}

/// Gradient of negative_loss w.r.t. the negative-class score with the weight (1 - q) held fixed.
template <typename Scalar>
double negative_grad(const monotta::MultiClassScoreBatch<Scalar>& multi, const monotta::ScoreBatch<Scalar>& sb,
                     const Eigen::MatrixXi& neg, double eta, double alpha, Index i, Index j, Index k) {
  const auto eligible = [&](Index a, Index b) {
    const double s = static_cast<double>(sb.scores(a, b));
    return sb.valid(a, b) && s >= eta && s < alpha && neg(a, b) >= 0;
  };
  if (!eligible(i, j) || neg(i, j) != k) return 0.0;
  int n = 0;
  for (Index a = 0; a < sb.batch(); ++a) {
    for (Index b = 0; b < sb.slots(); ++b) n += eligible(a, b) && neg(a, b) == k ? 1 : 0;
  }
  const double q = static_cast<double>(multi(i, j, k));
  if (1.0 - q <= 1e-7 || 1.0 - q >= 1.0 - 1e-7) return 0.0;
  return 1.0 / n;  // (1 - q) / (1 - q) / n_k
}

/// Peak slots as (score, y, x, class), produced by exhaustive scanning.
template <typename Scalar>
std::vector<std::tuple<double, Index, Index, Index>> peaks(const monotta::HeatmapBatch<Scalar>& h, Index b,
                                                           Index n_max) {
  std::vector<std::tuple<double, Index, Index, Index, Index>> found;  // score, order, y, x, k
  Index order = 0;
  for (Index y = 0; y < h.height(); ++y) {
    for (Index x = 0; x < h.width(); ++x, ++order) {
      Index k = 0;
      for (Index c = 0; c < h.classes(); ++c) {
        if (h(b, c, y, x) > h(b, k, y, x)) k = c;
      }
      const double v = static_cast<double>(h(b, k, y, x));
      bool peak = true;
      for (Index ny = std::max<Index>(0, y - 1); ny <= std::min(h.height() - 1, y + 1); ++ny) {
        for (Index nx = std::max<Index>(0, x - 1); nx <= std::min(h.width() - 1, x + 1); ++nx) {
          peak = peak && static_cast<double>(h(b, k, ny, nx)) <= v;
        }
      }
      if (peak) found.emplace_back(v, order, y, x, k);
    }
  }
  std::sort(found.begin(), found.end(), [](const auto& a, const auto& c) {
    return std::get<0>(a) != std::get<0>(c) ? std::get<0>(a) > std::get<0>(c) : std::get<1>(a) < std::get<1>(c);
  });
  std::vector<std::tuple<double, Index, Index, Index>> out;
  for (std::size_t i = 0; i < found.size() && static_cast<Index>(i) < n_max; ++i) {
    out.emplace_back(std::get<0>(found[i]), std::get<2>(found[i]), std::get<3>(found[i]), std::get<4>(found[i]));
  }
  return out;
}

inline double box_iou(const monotta::Box& a, const monotta::Box& b) {
  const double ix = std::max(0.0, std::min(a.cx + a.w / 2, b.cx + b.w / 2) - std::max(a.cx - a.w / 2, b.cx - b.w / 2));
  const double iy = std::max(0.0, std::min(a.cy + a.h / 2, b.cy + b.h / 2) - std::max(a.cy - a.h / 2, b.cy - b.h / 2));
  const double inter = ix * iy;
  return inter / (a.w * a.h + b.w * b.h - inter);
}

/// AP at 40 recall points from an explicit precision-recall curve; -1 when the class has no ground truth.
inline double ap_r40(const std::vector<monotta::Detection>& dets, const monotta::Dataset& gt, int class_id,
                     double threshold) {
  std::vector<std::size_t> order;
  for (std::size_t d = 0; d < dets.size(); ++d) {
    if (dets[d].class_id == class_id) order.push_back(d);
  }
  // Descending score, equal scores by detection index.
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets[a].score != dets[b].score ? dets[a].score > dets[b].score : a < b;
  });
  int total_gt = 0;
  std::vector<std::vector<int>> taken(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    taken[i].assign(gt[i].objects.size(), 0);
    for (const auto& o : gt[i].objects) total_gt += o.class_id == class_id;
  }
  if (total_gt == 0) return -1;

  std::vector<std::pair<int, int>> curve;  // (tp, n) after each detection
  int tp = 0, n = 0;
  for (std::size_t d : order) {
    ++n;
    const auto& objects = gt[static_cast<std::size_t>(dets[d].image_index)].objects;
    int best = -1;
    double best_iou = -1;
    for (std::size_t g = 0; g < objects.size(); ++g) {
      if (objects[g].class_id != class_id || taken[static_cast<std::size_t>(dets[d].image_index)][g]) continue;
      const double v = box_iou(dets[d].box, objects[g].box);
      if (v > best_iou) {
        best_iou = v;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0 && best_iou >= threshold) {
      taken[static_cast<std::size_t>(dets[d].image_index)][static_cast<std::size_t>(best)] = 1;
      ++tp;
    }
    curve.emplace_back(tp, n);
  }
  double sum = 0;
  for (int r = 1; r <= 40; ++r) {
    double best = 0;
    for (const auto& [t, m] : curve) {
      if (t * 40 >= r * total_gt) best = std::max(best, static_cast<double>(t) / m);
    }
    sum += best;
  }
  return sum / 40;
}

/// Random decoded batch: scores in (0, 1), some invalid slots, per-class vectors whose max is the slot score.
template <typename Scalar>
std::pair<monotta::ScoreBatch<Scalar>, monotta::MultiClassScoreBatch<Scalar>> random_batch(std::mt19937_64& rng,
                                                                                          Index batch, Index slots,
                                                                                          Index classes) {
  std::uniform_real_distribution<double> u(0.01, 0.99);
  monotta::ScoreBatch<Scalar> sb(batch, slots);
  monotta::MultiClassScoreBatch<Scalar> multi(batch, slots, classes);
  for (Index i = 0; i < batch; ++i) {
    for (Index j = 0; j < slots; ++j) {
      const bool valid = u(rng) < 0.85;
      Index top = 0;
      for (Index k = 0; k < classes; ++k) {
        multi(i, j, k) = static_cast<Scalar>(u(rng));
        if (multi(i, j, k) > multi(i, j, top)) top = k;
      }
      sb.valid(i, j) = valid;
      multi.valid(i, j) = valid;
      sb.scores(i, j) = valid ? multi(i, j, top) : Scalar(0);
      sb.class_ids(i, j) = static_cast<int>(top);
    }
  }
  return {sb, multi};
}

}  // namespace oracle
