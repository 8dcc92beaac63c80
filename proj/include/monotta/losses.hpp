#pragma once

#include "monotta/detection.hpp"
#include "monotta/random.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace monotta {

/// A loss value with its gradient with respect to the decoded top scores (B x N).
template <typename Scalar>
struct ScoreLoss {
  Scalar value = 0;
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> grad;
  int selected = 0;
};

/// (1 / B) * sum of -log(s_ij) over valid slots with s_ij >= alpha; zero when none qualify.
template <typename Scalar>
ScoreLoss<Scalar> adaptive_optimization_loss(const ScoreBatch<Scalar>& scores, double alpha) {
  if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("alpha must be in (0, 1)");
  ScoreLoss<Scalar> out;
  out.grad.setZero(scores.batch(), scores.slots());
  const Scalar inv_batch = Scalar(1) / static_cast<Scalar>(scores.batch());
  const Scalar lo = static_cast<Scalar>(kProbEpsilon), hi = static_cast<Scalar>(1.0 - kProbEpsilon);
  for (Index i = 0; i < scores.batch(); ++i) {
    for (Index j = 0; j < scores.slots(); ++j) {
      const Scalar s = scores.scores(i, j);
      if (!scores.valid(i, j) || static_cast<double>(s) < alpha) continue;
      const Scalar clamped = clamp_probability(s);
      out.value -= inv_batch * std::log(clamped);
      if (s > lo && s < hi) out.grad(i, j) = -inv_batch / s;
      ++out.selected;
    }
  }
  return out;
}

/// Index of the first maximum of a slot's class vector.
template <typename Derived>
Index argmax_class(const Eigen::DenseBase<Derived>& row) {
  Index best = 0;
  for (Index k = 1; k < row.size(); ++k) {
    if (row(k) > row(best)) best = k;
  }
  return best;
}

/// Draws one negative class per valid slot, uniformly among the K - 1 classes
/// other than the slot's argmax. Invalid slots get -1.
template <typename Scalar>
Eigen::MatrixXi sample_negative_classes(const MultiClassScoreBatch<Scalar>& multi, std::uint64_t seed) {
  const Index classes = multi.classes();
  if (classes < 2) throw std::invalid_argument("sample_negative_classes: needs at least two classes");
  Eigen::MatrixXi out = Eigen::MatrixXi::Constant(multi.batch(), multi.slots(), -1);
  std::uint64_t counter = 0;
  for (Index i = 0; i < multi.batch(); ++i) {
    for (Index j = 0; j < multi.slots(); ++j) {
      if (!multi.valid(i, j)) continue;
      const Index positive = argmax_class(multi.row(i, j));
      const auto draw = static_cast<Index>(derive_seed(seed, counter++) % static_cast<std::uint64_t>(classes - 1));
      out(i, j) = static_cast<int>(draw >= positive ? draw + 1 : draw);
    }
  }
  return out;
}

/// Class-balanced negative-learning loss with its gradient w.r.t. the class scores.
template <typename Scalar>
struct NegativeLoss {
  Scalar value = 0;
  RowMatrix<Scalar> grad;              // layout of MultiClassScoreBatch::class_scores
  std::vector<Scalar> per_class_loss;  // e_k
  std::vector<int> per_class_counts;   // n_k
  int selected = 0;
};

/// Over valid slots with eta <= s_ij < alpha, accumulates
/// e_k = sum of -w * log(1 - s-hat_ij,k) for slots whose sampled negative is k,
/// where w = 1 - s-hat_ij,k is held constant, and returns sum_k e_k / n_k over
/// classes with n_k > 0.
template <typename Scalar>
NegativeLoss<Scalar> negative_regularization_loss(const MultiClassScoreBatch<Scalar>& multi,
                                                  const ScoreBatch<Scalar>& scores,
                                                  const Eigen::MatrixXi& negative_classes, double eta, double alpha) {
  if (!(eta < alpha)) throw std::invalid_argument("negative_regularization_loss: requires eta < alpha");
  const Index classes = multi.classes(), slots = multi.slots();
  NegativeLoss<Scalar> out;
  out.grad = RowMatrix<Scalar>::Zero(multi.class_scores.rows(), classes);
  out.per_class_loss.assign(static_cast<std::size_t>(classes), Scalar(0));
  out.per_class_counts.assign(static_cast<std::size_t>(classes), 0);
  const Scalar lo = static_cast<Scalar>(kProbEpsilon), hi = static_cast<Scalar>(1.0 - kProbEpsilon);

  for (Index i = 0; i < scores.batch(); ++i) {
    for (Index j = 0; j < slots; ++j) {
      const double s = static_cast<double>(scores.scores(i, j));
      if (!scores.valid(i, j) || s < eta || s >= alpha) continue;
      const int k = negative_classes(i, j);
      if (k < 0) continue;
      const Scalar neg_score = multi(i, j, k);
      const Scalar weight = Scalar(1) - neg_score;
      const Scalar complement = clamp_probability(Scalar(1) - neg_score);
      out.per_class_loss[static_cast<std::size_t>(k)] -= weight * std::log(complement);
      ++out.per_class_counts[static_cast<std::size_t>(k)];
      ++out.selected;
    }
  }
  for (Index k = 0; k < classes; ++k) {
    const int n = out.per_class_counts[static_cast<std::size_t>(k)];
    if (n > 0) out.value += out.per_class_loss[static_cast<std::size_t>(k)] / static_cast<Scalar>(n);
  }
  // d/ds-hat of -w * log(1 - s-hat) with w constant is w / (1 - s-hat), scaled by 1 / n_k.
  for (Index i = 0; i < scores.batch(); ++i) {
    for (Index j = 0; j < slots; ++j) {
      const double s = static_cast<double>(scores.scores(i, j));
      if (!scores.valid(i, j) || s < eta || s >= alpha) continue;
      const int k = negative_classes(i, j);
      if (k < 0) continue;
      const Scalar neg_score = multi(i, j, k);
      const Scalar complement = Scalar(1) - neg_score;
      if (complement <= lo || complement >= hi) continue;
      const Scalar weight = complement;
      const int n = out.per_class_counts[static_cast<std::size_t>(k)];
      out.grad(i * slots + j, k) += weight / complement / static_cast<Scalar>(n);
    }
  }
  return out;
}

inline double combined_loss(double l_ao, double l_nreg, double lambda_balance) {
  if (!(lambda_balance >= 0)) throw std::invalid_argument("lambda must be non-negative");
  return l_ao + lambda_balance * l_nreg;
}

/// Bernoulli entropy -s log s - (1 - s) log(1 - s) with clamped logs.
template <typename Scalar>
Scalar bernoulli_entropy(Scalar s) {
  const Scalar p = clamp_probability(s);
  return -p * std::log(p) - (Scalar(1) - p) * std::log(Scalar(1) - p);
}

/// Mean Bernoulli entropy of valid top scores >= eta.
template <typename Scalar>
ScoreLoss<Scalar> entropy_loss(const ScoreBatch<Scalar>& scores, double eta) {
  ScoreLoss<Scalar> out;
  out.grad.setZero(scores.batch(), scores.slots());
  for (Index i = 0; i < scores.batch(); ++i) {
    for (Index j = 0; j < scores.slots(); ++j) {
      if (scores.valid(i, j) && static_cast<double>(scores.scores(i, j)) >= eta) ++out.selected;
    }
  }
  if (out.selected == 0) return out;
  const Scalar inv = Scalar(1) / static_cast<Scalar>(out.selected);
  for (Index i = 0; i < scores.batch(); ++i) {
    for (Index j = 0; j < scores.slots(); ++j) {
      if (!scores.valid(i, j) || static_cast<double>(scores.scores(i, j)) < eta) continue;
      const Scalar p = clamp_probability(scores.scores(i, j));
      out.value += inv * bernoulli_entropy(p);
      out.grad(i, j) = inv * std::log((Scalar(1) - p) / p);
    }
  }
  return out;
}

}  // namespace monotta
