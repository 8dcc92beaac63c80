#pragma once

#include "monotta/detection.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>

namespace monotta {

/// Adaptive score threshold tracked as an exponential moving average of batch mean scores.
struct ThresholdState {
  double alpha = 0.2;
  double gamma = 0.2;  // pre-defined detection threshold, also the initial alpha
  double beta = 0.1;   // EMA weight of the newest batch mean
  std::int64_t step = 0;

  static ThresholdState initial(double gamma, double beta) {
    if (!(gamma > 0 && gamma < 1)) throw std::invalid_argument("gamma must be in (0, 1)");
    if (!(beta >= 0 && beta <= 1)) throw std::invalid_argument("beta must be in [0, 1]");
    return {gamma, gamma, beta, 0};
  }
};

/// Mean over images of the per-image mean of valid scores >= gamma.
///
/// Images without an eligible score are left out of the outer mean; nullopt
/// means no image in the batch had one.
template <typename Scalar>
std::optional<double> compute_batch_mean_score(const ScoreBatch<Scalar>& scores, double gamma) {
  if (!(gamma > 0 && gamma < 1)) throw std::invalid_argument("gamma must be in (0, 1)");
  double sum_of_means = 0;
  int images = 0;
  for (Index i = 0; i < scores.batch(); ++i) {
    double sum = 0;
    int count = 0;
    for (Index j = 0; j < scores.slots(); ++j) {
      const double s = static_cast<double>(scores.scores(i, j));
      if (scores.valid(i, j) && s >= gamma) {
        sum += s;
        ++count;
      }
    }
    if (count > 0) {
      sum_of_means += sum / count;
      ++images;
    }
  }
  if (images == 0) return std::nullopt;
  return sum_of_means / images;
}

/// alpha_1 = gamma; alpha_t = beta * mean_t + (1 - beta) * alpha_{t-1}, unchanged when no score qualifies.
template <typename Scalar>
ThresholdState update_threshold(ThresholdState state, const ScoreBatch<Scalar>& scores) {
  ++state.step;
  if (state.step == 1) {
    state.alpha = state.gamma;
    return state;
  }
  if (const auto mean = compute_batch_mean_score(scores, state.gamma)) {
    state.alpha = state.beta * *mean + (1.0 - state.beta) * state.alpha;
  }
  return state;
}

}  // namespace monotta
