#include "monotta/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace monotta {

double iou(const Box& a, const Box& b) {
  if (!(a.w > 0 && a.h > 0 && b.w > 0 && b.h > 0)) throw std::invalid_argument("iou: degenerate box");
  const double iw = std::min(a.x1(), b.x1()) - std::max(a.x0(), b.x0());
  const double ih = std::min(a.y1(), b.y1()) - std::max(a.y0(), b.y0());
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

MatchResult match_detections(std::span<const Detection> detections, std::span<const LabeledImage> ground_truth,
                             int class_id, double iou_threshold) {
  if (!(iou_threshold > 0 && iou_threshold < 1)) throw std::invalid_argument("iou threshold must be in (0, 1)");
  MatchResult result;
  std::vector<std::vector<bool>> claimed(ground_truth.size());
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    claimed[i].assign(ground_truth[i].objects.size(), false);
    for (const auto& o : ground_truth[i].objects) result.gt_count += o.class_id == class_id ? 1 : 0;
  }

  std::vector<std::size_t> order;
  for (std::size_t d = 0; d < detections.size(); ++d) {
    if (detections[d].class_id == class_id) order.push_back(d);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return detections[a].score > detections[b].score; });

  for (std::size_t d : order) {
    const Detection& det = detections[d];
    MatchResult::Entry entry{d, false, -1, 0.0};
    if (det.image_index >= 0 && static_cast<std::size_t>(det.image_index) < ground_truth.size()) {
      const auto& objects = ground_truth[static_cast<std::size_t>(det.image_index)].objects;
      auto& taken = claimed[static_cast<std::size_t>(det.image_index)];
      double best = 0;
      int best_index = -1;
      for (std::size_t g = 0; g < objects.size(); ++g) {
        if (objects[g].class_id != class_id || taken[g]) continue;
        const double overlap = iou(det.box, objects[g].box);
        if (overlap > best) {
          best = overlap;
          best_index = static_cast<int>(g);
        }
      }
      entry.iou = best;
      if (best_index >= 0 && best >= iou_threshold) {
        entry.true_positive = true;
        entry.matched_gt = best_index;
        taken[static_cast<std::size_t>(best_index)] = true;
      }
    }
    result.entries.push_back(entry);
  }

  result.unmatched_gt.resize(ground_truth.size(), 0);
  for (std::size_t i = 0; i < ground_truth.size(); ++i) {
    for (std::size_t g = 0; g < ground_truth[i].objects.size(); ++g) {
      if (ground_truth[i].objects[g].class_id == class_id && !claimed[i][g]) ++result.unmatched_gt[i];
    }
  }
  return result;
}

double ap_r40_from_matches(const MatchResult& match) {
  if (match.gt_count == 0) throw std::invalid_argument("AP undefined without ground truth");
  std::vector<double> precision;
  std::vector<long> true_positives;
  long tp = 0;
  for (std::size_t i = 0; i < match.entries.size(); ++i) {
    tp += match.entries[i].true_positive ? 1 : 0;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    true_positives.push_back(tp);
  }
  // Interpolated precision: running maximum from the right.
  for (std::size_t i = precision.size(); i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  double sum = 0;
  std::size_t cursor = 0;
  for (long r = 1; r <= kRecallPoints; ++r) {
    // recall >= r / 40, compared exactly in integers
    while (cursor < true_positives.size() && true_positives[cursor] * kRecallPoints < r * match.gt_count) ++cursor;
    if (cursor < true_positives.size()) sum += precision[cursor];
  }
  return sum / kRecallPoints;
}

APResult average_precision_r40(std::span<const Detection> detections, std::span<const LabeledImage> ground_truth,
                               int classes, double iou_threshold) {
  APResult result;
  double sum = 0;
  int defined = 0;
  for (int k = 0; k < classes; ++k) {
    const MatchResult match = match_detections(detections, ground_truth, k, iou_threshold);
    result.detection_counts.push_back(static_cast<int>(match.entries.size()));
    result.gt_counts.push_back(match.gt_count);
    if (match.gt_count == 0) {
      result.per_class.emplace_back(std::nullopt);
      continue;
    }
    const double ap = ap_r40_from_matches(match);
    result.per_class.emplace_back(ap);
    sum += ap;
    ++defined;
  }
  result.mean_ap = defined > 0 ? sum / defined : 0.0;
  return result;
}

ScoreHistogram score_histogram(std::span<const Detection> detections, int bins, double eta, double gamma,
                               double alpha) {
  if (bins < 2) throw std::invalid_argument("score_histogram: need at least 2 bins");
  ScoreHistogram h;
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (int b = 0; b <= bins; ++b) h.edges.push_back(static_cast<double>(b) / bins);
  for (const auto& d : detections) {
    if (d.score < eta) continue;
    const int bin = std::min(bins - 1, static_cast<int>(d.score * bins));
    ++h.counts[static_cast<std::size_t>(bin)];
    ++h.total;
    (d.score >= gamma ? h.at_or_above_gamma : h.below_gamma) += 1;
    (d.score >= alpha ? h.at_or_above_alpha : h.below_alpha) += 1;
  }
  return h;
}

void write_ap_csv(const APResult& result, std::ostream& out) {
  out << "class_id,class_name,ap,detections,ground_truth\n";
  char buf[64];
  for (std::size_t k = 0; k < result.per_class.size(); ++k) {
    out << k << ',' << shape_name(static_cast<ShapeClass>(k)) << ',';
    if (result.per_class[k]) {
      std::snprintf(buf, sizeof(buf), "%.6f", *result.per_class[k]);
      out << buf;
    } else {
      out << "null";
    }
    out << ',' << result.detection_counts[k] << ',' << result.gt_counts[k] << '\n';
  }
  std::snprintf(buf, sizeof(buf), "%.6f", result.mean_ap);
  out << "mAP,all," << buf << ',' << std::accumulate(result.detection_counts.begin(), result.detection_counts.end(), 0)
      << ',' << std::accumulate(result.gt_counts.begin(), result.gt_counts.end(), 0) << '\n';
}

void write_match_jsonl(std::span<const Detection> detections, std::span<const LabeledImage> ground_truth,
                       int classes, double iou_threshold, std::ostream& out) {
  for (int k = 0; k < classes; ++k) {
    const MatchResult match = match_detections(detections, ground_truth, k, iou_threshold);
    for (const auto& e : match.entries) {
      const Detection& d = detections[e.detection];
      nlohmann::json rec{{"image", d.image_index}, {"class_id", d.class_id}, {"score", d.score},
                         {"true_positive", e.true_positive}, {"matched_gt", e.matched_gt}, {"iou", e.iou}};
      out << rec.dump() << '\n';
    }
  }
}

}  // namespace monotta
