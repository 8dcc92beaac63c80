#pragma once

#include "monotta/detection.hpp"
#include "monotta/scenes.hpp"

#include <optional>
#include <ostream>
#include <span>
#include <vector>

namespace monotta {

/// Intersection over union of two axis-aligned boxes; throws on degenerate boxes.
double iou(const Box& a, const Box& b);

inline constexpr int kRecallPoints = 40;

/// Greedy matching outcome for one class over a set of images.
struct MatchResult {
  struct Entry {
    std::size_t detection = 0;  // index into the detections passed in
    bool true_positive = false;
    int matched_gt = -1;        // index within the image's ground truth, -1 if none
    double iou = 0;
  };
  std::vector<Entry> entries;          // in match (descending score) order
  std::vector<int> unmatched_gt;       // per image, false negatives
  int gt_count = 0;
};

/// Matches detections of class_id to ground truth, highest score first
/// (equal scores in detection index order). Each GT is claimed at most once,
/// by the unmatched GT of highest IoU >= iou_threshold in the same image.
MatchResult match_detections(std::span<const Detection> detections, std::span<const LabeledImage> ground_truth,
                             int class_id, double iou_threshold);

/// Interpolated precision averaged at recall points 1/40, 2/40, ..., 1.
double ap_r40_from_matches(const MatchResult& match);

struct APResult {
  std::vector<std::optional<double>> per_class;  // nullopt when a class has no ground truth
  double mean_ap = 0;                            // unweighted mean over defined classes
  std::vector<int> detection_counts;
  std::vector<int> gt_counts;
};

APResult average_precision_r40(std::span<const Detection> detections, std::span<const LabeledImage> ground_truth,
                               int classes, double iou_threshold);

struct ScoreHistogram {
  std::vector<double> edges;  // bins + 1 edges over [0, 1]
  std::vector<int> counts;
  int below_gamma = 0, at_or_above_gamma = 0;
  int below_alpha = 0, at_or_above_alpha = 0;
  int total = 0;  // detections with score >= eta
};

/// Histogram of detection scores >= eta over `bins` equal bins of [0, 1].
ScoreHistogram score_histogram(std::span<const Detection> detections, int bins, double eta, double gamma,
                               double alpha);

/// CSV with columns class_id,class_name,ap,detections,ground_truth then a mAP row.
void write_ap_csv(const APResult& result, std::ostream& out);
/// One JSON object per detection: image, class, score, tp, gt, iou.
void write_match_jsonl(std::span<const Detection> detections, std::span<const LabeledImage> ground_truth,
                       int classes, double iou_threshold, std::ostream& out);

}  // namespace monotta
