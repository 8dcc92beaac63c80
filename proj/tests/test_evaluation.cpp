#include "monotta/evaluation.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <random>
#include <sstream>

using namespace monotta;

namespace {

Detection det(int image, int cls, double score, Box box) {
  Detection d;
  d.image_index = image;
  d.class_id = cls;
  d.score = score;
  d.box = box;
  return d;
}

LabeledImage gt_image(std::vector<GroundTruthObject> objects) {
  LabeledImage item;
  item.objects = std::move(objects);
  return item;
}

/// Random ground truth plus jittered copies and clutter; coarse scores make ties frequent.
std::pair<Dataset, std::vector<Detection>> random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> n_images(1, 4), n_objects(0, 4), cls(0, 2), coarse(1, 8);
  std::uniform_real_distribution<double> pos(8, 56), size(6, 16), jitter(-3, 3), u(0, 1);
  Dataset gt;
  std::vector<Detection> dets;
  const int images = n_images(rng);
  const bool tied = u(rng) < 0.5;
  auto score = [&] { return tied ? coarse(rng) / 10.0 : u(rng); };
  for (int i = 0; i < images; ++i) {
    std::vector<GroundTruthObject> objects;
    for (int k = n_objects(rng); k > 0; --k) {
      GroundTruthObject o{cls(rng), {pos(rng), pos(rng), size(rng), size(rng)}};
      objects.push_back(o);
      // One or two candidate detections per object, sometimes with the wrong class.
      for (int c = 1 + (u(rng) < 0.3); c > 0; --c) {
        const int label = u(rng) < 0.85 ? o.class_id : cls(rng);
        dets.push_back(det(i, label, score(),
                           {o.box.cx + jitter(rng), o.box.cy + jitter(rng), std::max(1.0, o.box.w + jitter(rng)),
                            std::max(1.0, o.box.h + jitter(rng))}));
      }
    }
    for (int k = n_objects(rng); k > 0; --k) dets.push_back(det(i, cls(rng), score(), {pos(rng), pos(rng), size(rng), size(rng)}));
    gt.push_back(gt_image(std::move(objects)));
  }
  std::shuffle(dets.begin(), dets.end(), rng);
  return {gt, dets};
}

}  // namespace

TEST(Iou, WorkedExamples) {
  const Box a{5, 5, 10, 10};
  EXPECT_DOUBLE_EQ(iou(a, a), 1.0);
  EXPECT_DOUBLE_EQ(iou(a, Box{20, 20, 10, 10}), 0.0);
  EXPECT_DOUBLE_EQ(iou(a, Box{15, 5, 10, 10}), 0.0);  // touching edges
  EXPECT_NEAR(iou(a, Box{10, 5, 10, 10}), 1.0 / 3.0, 1e-12);
  EXPECT_NEAR(iou(Box{0, 0, 4, 4}, Box{0, 0, 2, 2}), 0.25, 1e-12);
}

TEST(Iou, SymmetricAndRejectsDegenerateBoxes) {
  EXPECT_EQ(iou(Box{3, 4, 5, 6}, Box{5, 4, 3, 8}), iou(Box{5, 4, 3, 8}, Box{3, 4, 5, 6}));
  EXPECT_THROW(iou(Box{0, 0, 0, 5}, Box{0, 0, 5, 5}), std::invalid_argument);
  EXPECT_THROW(iou(Box{0, 0, 5, 5}, Box{0, 0, 5, -1}), std::invalid_argument);
}

TEST(AveragePrecision, PerfectAndEmpty) {
  const Dataset gt{gt_image({{0, {10, 10, 8, 8}}, {1, {30, 30, 8, 8}}}), gt_image({{0, {40, 20, 10, 10}}})};
  const std::vector<Detection> perfect{det(0, 0, 0.9, {10, 10, 8, 8}), det(0, 1, 0.8, {30, 30, 8, 8}),
                                       det(1, 0, 0.7, {40, 20, 10, 10})};
  const auto ap = average_precision_r40(perfect, gt, 3, 0.5);
  EXPECT_DOUBLE_EQ(ap.mean_ap, 1.0);
  EXPECT_FALSE(ap.per_class[2].has_value());
  EXPECT_EQ(ap.gt_counts, (std::vector<int>{2, 1, 0}));

  const auto none = average_precision_r40({}, gt, 3, 0.5);
  EXPECT_DOUBLE_EQ(none.mean_ap, 0.0);
  EXPECT_DOUBLE_EQ(*none.per_class[0], 0.0);
}

TEST(AveragePrecision, HalfRecallWithLeadingFalsePositive) {
  // Ranked: FP, TP over two GTs -> precision 1/2 reached at recall 1/2 only.
  const Dataset gt{gt_image({{0, {10, 10, 8, 8}}, {0, {40, 40, 8, 8}}})};
  const std::vector<Detection> dets{det(0, 0, 0.9, {25, 25, 8, 8}), det(0, 0, 0.5, {10, 10, 8, 8})};
  const auto r = average_precision_r40(dets, gt, 1, 0.5);
  EXPECT_NEAR(r.mean_ap, 20 * 0.5 / 40, 1e-12);
}

TEST(AveragePrecision, DuplicateDetectionIsFalsePositive) {
  const Dataset gt{gt_image({{0, {10, 10, 8, 8}}})};
  const std::vector<Detection> dets{det(0, 0, 0.9, {10, 10, 8, 8}), det(0, 0, 0.8, {10, 10, 8, 8})};
  const auto m = match_detections(dets, gt, 0, 0.5);
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_TRUE(m.entries[0].true_positive);
  EXPECT_FALSE(m.entries[1].true_positive);
  EXPECT_DOUBLE_EQ(ap_r40_from_matches(m), 1.0);
}

TEST(AveragePrecision, EqualScoresResolvedByDetectionIndex) {
  const Dataset gt{gt_image({{0, {10, 10, 8, 8}}})};
  const std::vector<Detection> dets{det(0, 0, 0.5, {10, 10, 8, 8}), det(0, 0, 0.5, {11, 10, 8, 8})};
  const auto m = match_detections(dets, gt, 0, 0.5);
  EXPECT_EQ(m.entries[0].detection, 0u);
  EXPECT_TRUE(m.entries[0].true_positive);
  EXPECT_FALSE(m.entries[1].true_positive);
}

TEST(AveragePrecision, EqualIouPicksLowestGroundTruth) {
  const Dataset gt{gt_image({{0, {8, 10, 8, 8}}, {0, {12, 10, 8, 8}}})};
  const auto m = match_detections(std::vector<Detection>{det(0, 0, 0.9, {10, 10, 8, 8})}, gt, 0, 0.3);
  EXPECT_EQ(m.entries[0].matched_gt, 0);
  EXPECT_EQ(m.unmatched_gt, (std::vector<int>{1}));
}

TEST(AveragePrecision, MatchesBruteForceOracle) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    const auto [gt, dets] = random_instance(rng);
    const auto r = average_precision_r40(dets, gt, 3, 0.5);
    for (int k = 0; k < 3; ++k) {
      const double expected = oracle::ap_r40(dets, gt, k, 0.5);
      if (expected < 0) {
        EXPECT_FALSE(r.per_class[static_cast<std::size_t>(k)].has_value());
      } else {
        ASSERT_TRUE(r.per_class[static_cast<std::size_t>(k)].has_value());
        EXPECT_NEAR(*r.per_class[static_cast<std::size_t>(k)], expected, 1e-12) << "trial " << trial;
      }
    }
  }
}

TEST(AveragePrecision, StableUnderPermutationOfDistinctScores) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    auto [gt, dets] = random_instance(rng);
    for (auto& d : dets) d.score = u(rng);  // continuous scores: no ties
    const double before = average_precision_r40(dets, gt, 3, 0.5).mean_ap;
    std::shuffle(dets.begin(), dets.end(), rng);
    EXPECT_EQ(average_precision_r40(dets, gt, 3, 0.5).mean_ap, before);
  }
}

TEST(AveragePrecision, DroppingFalsePositivesNeverHurts) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto [gt, dets] = random_instance(rng);
    std::vector<Detection> kept;
    for (int k = 0; k < 3; ++k) {
      const auto m = match_detections(dets, gt, k, 0.5);
      for (const auto& e : m.entries) {
        if (e.true_positive) kept.push_back(dets[e.detection]);
      }
    }
    EXPECT_GE(average_precision_r40(kept, gt, 3, 0.5).mean_ap + 1e-12, average_precision_r40(dets, gt, 3, 0.5).mean_ap);
  }
}

TEST(AveragePrecision, StricterIouNeverHelps) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const auto [gt, dets] = random_instance(rng);
    EXPECT_LE(average_precision_r40(dets, gt, 3, 0.7).mean_ap, average_precision_r40(dets, gt, 3, 0.5).mean_ap + 1e-12);
  }
}

TEST(ScoreHistogram, CountsAddUp) {
  std::vector<Detection> dets;
  for (double s : {0.01, 0.05, 0.1, 0.19, 0.2, 0.35, 0.5, 0.99, 1.0}) dets.push_back(det(0, 0, s, {1, 1, 2, 2}));
  const auto h = score_histogram(dets, 10, 0.05, 0.2, 0.4);
  EXPECT_EQ(h.total, 8);
  EXPECT_EQ(h.edges.size(), 11u);
  int sum = 0;
  for (int c : h.counts) sum += c;
  EXPECT_EQ(sum, h.total);
  EXPECT_EQ(h.below_gamma, 3);
  EXPECT_EQ(h.at_or_above_gamma, 5);
  EXPECT_EQ(h.below_alpha + h.at_or_above_alpha, h.total);
  EXPECT_EQ(h.at_or_above_alpha, 3);
  EXPECT_EQ(h.counts.back(), 2);  // 0.99 and 1.0 share the closed top bin
  EXPECT_THROW(score_histogram(dets, 1, 0.05, 0.2, 0.4), std::invalid_argument);
}

TEST(Reports, ApCsvAndMatchLog) {
  const Dataset gt{gt_image({{0, {10, 10, 8, 8}}})};
  const std::vector<Detection> dets{det(0, 0, 0.9, {10, 10, 8, 8}), det(0, 1, 0.4, {30, 30, 8, 8})};
  std::ostringstream csv, jsonl;
  write_ap_csv(average_precision_r40(dets, gt, 3, 0.5), csv);
  EXPECT_EQ(csv.str(),
            "class_id,class_name,ap,detections,ground_truth\n"
            "0,disk,1.000000,1,1\n"
            "1,square,null,1,0\n"
            "2,triangle,null,0,0\n"
            "mAP,all,1.000000,2,1\n");
  write_match_jsonl(dets, gt, 3, 0.5, jsonl);
  std::istringstream lines(jsonl.str());
  std::string line;
  std::getline(lines, line);
  const auto first = nlohmann::json::parse(line);
  EXPECT_TRUE(first.at("true_positive").get<bool>());
  EXPECT_EQ(first.at("matched_gt").get<int>(), 0);
}
