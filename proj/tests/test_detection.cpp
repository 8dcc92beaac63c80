#include "monotta/detection.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace monotta;

namespace {

Tensor4<double> filled(Index b, Index k, Index h, Index w, double v) {
  Tensor4<double> t(b, k, h, w);
  t.data().setConstant(v);
  return t;
}

Tensor4<double> random_heatmap(std::mt19937_64& rng, Index b, Index k, Index h, Index w) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Quantized values make plateaus and cross-class ties common.
  std::uniform_int_distribution<int> coarse(1, 9);
  Tensor4<double> t(b, k, h, w);
  const bool quantize = u(rng) < 0.5;
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = quantize ? coarse(rng) / 10.0 : u(rng);
  return t;
}

}  // namespace

TEST(HeatmapBatch, ClampsIntoOpenInterval) {
  Tensor4<double> t = filled(1, 2, 2, 2, 0.5);
  t(0, 0, 0, 0) = 0.0;
  t(0, 1, 1, 1) = 1.0;
  HeatmapBatch<double> h(t);
  EXPECT_DOUBLE_EQ(h(0, 0, 0, 0), 1e-7);
  EXPECT_DOUBLE_EQ(h(0, 1, 1, 1), 1.0 - 1e-7);
  EXPECT_DOUBLE_EQ(h(0, 0, 1, 0), 0.5);
}

TEST(HeatmapBatch, RejectsEmpty) { EXPECT_THROW(HeatmapBatch<double>(Tensor4<double>(0, 1, 4, 4)), std::invalid_argument); }

TEST(ExtractPeaks, SingleStrictMaximum) {
  Tensor4<double> t = filled(1, 1, 4, 4, 0.1);
  t(0, 0, 1, 2) = 0.9;
  const auto peaks = extract_peaks(HeatmapBatch<double>(t), 20);
  // Only cells whose whole 3x3 window stays at 0.1 also qualify; the 0.9 peak ranks first.
  ASSERT_TRUE(peaks.scores.valid(0, 0));
  EXPECT_DOUBLE_EQ(peaks.scores.scores(0, 0), 0.9);
  EXPECT_EQ(peaks.scores.class_ids(0, 0), 0);
  EXPECT_EQ(peaks.scores.rows(0, 0), 1);
  EXPECT_EQ(peaks.scores.cols(0, 0), 2);
  for (Index j = 1; j < peaks.scores.slots(); ++j) {
    if (!peaks.scores.valid(0, j)) continue;
    const int dy = std::abs(peaks.scores.rows(0, j) - 1), dx = std::abs(peaks.scores.cols(0, j) - 2);
    EXPECT_TRUE(dy > 1 || dx > 1) << "neighbour of the maximum reported as a peak";
  }
}

TEST(ExtractPeaks, ConstantHeatmapKeepsRowMajorFirstCells) {
  const auto peaks = extract_peaks(HeatmapBatch<double>(filled(1, 1, 4, 4, 0.3)), 5);
  for (Index j = 0; j < 5; ++j) {
    ASSERT_TRUE(peaks.scores.valid(0, j));
    EXPECT_DOUBLE_EQ(peaks.scores.scores(0, j), 0.3);
    EXPECT_EQ(peaks.scores.rows(0, j) * 4 + peaks.scores.cols(0, j), j);
  }
}

TEST(ExtractPeaks, RejectsBadArguments) {
  EXPECT_THROW(extract_peaks(HeatmapBatch<double>(filled(1, 1, 2, 2, 0.3)), 0), std::invalid_argument);
  EXPECT_THROW(extract_peaks(HeatmapBatch<double>(), 3), std::invalid_argument);
}

TEST(ExtractPeaks, MatchesBruteForceScan) {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> bdist(1, 4), kdist(1, 3), sdist(1, 8), ndist(1, 12);
  for (int trial = 0; trial < 50; ++trial) {
    const Index b = bdist(rng), k = kdist(rng), hw = sdist(rng), n_max = ndist(rng);
    const HeatmapBatch<double> h(random_heatmap(rng, b, k, hw, hw));
    const auto peaks = extract_peaks(h, n_max);
    for (Index i = 0; i < b; ++i) {
      const auto expected = oracle::peaks(h, i, n_max);
      Index valid = 0;
      for (Index j = 0; j < n_max; ++j) valid += peaks.scores.valid(i, j) ? 1 : 0;
      ASSERT_EQ(valid, static_cast<Index>(expected.size())) << "trial " << trial;
      for (std::size_t j = 0; j < expected.size(); ++j) {
        const auto [score, y, x, cls] = expected[j];
        const auto s = static_cast<Index>(j);
        EXPECT_DOUBLE_EQ(peaks.scores.scores(i, s), score);
        EXPECT_EQ(peaks.scores.rows(i, s), y);
        EXPECT_EQ(peaks.scores.cols(i, s), x);
        EXPECT_EQ(peaks.scores.class_ids(i, s), cls);
      }
    }
  }
}

TEST(ExtractPeaks, ScoreIsMaxOfClassVector) {
  std::mt19937_64 rng(7);
  const HeatmapBatch<double> h(random_heatmap(rng, 3, 3, 8, 8));
  const auto peaks = extract_peaks(h, 10);
  for (Index i = 0; i < 3; ++i) {
    for (Index j = 0; j < 10; ++j) {
      if (!peaks.scores.valid(i, j)) {
        EXPECT_EQ(peaks.scores.scores(i, j), 0.0);
        continue;
      }
      Index arg = 0;
      const auto row = peaks.multi.row(i, j);
      for (Index k = 1; k < 3; ++k) {
        if (row(k) > row(arg)) arg = k;
      }
      EXPECT_EQ(peaks.scores.class_ids(i, j), arg);
      EXPECT_DOUBLE_EQ(peaks.scores.scores(i, j), row.maxCoeff());
      if (j > 0 && peaks.scores.valid(i, j - 1)) EXPECT_GE(peaks.scores.scores(i, j - 1), peaks.scores.scores(i, j));
    }
  }
}

TEST(ExtractPeaks, IdempotentAndPrefixUnderTruncation) {
  std::mt19937_64 rng(3);
  const HeatmapBatch<double> h(random_heatmap(rng, 2, 3, 8, 8));
  const auto a = extract_peaks(h, 12), b = extract_peaks(h, 12), c = extract_peaks(h, 5);
  EXPECT_EQ(a.scores.scores, b.scores.scores);
  EXPECT_EQ(a.multi.class_scores, b.multi.class_scores);
  EXPECT_EQ(a.scores.scores.leftCols(5), c.scores.scores);
  EXPECT_EQ(a.scores.rows.leftCols(5), c.scores.rows);
  EXPECT_EQ(a.scores.cols.leftCols(5), c.scores.cols);
}

TEST(ScatterGradient, LandsOnPeakCells) {
  Tensor4<double> t = filled(1, 2, 3, 3, 0.1);
  t(0, 1, 1, 1) = 0.8;
  const auto peaks = extract_peaks(HeatmapBatch<double>(t), 1);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(1, 1);
  grad(0, 0) = 2.5;
  Tensor4<double> d(1, 2, 3, 3);
  scatter_score_gradient(peaks.scores, grad, d);
  EXPECT_DOUBLE_EQ(d(0, 1, 1, 1), 2.5);
  EXPECT_DOUBLE_EQ(d.data().sum(), 2.5);

  RowMatrix<double> multi_grad = RowMatrix<double>::Zero(1, 2);
  multi_grad(0, 0) = -1.0;
  Tensor4<double> dm(1, 2, 3, 3);
  scatter_multi_gradient(peaks.scores, multi_grad, dm);
  EXPECT_DOUBLE_EQ(dm(0, 0, 1, 1), -1.0);
}

TEST(DecodeDetections, MapsGridToPixels) {
  Tensor4<double> t = filled(2, 1, 4, 4, 0.1);
  t(1, 0, 2, 1) = 0.7;
  const auto peaks = extract_peaks(HeatmapBatch<double>(t), 3);
  Tensor4<double> size(2, 2, 4, 4), offset(2, 2, 4, 4);
  size(1, 0, 2, 1) = 2.0;
  size(1, 1, 2, 1) = 0.1;  // below one pixel after scaling: floored to 1
  offset(1, 0, 2, 1) = 0.25;
  offset(1, 1, 2, 1) = 0.5;
  const auto dets = decode_detections(peaks.scores, size, offset, 4.0, 0.5, 10);
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(dets[0].image_index, 11);
  EXPECT_DOUBLE_EQ(dets[0].score, 0.7);
  EXPECT_DOUBLE_EQ(dets[0].box.cx, 5.0);
  EXPECT_DOUBLE_EQ(dets[0].box.cy, 10.0);
  EXPECT_DOUBLE_EQ(dets[0].box.w, 8.0);
  EXPECT_DOUBLE_EQ(dets[0].box.h, 1.0);
}
