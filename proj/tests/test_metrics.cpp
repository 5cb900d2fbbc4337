#include "sttc/metrics.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace sttc {
namespace {

Matrix row(std::initializer_list<double> vals) {
  Matrix m(1, vals.size());
  std::size_t i = 0;
  for (double v : vals) m.data()[i++] = v;
  return m;
}

TEST(Metrics, WorkedExample) {
  Matrix truth = row({1.0, 2.0, 4.0});
  Matrix pred = row({1.5, 1.5, 4.0});
  EXPECT_NEAR(metric_mae(truth, pred), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(metric_rmse(truth, pred), std::sqrt(1.0 / 6.0), 1e-15);
  EXPECT_NEAR(metric_mape_percent(truth, pred), 25.0, 1e-12);
}

TEST(Metrics, MapeSkipsNearZeroTruth) {
  Matrix truth = row({0.0, 2.0});
  Matrix pred = row({5.0, 3.0});
  // Only the second entry participates: |3-2|/2 = 50%.
  EXPECT_NEAR(metric_mape_percent(truth, pred), 50.0, 1e-12);
  Matrix tiny = row({1e-9, 2.0});
  EXPECT_NEAR(metric_mape_percent(tiny, pred), 50.0, 1e-12);
}

TEST(Metrics, MapeAllExcludedIsNaN) {
  Matrix truth = row({0.0, 0.0});
  Matrix pred = row({1.0, 1.0});
  EXPECT_TRUE(std::isnan(metric_mape_percent(truth, pred)));
  EXPECT_NEAR(metric_mae(truth, pred), 1.0, 1e-15);
}

TEST(Metrics, MaskedEntriesSkipped) {
  Matrix truth = row({1.0, 100.0, 3.0});
  Matrix pred = row({2.0, 0.0, 3.0});
  ByteMask mask(1, 3, 1);
  mask(0, 1) = 0;
  EXPECT_NEAR(metric_mae(truth, pred, &mask), 0.5, 1e-15);
}

TEST(Metrics, EmptyInputThrows) {
  Matrix truth = row({1.0, 2.0});
  Matrix pred = row({1.0, 2.0});
  ByteMask mask(1, 2, 0);
  EXPECT_THROW(metric_mae(truth, pred, &mask), EmptyMetric);
}

TEST(Metrics, PerHorizonSlices) {
  MetricAccumulator acc(2);
  Matrix t1(2, 2), p1(2, 2);
  t1(0, 0) = 1; t1(0, 1) = 2; t1(1, 0) = 3; t1(1, 1) = 4;
  p1(0, 0) = 2; p1(0, 1) = 2; p1(1, 0) = 3; p1(1, 1) = 8;
  acc.add_block(t1, p1);
  EXPECT_NEAR(acc.mae(0), 0.5, 1e-15);   // |2-1|, |3-3|
  EXPECT_NEAR(acc.mae(1), 2.0, 1e-15);   // |2-2|, |8-4|
  EXPECT_NEAR(acc.mae(), 1.25, 1e-15);   // pooled over 4 entries
  EXPECT_NEAR(acc.rmse(), std::sqrt((1.0 + 0.0 + 0.0 + 16.0) / 4.0), 1e-15);
  EXPECT_EQ(acc.entries(), 4u);
  EXPECT_EQ(acc.blocks(), 1u);
}

TEST(Metrics, ReportCollectsEverything) {
  MetricAccumulator acc(2);
  Matrix t(1, 2), p(1, 2);
  t(0, 0) = 2.0; t(0, 1) = 4.0;
  p(0, 0) = 3.0; p(0, 1) = 2.0;
  ByteMask mask(1, 2, 1);
  acc.add_block(t, p, &mask);
  MetricsReport r = MetricsReport::from(acc);
  ASSERT_EQ(r.mae_h.size(), 2u);
  EXPECT_NEAR(r.mae_h[0], 1.0, 1e-15);
  EXPECT_NEAR(r.mae_h[1], 2.0, 1e-15);
  EXPECT_NEAR(r.mae, 1.5, 1e-15);
  EXPECT_EQ(r.masked, 0u);
  EXPECT_EQ(r.blocks, 1u);
}

TEST(Metrics, ShapeMismatchRejected) {
  MetricAccumulator acc(3);
  Matrix t(1, 2), p(1, 2);
  EXPECT_THROW(acc.add_block(t, p), ShapeMismatch);
}

TEST(CompensatedSum, SurvivesCancellation) {
  CompensatedSum s;
  s.add(1e16);
  s.add(1.0);
  s.add(-1e16);
  EXPECT_EQ(s.value(), 1.0);
}

TEST(CompensatedSum, ManySmallIncrements) {
  CompensatedSum s;
  for (int i = 0; i < 10'000'000; ++i) s.add(0.1);
  EXPECT_NEAR(s.value(), 1e6, 1e-6);
}

}  // namespace
}  // namespace sttc
