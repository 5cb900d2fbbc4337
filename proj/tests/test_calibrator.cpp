#include "sttc/calibrator.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "sttc/rng.hpp"

namespace sttc {
namespace {

ForecastBlock random_block(std::size_t n, std::size_t t, std::uint64_t seed) {
  ForecastBlock b;
  b.values = Matrix(n, t);
  SplitMix64 g(seed);
  for (std::size_t i = 0; i < b.values.size(); ++i)
    b.values.data()[i] = g.uniform(-5.0, 5.0);
  return b;
}

CalibratorParams random_params(const GroupLayout& layout, std::size_t nodes,
                               double magnitude, std::uint64_t seed) {
  CalibratorParams p = CalibratorParams::zeros(layout.groups(), nodes);
  SplitMix64 g(seed);
  for (std::size_t i = 0; i < p.amp.size(); ++i)
    p.amp.data()[i] = g.uniform(-magnitude, magnitude);
  for (std::size_t i = 0; i < p.phase.size(); ++i)
    p.phase.data()[i] = g.uniform(-magnitude, magnitude);
  return p;
}

TEST(GroupLayout, RemainderFoldsIntoLastGroup) {
  GroupLayout l = build_group_layout(7, 4);
  ASSERT_EQ(l.groups(), 4u);
  EXPECT_EQ(l.start[0], 0u);
  EXPECT_EQ(l.end[0], 1u);
  EXPECT_EQ(l.start[1], 1u);
  EXPECT_EQ(l.end[1], 2u);
  EXPECT_EQ(l.start[2], 2u);
  EXPECT_EQ(l.end[2], 3u);
  EXPECT_EQ(l.start[3], 3u);
  EXPECT_EQ(l.end[3], 7u);
}

TEST(GroupLayout, EvenSplit) {
  GroupLayout l = build_group_layout(8, 4);
  for (std::size_t g = 0; g < 4; ++g) {
    EXPECT_EQ(l.start[g], 2 * g);
    EXPECT_EQ(l.end[g], 2 * g + 2);
  }
}

TEST(GroupLayout, ClampsToOneBinPerGroup) {
  GroupLayout l = build_group_layout(3, 8);
  ASSERT_EQ(l.groups(), 3u);
  for (std::size_t g = 0; g < 3; ++g) {
    EXPECT_EQ(l.start[g], g);
    EXPECT_EQ(l.end[g], g + 1);
  }
}

TEST(GroupLayout, CoversAllBinsDisjointly) {
  for (std::size_t bins : {1u, 2u, 5u, 7u, 13u, 64u}) {
    for (std::size_t g : {1u, 2u, 3u, 4u, 9u}) {
      GroupLayout l = build_group_layout(bins, g);
      std::size_t covered = 0;
      for (std::size_t i = 0; i < l.groups(); ++i) {
        EXPECT_LT(l.start[i], l.end[i]);
        if (i + 1 < l.groups()) EXPECT_EQ(l.end[i], l.start[i + 1]);
        covered += l.end[i] - l.start[i];
      }
      EXPECT_EQ(covered, bins);
      EXPECT_EQ(l.end.back(), bins);
    }
  }
}

TEST(GroupLayout, RejectsZeroGroups) {
  EXPECT_THROW(build_group_layout(7, 0), InvalidConfig);
}

TEST(CalibratorParams, ScalarCount) {
  CalibratorParams p = CalibratorParams::zeros(4, 1000);
  EXPECT_EQ(p.scalar_count(), 8000u);
}

TEST(Modulate, PhaseShiftTurnsRealBinImaginary) {
  AmplitudePhase ap;
  ap.signal_length = 4;
  ap.amplitude = Matrix(1, 3, 0.0);
  ap.phase = Matrix(1, 3, 0.0);
  ap.amplitude(0, 1) = 2.0;
  GroupLayout layout = build_group_layout(3, 1);
  CalibratorParams p = CalibratorParams::zeros(1, 1);
  p.phase(0, 0) = std::numbers::pi / 2.0;
  Spectrum out = modulate(ap, p, layout);
  EXPECT_NEAR(out.bins(0, 0).real(), 0.0, 1e-12);
  EXPECT_NEAR(out.bins(0, 1).real(), 0.0, 1e-12);
  EXPECT_NEAR(out.bins(0, 1).imag(), 2.0, 1e-12);
  EXPECT_NEAR(out.bins(0, 2).real(), 0.0, 1e-12);
}

TEST(Modulate, RejectsShapeMismatch) {
  AmplitudePhase ap;
  ap.signal_length = 4;
  ap.amplitude = Matrix(1, 3, 0.0);
  ap.phase = Matrix(1, 3, 0.0);
  GroupLayout layout = build_group_layout(5, 2);
  CalibratorParams p = CalibratorParams::zeros(2, 1);
  EXPECT_THROW(modulate(ap, p, layout), ShapeMismatch);
  GroupLayout ok = build_group_layout(3, 2);
  CalibratorParams wrong_nodes = CalibratorParams::zeros(2, 3);
  EXPECT_THROW(modulate(ap, wrong_nodes, ok), ShapeMismatch);
}

TEST(Calibrate, IdentityAtZeroParams) {
  for (std::size_t t : {4u, 12u, 24u, 7u}) {
    ForecastBlock b = random_block(6, t, 99 + t);
    GroupLayout layout = build_group_layout(rfft_bins(t), 4);
    CalibratorParams p = CalibratorParams::zeros(layout.groups(), 6);
    ForecastBlock out = calibrate(b, p, layout);
    EXPECT_LE(max_abs_diff(out.values, b.values), 1e-9) << "length " << t;
  }
}

TEST(Calibrate, FullTurnPhaseIsIdentity) {
  ForecastBlock b = random_block(3, 12, 5);
  GroupLayout layout = build_group_layout(7, 4);
  CalibratorParams p = CalibratorParams::zeros(4, 3);
  for (std::size_t i = 0; i < p.phase.size(); ++i)
    p.phase.data()[i] = 2.0 * std::numbers::pi;
  ForecastBlock out = calibrate(b, p, layout);
  EXPECT_LE(max_abs_diff(out.values, b.values), 1e-9);
}

TEST(Calibrate, MatchesPerBinComplexOracle) {
  const std::size_t n = 4, t = 12;
  ForecastBlock b = random_block(n, t, 31);
  GroupLayout layout = build_group_layout(rfft_bins(t), 4);
  CalibratorParams p = random_params(layout, n, 0.3, 32);

  // Oracle: multiply each bin by (1 + gain) * exp(i * shift) directly.
  Spectrum spec = forward_rfft(b);
  Spectrum expect;
  expect.signal_length = t;
  expect.bins = CMatrix(n, spec.bin_count());
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t k = 0; k < spec.bin_count(); ++k) {
      const std::size_t g = layout.bin_group[k];
      const std::complex<double> c =
          (1.0 + p.amp(g, r)) *
          std::complex<double>(std::cos(p.phase(g, r)),
                               std::sin(p.phase(g, r)));
      expect.bins(r, k) = c * spec.bins(r, k);
    }
  }
  Matrix oracle = inverse_rfft(expect);
  ForecastBlock got = calibrate(b, p, layout);
  EXPECT_LE(max_abs_diff(got.values, oracle), 1e-9);
}

TEST(Calibrate, AmplitudeGainScalesSignal) {
  // Zero-mean signal, single group, pure gain: output is (1 + gain) * input.
  ForecastBlock b;
  b.values = Matrix(1, 4);
  b.values(0, 0) = 1.0;
  b.values(0, 1) = 0.0;
  b.values(0, 2) = -1.0;
  b.values(0, 3) = 0.0;
  GroupLayout layout = build_group_layout(3, 1);
  CalibratorParams p = CalibratorParams::zeros(1, 1);
  p.amp(0, 0) = 0.25;
  ForecastBlock out = calibrate(b, p, layout);
  for (std::size_t c = 0; c < 4; ++c)
    EXPECT_NEAR(out.values(0, c), 1.25 * b.values(0, c), 1e-12);
}

TEST(BoundCheck, PureGainIsEqualityCase) {
  ForecastBlock b = random_block(3, 12, 8);
  GroupLayout layout = build_group_layout(7, 1);
  CalibratorParams p = CalibratorParams::zeros(1, 3);
  for (std::size_t i = 0; i < p.amp.size(); ++i) p.amp.data()[i] = 0.01;
  BoundReport r = perturbation_bound_check(b, p, layout);
  EXPECT_TRUE(r.satisfied);
  EXPECT_NEAR(r.delta_norm, 0.01 * r.spectrum_norm,
              1e-12 * r.spectrum_norm);
  EXPECT_NEAR(r.exact_bound, 0.01 * r.spectrum_norm, 1e-12 * r.spectrum_norm);
}

TEST(BoundCheck, HoldsOnRandomParams) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    std::size_t t = 4 + (seed % 21);
    ForecastBlock b = random_block(1 + seed % 5, t, 500 + seed);
    GroupLayout layout = build_group_layout(rfft_bins(t), 1 + seed % 6);
    CalibratorParams p =
        random_params(layout, b.nodes(), 0.1, 900 + seed);
    BoundReport r = perturbation_bound_check(b, p, layout);
    EXPECT_TRUE(r.satisfied) << "seed " << seed;
  }
}

TEST(BoundCheck, FirstOrderHoldsWithSlackForTinyParams) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    ForecastBlock b = random_block(2, 12, 1300 + seed);
    GroupLayout layout = build_group_layout(7, 4);
    CalibratorParams p = random_params(layout, 2, 1e-3, 1700 + seed);
    BoundReport r = perturbation_bound_check(b, p, layout);
    EXPECT_LE(r.delta_norm, 1.001 * r.first_order_bound) << "seed " << seed;
  }
}

TEST(BoundCheck, InflatedDeltaFails) {
  // Pure uniform gain sits exactly on the bound, so doubling the measured
  // delta must push it over.
  ForecastBlock b = random_block(2, 12, 4);
  GroupLayout layout = build_group_layout(7, 4);
  CalibratorParams p = CalibratorParams::zeros(4, 2);
  for (std::size_t i = 0; i < p.amp.size(); ++i) p.amp.data()[i] = 0.05;
  BoundReport r = perturbation_bound_check(b, p, layout, 2.0);
  EXPECT_FALSE(r.satisfied);
}

}  // namespace
}  // namespace sttc
