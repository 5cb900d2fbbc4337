#include "sttc/synth.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "sttc/spectral.hpp"

namespace sttc {
namespace {

SynthSpec parse(const std::string& text) {
  std::istringstream in(text);
  return parse_synth_spec(in, "<test>");
}

TEST(SynthSpecParse, FullSpec) {
  SynthSpec s = parse(
      "# comment line\n"
      "nodes = 4\n"
      "steps = 500\n"
      "tone = 0.1 2.0 0.5   # trailing comment\n"
      "tone = 0.25 1\n"
      "noise_std = 0.05\n"
      "amp_drift = 1.0\n"
      "phase_drift = 0.3\n"
      "node_amp_jitter = 0\n"
      "node_phase_shuffle = false\n"
      "train_ratio = 0.5\n"
      "val_ratio = 0.25\n"
      "test_ratio = 0.25\n"
      "seed = 42\n"
      "sampling_minutes = 15\n");
  EXPECT_EQ(s.nodes, 4u);
  EXPECT_EQ(s.steps, 500u);
  ASSERT_EQ(s.tones.size(), 2u);
  EXPECT_EQ(s.tones[0].freq, 0.1);
  EXPECT_EQ(s.tones[0].amp, 2.0);
  EXPECT_EQ(s.tones[0].phase, 0.5);
  EXPECT_EQ(s.tones[1].freq, 0.25);
  EXPECT_EQ(s.tones[1].amp, 1.0);
  EXPECT_EQ(s.tones[1].phase, 0.0);
  EXPECT_EQ(s.noise_std, 0.05);
  EXPECT_EQ(s.amp_drift, 1.0);
  EXPECT_EQ(s.phase_drift, 0.3);
  EXPECT_EQ(s.node_amp_jitter, 0.0);
  EXPECT_FALSE(s.node_phase_shuffle);
  EXPECT_EQ(s.split.train, 0.5);
  EXPECT_EQ(s.seed, 42u);
  EXPECT_EQ(s.sampling_minutes, 15u);
}

TEST(SynthSpecParse, Rejects) {
  EXPECT_THROW(parse(""), ParseError);
  EXPECT_THROW(parse("nodes = 4\n"), ParseError);            // no tones
  EXPECT_THROW(parse("tone = 0.1 1\nwat = 3\n"), ParseError);
  EXPECT_THROW(parse("tone = 0.6 1\n"), ParseError);         // freq > 0.5
  EXPECT_THROW(parse("tone = 0 1\n"), ParseError);           // freq = 0
  EXPECT_THROW(parse("tone = 0.1\n"), ParseError);           // missing amp
  EXPECT_THROW(parse("steps = -5\ntone = 0.1 1\n"), ParseError);
  EXPECT_THROW(parse("steps = abc\ntone = 0.1 1\n"), ParseError);
  EXPECT_THROW(parse("just some words\n"), ParseError);
  EXPECT_THROW(parse("= 3\ntone = 0.1 1\n"), ParseError);
}

SynthSpec clean_spec() {
  SynthSpec s;
  s.nodes = 1;
  s.steps = 100;
  s.tones = {{0.125, 2.0, 0.3}};
  s.noise_std = 0.0;
  s.node_amp_jitter = 0.0;
  s.node_phase_shuffle = false;
  return s;
}

TEST(SynthGenerate, Deterministic) {
  SynthSpec s = clean_spec();
  s.nodes = 3;
  s.noise_std = 0.1;
  s.node_amp_jitter = 0.1;
  s.node_phase_shuffle = true;
  SeriesTensor a = synth_generate(s);
  SeriesTensor b = synth_generate(s);
  ASSERT_EQ(a.values.size(), b.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i)
    EXPECT_EQ(a.values[i], b.values[i]);

  s.seed = 2;
  SeriesTensor c = synth_generate(s);
  double diff = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i)
    diff = std::max(diff, std::abs(a.values[i] - c.values[i]));
  EXPECT_GT(diff, 1e-3);
}

TEST(SynthGenerate, MatchesClosedFormWithDrift) {
  SynthSpec s = clean_spec();
  s.amp_drift = 1.0;
  s.phase_drift = 0.5;
  SeriesTensor out = synth_generate(s);
  // steps=100 with 0.6/0.2/0.2 ratios puts the test segment at [80, 100).
  const double two_pi = 2.0 * std::numbers::pi;
  auto expected = [&](std::size_t t) {
    const double progress = t < 80 ? 0.0 : (static_cast<double>(t) - 80) / 19.0;
    return 2.0 * (1.0 + progress) *
           std::sin(two_pi * 0.125 * static_cast<double>(t) + 0.3 +
                    0.5 * progress);
  };
  for (std::size_t t : {std::size_t{0}, std::size_t{50}, std::size_t{79},
                        std::size_t{80}, std::size_t{90}, std::size_t{99}})
    EXPECT_NEAR(out.at(0, t), expected(t), 1e-12) << "t=" << t;
}

TEST(SynthGenerate, StationaryWithoutDrift) {
  SynthSpec s = clean_spec();
  s.steps = 400;
  SeriesTensor out = synth_generate(s);
  // One tone period is 8 steps; identical windows one period apart anywhere,
  // including across the test boundary at step 320.
  for (std::size_t t = 0; t + 8 < s.steps; t += 7)
    EXPECT_NEAR(out.at(0, t), out.at(0, t + 8), 1e-9);
}

TEST(SynthGenerate, SpectralPeakAtToneBin) {
  SynthSpec s = clean_spec();
  s.steps = 400;
  s.tones = {{1.0 / 16.0, 3.0, 0.0}};
  SeriesTensor out = synth_generate(s);

  const std::size_t T = 64;
  ForecastBlock window;
  window.values = Matrix(1, T);
  for (std::size_t t = 0; t < T; ++t) window.values(0, t) = out.at(0, t);
  Spectrum spec = forward_rfft(window);
  // A pure sine of amplitude a occupying one bin carries |F| = a * T / 2.
  for (std::size_t k = 0; k < spec.bins.cols(); ++k) {
    const double mag = std::abs(spec.bins(0, k));
    if (k == 4)
      EXPECT_NEAR(mag, 3.0 * static_cast<double>(T) / 2.0, 1e-9);
    else
      EXPECT_LE(mag, 1e-9);
  }
}

TEST(SynthGenerate, DriftDoublesTestAmplitude) {
  SynthSpec s = clean_spec();
  s.steps = 2000;  // test segment [1600, 2000)
  s.tones = {{1.0 / 16.0, 3.0, 0.0}};
  s.amp_drift = 1.0;
  SeriesTensor out = synth_generate(s);

  const std::size_t T = 64;
  auto bin_mag = [&](std::size_t start) {
    ForecastBlock window;
    window.values = Matrix(1, T);
    for (std::size_t t = 0; t < T; ++t)
      window.values(0, t) = out.at(0, start + t);
    return std::abs(forward_rfft(window).bins(0, 4));
  };
  const double train_mag = bin_mag(0);
  const double late_mag = bin_mag(s.steps - T);
  EXPECT_NEAR(train_mag, 3.0 * static_cast<double>(T) / 2.0, 1e-9);
  // The last window sits near progress 1 where the amplitude has doubled.
  EXPECT_GT(late_mag, 1.9 * train_mag);
  EXPECT_LT(late_mag, 2.05 * train_mag);
}

TEST(SynthGenerate, NodeVariationAndSharedBase) {
  SynthSpec s = clean_spec();
  s.nodes = 4;
  s.node_amp_jitter = 0.2;
  s.node_phase_shuffle = true;
  SeriesTensor out = synth_generate(s);
  double diff = 0.0;
  for (std::size_t t = 0; t < s.steps; ++t)
    diff = std::max(diff, std::abs(out.at(0, t) - out.at(1, t)));
  EXPECT_GT(diff, 1e-2);

  // Toggling noise must not reshuffle the per-node tone draws.
  SynthSpec noisy = s;
  noisy.noise_std = 0.5;
  SeriesTensor noisy_out = synth_generate(noisy);
  double max_delta = 0.0;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    max_delta = std::max(max_delta,
                         std::abs(out.values[i] - noisy_out.values[i]));
  EXPECT_LT(max_delta, 0.5 * 6.0);  // bounded by the noise scale alone
}

TEST(SynthGenerate, ShapeAndMetadata) {
  SynthSpec s = clean_spec();
  s.nodes = 3;
  s.sampling_minutes = 15;
  SeriesTensor out = synth_generate(s);
  EXPECT_EQ(out.nodes, 3u);
  EXPECT_EQ(out.steps, 100u);
  EXPECT_EQ(out.channels, 1u);
  EXPECT_FALSE(out.has_mask());
  EXPECT_EQ(out.sampling_interval, std::chrono::minutes(15));
}

}  // namespace
}  // namespace sttc
