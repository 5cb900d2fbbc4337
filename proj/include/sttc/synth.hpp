#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "sttc/errors.hpp"
#include "sttc/rng.hpp"
#include "sttc/series.hpp"

namespace sttc {

/// One sinusoidal component. Frequency is in cycles per step.
struct Tone {
  double freq = 0.0;
  double amp = 1.0;
  double phase = 0.0;
};

/// Recipe for a synthetic multi-node series: a sum of tones with per-node
/// amplitude and phase variation, Gaussian noise, and optional linear drift
/// of amplitude and phase that switches on at the test-split boundary.
///
/// `amp_drift` is the total fractional amplitude change reached at the last
/// step (1.0 doubles every amplitude); `phase_drift` is the total added phase
/// in radians. Train and validation segments are stationary by construction.
struct SynthSpec {
  std::size_t nodes = 8;
  std::size_t steps = 2000;
  std::vector<Tone> tones;
  double noise_std = 0.0;
  double amp_drift = 0.0;
  double phase_drift = 0.0;
  double node_amp_jitter = 0.1;   // per-node amplitude factor range
  bool node_phase_shuffle = true; // random per-node phase offset
  SplitSpec split;
  std::uint64_t seed = 1;
  unsigned sampling_minutes = 5;
};

/// Parses the flat key = value spec format. Repeated `tone` keys append; each
/// takes `freq amp phase`, phase optional.
inline SynthSpec parse_synth_spec(std::istream& in, const std::string& source) {
  SynthSpec spec;
  std::string line;
  std::size_t line_no = 0;
  bool any = false;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      bool blank = line.find_first_not_of(" \t\r") == std::string::npos;
      if (blank) continue;
      throw ParseError(source + ":" + std::to_string(line_no) +
                       ": expected key = value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ParseError(source + ":" + std::to_string(line_no) +
                       ": empty key or value");
    any = true;

    auto as_double = [&](const std::string& v) {
      try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
      } catch (const std::exception&) {
        throw ParseError(source + ":" + std::to_string(line_no) +
                         ": bad number '" + v + "'");
      }
    };
    auto as_size = [&](const std::string& v) {
      const double d = as_double(v);
      if (d < 0 || d != std::floor(d))
        throw ParseError(source + ":" + std::to_string(line_no) +
                         ": expected a non-negative integer");
      return static_cast<std::size_t>(d);
    };

    if (key == "nodes") {
      spec.nodes = as_size(value);
    } else if (key == "steps") {
      spec.steps = as_size(value);
    } else if (key == "tone") {
      std::istringstream tone_in(value);
      Tone t;
      if (!(tone_in >> t.freq >> t.amp))
        throw ParseError(source + ":" + std::to_string(line_no) +
                         ": tone needs 'freq amp [phase]'");
      tone_in >> t.phase;
      spec.tones.push_back(t);
    } else if (key == "noise_std") {
      spec.noise_std = as_double(value);
    } else if (key == "amp_drift") {
      spec.amp_drift = as_double(value);
    } else if (key == "phase_drift") {
      spec.phase_drift = as_double(value);
    } else if (key == "node_amp_jitter") {
      spec.node_amp_jitter = as_double(value);
    } else if (key == "node_phase_shuffle") {
      spec.node_phase_shuffle = value == "true" || value == "1";
    } else if (key == "train_ratio") {
      spec.split.train = as_double(value);
    } else if (key == "val_ratio") {
      spec.split.val = as_double(value);
    } else if (key == "test_ratio") {
      spec.split.test = as_double(value);
    } else if (key == "seed") {
      spec.seed = static_cast<std::uint64_t>(as_size(value));
    } else if (key == "sampling_minutes") {
      spec.sampling_minutes = static_cast<unsigned>(as_size(value));
    } else {
      throw ParseError(source + ":" + std::to_string(line_no) +
                       ": unknown key '" + key + "'");
    }
  }
  if (!any) throw ParseError(source + ": empty spec");
  if (spec.tones.empty()) throw ParseError(source + ": spec declares no tones");
  if (spec.nodes == 0 || spec.steps == 0)
    throw ParseError(source + ": nodes and steps must be positive");
  for (const Tone& t : spec.tones)
    if (t.freq <= 0.0 || t.freq > 0.5)
      throw ParseError(source + ": tone frequency must be in (0, 0.5]");
  return spec;
}

inline SynthSpec load_synth_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return parse_synth_spec(in, path);
}

/// Deterministic generation: the same spec and seed give bit-identical
/// output. Per-node tone variations and the noise stream use independent
/// seed lanes, so toggling noise does not reshuffle the tones.
inline SeriesTensor synth_generate(const SynthSpec& spec) {
  const SplitIndices split = make_split(spec.steps, spec.split);
  const std::size_t test_begin = split.val_end;
  const double drift_span =
      static_cast<double>(spec.steps - 1 - test_begin);

  SeriesTensor out;
  out.nodes = spec.nodes;
  out.steps = spec.steps;
  out.channels = 1;
  out.sampling_interval = std::chrono::minutes(spec.sampling_minutes);
  out.values.resize(spec.nodes * spec.steps);

  SplitMix64 tone_rng(derive_seed(spec.seed, 0));
  GaussianSource noise(derive_seed(spec.seed, 1));

  std::vector<double> amp(spec.nodes * spec.tones.size());
  std::vector<double> phase(spec.nodes * spec.tones.size());
  for (std::size_t n = 0; n < spec.nodes; ++n) {
    for (std::size_t k = 0; k < spec.tones.size(); ++k) {
      const Tone& t = spec.tones[k];
      amp[n * spec.tones.size() + k] =
          t.amp * (1.0 + spec.node_amp_jitter * tone_rng.uniform(-1.0, 1.0));
      phase[n * spec.tones.size() + k] =
          t.phase + (spec.node_phase_shuffle
                         ? tone_rng.uniform(-std::numbers::pi, std::numbers::pi)
                         : 0.0);
    }
  }

  for (std::size_t n = 0; n < spec.nodes; ++n) {
    for (std::size_t t = 0; t < spec.steps; ++t) {
      const double progress =
          (t < test_begin || drift_span <= 0.0)
              ? 0.0
              : static_cast<double>(t - test_begin) / drift_span;
      double v = 0.0;
      for (std::size_t k = 0; k < spec.tones.size(); ++k) {
        const double a =
            amp[n * spec.tones.size() + k] * (1.0 + spec.amp_drift * progress);
        const double p =
            phase[n * spec.tones.size() + k] + spec.phase_drift * progress;
        v += a * std::sin(2.0 * std::numbers::pi * spec.tones[k].freq *
                              static_cast<double>(t) +
                          p);
      }
      if (spec.noise_std > 0.0) v += spec.noise_std * noise.next();
      out.values[out.index(n, t)] = v;
    }
  }
  return out;
}

}  // namespace sttc
