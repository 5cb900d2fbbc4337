#pragma once

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sttc/errors.hpp"
#include "sttc/io.hpp"
#include "sttc/matrix.hpp"
#include "sttc/scaler.hpp"

namespace sttc {

/// A multivariate series: `nodes` parallel sensors over `steps` timesteps,
/// each with `channels` readings. Values are stored [node][time][channel].
/// Channel 0 is the forecast target. An optional mask marks entries as valid
/// (1) or missing (0).
struct SeriesTensor {
  std::size_t nodes = 0;
  std::size_t steps = 0;
  std::size_t channels = 1;
  std::vector<double> values;
  std::vector<std::uint8_t> mask;  // empty = everything valid
  std::chrono::minutes sampling_interval{5};

  std::size_t index(std::size_t n, std::size_t t, std::size_t c = 0) const {
    return (n * steps + t) * channels + c;
  }
  double at(std::size_t n, std::size_t t, std::size_t c = 0) const {
    return values[index(n, t, c)];
  }
  bool valid(std::size_t n, std::size_t t, std::size_t c = 0) const {
    return mask.empty() || mask[index(n, t, c)] != 0;
  }
  bool has_mask() const { return !mask.empty(); }

  /// Target-channel slice over [begin, end) as a [nodes x (end-begin)] matrix.
  Matrix target_slice(std::size_t begin, std::size_t end) const {
    Matrix m(nodes, end - begin);
    for (std::size_t n = 0; n < nodes; ++n)
      for (std::size_t t = begin; t < end; ++t) m(n, t - begin) = at(n, t, 0);
    return m;
  }
};

namespace detail {

constexpr std::uint8_t kSeriesMagic[6] = {0x53, 0x54, 0x54, 0x43, 0x31, 0x00};
constexpr std::uint32_t kMaskFlag = 1u;

inline void validate_series(const SeriesTensor& s, const std::string& source) {
  if (s.nodes == 0 || s.steps == 0 || s.channels == 0)
    throw FormatError(source + ": empty dimension");
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    const bool masked = !s.mask.empty() && s.mask[i] == 0;
    if (!masked && !std::isfinite(s.values[i]))
      throw FormatError(source + ": non-finite value at flat index " +
                        std::to_string(i));
  }
}

}  // namespace detail

/// Binary series format: 6-byte magic "STTC1\0"; u32 little-endian counts of
/// nodes, steps, channels; u32 flags (bit 0: mask present); node-major rows of
/// float32 values; then one 0/1 byte per value when the mask flag is set.
inline std::vector<std::uint8_t> serialize_series(const SeriesTensor& s) {
  ByteWriter w;
  w.raw(detail::kSeriesMagic, 6);
  w.u32(static_cast<std::uint32_t>(s.nodes));
  w.u32(static_cast<std::uint32_t>(s.steps));
  w.u32(static_cast<std::uint32_t>(s.channels));
  w.u32(s.mask.empty() ? 0u : detail::kMaskFlag);
  for (double v : s.values) w.f32(static_cast<float>(v));
  if (!s.mask.empty()) w.raw(s.mask.data(), s.mask.size());
  return w.bytes();
}

inline void save_binary(const std::string& path, const SeriesTensor& s) {
  if (!s.mask.empty() && s.mask.size() != s.values.size())
    throw ShapeMismatch("save_binary: mask size mismatch");
  atomic_write_file(path, serialize_series(s));
}

inline SeriesTensor parse_series(const std::vector<std::uint8_t>& bytes,
                                 const std::string& source) {
  ByteReader r(bytes.data(), bytes.size(), source);
  std::uint8_t magic[6];
  for (auto& b : magic) b = r.u8();
  for (int i = 0; i < 6; ++i)
    if (magic[i] != detail::kSeriesMagic[i])
      throw FormatError(source + ": bad magic");

  SeriesTensor s;
  s.nodes = r.u32();
  s.steps = r.u32();
  s.channels = r.u32();
  const std::uint32_t flags = r.u32();
  if (flags & ~detail::kMaskFlag)
    throw FormatError(source + ": unknown flag bits");

  const std::size_t count = s.nodes * s.steps * s.channels;
  s.values.resize(count);
  for (std::size_t i = 0; i < count; ++i)
    s.values[i] = static_cast<double>(r.f32());
  if (flags & detail::kMaskFlag) {
    s.mask.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
      const std::uint8_t b = r.u8();
      if (b > 1) throw FormatError(source + ": mask byte not 0/1");
      s.mask[i] = b;
    }
  }
  r.expect_exhausted();
  detail::validate_series(s, source);
  return s;
}

inline SeriesTensor load_binary(const std::string& path) {
  return parse_series(read_file_bytes(path), path);
}

/// CSV series format: one header row of node names, then one row per
/// timestep, single channel.
inline SeriesTensor parse_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source + ": empty file");
  std::size_t nodes = 1;
  for (char c : line) nodes += (c == ',');

  SeriesTensor s;
  s.nodes = nodes;
  s.channels = 1;
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() && in.eof()) break;
    std::vector<double> row;
    row.reserve(nodes);
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      std::string cell = line.substr(
          start, comma == std::string::npos ? std::string::npos
                                            : comma - start);
      if (!cell.empty() && cell.back() == '\r') cell.pop_back();
      double v = 0.0;
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      auto [p, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || p != last)
        throw ParseError(source + ":" + std::to_string(line_no) +
                         ": bad number '" + cell + "'");
      row.push_back(v);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (row.size() != nodes)
      throw ParseError(source + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(nodes) + " columns, got " +
                       std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(source + ": no data rows");

  s.steps = rows.size();
  s.values.resize(s.nodes * s.steps);
  for (std::size_t t = 0; t < s.steps; ++t)
    for (std::size_t n = 0; n < s.nodes; ++n)
      s.values[s.index(n, t)] = rows[t][n];
  detail::validate_series(s, source);
  return s;
}

inline SeriesTensor load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return parse_csv(in, path);
}

inline void save_csv(const std::string& path, const SeriesTensor& s) {
  if (s.channels != 1)
    throw InvalidConfig("save_csv: only single-channel series");
  std::ostringstream out;
  for (std::size_t n = 0; n < s.nodes; ++n) {
    if (n) out << ',';
    out << 'n' << n;
  }
  out << '\n';
  out.precision(17);
  for (std::size_t t = 0; t < s.steps; ++t) {
    for (std::size_t n = 0; n < s.nodes; ++n) {
      if (n) out << ',';
      out << s.at(n, t);
    }
    out << '\n';
  }
  atomic_write_text(path, out.str());
}

/// Detects the container from the leading bytes: the binary magic wins,
/// anything else parses as CSV.
inline SeriesTensor load_dataset(const std::string& path,
                                 const std::string& format = "auto") {
  if (format == "binary") return load_binary(path);
  if (format == "csv") return load_csv(path);
  if (format != "auto")
    throw InvalidConfig("unknown dataset format '" + format + "'");
  auto bytes = read_file_bytes(path);
  bool magic = bytes.size() >= 6;
  for (int i = 0; magic && i < 6; ++i)
    magic = bytes[i] == detail::kSeriesMagic[i];
  if (magic) return parse_series(bytes, path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  return parse_csv(in, path);
}

/// Chronological split ratios; must be positive and sum to 1.
struct SplitSpec {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

/// Boundaries of the three segments: train is [0, train_end), validation is
/// [train_end, val_end), test is [val_end, steps). Each boundary is the floor
/// of the cumulative ratio; the test segment absorbs the remainder.
struct SplitIndices {
  std::size_t train_end = 0;
  std::size_t val_end = 0;
  std::size_t steps = 0;
};

inline SplitIndices make_split(std::size_t steps, const SplitSpec& spec) {
  if (spec.train <= 0.0 || spec.val <= 0.0 || spec.test <= 0.0)
    throw InvalidConfig("split ratios must be positive");
  if (std::abs(spec.train + spec.val + spec.test - 1.0) > 1e-9)
    throw InvalidConfig("split ratios must sum to 1");
  SplitIndices idx;
  idx.steps = steps;
  idx.train_end =
      static_cast<std::size_t>(std::floor(static_cast<double>(steps) * spec.train));
  idx.val_end = idx.train_end + static_cast<std::size_t>(std::floor(
                                    static_cast<double>(steps) * spec.val));
  if (idx.train_end == 0 || idx.val_end <= idx.train_end ||
      idx.val_end >= steps)
    throw InvalidConfig("split produces an empty segment");
  return idx;
}

/// One supervised window. `origin` is the absolute index of the first input
/// timestep in the source series; the label covers the `horizon` steps
/// immediately after the `lookback` input steps. Input is the target channel,
/// normalized when a scaler is given; the label stays in observation units.
struct WindowSample {
  std::size_t origin = 0;
  Matrix input;     // [nodes x lookback]
  Matrix label;     // [nodes x horizon]
  ByteMask label_mask;  // empty = all valid

  bool label_fully_masked() const {
    if (label_mask.empty()) return false;
    for (std::size_t i = 0; i < label_mask.size(); ++i)
      if (label_mask.data()[i]) return false;
    return true;
  }
};

/// All windows whose input and label both lie inside [seg_begin, seg_end).
/// Windows never straddle a segment boundary; a segment shorter than
/// lookback + horizon yields none. Masked input entries are filled with the
/// node mean (zero after normalization) so they carry no signal.
inline std::vector<WindowSample> make_windows(const SeriesTensor& series,
                                              std::size_t seg_begin,
                                              std::size_t seg_end,
                                              std::size_t lookback,
                                              std::size_t horizon,
                                              const ScalerParams* scaler) {
  if (lookback == 0 || horizon == 0)
    throw InvalidConfig("window lookback and horizon must be positive");
  if (seg_end > series.steps || seg_begin >= seg_end)
    throw InvalidConfig("window segment out of range");

  std::vector<WindowSample> out;
  const std::size_t span = lookback + horizon;
  if (seg_end - seg_begin < span) return out;
  out.reserve(seg_end - seg_begin - span + 1);
  for (std::size_t o = seg_begin; o + span <= seg_end; ++o) {
    WindowSample w;
    w.origin = o;
    w.input = Matrix(series.nodes, lookback);
    w.label = Matrix(series.nodes, horizon);
    for (std::size_t n = 0; n < series.nodes; ++n) {
      const double fill = scaler ? scaler->mean_of(n) : 0.0;
      for (std::size_t t = 0; t < lookback; ++t)
        w.input(n, t) = series.valid(n, o + t, 0) ? series.at(n, o + t, 0)
                                                  : fill;
      for (std::size_t t = 0; t < horizon; ++t)
        w.label(n, t) = series.at(n, o + lookback + t, 0);
    }
    if (series.has_mask()) {
      w.label_mask = ByteMask(series.nodes, horizon);
      for (std::size_t n = 0; n < series.nodes; ++n)
        for (std::size_t t = 0; t < horizon; ++t)
          w.label_mask(n, t) = series.valid(n, o + lookback + t, 0) ? 1 : 0;
    }
    if (scaler) w.input = scale(w.input, *scaler);
    out.push_back(std::move(w));
  }
  return out;
}

}  // namespace sttc
