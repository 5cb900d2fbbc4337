#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "sttc/errors.hpp"
#include "sttc/io.hpp"
#include "sttc/matrix.hpp"
#include "sttc/rng.hpp"
#include "sttc/scaler.hpp"
#include "sttc/series.hpp"

namespace sttc {

/// A frozen point forecaster. Implementations are fitted once on the training
/// segment and never change afterwards; predict is const and works in
/// normalized space end to end.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual Matrix predict(const WindowSample& sample) const = 0;
  virtual std::string kind() const = 0;
  virtual std::size_t horizon() const = 0;
};

/// Repeats the value one season back: forecast[n][h] is the input at offset
/// lookback - period + (h mod period). Falls back to last-value persistence
/// when the period does not fit in the lookback window.
class SeasonalNaive : public Forecaster {
 public:
  SeasonalNaive(std::size_t period, std::size_t horizon)
      : period_(period), horizon_(horizon) {
    if (period == 0) throw InvalidConfig("seasonal naive: period must be > 0");
    if (horizon == 0)
      throw InvalidConfig("seasonal naive: horizon must be > 0");
  }

  Matrix predict(const WindowSample& sample) const override {
    const std::size_t lookback = sample.input.cols();
    Matrix out(sample.input.rows(), horizon_);
    for (std::size_t n = 0; n < sample.input.rows(); ++n) {
      for (std::size_t h = 0; h < horizon_; ++h) {
        const std::size_t src =
            period_ <= lookback ? lookback - period_ + (h % period_)
                                : lookback - 1;
        out(n, h) = sample.input(n, src);
      }
    }
    return out;
  }

  std::string kind() const override { return "seasonal_naive"; }
  std::size_t horizon() const override { return horizon_; }
  std::size_t period() const { return period_; }

 private:
  std::size_t period_;
  std::size_t horizon_;
};

/// Per-node mean of each phase slot (absolute index mod period) over the
/// training segment. Prediction at absolute index i returns the slot mean for
/// i mod period.
class HistoricalAverage : public Forecaster {
 public:
  HistoricalAverage(Matrix slot_means, std::size_t horizon)
      : slot_means_(std::move(slot_means)), horizon_(horizon) {}

  Matrix predict(const WindowSample& sample) const override {
    const std::size_t period = slot_means_.cols();
    const std::size_t first = sample.origin + sample.input.cols();
    Matrix out(sample.input.rows(), horizon_);
    for (std::size_t n = 0; n < sample.input.rows(); ++n)
      for (std::size_t h = 0; h < horizon_; ++h)
        out(n, h) = slot_means_(n, (first + h) % period);
    return out;
  }

  std::string kind() const override { return "historical_average"; }
  std::size_t horizon() const override { return horizon_; }
  const Matrix& slot_means() const { return slot_means_; }

 private:
  Matrix slot_means_;  // [nodes x period]
  std::size_t horizon_;
};

/// Fits slot means on normalized training values. The training segment must
/// cover at least one full period so every slot has data.
inline HistoricalAverage fit_historical_average(const Matrix& train_normalized,
                                                std::size_t period,
                                                std::size_t horizon) {
  if (period == 0)
    throw InvalidConfig("historical average: period must be > 0");
  if (train_normalized.cols() < period)
    throw InvalidConfig(
        "historical average: training segment shorter than one period");
  const std::size_t nodes = train_normalized.rows();
  Matrix means(nodes, period, 0.0);
  std::vector<std::size_t> counts(period, 0);
  for (std::size_t t = 0; t < train_normalized.cols(); ++t)
    counts[t % period] += 1;
  for (std::size_t n = 0; n < nodes; ++n) {
    for (std::size_t t = 0; t < train_normalized.cols(); ++t)
      means(n, t % period) += train_normalized(n, t);
    for (std::size_t s = 0; s < period; ++s)
      means(n, s) /= static_cast<double>(counts[s]);
  }
  return HistoricalAverage(std::move(means), horizon);
}

/// Shared linear map from the lookback window to the horizon, no intercept:
/// one coefficient matrix [lookback x horizon] fitted on rows pooled across
/// nodes and windows in normalized space.
class RidgeLinear : public Forecaster {
 public:
  RidgeLinear(Matrix coef, double penalty)
      : coef_(std::move(coef)), penalty_(penalty) {}

  Matrix predict(const WindowSample& sample) const override {
    const std::size_t lookback = coef_.rows();
    if (sample.input.cols() != lookback)
      throw ShapeMismatch("ridge: window lookback " +
                          std::to_string(sample.input.cols()) +
                          " does not match fitted " +
                          std::to_string(lookback));
    Matrix out(sample.input.rows(), coef_.cols(), 0.0);
    for (std::size_t n = 0; n < sample.input.rows(); ++n)
      for (std::size_t t = 0; t < lookback; ++t) {
        const double x = sample.input(n, t);
        for (std::size_t h = 0; h < coef_.cols(); ++h)
          out(n, h) += x * coef_(t, h);
      }
    return out;
  }

  std::string kind() const override { return "ridge"; }
  std::size_t horizon() const override { return coef_.cols(); }
  const Matrix& coef() const { return coef_; }
  double penalty() const { return penalty_; }

 private:
  Matrix coef_;  // [lookback x horizon]
  double penalty_;
};

/// Solves (X^T X + penalty I) W = X^T Y over pooled node rows with a
/// Cholesky-type factorization. Training windows must carry normalized inputs
/// and are paired with normalized labels supplied by the caller via `scaler`.
/// `max_rows` > 0 subsamples the pooled rows with the given seed to cap the
/// fit cost; 0 keeps everything.
inline RidgeLinear fit_ridge(const std::vector<WindowSample>& windows,
                             const ScalerParams& scaler, double penalty,
                             std::size_t max_rows = 0,
                             std::uint64_t seed = 0) {
  if (penalty < 0.0) throw InvalidConfig("ridge: penalty must be >= 0");
  if (windows.empty()) throw InvalidConfig("ridge: no training windows");
  const std::size_t lookback = windows.front().input.cols();
  const std::size_t horizon = windows.front().label.cols();
  const std::size_t nodes = windows.front().input.rows();

  std::size_t total = windows.size() * nodes;
  if (total < lookback)
    throw InvalidConfig("ridge: fewer pooled rows than coefficients");

  std::vector<std::size_t> pick(total);
  std::iota(pick.begin(), pick.end(), 0);
  if (max_rows > 0 && max_rows < total) {
    SplitMix64 g(seed);
    for (std::size_t i = total - 1; i > 0; --i) {
      const std::size_t j = g.next() % (i + 1);
      std::swap(pick[i], pick[j]);
    }
    pick.resize(std::max(max_rows, lookback));
  }

  Eigen::MatrixXd xtx = Eigen::MatrixXd::Zero(lookback, lookback);
  Eigen::MatrixXd xty = Eigen::MatrixXd::Zero(lookback, horizon);
  Eigen::VectorXd x(lookback), y(horizon);
  for (std::size_t row : pick) {
    const WindowSample& w = windows[row / nodes];
    const std::size_t n = row % nodes;
    for (std::size_t t = 0; t < lookback; ++t) x(t) = w.input(n, t);
    for (std::size_t h = 0; h < horizon; ++h)
      y(h) = (w.label(n, h) - scaler.mean_of(n)) / scaler.std_of(n);
    xtx.noalias() += x * x.transpose();
    xty.noalias() += x * y.transpose();
  }
  xtx.diagonal().array() += penalty;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(xtx);
  const Eigen::VectorXd d = ldlt.vectorD();
  const double dmax = d.cwiseAbs().maxCoeff();
  if (ldlt.info() != Eigen::Success || dmax <= 0.0 ||
      d.cwiseAbs().minCoeff() < 1e-12 * dmax)
    throw SingularSystem(
        "ridge: normal equations are singular (increase the penalty)");
  Eigen::MatrixXd w = ldlt.solve(xty);

  Matrix coef(lookback, horizon);
  for (std::size_t t = 0; t < lookback; ++t)
    for (std::size_t h = 0; h < horizon; ++h) coef(t, h) = w(t, h);
  return RidgeLinear(std::move(coef), penalty);
}

/// A fitted backbone plus the scaler it was trained with.
struct FittedBackbone {
  std::unique_ptr<Forecaster> model;
  ScalerParams scaler;
  std::size_t lookback = 0;
};

namespace detail {

constexpr std::uint8_t kBackboneMagic[8] = {'S', 'T', 'T', 'C',
                                            'B', 'K', 'B', '1'};
constexpr std::uint32_t kBackboneVersion = 1;

inline void write_scaler(ByteWriter& w, const ScalerParams& s) {
  w.u8(s.per_node ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(s.mean.size()));
  for (double v : s.mean) w.f64(v);
  for (double v : s.std_dev) w.f64(v);
}

inline ScalerParams read_scaler(ByteReader& r) {
  ScalerParams s;
  s.per_node = r.u8() != 0;
  const std::uint32_t n = r.u32();
  s.mean.resize(n);
  s.std_dev.resize(n);
  for (auto& v : s.mean) v = r.f64();
  for (auto& v : s.std_dev) v = r.f64();
  return s;
}

}  // namespace detail

/// Versioned binary container for a fitted backbone: magic, version, model
/// kind, lookback, scaler, then kind-specific parameters, all little-endian.
inline void save_backbone(const std::string& path, const FittedBackbone& fb) {
  ByteWriter w;
  w.raw(detail::kBackboneMagic, 8);
  w.u32(detail::kBackboneVersion);
  const std::string kind = fb.model->kind();
  std::uint32_t tag = kind == "seasonal_naive" ? 0
                      : kind == "historical_average" ? 1
                                                     : 2;
  w.u32(tag);
  w.u32(static_cast<std::uint32_t>(fb.lookback));
  detail::write_scaler(w, fb.scaler);

  if (tag == 0) {
    const auto& m = static_cast<const SeasonalNaive&>(*fb.model);
    w.u32(static_cast<std::uint32_t>(m.period()));
    w.u32(static_cast<std::uint32_t>(m.horizon()));
  } else if (tag == 1) {
    const auto& m = static_cast<const HistoricalAverage&>(*fb.model);
    w.u32(static_cast<std::uint32_t>(m.slot_means().rows()));
    w.u32(static_cast<std::uint32_t>(m.slot_means().cols()));
    w.u32(static_cast<std::uint32_t>(m.horizon()));
    for (std::size_t i = 0; i < m.slot_means().size(); ++i)
      w.f64(m.slot_means().data()[i]);
  } else {
    const auto& m = static_cast<const RidgeLinear&>(*fb.model);
    w.u32(static_cast<std::uint32_t>(m.coef().rows()));
    w.u32(static_cast<std::uint32_t>(m.coef().cols()));
    w.f64(m.penalty());
    for (std::size_t i = 0; i < m.coef().size(); ++i)
      w.f64(m.coef().data()[i]);
  }
  atomic_write_file(path, w.bytes());
}

inline FittedBackbone load_backbone(const std::string& path) {
  auto bytes = read_file_bytes(path);
  ByteReader r(bytes.data(), bytes.size(), path);
  for (std::uint8_t expect : detail::kBackboneMagic)
    if (r.u8() != expect) throw FormatError(path + ": bad backbone magic");
  const std::uint32_t version = r.u32();
  if (version != detail::kBackboneVersion)
    throw FormatError(path + ": unsupported backbone version " +
                      std::to_string(version));
  const std::uint32_t tag = r.u32();

  FittedBackbone fb;
  fb.lookback = r.u32();
  fb.scaler = detail::read_scaler(r);
  if (tag == 0) {
    const std::uint32_t period = r.u32();
    const std::uint32_t horizon = r.u32();
    fb.model = std::make_unique<SeasonalNaive>(period, horizon);
  } else if (tag == 1) {
    const std::uint32_t nodes = r.u32();
    const std::uint32_t period = r.u32();
    const std::uint32_t horizon = r.u32();
    Matrix means(nodes, period);
    for (std::size_t i = 0; i < means.size(); ++i) means.data()[i] = r.f64();
    fb.model = std::make_unique<HistoricalAverage>(std::move(means), horizon);
  } else if (tag == 2) {
    const std::uint32_t lookback = r.u32();
    const std::uint32_t horizon = r.u32();
    const double penalty = r.f64();
    Matrix coef(lookback, horizon);
    for (std::size_t i = 0; i < coef.size(); ++i) coef.data()[i] = r.f64();
    fb.model = std::make_unique<RidgeLinear>(std::move(coef), penalty);
  } else {
    throw FormatError(path + ": unknown backbone kind tag " +
                      std::to_string(tag));
  }
  r.expect_exhausted();
  return fb;
}

}  // namespace sttc
