#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "sttc/errors.hpp"
#include "sttc/matrix.hpp"

namespace sttc {

/// Neumaier-compensated running sum: deterministic for a fixed input order
/// and immune to cancellation across magnitudes.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }

  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Error accumulator over streamed forecast/label pairs, split by horizon
/// step. Masked entries are skipped everywhere; near-zero truth values are
/// skipped for the percentage error only.
class MetricAccumulator {
 public:
  MetricAccumulator(std::size_t horizon, double mape_zero_eps = 1e-6)
      : horizon_(horizon), mape_eps_(mape_zero_eps), abs_(horizon),
        sq_(horizon), pct_(horizon), count_(horizon, 0),
        pct_count_(horizon, 0) {}

  void add_block(const Matrix& truth, const Matrix& forecast,
                 const ByteMask* mask = nullptr) {
    if (!truth.same_shape(forecast) || truth.cols() != horizon_)
      throw ShapeMismatch("metrics: block shape mismatch");
    for (std::size_t n = 0; n < truth.rows(); ++n) {
      for (std::size_t h = 0; h < horizon_; ++h) {
        if (mask && !mask->empty() && !(*mask)(n, h)) {
          ++masked_;
          continue;
        }
        const double t = truth(n, h);
        const double e = forecast(n, h) - t;
        abs_[h].add(std::abs(e));
        sq_[h].add(e * e);
        count_[h] += 1;
        if (std::abs(t) >= mape_eps_) {
          pct_[h].add(std::abs(e / t));
          pct_count_[h] += 1;
        }
      }
    }
    ++blocks_;
  }

  std::size_t blocks() const { return blocks_; }
  std::size_t masked() const { return masked_; }
  std::size_t horizon() const { return horizon_; }

  std::size_t entries() const {
    std::size_t n = 0;
    for (std::size_t c : count_) n += c;
    return n;
  }

  double mae(std::size_t h) const { return abs_[h].value() / need(count_[h]); }
  double rmse(std::size_t h) const {
    return std::sqrt(sq_[h].value() / need(count_[h]));
  }
  // NaN when every truth value at this step fell below the zero cutoff.
  double mape_percent(std::size_t h) const {
    need(count_[h]);
    if (pct_count_[h] == 0) return std::numeric_limits<double>::quiet_NaN();
    return 100.0 * pct_[h].value() / static_cast<double>(pct_count_[h]);
  }

  /// Aggregates pool every unmasked entry across horizons: the mean absolute
  /// and percentage errors, and the root of the pooled squared error.
  double mae() const {
    CompensatedSum s;
    std::size_t n = 0;
    for (std::size_t h = 0; h < horizon_; ++h) {
      s.add(abs_[h].value());
      n += count_[h];
    }
    return s.value() / need(n);
  }

  double rmse() const {
    CompensatedSum s;
    std::size_t n = 0;
    for (std::size_t h = 0; h < horizon_; ++h) {
      s.add(sq_[h].value());
      n += count_[h];
    }
    return std::sqrt(s.value() / need(n));
  }

  double mape_percent() const {
    need(entries());
    CompensatedSum s;
    std::size_t n = 0;
    for (std::size_t h = 0; h < horizon_; ++h) {
      s.add(pct_[h].value());
      n += pct_count_[h];
    }
    if (n == 0) return std::numeric_limits<double>::quiet_NaN();
    return 100.0 * s.value() / static_cast<double>(n);
  }

 private:
  static double need(std::size_t n) {
    if (n == 0) throw EmptyMetric("metrics: no unmasked entries");
    return static_cast<double>(n);
  }

  std::size_t horizon_;
  double mape_eps_;
  std::vector<CompensatedSum> abs_, sq_, pct_;
  std::vector<std::size_t> count_, pct_count_;
  std::size_t masked_ = 0;
  std::size_t blocks_ = 0;
};

/// Final per-run metric values, per horizon step plus pooled.
struct MetricsReport {
  std::vector<double> mae_h, rmse_h, mape_h;
  double mae = 0.0, rmse = 0.0, mape = 0.0;
  std::size_t blocks = 0, entries = 0, masked = 0;

  static MetricsReport from(const MetricAccumulator& acc) {
    MetricsReport r;
    for (std::size_t h = 0; h < acc.horizon(); ++h) {
      r.mae_h.push_back(acc.mae(h));
      r.rmse_h.push_back(acc.rmse(h));
      r.mape_h.push_back(acc.mape_percent(h));
    }
    r.mae = acc.mae();
    r.rmse = acc.rmse();
    r.mape = acc.mape_percent();
    r.blocks = acc.blocks();
    r.entries = acc.entries();
    r.masked = acc.masked();
    return r;
  }
};

/// One-shot helpers for a single block.
inline double metric_mae(const Matrix& truth, const Matrix& forecast,
                         const ByteMask* mask = nullptr) {
  MetricAccumulator acc(truth.cols());
  acc.add_block(truth, forecast, mask);
  return acc.mae();
}

inline double metric_rmse(const Matrix& truth, const Matrix& forecast,
                          const ByteMask* mask = nullptr) {
  MetricAccumulator acc(truth.cols());
  acc.add_block(truth, forecast, mask);
  return acc.rmse();
}

inline double metric_mape_percent(const Matrix& truth, const Matrix& forecast,
                                  double zero_eps = 1e-6,
                                  const ByteMask* mask = nullptr) {
  MetricAccumulator acc(truth.cols(), zero_eps);
  acc.add_block(truth, forecast, mask);
  return acc.mape_percent();
}

}  // namespace sttc
