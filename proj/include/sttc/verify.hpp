#pragma once

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "sttc/calibrator.hpp"
#include "sttc/fd_check.hpp"
#include "sttc/rng.hpp"
#include "sttc/stream.hpp"

namespace sttc {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct VerifyOptions {
  std::uint64_t seed = 1;
  double break_bound_scale = 1.0;  // fault injection: scales the measured
                                   // spectrum perturbation before the check
  std::vector<double> extra_etas;  // appended to the descent trial grid
};

namespace detail {

inline Matrix random_block(SplitMix64& g, std::size_t nodes, std::size_t T) {
  Matrix m(nodes, T);
  for (std::size_t i = 0; i < m.size(); ++i)
    m.data()[i] = g.uniform(-3.0, 3.0);
  return m;
}

inline CalibratorParams random_params(SplitMix64& g, std::size_t groups,
                                      std::size_t nodes, double magnitude) {
  CalibratorParams p = CalibratorParams::zeros(groups, nodes);
  for (std::size_t i = 0; i < p.amp.size(); ++i)
    p.amp.data()[i] = g.uniform(-magnitude, magnitude);
  for (std::size_t i = 0; i < p.phase.size(); ++i)
    p.phase.data()[i] = g.uniform(-magnitude, magnitude);
  return p;
}

inline PropertyResult check_fft_round_trip(SplitMix64& g) {
  PropertyResult r{"fft_round_trip"};
  double worst = 0.0;
  const std::size_t horizons[] = {4, 5, 7, 12, 24, 37};
  for (int c = 0; c < 100; ++c) {
    ForecastBlock block;
    block.values = random_block(g, 1 + g.next() % 8, horizons[c % 6]);
    Matrix back = inverse_rfft(forward_rfft(block));
    worst = std::max(worst, max_abs_diff(back, block.values));
  }
  r.passed = worst <= 1e-9;
  std::ostringstream d;
  d << "max round-trip error " << worst << " over 100 blocks (tol 1e-9)";
  r.detail = d.str();
  return r;
}

inline PropertyResult check_identity_at_init(SplitMix64& g) {
  PropertyResult r{"identity_at_init"};
  double worst = 0.0;
  const std::size_t horizons[] = {4, 12, 24};
  for (int c = 0; c < 100; ++c) {
    const std::size_t nodes = 1 + g.next() % 8;
    ForecastBlock block;
    block.values = random_block(g, nodes, horizons[c % 3]);
    GroupLayout layout =
        build_group_layout(rfft_bins(block.values.cols()), 1 + g.next() % 5);
    CalibratorParams zero = CalibratorParams::zeros(layout.groups(), nodes);
    ForecastBlock out = calibrate(block, zero, layout);
    worst = std::max(worst, max_abs_diff(out.values, block.values));
  }
  r.passed = worst <= 1e-9;
  std::ostringstream d;
  d << "max deviation " << worst << " with zero offsets (tol 1e-9)";
  r.detail = d.str();
  return r;
}

inline PropertyResult check_gradient_fd(SplitMix64& g) {
  PropertyResult r{"gradient_finite_difference"};
  const double h = 1e-6;
  double worst = 0.0;
  std::size_t cases = 0;
  const std::size_t horizons[] = {4, 5, 12, 24};
  for (int c = 0; c < 120; ++c) {
    const std::size_t nodes = 1 + g.next() % 4;
    const std::size_t T = horizons[c % 4];
    GroupLayout layout = build_group_layout(rfft_bins(T), 1 + g.next() % 5);
    const LossKind loss = (c % 2 == 0) ? LossKind::mae : LossKind::mse;
    const bool scaled = (c % 3 != 0);

    ForecastBlock pred;
    pred.values = random_block(g, nodes, T);
    Matrix target = random_block(g, nodes, T);
    CalibratorParams params =
        random_params(g, layout.groups(), nodes, 0.05);
    ScalerParams scaler;
    scaler.per_node = true;
    for (std::size_t n = 0; n < nodes; ++n) {
      scaler.mean.push_back(g.uniform(-5.0, 5.0));
      scaler.std_dev.push_back(g.uniform(0.5, 3.0));
    }
    if (scaled)
      for (std::size_t i = 0; i < target.size(); ++i)
        target.data()[i] = target.data()[i] * 2.0 + 1.0;

    const ScalerParams* sp = scaled ? &scaler : nullptr;
    GradientResult base =
        calibrator_gradient(pred, target, params, layout, loss, sp);
    auto loss_at = [&](const CalibratorParams& p) {
      return calibrator_gradient(pred, target, p, layout, loss, sp).loss;
    };
    for (std::size_t gi = 0; gi < layout.groups(); ++gi) {
      for (std::size_t n = 0; n < nodes; ++n) {
        for (int which = 0; which < 2; ++which) {
          auto probe = [&](double delta) {
            CalibratorParams p = params;
            (which == 0 ? p.amp : p.phase)(gi, n) += delta;
            return loss_at(p);
          };
          const double fd = (probe(h) - probe(-h)) / (2.0 * h);
          const double an =
              (which == 0 ? base.grads.amp : base.grads.phase)(gi, n);
          worst = std::max(worst, relative_error(an, fd));
          ++cases;
        }
      }
    }
  }
  r.passed = worst <= 1e-4;
  std::ostringstream d;
  d << "max relative error " << worst << " over " << cases
    << " gradient entries (tol 1e-4, h=1e-6)";
  r.detail = d.str();
  return r;
}

inline PropertyResult check_perturbation_bound(SplitMix64& g,
                                               double break_scale) {
  PropertyResult r{"perturbation_bound"};
  std::size_t exact_fail = 0, first_order_fail = 0;
  const std::size_t horizons[] = {4, 5, 12, 24};
  for (int c = 0; c < 1000; ++c) {
    const std::size_t nodes = 1 + g.next() % 4;
    const std::size_t T = horizons[c % 4];
    GroupLayout layout = build_group_layout(rfft_bins(T), 1 + g.next() % 5);
    ForecastBlock block;
    block.values = random_block(g, nodes, T);
    CalibratorParams params =
        random_params(g, layout.groups(), nodes, 0.1);
    BoundReport rep =
        perturbation_bound_check(block, params, layout, break_scale);
    if (!rep.satisfied) ++exact_fail;
  }
  for (int c = 0; c < 200; ++c) {
    const std::size_t nodes = 1 + g.next() % 4;
    const std::size_t T = horizons[c % 4];
    GroupLayout layout = build_group_layout(rfft_bins(T), 1 + g.next() % 5);
    ForecastBlock block;
    block.values = random_block(g, nodes, T);
    CalibratorParams params =
        random_params(g, layout.groups(), nodes, 1e-3);
    BoundReport rep =
        perturbation_bound_check(block, params, layout, break_scale);
    if (rep.delta_norm > 1.001 * rep.first_order_bound + 1e-15)
      ++first_order_fail;
  }
  r.passed = exact_fail == 0 && first_order_fail == 0;
  std::ostringstream d;
  d << exact_fail << "/1000 exact-bound failures (|offsets| <= 0.1), "
    << first_order_fail
    << "/200 first-order failures at slack 1.001 (|offsets| <= 1e-3)";
  if (break_scale != 1.0)
    d << " [fault injection: perturbation scaled by " << break_scale << "]";
  r.detail = d.str();
  return r;
}

/// Backbone returning a fixed block; local to the battery.
class PinnedForecaster : public Forecaster {
 public:
  explicit PinnedForecaster(Matrix out) : out_(std::move(out)) {}
  Matrix predict(const WindowSample&) const override { return out_; }
  std::string kind() const override { return "pinned"; }
  std::size_t horizon() const override { return out_.cols(); }

 private:
  Matrix out_;
};

inline PropertyResult check_descent(SplitMix64& g,
                                    const std::vector<double>& extra_etas) {
  PropertyResult r{"descent"};
  std::ostringstream d;
  bool ok = true;

  // Closed-form case: cosine prediction, doubled target, squared loss along
  // the amplitude offset is (offset-1)^2/2. Every trial rate inside the
  // smoothness guarantee must descend; rates outside it are reported only.
  {
    Matrix pred(1, 4);
    pred(0, 0) = 1.0;
    pred(0, 2) = -1.0;
    PinnedForecaster backbone(pred);
    WindowSample sample;
    sample.input = Matrix(1, 4, 0.0);
    sample.label = Matrix(1, 4, 0.0);
    sample.label(0, 0) = 2.0;
    sample.label(0, 2) = -2.0;
    ScalerParams identity;
    identity.per_node = false;
    identity.mean = {0.0};
    identity.std_dev = {1.0};
    std::vector<double> grid = {0.5, 1.0, 1.5, 1.9};
    grid.insert(grid.end(), extra_etas.begin(), extra_etas.end());
    GroupLayout layout = build_group_layout(rfft_bins(4), 1);
    DescentReport rep =
        descent_check(sample, backbone, identity,
                      CalibratorParams::zeros(1, 1), layout, grid);
    d << "quadratic case: grad " << rep.grad_norm << ", curvature estimate "
      << rep.lipschitz_estimate << ";";
    for (const DescentProbe& p : rep.probes) {
      const bool guaranteed = p.predicted_decrement > 0.0;
      if (guaranteed && (!p.decreased || !p.respects_prediction)) {
        ok = false;
        d << " eta " << p.eta << " VIOLATES the guaranteed decrement;";
      } else if (!guaranteed) {
        d << " eta " << p.eta << " outside guarantee ("
          << (p.decreased ? "descended anyway" : "no descent") << ");";
      }
    }
  }

  // Streaming case: squared loss, plain gradient steps at the protocol rate.
  {
    const std::size_t T = 12, nodes = 2, lookback = 12;
    Matrix base = random_block(g, nodes, T);
    PinnedForecaster backbone(base);
    ScalerParams identity;
    identity.per_node = false;
    identity.mean = {0.0};
    identity.std_dev = {1.0};
    StreamConfig cfg;
    cfg.nodes = nodes;
    cfg.lookback = lookback;
    cfg.horizon = T;
    cfg.groups = 4;
    cfg.loss = LossKind::mse;
    cfg.record_loss_after = true;
    StreamEngine engine(backbone, identity, cfg, OptimizerState::sgd(1e-4));
    std::size_t updates = 0, descent_violations = 0, norm_violations = 0;
    for (std::size_t t = 0; t < 212; ++t) {
      WindowSample w;
      w.origin = t;
      w.input = Matrix(nodes, lookback, 0.0);
      w.label = random_block(g, nodes, T);
      StepResult step = engine.step(w);
      if (!step.log.dequeued_origin) continue;
      ++updates;
      if (step.log.grad_norm > 1e-10 &&
          !(*step.log.loss_after < *step.log.loss_before))
        ++descent_violations;
      const double expect = 1e-4 * step.log.grad_norm;
      if (std::abs(step.log.param_delta_norm - expect) >
          1e-12 * std::max(1e-300, expect))
        ++norm_violations;
    }
    if (descent_violations > 0 || norm_violations > 0) ok = false;
    d << " stream: " << updates << " updates, " << descent_violations
      << " descent violations, " << norm_violations
      << " step-norm mismatches";
  }

  r.passed = ok;
  r.detail = d.str();
  return r;
}

inline PropertyResult check_leakage(SplitMix64& g) {
  PropertyResult r{"leakage_audit"};
  const std::size_t T = 12, lookback = 12, nodes = 2;
  Matrix base = random_block(g, nodes, T);
  PinnedForecaster backbone(base);
  ScalerParams identity;
  identity.per_node = false;
  identity.mean = {0.0};
  identity.std_dev = {1.0};
  StreamConfig cfg;
  cfg.nodes = nodes;
  cfg.lookback = lookback;
  cfg.horizon = T;
  StreamEngine engine(backbone, identity, cfg, OptimizerState::sgd(1e-4));
  std::size_t releases = 0, violations = 0;
  for (std::size_t t = 0; t < 5000; ++t) {
    WindowSample w;
    w.origin = t;
    w.input = Matrix(nodes, lookback, 0.0);
    w.label = random_block(g, nodes, T);
    StepResult step = engine.step(w);
    if (!step.log.dequeued_origin) continue;
    ++releases;
    const std::size_t o = *step.log.dequeued_origin;
    const std::size_t label_last = o + lookback + T - 1;
    const std::size_t observed_last = t + lookback - 1;
    if (t - o != T || label_last != observed_last) ++violations;
  }
  r.passed = violations == 0 && releases == 5000 - T;
  std::ostringstream d;
  d << releases << " releases over 5000 steps, " << violations
    << " leakage violations (released label must end at the newest observed "
       "index)";
  r.detail = d.str();
  return r;
}

inline PropertyResult check_parameter_count() {
  PropertyResult r{"parameter_count"};
  GroupLayout layout = build_group_layout(rfft_bins(12), 4);
  CalibratorParams p = CalibratorParams::zeros(layout.groups(), 1000);
  r.passed = p.scalar_count() == 8000 && layout.groups() == 4;
  std::ostringstream d;
  d << "1000 nodes x 4 groups -> " << p.scalar_count()
    << " scalars (expected 8000)";
  r.detail = d.str();
  return r;
}

}  // namespace detail

/// Runs every numerical property check; never stops early so a report can
/// list all failures at once.
inline std::vector<PropertyResult> run_property_battery(
    const VerifyOptions& opt) {
  SplitMix64 g(opt.seed);
  std::vector<PropertyResult> results;
  auto guard = [&](auto&& fn, const char* name) {
    try {
      results.push_back(fn());
    } catch (const std::exception& e) {
      results.push_back({name, false, std::string("exception: ") + e.what()});
    }
  };
  guard([&] { return detail::check_fft_round_trip(g); }, "fft_round_trip");
  guard([&] { return detail::check_identity_at_init(g); },
        "identity_at_init");
  guard([&] { return detail::check_gradient_fd(g); },
        "gradient_finite_difference");
  guard([&] {
    return detail::check_perturbation_bound(g, opt.break_bound_scale);
  }, "perturbation_bound");
  guard([&] { return detail::check_descent(g, opt.extra_etas); }, "descent");
  guard([&] { return detail::check_leakage(g); }, "leakage_audit");
  guard([&] { return detail::check_parameter_count(); }, "parameter_count");
  return results;
}

inline const PropertyResult* first_failure(
    const std::vector<PropertyResult>& results) {
  for (const PropertyResult& r : results)
    if (!r.passed) return &r;
  return nullptr;
}

}  // namespace sttc
