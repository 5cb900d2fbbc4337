#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <string>
#include <vector>

#include "sttc/config.hpp"
#include "sttc/forecaster.hpp"
#include "sttc/metrics.hpp"
#include "sttc/report.hpp"
#include "sttc/rng.hpp"
#include "sttc/series.hpp"
#include "sttc/stream.hpp"

namespace sttc {

/// Seed lanes for deterministic sub-seed expansion. Every consumer of
/// randomness derives its own lane from the config seed so adding one does
/// not reshuffle the others.
enum class SeedLane : std::uint64_t { run_rep = 0, ridge_fit = 1 };

inline std::uint64_t lane_seed(std::uint64_t base, SeedLane lane,
                               std::uint64_t index = 0) {
  return derive_seed(derive_seed(base, static_cast<std::uint64_t>(lane)),
                     index);
}

struct LoadedData {
  SeriesTensor series;
  SplitIndices split;
};

inline LoadedData harness_load(const RunConfig& cfg) {
  if (cfg.dataset.empty())
    throw InvalidConfig("no dataset configured (set `dataset = <path>`)");
  LoadedData d;
  d.series = load_dataset(cfg.dataset, cfg.format);
  d.split = make_split(d.series.steps, cfg.split);
  return d;
}

/// Train-split scaler; mask-aware so missing entries neither poison the
/// moments nor count toward them.
inline ScalerParams fit_scaler_for(const SeriesTensor& s, std::size_t begin,
                                   std::size_t end, bool per_node) {
  if (!s.has_mask()) return fit_scaler(s.target_slice(begin, end), per_node);

  const std::size_t lanes = per_node ? s.nodes : 1;
  std::vector<double> sum(lanes, 0.0), sq(lanes, 0.0);
  std::vector<std::size_t> count(lanes, 0);
  for (std::size_t n = 0; n < s.nodes; ++n) {
    const std::size_t lane = per_node ? n : 0;
    for (std::size_t t = begin; t < end; ++t) {
      if (!s.valid(n, t, 0)) continue;
      const double v = s.at(n, t, 0);
      sum[lane] += v;
      sq[lane] += v * v;
      count[lane] += 1;
    }
  }
  ScalerParams p;
  p.per_node = per_node;
  p.mean.resize(lanes);
  p.std_dev.resize(lanes);
  for (std::size_t i = 0; i < lanes; ++i) {
    if (count[i] == 0)
      throw DegenerateSeries("fit_scaler: no observed training entries" +
                             (per_node ? " at node " + std::to_string(i)
                                       : std::string()));
    const double mu = sum[i] / static_cast<double>(count[i]);
    const double var =
        std::max(0.0, sq[i] / static_cast<double>(count[i]) - mu * mu);
    const double sd = std::sqrt(var);
    if (sd < 1e-12)
      throw DegenerateSeries("fit_scaler: zero-variance series" +
                             (per_node ? " at node " + std::to_string(i)
                                       : std::string()));
    p.mean[i] = mu;
    p.std_dev[i] = sd;
  }
  return p;
}

/// Normalized [nodes x (end-begin)] view of the target channel with masked
/// entries imputed to the node mean (zero after normalization).
inline Matrix normalized_filled(const SeriesTensor& s, std::size_t begin,
                                std::size_t end, const ScalerParams& scaler) {
  Matrix out(s.nodes, end - begin);
  for (std::size_t n = 0; n < s.nodes; ++n) {
    const double mu = scaler.mean_of(n);
    const double sd = scaler.std_of(n);
    for (std::size_t t = begin; t < end; ++t)
      out(n, t - begin) = s.valid(n, t, 0) ? (s.at(n, t, 0) - mu) / sd : 0.0;
  }
  return out;
}

/// Fits the configured backbone on the train segment only. `fit_seed` feeds
/// the ridge row subsample; the other kinds are deterministic.
inline FittedBackbone harness_fit_backbone(const RunConfig& cfg,
                                           const SeriesTensor& series,
                                           const SplitIndices& split,
                                           std::uint64_t fit_seed) {
  FittedBackbone fb;
  fb.scaler = fit_scaler_for(series, 0, split.train_end,
                             cfg.scaler == "per_node");
  fb.lookback = cfg.lookback;
  const std::size_t period = cfg.resolved_period(series.sampling_interval);
  if (cfg.backbone == "seasonal_naive") {
    fb.model = std::make_unique<SeasonalNaive>(period, cfg.horizon);
  } else if (cfg.backbone == "historical_average") {
    fb.model = std::make_unique<HistoricalAverage>(fit_historical_average(
        normalized_filled(series, 0, split.train_end, fb.scaler), period,
        cfg.horizon));
  } else {
    auto windows = make_windows(series, 0, split.train_end, cfg.lookback,
                                cfg.horizon, &fb.scaler);
    if (series.has_mask()) {
      // Complete cases only: a partially observed label would leak NaNs
      // into the normal equations.
      std::vector<WindowSample> kept;
      for (auto& w : windows) {
        bool complete = true;
        for (std::size_t i = 0; i < w.label_mask.size() && complete; ++i)
          complete = w.label_mask.data()[i] != 0;
        if (complete) kept.push_back(std::move(w));
      }
      windows = std::move(kept);
    }
    if (windows.empty())
      throw InvalidConfig("ridge: no usable training windows");
    fb.model = std::make_unique<RidgeLinear>(
        fit_ridge(windows, fb.scaler, cfg.ridge_alpha, cfg.ridge_max_rows,
                  fit_seed));
  }
  return fb;
}

/// Frozen-backbone MAE over the validation segment, original units.
inline double validation_mae(const RunConfig& cfg, const SeriesTensor& series,
                             const SplitIndices& split,
                             const FittedBackbone& fb) {
  auto windows = make_windows(series, split.train_end, split.val_end,
                              cfg.lookback, cfg.horizon, &fb.scaler);
  if (windows.empty())
    throw InvalidConfig("validation split shorter than lookback + horizon");
  MetricAccumulator acc(cfg.horizon, cfg.mape_eps);
  for (const WindowSample& w : windows) {
    Matrix forecast = unscale(fb.model->predict(w), fb.scaler);
    acc.add_block(w.label, forecast,
                  w.label_mask.empty() ? nullptr : &w.label_mask);
  }
  return acc.mae();
}

inline StreamConfig stream_config_of(const RunConfig& cfg,
                                     std::size_t nodes) {
  StreamConfig sc;
  sc.nodes = nodes;
  sc.lookback = cfg.lookback;
  sc.horizon = cfg.horizon;
  sc.groups = cfg.groups;
  sc.loss = parse_loss(cfg.loss);
  sc.queue_rule = parse_queue_rule(cfg.queue_rule);
  sc.update_samples = cfg.update_samples;
  sc.update_steps = cfg.update_steps;
  sc.clip_eps = cfg.clip_eps;
  sc.calibrate_enabled = cfg.ttc;
  return sc;
}

inline OptimizerState optimizer_of(const RunConfig& cfg) {
  if (parse_optimizer(cfg.optimizer) == OptKind::sgd)
    return OptimizerState::sgd(cfg.lr);
  return OptimizerState::adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
}

struct HarnessOutcome {
  std::vector<SeedRunResult> runs;
  double budget_ms = 0.0;
  double total_seconds = 0.0;
  std::string timestamp_utc;
};

inline std::string utc_timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Runs the configured number of seed repetitions over the test split.
/// The backbone is loaded from `backbone_file` when set (fixed across
/// repetitions) or refitted per repetition with that repetition's sub-seed.
inline HarnessOutcome harness_run(const RunConfig& cfg) {
  const auto wall_start = std::chrono::steady_clock::now();
  LoadedData data = harness_load(cfg);

  FittedBackbone from_file;
  const bool use_file = !cfg.backbone_file.empty();
  if (use_file) {
    from_file = load_backbone(cfg.backbone_file);
    if (from_file.model->horizon() != cfg.horizon)
      throw InvalidConfig("backbone file horizon " +
                          std::to_string(from_file.model->horizon()) +
                          " does not match configured " +
                          std::to_string(cfg.horizon));
    if (from_file.lookback != cfg.lookback)
      throw InvalidConfig("backbone file lookback mismatch");
  }

  HarnessOutcome outcome;
  outcome.timestamp_utc = utc_timestamp();
  for (std::size_t rep = 0; rep < cfg.seeds; ++rep) {
    const std::uint64_t sub_seed =
        lane_seed(cfg.seed, SeedLane::run_rep, rep);
    FittedBackbone fitted;
    const FittedBackbone* fb = &from_file;
    if (!use_file) {
      fitted = harness_fit_backbone(
          cfg, data.series, data.split,
          lane_seed(cfg.seed, SeedLane::ridge_fit, rep));
      fb = &fitted;
    }

    auto windows =
        make_windows(data.series, data.split.val_end, data.split.steps,
                     cfg.lookback, cfg.horizon, &fb->scaler);
    if (windows.empty())
      throw InvalidConfig("test split shorter than lookback + horizon");

    SeedRunResult run;
    run.sub_seed = sub_seed;
    StreamEngine engine(*fb->model, fb->scaler,
                        stream_config_of(cfg, data.series.nodes),
                        optimizer_of(cfg));
    MetricAccumulator acc(cfg.horizon, cfg.mape_eps);
    for (const WindowSample& w : windows) {
      StepResult step = engine.step(w);
      acc.add_block(w.label, step.forecast,
                    w.label_mask.empty() ? nullptr : &w.label_mask);
      run.calibrate_seconds.push_back(step.log.calibrate_seconds);
      run.update_seconds.push_back(step.log.update_seconds);
    }
    run.metrics = MetricsReport::from(acc);
    run.updates_applied = engine.updates_applied();
    run.updates_skipped_masked = engine.updates_skipped_masked();
    run.clip_events = engine.clip_events();
    outcome.runs.push_back(std::move(run));
  }

  outcome.budget_ms =
      cfg.latency_budget_ms
          ? *cfg.latency_budget_ms
          : static_cast<double>(data.series.sampling_interval.count()) * 60e3;
  outcome.total_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    wall_start)
          .count();
  return outcome;
}

}  // namespace sttc
