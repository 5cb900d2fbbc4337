#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "sttc/calibrator.hpp"
#include "sttc/errors.hpp"
#include "sttc/forecaster.hpp"
#include "sttc/io.hpp"
#include "sttc/optimizer.hpp"
#include "sttc/rng.hpp"
#include "sttc/scaler.hpp"
#include "sttc/series.hpp"

namespace sttc {

/// When the update queue releases its oldest sample. `strict` waits until the
/// queue exceeds the horizon, so the released label ends at the last timestep
/// already observed. `listing` releases one step earlier, reproducing a
/// common implementation shortcut that peeks one step ahead.
enum class QueueRule { strict, listing };

inline QueueRule parse_queue_rule(const std::string& s) {
  if (s == "strict") return QueueRule::strict;
  if (s == "listing") return QueueRule::listing;
  throw InvalidConfig("unknown queue rule '" + s +
                      "' (expected strict or listing)");
}

/// Bounded FIFO of pending update samples. Origins must be strictly
/// increasing; capacity is the forecast horizon so nothing unobserved can be
/// released under the strict rule.
class StreamQueue {
 public:
  explicit StreamQueue(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw InvalidConfig("queue capacity must be positive");
  }

  void push(WindowSample sample) {
    if (last_origin_ && sample.origin <= *last_origin_)
      throw SequenceError("queue: origin " + std::to_string(sample.origin) +
                          " not after " + std::to_string(*last_origin_));
    last_origin_ = sample.origin;
    items_.push_back(std::move(sample));
    if (items_.size() > capacity_ + 1)
      throw StreamAssert("queue: capacity invariant broken");
  }

  bool ready(QueueRule rule) const {
    return rule == QueueRule::strict ? items_.size() > capacity_
                                     : items_.size() >= capacity_;
  }

  WindowSample pop() {
    if (items_.empty()) throw StreamAssert("queue: pop on empty queue");
    WindowSample s = std::move(items_.front());
    items_.pop_front();
    return s;
  }

  const WindowSample& peek(std::size_t i) const { return items_[i]; }
  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  std::size_t capacity_;
  std::deque<WindowSample> items_;
  std::optional<std::size_t> last_origin_;
};

struct StreamConfig {
  std::size_t nodes = 0;
  std::size_t lookback = 12;
  std::size_t horizon = 12;
  std::size_t groups = 4;
  LossKind loss = LossKind::mae;
  QueueRule queue_rule = QueueRule::strict;
  std::size_t update_samples = 1;  // queued samples folded into one update
  std::size_t update_steps = 1;    // optimizer steps per release
  std::optional<double> clip_eps;  // hard clamp on |offsets| after updates
  bool calibrate_enabled = true;   // false = frozen backbone passthrough
  bool record_loss_after = false;  // re-evaluate loss after the update
};

/// What one streaming step did.
struct StepLog {
  std::size_t step_index = 0;
  std::size_t origin = 0;
  std::optional<std::size_t> dequeued_origin;
  std::optional<double> loss_before;
  std::optional<double> loss_after;
  double grad_norm = 0.0;
  double param_delta_norm = 0.0;
  bool update_skipped_masked = false;
  double calibrate_seconds = 0.0;
  double update_seconds = 0.0;
};

struct StepResult {
  Matrix forecast;  // observation units
  StepLog log;
};

/// Test-time calibration around a frozen forecaster. Each step emits the
/// calibrated forecast for the incoming window using the current offsets,
/// queues the window, and once the queue releases a fully observed sample,
/// refines the offsets with single gradient steps on that sample's loss.
/// The backbone is shared, const, and never touched by updates.
class StreamEngine {
 public:
  StreamEngine(const Forecaster& backbone, ScalerParams scaler,
               StreamConfig config, OptimizerState optimizer)
      : backbone_(backbone), scaler_(std::move(scaler)),
        config_(config), optimizer_(std::move(optimizer)),
        layout_(build_group_layout(rfft_bins(config.horizon), config.groups)),
        params_(CalibratorParams::zeros(
            build_group_layout(rfft_bins(config.horizon), config.groups)
                .groups(),
            config.nodes)),
        queue_(config.horizon) {
    if (config_.horizon < 2)
      throw InvalidHorizon("stream: horizon must be >= 2");
    if (config_.nodes == 0)
      throw InvalidConfig("stream: node count must be positive");
    if (backbone_.horizon() != config_.horizon)
      throw InvalidConfig("stream: backbone horizon " +
                          std::to_string(backbone_.horizon()) +
                          " does not match configured " +
                          std::to_string(config_.horizon));
    if (config_.update_samples == 0 || config_.update_steps == 0)
      throw InvalidConfig("stream: update counts must be positive");
  }

  StepResult step(const WindowSample& sample) {
    if (sample.input.cols() != config_.lookback ||
        sample.input.rows() != config_.nodes)
      throw ShapeMismatch("stream: window shape mismatch");

    StepResult result;
    result.log.step_index = step_index_++;
    result.log.origin = sample.origin;

    const auto t0 = std::chrono::steady_clock::now();
    Matrix pred = backbone_.predict(sample);
    require_finite(pred, "stream: backbone output");
    if (config_.calibrate_enabled) {
      ForecastBlock block;
      block.values = std::move(pred);
      pred = calibrate(block, params_, layout_).values;
    }
    result.forecast = unscale(pred, scaler_);
    result.log.calibrate_seconds = seconds_since(t0);

    queue_.push(sample);
    if (queue_.ready(config_.queue_rule)) {
      WindowSample released = queue_.pop();
      if (queue_.size() > queue_.capacity())
        throw StreamAssert("stream: queue above capacity after release");
      result.log.dequeued_origin = released.origin;
      if (config_.calibrate_enabled) {
        const auto t1 = std::chrono::steady_clock::now();
        flash_update(released, result.log);
        result.log.update_seconds = seconds_since(t1);
      }
    }
    return result;
  }

  const CalibratorParams& params() const { return params_; }
  const GroupLayout& layout() const { return layout_; }
  const OptimizerState& optimizer() const { return optimizer_; }
  const ScalerParams& scaler() const { return scaler_; }
  std::size_t updates_applied() const { return updates_applied_; }
  std::size_t updates_skipped_masked() const { return updates_skipped_; }
  std::size_t clip_events() const { return clip_events_; }

  /// Loss of one queued-style sample under the current offsets, without
  /// touching any state.
  double evaluate_loss(const WindowSample& sample) const {
    Matrix pred = backbone_.predict(sample);
    ForecastBlock block;
    block.values = std::move(pred);
    const ByteMask* mask =
        sample.label_mask.empty() ? nullptr : &sample.label_mask;
    return calibrator_gradient(block, sample.label, params_, layout_,
                               config_.loss, &scaler_, mask)
        .loss;
  }

  void save_snapshot(const std::string& path) const;
  void restore_snapshot(const std::string& path);

 private:
  static double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t)
        .count();
  }

  /// One calibration refinement from a released sample: frozen backbone
  /// predicts the stored window, the calibrated output is compared against
  /// the stored label in observation units, and the offsets take
  /// `update_steps` optimizer steps. `update_samples` > 1 folds the next
  /// oldest queued samples into the same loss.
  void flash_update(const WindowSample& released, StepLog& log) {
    if (released.label_fully_masked()) {
      log.update_skipped_masked = true;
      ++updates_skipped_;
      return;
    }

    const CalibratorParams before = params_;
    for (std::size_t s = 0; s < config_.update_steps; ++s) {
      double loss_sum = 0.0;
      ParamGrads grads;
      grads.amp = Matrix(params_.groups(), params_.nodes(), 0.0);
      grads.phase = Matrix(params_.groups(), params_.nodes(), 0.0);
      std::size_t used = 0;
      for (std::size_t i = 0; i < config_.update_samples; ++i) {
        const WindowSample* w = nullptr;
        if (i == 0) {
          w = &released;
        } else if (i - 1 < queue_.size()) {
          w = &queue_.peek(i - 1);
          if (w->label_fully_masked()) continue;
        } else {
          break;
        }
        Matrix pred = backbone_.predict(*w);
        ForecastBlock block;
        block.values = std::move(pred);
        const ByteMask* mask =
            w->label_mask.empty() ? nullptr : &w->label_mask;
        GradientResult g = calibrator_gradient(
            block, w->label, params_, layout_, config_.loss, &scaler_, mask);
        loss_sum += g.loss;
        for (std::size_t j = 0; j < grads.amp.size(); ++j)
          grads.amp.data()[j] += g.grads.amp.data()[j];
        for (std::size_t j = 0; j < grads.phase.size(); ++j)
          grads.phase.data()[j] += g.grads.phase.data()[j];
        ++used;
      }
      const double inv = 1.0 / static_cast<double>(used);
      for (std::size_t j = 0; j < grads.amp.size(); ++j)
        grads.amp.data()[j] *= inv;
      for (std::size_t j = 0; j < grads.phase.size(); ++j)
        grads.phase.data()[j] *= inv;

      if (s == 0) {
        log.loss_before = loss_sum * inv;
        log.grad_norm = std::sqrt(
            frobenius_norm(grads.amp) * frobenius_norm(grads.amp) +
            frobenius_norm(grads.phase) * frobenius_norm(grads.phase));
      }
      optimizer_step(params_, grads, optimizer_);
    }

    if (config_.clip_eps) {
      const double eps = *config_.clip_eps;
      bool clipped = false;
      auto clamp = [&](Matrix& m) {
        for (std::size_t i = 0; i < m.size(); ++i) {
          if (std::abs(m.data()[i]) > eps) {
            m.data()[i] = m.data()[i] > 0 ? eps : -eps;
            clipped = true;
          }
        }
      };
      clamp(params_.amp);
      clamp(params_.phase);
      if (clipped) ++clip_events_;
    }

    double delta_sq = 0.0;
    for (std::size_t i = 0; i < params_.amp.size(); ++i) {
      const double d = params_.amp.data()[i] - before.amp.data()[i];
      delta_sq += d * d;
    }
    for (std::size_t i = 0; i < params_.phase.size(); ++i) {
      const double d = params_.phase.data()[i] - before.phase.data()[i];
      delta_sq += d * d;
    }
    log.param_delta_norm = std::sqrt(delta_sq);
    ++updates_applied_;

    if (config_.record_loss_after) log.loss_after = evaluate_loss(released);
  }

  const Forecaster& backbone_;
  ScalerParams scaler_;
  StreamConfig config_;
  OptimizerState optimizer_;
  GroupLayout layout_;
  CalibratorParams params_;
  StreamQueue queue_;
  std::size_t step_index_ = 0;
  std::size_t updates_applied_ = 0;
  std::size_t updates_skipped_ = 0;
  std::size_t clip_events_ = 0;
};

namespace detail {

constexpr std::uint8_t kSnapshotMagic[8] = {'S', 'T', 'T', 'C',
                                            'S', 'N', 'P', '1'};
constexpr std::uint32_t kSnapshotVersion = 1;

inline void write_matrix(ByteWriter& w, const Matrix& m) {
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  for (std::size_t i = 0; i < m.size(); ++i) w.f64(m.data()[i]);
}

inline Matrix read_matrix(ByteReader& r) {
  const std::uint32_t rows = r.u32();
  const std::uint32_t cols = r.u32();
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
  return m;
}

}  // namespace detail

/// Calibrator state container: group boundaries, offsets, and the full
/// optimizer state, so a restored stream continues bit-identically. Written
/// atomically (temp file + rename).
inline void StreamEngine::save_snapshot(const std::string& path) const {
  ByteWriter w;
  w.raw(detail::kSnapshotMagic, 8);
  w.u32(detail::kSnapshotVersion);
  w.u32(static_cast<std::uint32_t>(layout_.bins));
  w.u32(static_cast<std::uint32_t>(layout_.groups()));
  for (std::size_t g = 0; g < layout_.groups(); ++g) {
    w.u32(static_cast<std::uint32_t>(layout_.start[g]));
    w.u32(static_cast<std::uint32_t>(layout_.end[g]));
  }
  detail::write_matrix(w, params_.amp);
  detail::write_matrix(w, params_.phase);

  w.u8(optimizer_.kind == OptKind::adam ? 1 : 0);
  w.f64(optimizer_.lr);
  w.f64(optimizer_.beta1);
  w.f64(optimizer_.beta2);
  w.f64(optimizer_.eps);
  w.u64(optimizer_.step_count);
  const bool moments = optimizer_.m_amp.size() > 0;
  w.u8(moments ? 1 : 0);
  if (moments) {
    detail::write_matrix(w, optimizer_.m_amp);
    detail::write_matrix(w, optimizer_.v_amp);
    detail::write_matrix(w, optimizer_.m_phase);
    detail::write_matrix(w, optimizer_.v_phase);
  }
  atomic_write_file(path, w.bytes());
}

inline void StreamEngine::restore_snapshot(const std::string& path) {
  auto bytes = read_file_bytes(path);
  ByteReader r(bytes.data(), bytes.size(), path);
  for (std::uint8_t expect : detail::kSnapshotMagic)
    if (r.u8() != expect) throw FormatError(path + ": bad snapshot magic");
  if (r.u32() != detail::kSnapshotVersion)
    throw FormatError(path + ": unsupported snapshot version");

  const std::uint32_t bins = r.u32();
  const std::uint32_t groups = r.u32();
  if (bins != layout_.bins || groups != layout_.groups())
    throw FormatError(path + ": snapshot layout does not match stream config");
  for (std::size_t g = 0; g < layout_.groups(); ++g) {
    if (r.u32() != layout_.start[g] || r.u32() != layout_.end[g])
      throw FormatError(path + ": snapshot group boundaries differ");
  }
  Matrix amp = detail::read_matrix(r);
  Matrix phase = detail::read_matrix(r);
  if (!amp.same_shape(params_.amp) || !phase.same_shape(params_.phase))
    throw FormatError(path + ": snapshot offset shapes differ");
  params_.amp = std::move(amp);
  params_.phase = std::move(phase);

  optimizer_.kind = r.u8() ? OptKind::adam : OptKind::sgd;
  optimizer_.lr = r.f64();
  optimizer_.beta1 = r.f64();
  optimizer_.beta2 = r.f64();
  optimizer_.eps = r.f64();
  optimizer_.step_count = r.u64();
  if (r.u8()) {
    optimizer_.m_amp = detail::read_matrix(r);
    optimizer_.v_amp = detail::read_matrix(r);
    optimizer_.m_phase = detail::read_matrix(r);
    optimizer_.v_phase = detail::read_matrix(r);
  } else {
    optimizer_.m_amp = Matrix();
    optimizer_.v_amp = Matrix();
    optimizer_.m_phase = Matrix();
    optimizer_.v_phase = Matrix();
  }
  r.expect_exhausted();
}

/// Convergence probe for one squared-error update in the proposition setting
/// (mean squared loss, plain gradient step). For each trial rate, takes the
/// step from the same starting offsets and reports whether the loss fell and
/// whether the decrease respected the smoothness-based prediction
/// eta * (1 - L * eta / 2) * ||grad||^2, with L estimated by probing gradient
/// differences along random directions.
struct DescentProbe {
  double eta = 0.0;
  double loss_before = 0.0;
  double loss_after = 0.0;
  bool decreased = false;
  double predicted_decrement = 0.0;
  bool respects_prediction = false;
};

struct DescentReport {
  double grad_norm = 0.0;
  double lipschitz_estimate = 0.0;
  std::vector<DescentProbe> probes;
  std::optional<double> largest_descending_eta;
};

inline DescentReport descent_check(const WindowSample& sample,
                                   const Forecaster& backbone,
                                   const ScalerParams& scaler,
                                   const CalibratorParams& start,
                                   const GroupLayout& layout,
                                   const std::vector<double>& eta_grid,
                                   std::uint64_t probe_seed = 7) {
  const ByteMask* mask =
      sample.label_mask.empty() ? nullptr : &sample.label_mask;
  Matrix pred_m = backbone.predict(sample);
  ForecastBlock pred;
  pred.values = std::move(pred_m);

  auto grad_at = [&](const CalibratorParams& p) {
    return calibrator_gradient(pred, sample.label, p, layout, LossKind::mse,
                               &scaler, mask);
  };

  GradientResult g0 = grad_at(start);
  DescentReport report;
  {
    double sq = 0.0;
    for (std::size_t i = 0; i < g0.grads.amp.size(); ++i)
      sq += g0.grads.amp.data()[i] * g0.grads.amp.data()[i];
    for (std::size_t i = 0; i < g0.grads.phase.size(); ++i)
      sq += g0.grads.phase.data()[i] * g0.grads.phase.data()[i];
    report.grad_norm = std::sqrt(sq);
  }

  // Curvature probe: max ||grad(x + d) - grad(x)|| / ||d|| over random
  // directions at a small radius.
  SplitMix64 rng(probe_seed);
  const double radius = 1e-4;
  for (int probe = 0; probe < 8; ++probe) {
    CalibratorParams shifted = start;
    double dir_sq = 0.0;
    std::vector<double> dir(start.scalar_count());
    for (double& d : dir) {
      d = rng.uniform(-1.0, 1.0);
      dir_sq += d * d;
    }
    const double inv_norm = 1.0 / std::sqrt(dir_sq);
    std::size_t idx = 0;
    for (std::size_t i = 0; i < shifted.amp.size(); ++i)
      shifted.amp.data()[i] += radius * dir[idx++] * inv_norm;
    for (std::size_t i = 0; i < shifted.phase.size(); ++i)
      shifted.phase.data()[i] += radius * dir[idx++] * inv_norm;
    GradientResult g1 = grad_at(shifted);
    double diff_sq = 0.0;
    for (std::size_t i = 0; i < g1.grads.amp.size(); ++i) {
      const double d = g1.grads.amp.data()[i] - g0.grads.amp.data()[i];
      diff_sq += d * d;
    }
    for (std::size_t i = 0; i < g1.grads.phase.size(); ++i) {
      const double d = g1.grads.phase.data()[i] - g0.grads.phase.data()[i];
      diff_sq += d * d;
    }
    report.lipschitz_estimate =
        std::max(report.lipschitz_estimate, std::sqrt(diff_sq) / radius);
  }

  bool prefix_descending = true;
  for (double eta : eta_grid) {
    DescentProbe probe;
    probe.eta = eta;
    probe.loss_before = g0.loss;
    CalibratorParams stepped = start;
    for (std::size_t i = 0; i < stepped.amp.size(); ++i)
      stepped.amp.data()[i] -= eta * g0.grads.amp.data()[i];
    for (std::size_t i = 0; i < stepped.phase.size(); ++i)
      stepped.phase.data()[i] -= eta * g0.grads.phase.data()[i];
    probe.loss_after = grad_at(stepped).loss;
    probe.decreased = probe.loss_after < probe.loss_before;
    const double lc = report.lipschitz_estimate;
    probe.predicted_decrement =
        eta * (1.0 - lc * eta / 2.0) * report.grad_norm * report.grad_norm;
    probe.respects_prediction =
        probe.loss_after <=
        probe.loss_before - probe.predicted_decrement +
            1e-12 * std::max(1.0, probe.loss_before);
    if (probe.decreased && prefix_descending)
      report.largest_descending_eta = eta;
    else
      prefix_descending = false;
    report.probes.push_back(probe);
  }
  return report;
}

}  // namespace sttc
