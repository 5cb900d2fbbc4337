#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <vector>

#include "sttc/errors.hpp"
#include "sttc/matrix.hpp"
#include "sttc/scaler.hpp"
#include "sttc/spectral.hpp"

namespace sttc {

/// Contiguous partition of the one-sided frequency axis into groups. Each
/// group g covers bins [start[g], end[g]). Groups are disjoint and cover all
/// bins; the last group absorbs the remainder when the bin count does not
/// divide evenly.
struct GroupLayout {
  std::size_t bins = 0;
  std::vector<std::size_t> start;
  std::vector<std::size_t> end;
  std::vector<std::size_t> bin_group;  // bin index -> group index

  std::size_t groups() const { return start.size(); }
};

/// Partitions `bins` frequency bins into at most `groups_requested` groups of
/// equal size floor(bins / G), with the remainder folded into the last group.
/// Requests for more groups than bins clamp to one bin per group.
inline GroupLayout build_group_layout(std::size_t bins,
                                      std::size_t groups_requested) {
  if (bins == 0) throw InvalidConfig("group layout: no frequency bins");
  if (groups_requested == 0)
    throw InvalidConfig("group layout: group count must be positive");
  const std::size_t g = std::min(groups_requested, bins);
  const std::size_t width = bins / g;

  GroupLayout layout;
  layout.bins = bins;
  layout.start.resize(g);
  layout.end.resize(g);
  layout.bin_group.resize(bins);
  for (std::size_t i = 0; i < g; ++i) {
    layout.start[i] = i * width;
    layout.end[i] = (i + 1 == g) ? bins : (i + 1) * width;
    for (std::size_t k = layout.start[i]; k < layout.end[i]; ++k)
      layout.bin_group[k] = i;
  }
  return layout;
}

/// Per-group, per-node spectral offsets: a relative amplitude gain and an
/// additive phase shift, both [groups x nodes] and zero-initialized so the
/// calibrator starts as the identity.
struct CalibratorParams {
  Matrix amp;    // gain g applied as (1 + g)
  Matrix phase;  // radians, added

  static CalibratorParams zeros(std::size_t groups, std::size_t nodes) {
    CalibratorParams p;
    p.amp = Matrix(groups, nodes, 0.0);
    p.phase = Matrix(groups, nodes, 0.0);
    return p;
  }

  std::size_t groups() const { return amp.rows(); }
  std::size_t nodes() const { return amp.cols(); }
  std::size_t scalar_count() const { return amp.size() + phase.size(); }

  double max_abs_amp() const { return max_abs(amp); }
  double max_abs_phase() const { return max_abs(phase); }
};

struct ParamGrads {
  Matrix amp;
  Matrix phase;
};

enum class LossKind { mae, mse };

inline LossKind parse_loss(const std::string& s) {
  if (s == "mae") return LossKind::mae;
  if (s == "mse") return LossKind::mse;
  throw InvalidConfig("unknown loss '" + s + "' (expected mae or mse)");
}

namespace detail {

inline void check_calibration_shapes(std::size_t nodes, std::size_t bins,
                                     const CalibratorParams& params,
                                     const GroupLayout& layout) {
  if (layout.bins != bins)
    throw ShapeMismatch("calibrator: layout covers " +
                        std::to_string(layout.bins) + " bins, spectrum has " +
                        std::to_string(bins));
  if (params.groups() != layout.groups() || params.nodes() != nodes)
    throw ShapeMismatch("calibrator: params are " +
                        std::to_string(params.groups()) + "x" +
                        std::to_string(params.nodes()) + ", expected " +
                        std::to_string(layout.groups()) + "x" +
                        std::to_string(nodes));
}

}  // namespace detail

/// Applies the group offsets in polar form: amplitudes scale by (1 + gain),
/// phases shift additively, per node.
inline Spectrum modulate(const AmplitudePhase& ap,
                         const CalibratorParams& params,
                         const GroupLayout& layout) {
  const std::size_t nodes = ap.amplitude.rows();
  const std::size_t bins = ap.amplitude.cols();
  detail::check_calibration_shapes(nodes, bins, params, layout);

  Spectrum out;
  out.signal_length = ap.signal_length;
  out.bins = CMatrix(nodes, bins);
  for (std::size_t n = 0; n < nodes; ++n) {
    for (std::size_t k = 0; k < bins; ++k) {
      const std::size_t g = layout.bin_group[k];
      // Not std::polar: a gain below -1 makes the radius negative.
      const double a = ap.amplitude(n, k) * (1.0 + params.amp(g, n));
      const double p = ap.phase(n, k) + params.phase(g, n);
      out.bins(n, k) = {a * std::cos(p), a * std::sin(p)};
    }
  }
  return out;
}

/// Full spectral correction of a block: transform, scale amplitudes, shift
/// phases, transform back. Zero params reproduce the input to round-off.
inline ForecastBlock calibrate(const ForecastBlock& block,
                               const CalibratorParams& params,
                               const GroupLayout& layout) {
  Spectrum spec = forward_rfft(block);
  Spectrum shifted = modulate(decompose(spec), params, layout);
  ForecastBlock out;
  out.values = inverse_rfft(shifted);
  out.space = block.space;
  return out;
}

/// Outcome of checking one calibrated block against the spectral perturbation
/// bounds. With e_a = max |gain| and e_p = max |shift|, the frequency-domain
/// delta obeys ||dY||_F <= (e_a + e_p + e_a * e_p) * ||Y||_F; dropping the
/// cross term gives the looser first-order version.
struct BoundReport {
  double delta_norm = 0.0;
  double spectrum_norm = 0.0;
  double eps_amp = 0.0;
  double eps_phase = 0.0;
  double exact_bound = 0.0;
  double first_order_bound = 0.0;
  bool satisfied = false;
  bool satisfied_first_order = false;
};

/// Measures ||Y' - Y||_F for a block under the given params and tests it
/// against the perturbation bounds. `delta_scale` inflates the measured delta
/// and exists only so failure paths can be exercised deliberately.
inline BoundReport perturbation_bound_check(const ForecastBlock& block,
                                            const CalibratorParams& params,
                                            const GroupLayout& layout,
                                            double delta_scale = 1.0) {
  Spectrum spec = forward_rfft(block);
  Spectrum shifted = modulate(decompose(spec), params, layout);

  BoundReport r;
  r.eps_amp = params.max_abs_amp();
  r.eps_phase = params.max_abs_phase();
  r.spectrum_norm = frobenius_norm(spec.bins);
  double ss = 0.0;
  for (std::size_t i = 0; i < spec.bins.size(); ++i)
    ss += std::norm(shifted.bins.data()[i] - spec.bins.data()[i]);
  r.delta_norm = std::sqrt(ss) * delta_scale;

  r.exact_bound =
      (r.eps_amp + r.eps_phase + r.eps_amp * r.eps_phase) * r.spectrum_norm;
  r.first_order_bound = (r.eps_amp + r.eps_phase) * r.spectrum_norm;
  // Equality is attainable (pure gain, single group), so allow round-off.
  constexpr double kSlack = 1.0 + 1e-12;
  r.satisfied = r.delta_norm <= r.exact_bound * kSlack;
  r.satisfied_first_order = r.delta_norm <= r.first_order_bound * kSlack;
  return r;
}

struct GradientResult {
  double loss = 0.0;
  ParamGrads grads;
};

/// Loss and analytic gradient of one calibration step with respect to the
/// group offsets.
///
/// The forward computation is: calibrate `prediction`, map the result back to
/// observation units through `scaler` (when given), then take the mean MAE or
/// MSE against `target` over unmasked entries. The gradient is exact
/// reverse-mode: the adjoint of the inverse transform is a forward transform
/// with the one-sided bin weights, so the cost is a constant number of FFTs
/// plus linear bin work.
///
/// `prediction` must be in normalized space when a scaler is supplied;
/// `target` is always in observation units. A mask entry of 0 removes that
/// entry from the mean. All entries masked is an error; callers decide
/// beforehand whether to skip.
inline GradientResult calibrator_gradient(const ForecastBlock& prediction,
                                          const Matrix& target,
                                          const CalibratorParams& params,
                                          const GroupLayout& layout,
                                          LossKind loss,
                                          const ScalerParams* scaler,
                                          const ByteMask* mask = nullptr) {
  const std::size_t nodes = prediction.nodes();
  const std::size_t t = prediction.steps();
  if (!target.same_shape(prediction.values))
    throw ShapeMismatch("calibrator_gradient: target shape mismatch");
  if (mask && !mask->empty() &&
      (mask->rows() != nodes || mask->cols() != t))
    throw ShapeMismatch("calibrator_gradient: mask shape mismatch");

  Spectrum spec = forward_rfft(prediction);
  Spectrum shifted = modulate(decompose(spec), params, layout);
  Matrix calibrated = inverse_rfft(shifted);

  std::size_t live = 0;
  if (mask && !mask->empty()) {
    for (std::size_t i = 0; i < mask->size(); ++i)
      live += mask->data()[i] ? 1 : 0;
  } else {
    live = nodes * t;
  }
  if (live == 0)
    throw EmptyMetric("calibrator_gradient: every target entry is masked");

  // Residuals in observation units; u = dL/d(calibrated), in one pass.
  GradientResult result;
  Matrix u(nodes, t, 0.0);
  double loss_sum = 0.0;
  const double inv_live = 1.0 / static_cast<double>(live);
  for (std::size_t n = 0; n < nodes; ++n) {
    const double sd = scaler ? scaler->std_of(n) : 1.0;
    const double mu = scaler ? scaler->mean_of(n) : 0.0;
    for (std::size_t c = 0; c < t; ++c) {
      if (mask && !mask->empty() && !(*mask)(n, c)) continue;
      if (!std::isfinite(target(n, c)))
        throw NonFinite("calibrator_gradient: non-finite target entry");
      const double r = calibrated(n, c) * sd + mu - target(n, c);
      if (loss == LossKind::mse) {
        loss_sum += r * r;
        u(n, c) = 2.0 * r * inv_live * sd;
      } else {
        loss_sum += std::abs(r);
        const double s = (r > 0.0) ? 1.0 : (r < 0.0 ? -1.0 : 0.0);
        u(n, c) = s * inv_live * sd;
      }
    }
  }
  result.loss = loss_sum * inv_live;

  // Adjoint through the inverse transform: G = (w_k / T) * rfft(u).
  ForecastBlock ublock;
  ublock.values = std::move(u);
  Spectrum uspec = forward_rfft(ublock);

  result.grads.amp = Matrix(layout.groups(), nodes, 0.0);
  result.grads.phase = Matrix(layout.groups(), nodes, 0.0);
  const double inv_t = 1.0 / static_cast<double>(t);
  for (std::size_t n = 0; n < nodes; ++n) {
    for (std::size_t k = 0; k < spec.bin_count(); ++k) {
      const std::size_t g = layout.bin_group[k];
      const std::complex<double> rot =
          std::polar(1.0, params.phase(g, n));
      const std::complex<double> adj =
          std::conj(uspec.bins(n, k)) * bin_weight(k, t) * inv_t;
      const std::complex<double> base = rot * spec.bins(n, k);
      result.grads.amp(g, n) += (adj * base).real();
      result.grads.phase(g, n) +=
          (adj * (std::complex<double>(0.0, 1.0 + params.amp(g, n)) * base))
              .real();
    }
  }
  return result;
}

}  // namespace sttc
