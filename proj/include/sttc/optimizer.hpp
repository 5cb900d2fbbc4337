#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "sttc/calibrator.hpp"
#include "sttc/errors.hpp"
#include "sttc/matrix.hpp"

namespace sttc {

enum class OptKind { sgd, adam };

inline OptKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return OptKind::sgd;
  if (s == "adam") return OptKind::adam;
  throw InvalidConfig("unknown optimizer '" + s + "' (expected sgd or adam)");
}

/// First-order update state. Adam moments are lazily sized on the first step
/// and persist for the life of the stream.
struct OptimizerState {
  OptKind kind = OptKind::adam;
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step_count = 0;

  Matrix m_amp, v_amp, m_phase, v_phase;

  static OptimizerState sgd(double lr) {
    OptimizerState s;
    s.kind = OptKind::sgd;
    s.lr = lr;
    return s;
  }

  static OptimizerState adam(double lr, double beta1 = 0.9,
                             double beta2 = 0.999, double eps = 1e-8) {
    OptimizerState s;
    s.kind = OptKind::adam;
    s.lr = lr;
    s.beta1 = beta1;
    s.beta2 = beta2;
    s.eps = eps;
    return s;
  }
};

namespace detail {

inline void adam_update(Matrix& param, const Matrix& grad, Matrix& m, Matrix& v,
                        const OptimizerState& s, double bias1, double bias2) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad.data()[i];
    double& mi = m.data()[i];
    double& vi = v.data()[i];
    mi = s.beta1 * mi + (1.0 - s.beta1) * g;
    vi = s.beta2 * vi + (1.0 - s.beta2) * g * g;
    const double mhat = mi / bias1;
    const double vhat = vi / bias2;
    param.data()[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

}  // namespace detail

/// One in-place update of the calibrator params. SGD: p -= lr * g. Adam:
/// standard moment estimates with bias correction and epsilon outside the
/// square root.
inline void optimizer_step(CalibratorParams& params, const ParamGrads& grads,
                           OptimizerState& state) {
  if (!params.amp.same_shape(grads.amp) ||
      !params.phase.same_shape(grads.phase))
    throw ShapeMismatch("optimizer_step: gradient shape mismatch");

  state.step_count += 1;
  if (state.kind == OptKind::sgd) {
    for (std::size_t i = 0; i < params.amp.size(); ++i)
      params.amp.data()[i] -= state.lr * grads.amp.data()[i];
    for (std::size_t i = 0; i < params.phase.size(); ++i)
      params.phase.data()[i] -= state.lr * grads.phase.data()[i];
    return;
  }

  if (state.m_amp.size() == 0) {
    state.m_amp = Matrix(params.amp.rows(), params.amp.cols(), 0.0);
    state.v_amp = Matrix(params.amp.rows(), params.amp.cols(), 0.0);
    state.m_phase = Matrix(params.phase.rows(), params.phase.cols(), 0.0);
    state.v_phase = Matrix(params.phase.rows(), params.phase.cols(), 0.0);
  }
  const double bias1 =
      1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
  const double bias2 =
      1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
  detail::adam_update(params.amp, grads.amp, state.m_amp, state.v_amp, state,
                      bias1, bias2);
  detail::adam_update(params.phase, grads.phase, state.m_phase, state.v_phase,
                      state, bias1, bias2);
}

}  // namespace sttc
