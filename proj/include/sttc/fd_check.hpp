#pragma once

#include <cmath>
#include <cstddef>
#include <functional>

namespace sttc {

/// Central finite difference of a scalar function along one coordinate:
/// (f(x + h e_i) - f(x - h e_i)) / (2 h), where the caller's functor receives
/// the signed offset to apply to coordinate i.
inline double central_difference(const std::function<double(double)>& f_at,
                                 double h) {
  return (f_at(h) - f_at(-h)) / (2.0 * h);
}

/// Relative disagreement between an analytic derivative and a reference,
/// floored so that near-zero pairs compare absolutely. The default floor
/// matches the round-off noise of central differences with h = 1e-6 on
/// order-one functions (about 1e-10 absolute).
inline double relative_error(double analytic, double reference,
                             double floor_at = 1e-5) {
  const double denom =
      std::fmax(std::fmax(std::fabs(analytic), std::fabs(reference)), floor_at);
  return std::fabs(analytic - reference) / denom;
}

}  // namespace sttc
