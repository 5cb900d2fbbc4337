#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sttc/errors.hpp"
#include "sttc/matrix.hpp"

namespace sttc {

/// Affine z-score normalization fitted on the training segment. Either one
/// global mean/std pair or one pair per node.
struct ScalerParams {
  bool per_node = true;
  std::vector<double> mean;  // size 1 when global, else one entry per node
  std::vector<double> std_dev;

  double mean_of(std::size_t node) const {
    return per_node ? mean[node] : mean[0];
  }
  double std_of(std::size_t node) const {
    return per_node ? std_dev[node] : std_dev[0];
  }
};

/// Fits mean and population standard deviation over [nodes x steps] training
/// values. Any (near-)zero variance series is rejected: it cannot be
/// normalized and would explode on the inverse transform.
inline ScalerParams fit_scaler(const Matrix& train, bool per_node) {
  if (train.size() == 0) throw DegenerateSeries("fit_scaler: empty input");
  require_finite(train, "fit_scaler");
  constexpr double kMinStd = 1e-12;

  ScalerParams p;
  p.per_node = per_node;
  if (per_node) {
    p.mean.resize(train.rows());
    p.std_dev.resize(train.rows());
    for (std::size_t n = 0; n < train.rows(); ++n) {
      double s = 0.0;
      for (std::size_t t = 0; t < train.cols(); ++t) s += train(n, t);
      const double mu = s / static_cast<double>(train.cols());
      double ss = 0.0;
      for (std::size_t t = 0; t < train.cols(); ++t) {
        const double d = train(n, t) - mu;
        ss += d * d;
      }
      const double sd = std::sqrt(ss / static_cast<double>(train.cols()));
      if (sd < kMinStd)
        throw DegenerateSeries("fit_scaler: zero-variance series at node " +
                               std::to_string(n));
      p.mean[n] = mu;
      p.std_dev[n] = sd;
    }
  } else {
    double s = 0.0;
    for (std::size_t i = 0; i < train.size(); ++i) s += train.data()[i];
    const double mu = s / static_cast<double>(train.size());
    double ss = 0.0;
    for (std::size_t i = 0; i < train.size(); ++i) {
      const double d = train.data()[i] - mu;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(train.size()));
    if (sd < kMinStd) throw DegenerateSeries("fit_scaler: zero-variance input");
    p.mean = {mu};
    p.std_dev = {sd};
  }
  return p;
}

inline Matrix scale(const Matrix& x, const ScalerParams& p) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t n = 0; n < x.rows(); ++n) {
    const double mu = p.mean_of(n);
    const double sd = p.std_of(n);
    for (std::size_t t = 0; t < x.cols(); ++t) out(n, t) = (x(n, t) - mu) / sd;
  }
  return out;
}

inline Matrix unscale(const Matrix& x, const ScalerParams& p) {
  Matrix out(x.rows(), x.cols());
  for (std::size_t n = 0; n < x.rows(); ++n) {
    const double mu = p.mean_of(n);
    const double sd = p.std_of(n);
    for (std::size_t t = 0; t < x.cols(); ++t) out(n, t) = x(n, t) * sd + mu;
  }
  return out;
}

}  // namespace sttc
