#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "sttc/errors.hpp"

namespace sttc {

/// Dense row-major matrix. Rows index nodes throughout this library.
template <typename T>
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  T* row(std::size_t r) { return data_.data() + r * cols_; }
  const T* row(std::size_t r) const { return data_.data() + r * cols_; }

  bool same_shape(const Mat& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using Matrix = Mat<double>;
using CMatrix = Mat<std::complex<double>>;
using ByteMask = Mat<std::uint8_t>;  // 1 = valid entry, 0 = masked out

inline bool all_finite(const Matrix& m) {
  for (std::size_t i = 0; i < m.size(); ++i)
    if (!std::isfinite(m.data()[i])) return false;
  return true;
}

inline void require_finite(const Matrix& m, const char* what) {
  if (!all_finite(m)) throw NonFinite(std::string(what) + ": non-finite value");
}

inline double max_abs(const Matrix& m) {
  double v = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    v = std::max(v, std::abs(m.data()[i]));
  return v;
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
  double v = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    v = std::max(v, std::abs(a.data()[i] - b.data()[i]));
  return v;
}

inline double frobenius_norm(const CMatrix& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += std::norm(m.data()[i]);
  return std::sqrt(s);
}

inline double frobenius_norm(const Matrix& m) {
  double s = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) s += m.data()[i] * m.data()[i];
  return std::sqrt(s);
}

}  // namespace sttc
