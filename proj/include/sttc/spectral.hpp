#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "sttc/errors.hpp"
#include "sttc/matrix.hpp"

namespace sttc {

/// Whether block values are z-normalized or in observation units.
enum class ScaleSpace { normalized, original };

/// A block of per-node forecasts or observations, [nodes x steps].
struct ForecastBlock {
  Matrix values;
  ScaleSpace space = ScaleSpace::normalized;

  std::size_t nodes() const { return values.rows(); }
  std::size_t steps() const { return values.cols(); }
};

/// One-sided spectrum of a real block, [nodes x bins] with
/// bins = floor(signal_length / 2) + 1.
struct Spectrum {
  CMatrix bins;
  std::size_t signal_length = 0;

  std::size_t nodes() const { return bins.rows(); }
  std::size_t bin_count() const { return bins.cols(); }
};

/// Polar view of a spectrum. Phase is zero wherever amplitude is zero.
struct AmplitudePhase {
  Matrix amplitude;
  Matrix phase;
  std::size_t signal_length = 0;
};

inline std::size_t rfft_bins(std::size_t signal_length) {
  return signal_length / 2 + 1;
}

/// Effective weight of each one-sided bin in the full spectrum: 1 for the DC
/// bin and the Nyquist bin of an even-length signal, 2 for every bin that
/// stands in for a conjugate pair.
inline double bin_weight(std::size_t k, std::size_t signal_length) {
  if (k == 0) return 1.0;
  if (signal_length % 2 == 0 && k == signal_length / 2) return 1.0;
  return 2.0;
}

namespace detail {

/// Process-wide cache of FFTW plans, one r2c/c2r pair per signal length.
/// Plans are created with FFTW_UNALIGNED so they can be re-executed on any
/// caller buffer; creation is serialized, execution is lock-free.
class FftPlans {
 public:
  static FftPlans& instance() {
    static FftPlans plans;
    return plans;
  }

  void r2c(std::size_t n, const double* in, std::complex<double>* out) {
    const Entry& e = entry(n);
    std::vector<double> scratch(in, in + n);
    fftw_execute_dft_r2c(e.fwd, scratch.data(),
                         reinterpret_cast<fftw_complex*>(out));
  }

  // Destroys nothing caller-visible: the half spectrum is copied to scratch
  // first (FFTW's c2r pass clobbers its input).
  void c2r(std::size_t n, const std::complex<double>* in, double* out) {
    const Entry& e = entry(n);
    std::vector<std::complex<double>> scratch(in, in + rfft_bins(n));
    fftw_execute_dft_c2r(e.inv, reinterpret_cast<fftw_complex*>(scratch.data()),
                         out);
  }

 private:
  struct Entry {
    fftw_plan fwd = nullptr;
    fftw_plan inv = nullptr;
  };

  const Entry& entry(std::size_t n) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = cache_.find(n);
    if (it != cache_.end()) return it->second;

    std::vector<double> re(n);
    std::vector<std::complex<double>> cx(rfft_bins(n));
    Entry e;
    unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    e.fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), re.data(),
                                 reinterpret_cast<fftw_complex*>(cx.data()),
                                 flags);
    e.inv = fftw_plan_dft_c2r_1d(static_cast<int>(n),
                                 reinterpret_cast<fftw_complex*>(cx.data()),
                                 re.data(), flags);
    return cache_.emplace(n, e).first->second;
  }

  std::mutex mu_;
  std::unordered_map<std::size_t, Entry> cache_;
};

}  // namespace detail

/// Unnormalized one-sided DFT of each row.
inline Spectrum forward_rfft(const ForecastBlock& block) {
  const std::size_t n = block.nodes();
  const std::size_t t = block.steps();
  if (t < 2) throw InvalidHorizon("forward_rfft: signal length must be >= 2");
  require_finite(block.values, "forward_rfft");

  Spectrum out;
  out.signal_length = t;
  out.bins = CMatrix(n, rfft_bins(t));
  auto& plans = detail::FftPlans::instance();
  for (std::size_t r = 0; r < n; ++r)
    plans.r2c(t, block.values.row(r), out.bins.row(r));
  return out;
}

/// Inverse of forward_rfft, scaled by 1/signal_length. The imaginary parts of
/// the DC bin and (for even lengths) the Nyquist bin do not contribute: the
/// input is read as the half spectrum of a real signal, so the output is real
/// by construction.
inline Matrix inverse_rfft(const Spectrum& spec) {
  const std::size_t n = spec.nodes();
  const std::size_t t = spec.signal_length;
  if (t < 2) throw InvalidHorizon("inverse_rfft: signal length must be >= 2");
  if (spec.bin_count() != rfft_bins(t))
    throw ShapeMismatch("inverse_rfft: bin count does not match signal length");

  Matrix out(n, t);
  auto& plans = detail::FftPlans::instance();
  const std::size_t m = spec.bin_count();
  std::vector<std::complex<double>> half(m);
  for (std::size_t r = 0; r < n; ++r) {
    const std::complex<double>* src = spec.bins.row(r);
    for (std::size_t k = 0; k < m; ++k) half[k] = src[k];
    half[0] = {half[0].real(), 0.0};
    if (t % 2 == 0) half[m - 1] = {half[m - 1].real(), 0.0};
    plans.c2r(t, half.data(), out.row(r));
    double* dst = out.row(r);
    for (std::size_t c = 0; c < t; ++c) dst[c] /= static_cast<double>(t);
  }
  return out;
}

/// Splits a spectrum into amplitude and phase. Bins with exactly zero
/// amplitude get phase zero.
inline AmplitudePhase decompose(const Spectrum& spec) {
  AmplitudePhase ap;
  ap.signal_length = spec.signal_length;
  ap.amplitude = Matrix(spec.nodes(), spec.bin_count());
  ap.phase = Matrix(spec.nodes(), spec.bin_count());
  for (std::size_t r = 0; r < spec.nodes(); ++r) {
    for (std::size_t k = 0; k < spec.bin_count(); ++k) {
      const std::complex<double> z = spec.bins(r, k);
      ap.amplitude(r, k) = std::abs(z);
      ap.phase(r, k) = (z.real() == 0.0 && z.imag() == 0.0)
                           ? 0.0
                           : std::atan2(z.imag(), z.real());
    }
  }
  return ap;
}

}  // namespace sttc
