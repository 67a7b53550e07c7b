#pragma once
// Thin FFTW3 front-end.  Plans are cached per transform size and created
// under a mutex (FFTW planning is not thread-safe; execution is).  Plans use
// FFTW_ESTIMATE | FFTW_UNALIGNED so results are reproducible and buffers can
// be ordinary vectors.

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <vector>

namespace qamlab::fft {

namespace detail {

struct PlanPair {
  fftw_plan forward = nullptr;   // exponent -i
  fftw_plan backward = nullptr;  // exponent +i
};

inline PlanPair& plans_for(std::size_t n) {
  static std::map<std::size_t, PlanPair> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  PlanPair& pp = cache[n];
  if (!pp.forward) {
    std::vector<std::complex<double>> scratch(n);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    pp.forward = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_FORWARD, flags);
    pp.backward = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, FFTW_BACKWARD, flags);
  }
  return pp;
}

}  // namespace detail

// in-place X_j = sum_k x_k exp(-2*pi*i*j*k/n), unnormalized
inline void forward(std::vector<std::complex<double>>& data) {
  auto& pp = detail::plans_for(data.size());
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(pp.forward, buf, buf);
}

// in-place X_j = sum_k x_k exp(+2*pi*i*j*k/n), unnormalized
inline void backward(std::vector<std::complex<double>>& data) {
  auto& pp = detail::plans_for(data.size());
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(pp.backward, buf, buf);
}

}  // namespace qamlab::fft
