#pragma once
// Quantum evolution of the gravity-kicked rotor at fixed quasi-momentum.
// States live on a truncated integer momentum ladder; the kick is applied
// spectrally on an angle grid, the free rotor is diagonal in momentum.
// Three interchangeable one-kick routes are kept: the direct propagator,
// the exact resonant form (Gauss-weighted translations), and the factorized
// near-resonant form with the detuning acting as an effective Planck constant.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qamlab/fft.hpp"
#include "qamlab/parallel.hpp"
#include "qamlab/rational.hpp"
#include "qamlab/resonance.hpp"
#include "qamlab/rng.hpp"

namespace qamlab::quantum {

using resonance::two_pi;
using Complex = std::complex<double>;

inline constexpr double default_trunc_tol = 1e-12;

struct RotorState {
  double beta = 0.0;               // conserved fractional momentum
  std::int64_t m_min = 0;
  std::int64_t m_max = -1;
  std::vector<Complex> amps;       // index i holds momentum m_min + i

  std::int64_t width() const { return m_max - m_min + 1; }
  Complex& at(std::int64_t m) { return amps[static_cast<std::size_t>(m - m_min)]; }
  Complex at(std::int64_t m) const {
    if (m < m_min || m > m_max) return {0.0, 0.0};
    return amps[static_cast<std::size_t>(m - m_min)];
  }

  double norm2() const {
    double s = 0.0;
    for (const Complex& a : amps) s += std::norm(a);
    return s;
  }

  void normalize() {
    const double n = std::sqrt(norm2());
    if (n == 0.0) throw std::runtime_error("RotorState: zero state");
    for (Complex& a : amps) a /= n;
  }

  void grow(std::int64_t per_side) {
    amps.insert(amps.begin(), static_cast<std::size_t>(per_side), Complex{0.0, 0.0});
    amps.insert(amps.end(), static_cast<std::size_t>(per_side), Complex{0.0, 0.0});
    m_min -= per_side;
    m_max += per_side;
  }

  // mean kinetic energy (m+beta)^2/2
  double energy() const {
    double e = 0.0;
    for (std::int64_t m = m_min; m <= m_max; ++m) {
      const double p = static_cast<double>(m) + beta;
      e += 0.5 * p * p * std::norm(at(m));
    }
    return e;
  }
};

struct KickSchedule {
  double k = 0.0;
  double tau = 0.0;
  double eta = 0.0;
  double beta = 0.0;  // quasi-momentum the schedule was set up for
};

inline std::int64_t kick_guard(double k) {
  return static_cast<std::int64_t>(std::ceil(std::abs(k))) + 16;
}

inline RotorState make_plane_wave(std::int64_t m0, double beta, double k) {
  RotorState st;
  st.beta = beta;
  const std::int64_t w = kick_guard(k);
  st.m_min = m0 - w;
  st.m_max = m0 + w;
  st.amps.assign(static_cast<std::size_t>(st.width()), {0.0, 0.0});
  st.at(m0) = {1.0, 0.0};
  return st;
}

inline RotorState random_state(std::int64_t m_min, std::int64_t m_max, double beta, Rng& rng) {
  RotorState st;
  st.beta = beta;
  st.m_min = m_min;
  st.m_max = m_max;
  st.amps.resize(static_cast<std::size_t>(st.width()));
  for (Complex& a : st.amps) a = {rng.normal(), rng.normal()};
  st.normalize();
  return st;
}

namespace detail {

inline std::size_t pow2_at_least(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// e^{-ik cos theta_j} on the N-point angle grid, cached per (N, k)
inline std::shared_ptr<const std::vector<Complex>> kick_phases(std::size_t n, double k) {
  static std::map<std::pair<std::size_t, double>, std::shared_ptr<const std::vector<Complex>>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto& slot = cache[{n, k}];
  if (!slot) {
    auto v = std::make_shared<std::vector<Complex>>(n);
    for (std::size_t j = 0; j < n; ++j) {
      const double theta = two_pi * static_cast<double>(j) / static_cast<double>(n);
      (*v)[j] = std::polar(1.0, -k * std::cos(theta));
    }
    slot = std::move(v);
  }
  return slot;
}

}  // namespace detail

// multiplication by e^{-ik cos theta} via angle-grid transform; the basis
// window grows until the post-kick boundary amplitudes drop below tol
inline void apply_kick(RotorState& st, double k, double tol = default_trunc_tol) {
  if (k == 0.0) return;
  const std::vector<Complex> saved = st.amps;
  const std::int64_t saved_min = st.m_min, saved_max = st.m_max;
  for (int attempt = 0; attempt < 64; ++attempt) {
    const std::size_t w = static_cast<std::size_t>(st.width());
    const std::size_t n = detail::pow2_at_least(2 * w);
    std::vector<Complex> grid(n, Complex{0.0, 0.0});
    for (std::size_t i = 0; i < w; ++i) {
      const std::int64_t m = st.m_min + static_cast<std::int64_t>(i);
      const std::size_t slot = static_cast<std::size_t>(((m % static_cast<std::int64_t>(n)) + static_cast<std::int64_t>(n)) % static_cast<std::int64_t>(n));
      grid[slot] = st.amps[i];
    }
    fft::backward(grid);
    const auto phases = detail::kick_phases(n, k);
    for (std::size_t j = 0; j < n; ++j) grid[j] *= (*phases)[j];
    fft::forward(grid);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < w; ++i) {
      const std::int64_t m = st.m_min + static_cast<std::int64_t>(i);
      const std::size_t slot = static_cast<std::size_t>(((m % static_cast<std::int64_t>(n)) + static_cast<std::int64_t>(n)) % static_cast<std::int64_t>(n));
      st.amps[i] = grid[slot] * inv_n;
    }
    if (std::abs(st.amps.front()) <= tol && std::abs(st.amps.back()) <= tol) return;
    // boundary leakage: widen and redo from the saved pre-kick state
    const std::int64_t g = static_cast<std::int64_t>(std::ceil(std::abs(k))) + 8;
    st.m_min = saved_min - (attempt + 1) * g;
    st.m_max = saved_max + (attempt + 1) * g;
    st.amps.assign(static_cast<std::size_t>(st.width()), {0.0, 0.0});
    std::copy(saved.begin(), saved.end(),
              st.amps.begin() + static_cast<std::size_t>(saved_min - st.m_min));
  }
  throw std::runtime_error("apply_kick: basis window kept leaking after many grows");
}

// free rotor at kick n: phase -(tau/2)(m + beta + eta/2 + eta n)^2
inline void apply_free(RotorState& st, double tau, double eta, std::int64_t n) {
  const double off = st.beta + 0.5 * eta + eta * static_cast<double>(n);
  for (std::int64_t m = st.m_min; m <= st.m_max; ++m) {
    const double u = static_cast<double>(m) + off;
    st.at(m) *= std::polar(1.0, -0.5 * tau * u * u);
  }
}

template <class Obs>
void evolve(RotorState& st, const KickSchedule& sched, int n_kicks, Obs&& observe,
            double tol = default_trunc_tol) {
  for (int n = 0; n < n_kicks; ++n) {
    apply_free(st, sched.tau, sched.eta, n);
    apply_kick(st, sched.k, tol);
    observe(n, st);
  }
}

inline void evolve(RotorState& st, const KickSchedule& sched, int n_kicks,
                   double tol = default_trunc_tol) {
  evolve(st, sched, n_kicks, [](int, const RotorState&) {}, tol);
}

// momentum-diagonal weight sum_s G_s e^{-2 pi i m s / q}, one value per residue
inline std::vector<Complex> translation_weights(const resonance::GaussCoefficients& g) {
  std::vector<Complex> w(static_cast<std::size_t>(g.q));
  for (int r = 0; r < g.q; ++r) {
    Complex acc{0.0, 0.0};
    for (int s = 0; s < g.q; ++s)
      acc += g.values[static_cast<std::size_t>(s)] *
             resonance::detail::unit_phase_pi(-2LL * s * r, g.q);
    w[static_cast<std::size_t>(r)] = acc;
  }
  return w;
}

// exact resonant step: Gauss-weighted translations, then the kick
inline void resonant_step(RotorState& st, const resonance::ResonanceSpec& spec,
                          const Rational& beta_r, double k,
                          double tol = default_trunc_tol) {
  const auto& betas = spec.beta_r_set;
  if (std::find(betas.begin(), betas.end(), beta_r.mod1()) == betas.end())
    throw std::invalid_argument("resonant_step: beta_r not resonant for this spec");
  if (std::abs(st.beta - beta_r.mod1().value()) > 1e-12)
    throw std::invalid_argument("resonant_step: state beta does not match beta_r");
  const auto g = resonance::gauss_coefficients(spec.p, spec.q, beta_r);
  const auto w = translation_weights(g);
  const std::int64_t q = spec.q;
  for (std::int64_t m = st.m_min; m <= st.m_max; ++m) {
    const std::int64_t r = ((m % q) + q) % q;
    st.at(m) *= w[static_cast<std::size_t>(r)];
  }
  apply_kick(st, k, tol);
}

// near-resonant factorized step at kick n: effective-Planck free rotor in
// epsilon, Gauss-weighted translations shifted by tau*phi_n, then the kick.
// Agrees with the direct route up to a global phase depending on beta and n.
inline void factorized_step(RotorState& st, const resonance::DetuningContext& ctx,
                            const resonance::GaussCoefficients& g, std::int64_t n,
                            double tol = default_trunc_tol) {
  const auto w = translation_weights(g);
  const double phi_n = ctx.delta_beta + 0.5 * ctx.eta + ctx.eta * static_cast<double>(n);
  const std::int64_t q = ctx.spec.q;
  for (std::int64_t m = st.m_min; m <= st.m_max; ++m) {
    const double u = static_cast<double>(m) + ctx.beta_r;
    const std::int64_t r = ((m % q) + q) % q;
    st.at(m) *= std::polar(1.0, -0.5 * ctx.epsilon * u * u) *
                w[static_cast<std::size_t>(r)] *
                std::polar(1.0, -static_cast<double>(m) * ctx.tau * phi_n);
  }
  apply_kick(st, ctx.k, tol);
}

inline void factorized_step(RotorState& st, const resonance::DetuningContext& ctx,
                            std::int64_t n, double tol = default_trunc_tol) {
  Rational br(0, 1);
  bool found = false;
  for (const Rational& b : ctx.spec.beta_r_set)
    if (std::abs(b.value() - ctx.beta_r) < 1e-12) { br = b; found = true; }
  if (!found)
    throw std::invalid_argument("factorized_step: context beta_r is not in the resonant set");
  factorized_step(st, ctx, resonance::gauss_coefficients(ctx.spec.p, ctx.spec.q, br), n, tol);
}

// L2 distance over the union of the two windows
inline double l2_diff(const RotorState& a, const RotorState& b) {
  const std::int64_t lo = std::min(a.m_min, b.m_min);
  const std::int64_t hi = std::max(a.m_max, b.m_max);
  double s = 0.0;
  for (std::int64_t m = lo; m <= hi; ++m) s += std::norm(a.at(m) - b.at(m));
  return std::sqrt(s);
}

// rotate b so its phase agrees with a at a's largest amplitude
inline void align_global_phase(const RotorState& a, RotorState& b) {
  std::int64_t m_best = a.m_min;
  double best = -1.0;
  for (std::int64_t m = a.m_min; m <= a.m_max; ++m) {
    if (std::abs(a.at(m)) > best) { best = std::abs(a.at(m)); m_best = m; }
  }
  const Complex pa = a.at(m_best), pb = b.at(m_best);
  if (std::abs(pb) == 0.0) return;
  const Complex rot = (pa / std::abs(pa)) * (std::abs(pb) / pb);
  for (Complex& c : b.amps) c *= rot;
}

}  // namespace qamlab::quantum

namespace qamlab::resonance {

// commutator defect of the one-kick propagator with multiplication by
// e^{i q theta} (momentum translation by q) on a pseudo-random state;
// vanishes exactly at resonant quasi-momentum
inline double check_commutation(int p, int q, double beta, double k,
                                std::uint64_t seed = 20240717ULL) {
  using quantum::RotorState;
  const double tau = two_pi * static_cast<double>(p) / static_cast<double>(q);
  Rng rng(seed);
  const std::int64_t w = quantum::kick_guard(k) + q;
  RotorState psi = quantum::random_state(-w, w, beta, rng);

  auto one_kick = [&](RotorState st) {
    quantum::apply_free(st, tau, 0.0, 0);
    quantum::apply_kick(st, k);
    return st;
  };
  auto translate = [&](RotorState st) {
    // e^{i q theta} psi shifts every ladder index up by q
    st.m_min += q;
    st.m_max += q;
    return st;
  };

  const RotorState a = translate(one_kick(psi));
  const RotorState b = one_kick(translate(psi));
  return quantum::l2_diff(a, b);
}

}  // namespace qamlab::resonance
