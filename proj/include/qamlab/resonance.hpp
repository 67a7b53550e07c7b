#pragma once
// Kicked-rotor resonance arithmetic: rational kick periods tau = 2*pi*p/q,
// the resonant quasi-momenta beta_r, and the Gauss coefficients weighting the
// translated copies in the exact resonant propagator.
//
// check_commutation lives in quantum.hpp, it needs the propagator.

#include <algorithm>
#include <complex>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qamlab/rational.hpp"

namespace qamlab::resonance {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

struct ResonanceSpec {
  int p = 1;
  int q = 1;
  double tau_res = two_pi;            // 2*pi*p/q
  int order = 1;                      // l = q for primary resonances
  std::vector<Rational> beta_r_set;   // indexed by nu = 0..p-1
};

struct GaussCoefficients {
  int q = 1;
  std::vector<std::complex<double>> values;
};

// Detuning off a resonance; epsilon keeps its sign and acts as the effective
// Planck constant of the epsilon-classical picture.
struct DetuningContext {
  ResonanceSpec spec;
  double tau = 0.0;
  double epsilon = 0.0;     // tau - 2*pi*p/q
  double k = 0.0;
  double k_tilde = 0.0;     // k * epsilon
  double eta = 0.0;
  double beta_r = 0.0;
  double delta_beta = 0.0;  // beta - beta_r
};

// beta_r = (nu/p + q/2) mod 1, exact, indexed by nu
inline std::vector<Rational> resonant_quasimomenta(int p, int q) {
  if (p < 1 || q < 1 || std::gcd(p, q) != 1)
    throw std::invalid_argument("resonant_quasimomenta: need coprime p, q >= 1");
  std::vector<Rational> betas;
  betas.reserve(p);
  for (int nu = 0; nu < p; ++nu)
    betas.push_back(Rational(2LL * nu + 1LL * p * q, 2LL * p).mod1());
  return betas;
}

inline ResonanceSpec make_spec(int p, int q) {
  ResonanceSpec spec;
  spec.p = p;
  spec.q = q;
  spec.tau_res = two_pi * static_cast<double>(p) / static_cast<double>(q);
  spec.order = q;
  spec.beta_r_set = resonant_quasimomenta(p, q);
  return spec;
}

inline DetuningContext make_context(const ResonanceSpec& spec, double tau, double k,
                                    double eta, double beta, const Rational& beta_r) {
  DetuningContext ctx;
  ctx.spec = spec;
  ctx.tau = tau;
  ctx.epsilon = tau - spec.tau_res;
  ctx.k = k;
  ctx.k_tilde = k * ctx.epsilon;
  ctx.eta = eta;
  ctx.beta_r = beta_r.value();
  ctx.delta_beta = beta - ctx.beta_r;
  return ctx;
}

// All rationals p/q, q <= q_max, with |tau/2pi - p/q| <= window, sorted by
// |epsilon|.  Default window is the best-approximation scale 1/(2 q_max^2).
inline std::vector<std::pair<ResonanceSpec, double>>
nearest_resonances(double tau, int q_max, double window = -1.0) {
  if (!(tau > 0.0) || q_max < 1)
    throw std::invalid_argument("nearest_resonances: need tau > 0, q_max >= 1");
  if (window < 0.0) window = 0.5 / (static_cast<double>(q_max) * q_max);
  const double x = tau / two_pi;
  std::vector<std::pair<ResonanceSpec, double>> out;
  for (const Rational& r : farey_in_window(x - window, x + window, q_max)) {
    if (r.num < 1) continue;  // tau > 0 keeps p positive
    ResonanceSpec spec = make_spec(static_cast<int>(r.num), static_cast<int>(r.den));
    const double epsilon = tau - spec.tau_res;
    out.emplace_back(std::move(spec), epsilon);
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    const double ea = std::abs(a.second), eb = std::abs(b.second);
    if (ea != eb) return ea < eb;
    return a.first.q < b.first.q;
  });
  return out;
}

namespace detail {

// exp(i * pi * num/den) with the angle reduced mod 2 in integers first, so
// large quadratic phases lose no precision to argument reduction
inline std::complex<double> unit_phase_pi(std::int64_t num, std::int64_t den) {
  if (den < 0) { den = -den; num = -num; }
  std::int64_t r = num % (2 * den);
  if (r < 0) r += 2 * den;
  return std::polar(1.0, std::numbers::pi * static_cast<double>(r) / static_cast<double>(den));
}

}  // namespace detail

// G_s = (1/q) sum_l exp(-i*pi*p*(l+beta_r)^2/q) exp(2*pi*i*s*l/q)
inline GaussCoefficients gauss_coefficients(int p, int q, const Rational& beta_r) {
  const auto betas = resonant_quasimomenta(p, q);
  const Rational b = beta_r.mod1();
  if (std::find(betas.begin(), betas.end(), b) == betas.end())
    throw std::invalid_argument("gauss_coefficients: beta_r is not resonant for p/q");

  GaussCoefficients g;
  g.q = q;
  g.values.assign(q, {0.0, 0.0});
  const std::int64_t bn = b.num, bd = b.den;
  const std::int64_t den1 = q * bd * bd;
  for (int s = 0; s < q; ++s) {
    std::complex<double> acc{0.0, 0.0};
    for (int l = 0; l < q; ++l) {
      const __int128 t = l * bd + bn;
      const __int128 num1 = static_cast<__int128>(p) * t * t;
      const std::int64_t r1 = static_cast<std::int64_t>(num1 % (2 * static_cast<__int128>(den1)));
      acc += detail::unit_phase_pi(-r1, den1) * detail::unit_phase_pi(2LL * s * l, q);
    }
    g.values[s] = acc / static_cast<double>(q);
  }
  return g;
}

}  // namespace qamlab::resonance
