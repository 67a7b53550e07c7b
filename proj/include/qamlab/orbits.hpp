#pragma once
// Periodic orbits of the period map with jumping index j: Newton search over
// theta-windings, stability via the accumulated tangent map, the acceleration
// law a = (2*pi*j/(p*T) - Delta_T - tau*eta)/epsilon, and ray diagnostics
// through the tridiagonal Hessian (determinant growth, Lyapunov exponent).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qamlab/epsmaps.hpp"

namespace qamlab::orbits {

using epsmaps::DeltaSequence;
using epsmaps::Mat2;
using epsmaps::PhasePoint;
using epsmaps::TorusMapSpec;
using epsmaps::mod_2pi;
using epsmaps::two_pi;

inline constexpr double parabolic_band = 1e-9;

struct PeriodicOrbit {
  TorusMapSpec spec;
  int period_p = 1;      // p, in periods of the delta-sequence
  int jump_j = 0;        // net J winding over the orbit, in units of 2*pi
  int theta_winding = 0;
  std::vector<PhasePoint> points;  // p samples, one per period-map application
  double trace = 0.0;
  double residue = 0.0;
  bool stable = false;
  bool parabolic = false;
};

struct AccelerationPrediction {
  double a = 0.0;  // ladder units per kick, physical sign
  int jump_j = 0;
  int period_p = 1;
  int T = 1;
  double Delta_T = 0.0;
  double drift = 0.0;
  double epsilon = 0.0;
};

namespace detail {

inline double torus_dist(double a, double b) {
  const double d = std::abs(mod_2pi(a - b));
  return std::min(d, two_pi - d);
}

inline double torus_dist(const PhasePoint& a, const PhasePoint& b) {
  return std::max(torus_dist(a.theta, b.theta), torus_dist(a.J, b.J));
}

inline void classify(PeriodicOrbit& orb) {
  orb.residue = (2.0 - orb.trace) / 4.0;
  orb.parabolic = std::abs(std::abs(orb.trace) - 2.0) < parabolic_band;
  orb.stable = !orb.parabolic && std::abs(orb.trace) < 2.0;
}

}  // namespace detail

// closed-form fixed points of the T=1 map: sin(theta*) = (2*pi*j - delta_0 - drift)/k_tilde
inline std::vector<PeriodicOrbit> fixed_points_analytic(const TorusMapSpec& spec, int j) {
  if (spec.deltas.period() != 1)
    throw std::invalid_argument("fixed_points_analytic: only the T=1 family");
  if (spec.k_tilde == 0.0)
    throw std::invalid_argument("fixed_points_analytic: k_tilde = 0 is degenerate");
  const double rhs =
      (two_pi * static_cast<double>(j) - spec.deltas.delta(0) - spec.drift) / spec.k_tilde;
  std::vector<PeriodicOrbit> out;
  if (std::abs(rhs) > 1.0) return out;
  const double t0 = std::asin(rhs);
  for (double theta : {mod_2pi(t0), mod_2pi(std::numbers::pi - t0)}) {
    PeriodicOrbit orb;
    orb.spec = spec;
    orb.period_p = 1;
    orb.jump_j = j;
    orb.theta_winding = 0;
    orb.points = {PhasePoint{theta, 0.0}};
    orb.trace = 2.0 + spec.k_tilde * std::cos(theta);
    detail::classify(orb);
    out.push_back(std::move(orb));
    if (out.size() == 2 && detail::torus_dist(out[0].points[0], out[1].points[0]) < 1e-12)
      out.pop_back();  // sin(theta*) = +-1, double root
  }
  return out;
}

struct NewtonOptions {
  int grid_n = 64;
  double tol = 1e-12;
  int max_iter = 50;
  double dedup_tol = 1e-6;
  unsigned threads = 1;
};

namespace detail {

struct NewtonResult {
  PhasePoint start;       // reduced to the torus
  int winding_w = 0;
  int jump_j = 0;
  int period_p = 1;
  double trace = 0.0;
};

// lifted p*T steps with tangent accumulation
inline PhasePoint run_block(const PhasePoint& start, const TorusMapSpec& spec, int p,
                            Mat2& acc) {
  PhasePoint cur = start;
  const int T = spec.deltas.period();
  acc = Mat2{};
  for (int t = 0; t < p * T; ++t) cur = epsmaps::step_with_tangent(cur, t, spec, acc, true);
  return cur;
}

inline std::optional<NewtonResult> newton_from_seed(PhasePoint seed, const TorusMapSpec& spec,
                                                    int p, int j, int w,
                                                    const NewtonOptions& opt) {
  PhasePoint x = seed;
  for (int it = 0; it < opt.max_iter; ++it) {
    Mat2 m;
    const PhasePoint y = run_block(x, spec, p, m);
    const double g1 = y.theta - x.theta - two_pi * static_cast<double>(w);
    const double g2 = y.J - x.J - two_pi * static_cast<double>(j);
    if (std::abs(g1) < opt.tol && std::abs(g2) < opt.tol) {
      NewtonResult res;
      res.start = epsmaps::reduce(x);
      res.winding_w = w;
      res.jump_j = j;
      res.period_p = p;
      res.trace = m.trace();
      return res;
    }
    // solve (M - I) dx = -g
    const double a = m.a - 1.0, b = m.b, c = m.c, d = m.d - 1.0;
    const double det = a * d - b * c;
    if (std::abs(det) < 1e-14) return std::nullopt;
    const double dx = (-g1 * d + g2 * b) / det;
    const double dy = (-g2 * a + g1 * c) / det;
    if (!std::isfinite(dx) || !std::isfinite(dy) || std::abs(dx) + std::abs(dy) > 1e3)
      return std::nullopt;
    x.theta += dx;
    x.J += dy;
  }
  return std::nullopt;
}

}  // namespace detail

// Newton search for (p, j)-orbits over all theta-windings |w| <= p*T, seeded
// from a uniform torus grid; minimal-period representatives, deduped
inline std::vector<PeriodicOrbit> find_periodic_orbits(const TorusMapSpec& spec, int p, int j,
                                                       const NewtonOptions& opt = {}) {
  if (p < 1) throw std::invalid_argument("find_periodic_orbits: p >= 1");
  const int T = spec.deltas.period();
  const int w_max = p * T;

  std::vector<detail::NewtonResult> roots;
  const int n_seeds = opt.grid_n * opt.grid_n;
  const int n_windings = 2 * w_max + 1;
  std::vector<std::optional<detail::NewtonResult>> slots(
      static_cast<std::size_t>(n_seeds) * static_cast<std::size_t>(n_windings));

  parallel_for(slots.size(), opt.threads, [&](std::size_t idx) {
    const int w = static_cast<int>(idx / static_cast<std::size_t>(n_seeds)) - w_max;
    const int sidx = static_cast<int>(idx % static_cast<std::size_t>(n_seeds));
    const double gx = (static_cast<double>(sidx % opt.grid_n) + 0.5) / opt.grid_n;
    const double gy = (static_cast<double>(sidx / opt.grid_n) + 0.5) / opt.grid_n;
    slots[idx] = detail::newton_from_seed(PhasePoint{two_pi * gx, two_pi * gy}, spec, p, j, w, opt);
  });
  for (auto& s : slots)
    if (s) roots.push_back(*s);

  // reduce each root to its minimal period p' | p (jump must split evenly too)
  std::vector<PeriodicOrbit> found;
  for (const auto& root : roots) {
    int p_min = p;
    int j_min = j;
    for (int pp = 1; pp < p; ++pp) {
      if (p % pp != 0 || (static_cast<std::int64_t>(j) * pp) % p != 0) continue;
      Mat2 m;
      const PhasePoint y = detail::run_block(root.start, spec, pp, m);
      const double jw = (y.J - root.start.J) / two_pi;
      const double tw = (y.theta - root.start.theta) / two_pi;
      if (std::abs(jw - std::round(jw)) < 1e-8 && std::abs(tw - std::round(tw)) < 1e-8 &&
          detail::torus_dist(epsmaps::reduce(y), root.start) < 1e-8) {
        p_min = pp;
        j_min = static_cast<int>(std::llround(jw));
        break;
      }
    }

    PeriodicOrbit orb;
    orb.spec = spec;
    orb.period_p = p_min;
    orb.jump_j = p_min == p ? j : j_min;

    Mat2 m;
    PhasePoint cur = root.start;
    orb.points.push_back(epsmaps::reduce(cur));
    for (int blk = 0; blk + 1 < p_min; ++blk) {
      Mat2 tmp;
      cur = detail::run_block(cur, spec, 1, tmp);
      // block tangents accumulate across the whole orbit below
      orb.points.push_back(epsmaps::reduce(cur));
    }
    const PhasePoint end = detail::run_block(root.start, spec, p_min, m);
    orb.theta_winding = static_cast<int>(std::llround((end.theta - root.start.theta) / two_pi));
    orb.trace = m.trace();
    detail::classify(orb);
    found.push_back(std::move(orb));
  }

  // dedup: two orbits coincide when some cyclic alignment matches pointwise
  std::vector<PeriodicOrbit> unique;
  for (auto& cand : found) {
    bool dup = false;
    for (const auto& kept : unique) {
      if (kept.period_p != cand.period_p || kept.jump_j != cand.jump_j) continue;
      for (std::size_t shift = 0; shift < kept.points.size() && !dup; ++shift) {
        double worst = 0.0;
        for (std::size_t i = 0; i < cand.points.size(); ++i)
          worst = std::max(worst,
                           detail::torus_dist(cand.points[i],
                                              kept.points[(i + shift) % kept.points.size()]));
        dup = worst < opt.dedup_tol;
      }
      if (dup) break;
    }
    if (!dup) unique.push_back(std::move(cand));
  }
  return unique;
}

inline AccelerationPrediction predict_acceleration(const PeriodicOrbit& orbit, double epsilon) {
  if (epsilon == 0.0)
    throw std::invalid_argument("predict_acceleration: epsilon = 0 has no detuned picture");
  AccelerationPrediction pred;
  pred.jump_j = orbit.jump_j;
  pred.period_p = orbit.period_p;
  pred.T = orbit.spec.deltas.period();
  pred.Delta_T = orbit.spec.deltas.Delta_T();
  pred.drift = orbit.spec.drift;
  pred.epsilon = epsilon;
  pred.a = (two_pi * static_cast<double>(orbit.jump_j) /
                (static_cast<double>(orbit.period_p) * static_cast<double>(pred.T)) -
            pred.Delta_T - pred.drift) /
           epsilon;
  return pred;
}

// theta after each lifted step along the ray.  The ray is periodic, so one
// orbit block is unrolled exactly and tiled; naive iteration would drift off
// unstable orbits exponentially and hand back a chaotic sequence instead.
inline std::vector<double> orbit_to_ray(const PeriodicOrbit& orbit, int n_kicks) {
  const int block = orbit.period_p * orbit.spec.deltas.period();
  std::vector<double> one(static_cast<std::size_t>(block));
  PhasePoint cur = orbit.points.at(0);
  for (int t = 0; t < block; ++t) {
    cur = epsmaps::step(cur, t, orbit.spec, true);
    one[static_cast<std::size_t>(t)] = mod_2pi(cur.theta);
  }
  std::vector<double> thetas;
  thetas.reserve(static_cast<std::size_t>(n_kicks));
  for (int t = 0; t < n_kicks; ++t)
    thetas.push_back(one[static_cast<std::size_t>(t % block)]);
  return thetas;
}

struct RayHessian {
  std::vector<double> diag;  // 2 + k_tilde*cos(theta_t); off-diagonals are -1
};

inline RayHessian build_ray_hessian(const std::vector<double>& thetas, double k_tilde) {
  RayHessian h;
  h.diag.reserve(thetas.size());
  for (double th : thetas) h.diag.push_back(2.0 + k_tilde * std::cos(th));
  return h;
}

// log|D_n| of the leading principal minors, D_t = diag_t D_{t-1} - D_{t-2},
// renormalized long before the doubles overflow
inline std::vector<double> det_growth(const RayHessian& h) {
  std::vector<double> out;
  out.reserve(h.diag.size());
  double prev = 1.0, cur = 1.0;  // D_{-2} unused, D_{-1} = 1
  double log_scale = 0.0;
  const double big = std::ldexp(1.0, 512);
  bool first = true;
  for (double a : h.diag) {
    const double next = first ? a : a * cur - prev;
    first = false;
    prev = cur;
    cur = next;
    if (std::abs(cur) > big) {
      cur = std::ldexp(cur, -512);
      prev = std::ldexp(prev, -512);
      log_scale += 512.0 * std::numbers::ln2;
    }
    out.push_back(std::log(std::max(std::abs(cur), 1e-300)) + log_scale);
  }
  return out;
}

// top Lyapunov exponent of the transfer cocycle [[diag_t, -1], [1, 0]]
inline double ray_lyapunov(const std::vector<double>& thetas, double k_tilde) {
  double v1 = 1.0, v2 = 0.0;
  double sum = 0.0;
  std::size_t steps = 0;
  for (double th : thetas) {
    const double a = 2.0 + k_tilde * std::cos(th);
    const double w1 = a * v1 - v2;
    const double w2 = v1;
    const double nrm = std::hypot(w1, w2);
    sum += std::log(nrm);
    v1 = w1 / nrm;
    v2 = w2 / nrm;
    ++steps;
  }
  return steps ? sum / static_cast<double>(steps) : 0.0;
}

// log of the spectral radius of the orbit's tangent map, per kick
inline double tangent_log_radius(const PeriodicOrbit& orbit) {
  Mat2 m;
  detail::run_block(orbit.points.at(0), orbit.spec, orbit.period_p, m);
  const double tr = m.trace();
  const double disc = tr * tr - 4.0 * m.det();
  double rho;
  if (disc >= 0.0) {
    const double l1 = std::abs((tr + std::sqrt(disc)) / 2.0);
    const double l2 = std::abs((tr - std::sqrt(disc)) / 2.0);
    rho = std::max(l1, l2);
  } else {
    rho = std::sqrt(m.det());  // complex pair on the unit circle for det 1
  }
  const int n = orbit.period_p * orbit.spec.deltas.period();
  return std::log(rho) / static_cast<double>(n);
}

}  // namespace qamlab::orbits
