#pragma once
// The epsilon-classical map family on the cylinder and 2-torus.  One map per
// periodic delta-sequence: theta advances by the old J, then J picks up
// delta_t + tau*eta + k_tilde*sin(theta_new).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <set>
#include <stdexcept>
#include <vector>

#include "qamlab/parallel.hpp"

namespace qamlab::epsmaps {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline double mod_2pi(double x) {
  const double y = x - two_pi * std::floor(x / two_pi);
  // floor can land exactly on 2*pi after rounding
  return (y >= two_pi) ? y - two_pi : y;
}

// delta_t = 2*pi*d_t/q, stored as integers so the mean drift is exact
struct DeltaSequence {
  int q = 1;
  std::vector<int> d;

  int period() const { return static_cast<int>(d.size()); }
  int dsum() const {
    int s = 0;
    for (int x : d) s += x;
    return s;
  }
  double delta(std::int64_t t) const {
    const int T = period();
    const int i = static_cast<int>(((t % T) + T) % T);
    return two_pi * static_cast<double>(d[static_cast<std::size_t>(i)]) / static_cast<double>(q);
  }
  double Delta_T() const {
    return two_pi * static_cast<double>(dsum()) /
           (static_cast<double>(q) * static_cast<double>(period()));
  }
};

inline DeltaSequence make_delta(int q, std::vector<int> d) {
  if (q < 1 || d.empty()) throw std::invalid_argument("make_delta: need q >= 1 and a period");
  return DeltaSequence{q, std::move(d)};
}

struct TorusMapSpec {
  double k_tilde = 0.0;
  double drift = 0.0;  // tau * eta
  DeltaSequence deltas;
};

struct PhasePoint {
  double theta = 0.0;
  double J = 0.0;
};

inline PhasePoint reduce(const PhasePoint& pt) {
  return {mod_2pi(pt.theta), mod_2pi(pt.J)};
}

// single step F_t; theta is updated with the old J, then J with the new theta
inline PhasePoint step(const PhasePoint& pt, std::int64_t t, const TorusMapSpec& spec,
                       bool lifted = false) {
  PhasePoint out;
  out.theta = pt.theta + pt.J;
  if (!lifted) out.theta = mod_2pi(out.theta);
  out.J = pt.J + spec.deltas.delta(t) + spec.drift + spec.k_tilde * std::sin(out.theta);
  if (!lifted) out.J = mod_2pi(out.J);
  return out;
}

// Lifted point kept as torus coordinates plus integer winding counters.
// The torus dynamics is bit-identical to iterating reduced points, and the
// lift is reconstructed exactly, so reduction commutes with iteration by
// construction even over long chaotic stretches.
struct LiftState {
  PhasePoint torus;
  std::int64_t wind_theta = 0;
  std::int64_t wind_J = 0;

  double theta() const { return torus.theta + two_pi * static_cast<double>(wind_theta); }
  double J() const { return torus.J + two_pi * static_cast<double>(wind_J); }
};

inline LiftState lift_step(const LiftState& st, std::int64_t t, const TorusMapSpec& spec) {
  LiftState out;
  out.torus = step(st.torus, t, spec);
  // Recompute the raw updates with the same expressions step() uses, so the
  // winding counts are recovered from differences that are exact multiples
  // of 2*pi up to one rounding.
  const double th_raw = st.torus.theta + st.torus.J;
  const double j_raw = st.torus.J + spec.deltas.delta(t) + spec.drift +
                       spec.k_tilde * std::sin(out.torus.theta);
  out.wind_theta =
      st.wind_theta + st.wind_J + std::llround((th_raw - out.torus.theta) / two_pi);
  out.wind_J = st.wind_J + std::llround((j_raw - out.torus.J) / two_pi);
  return out;
}

// tangent map of one step, [[1, 1], [c, 1+c]] with c = k_tilde*cos(theta_new)
struct Mat2 {
  double a = 1.0, b = 0.0, c = 0.0, d = 1.0;

  friend Mat2 operator*(const Mat2& x, const Mat2& y) {
    return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d,
            x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
  }
  double trace() const { return a + d; }
  double det() const { return a * d - b * c; }
};

inline PhasePoint step_with_tangent(const PhasePoint& pt, std::int64_t t,
                                    const TorusMapSpec& spec, Mat2& acc,
                                    bool lifted = false) {
  const PhasePoint out = step(pt, t, spec, lifted);
  const double c = spec.k_tilde * std::cos(out.theta);
  acc = Mat2{1.0, 1.0, c, 1.0 + c} * acc;
  return out;
}

// map over one period starting at phase t_start, on the torus
inline PhasePoint period_map(const PhasePoint& pt, const TorusMapSpec& spec,
                             std::int64_t t_start = 0, bool lifted = false) {
  PhasePoint cur = pt;
  const int T = spec.deltas.period();
  for (int t = 0; t < T; ++t) cur = step(cur, t_start + t, spec, lifted);
  return cur;
}

// torus orbits of the period map for each seed, point cloud ordered by seed
inline std::vector<std::vector<PhasePoint>> portrait(const TorusMapSpec& spec,
                                                     const std::vector<PhasePoint>& seeds,
                                                     int iters, unsigned threads = 1) {
  if (iters < 1) throw std::invalid_argument("portrait: iters >= 1");
  std::vector<std::vector<PhasePoint>> cloud(seeds.size());
  parallel_for(seeds.size(), threads, [&](std::size_t i) {
    std::vector<PhasePoint>& orbit = cloud[i];
    orbit.reserve(static_cast<std::size_t>(iters) + 1);
    PhasePoint cur = reduce(seeds[i]);
    orbit.push_back(cur);
    for (int it = 0; it < iters; ++it) {
      cur = period_map(cur, spec);
      orbit.push_back(cur);
    }
  });
  return cloud;
}

// All delta-sequences from residue strings s in {0..q-1}^T plus a per-period
// winding c = s_T - s_0: d_t = s_{t+1} - s_t.  Cyclic shifts are duplicates.
inline std::vector<DeltaSequence> enumerate_delta_sequences(int q, int T, int c_lo, int c_hi) {
  if (q < 1 || T < 1 || c_lo > c_hi)
    throw std::invalid_argument("enumerate_delta_sequences: bad arguments");
  double combos = 1.0;
  for (int t = 0; t < T; ++t) combos *= static_cast<double>(q);
  if (combos > 2e6) throw std::invalid_argument("enumerate_delta_sequences: q^T too large");

  auto canonical = [T](std::vector<int> d) {
    std::vector<int> best = d;
    for (int r = 1; r < T; ++r) {
      std::rotate(d.begin(), d.begin() + 1, d.end());
      if (d < best) best = d;
    }
    return best;
  };

  std::set<std::vector<int>> seen;
  std::vector<int> s(static_cast<std::size_t>(T), 0);
  const auto total = static_cast<std::int64_t>(combos);
  for (std::int64_t n = 0; n < total; ++n) {
    std::int64_t rem = n;
    for (int t = 0; t < T; ++t) {
      s[static_cast<std::size_t>(t)] = static_cast<int>(rem % q);
      rem /= q;
    }
    for (int c = c_lo; c <= c_hi; ++c) {
      std::vector<int> d(static_cast<std::size_t>(T));
      for (int t = 0; t + 1 < T; ++t)
        d[static_cast<std::size_t>(t)] = s[static_cast<std::size_t>(t + 1)] - s[static_cast<std::size_t>(t)];
      d[static_cast<std::size_t>(T - 1)] = s[0] + c - s[static_cast<std::size_t>(T - 1)];
      seen.insert(canonical(std::move(d)));
    }
  }
  std::vector<DeltaSequence> out;
  out.reserve(seen.size());
  for (const auto& d : seen) out.push_back(DeltaSequence{q, d});
  return out;
}

}  // namespace qamlab::epsmaps
