#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <set>
#include <vector>

#include "qamlab/epsmaps.hpp"
#include "qamlab/rng.hpp"

using namespace qamlab;
using epsmaps::DeltaSequence;
using epsmaps::LiftState;
using epsmaps::Mat2;
using epsmaps::PhasePoint;
using epsmaps::TorusMapSpec;
using epsmaps::two_pi;

namespace {

constexpr double pi = std::numbers::pi;

double torus_dist(const PhasePoint& a, const PhasePoint& b) {
  auto wrap = [](double x) {
    x = epsmaps::mod_2pi(x);
    return (x > pi) ? two_pi - x : x;
  };
  const double dt = wrap(a.theta - b.theta);
  const double dj = wrap(a.J - b.J);
  return std::hypot(dt, dj);
}

// q^T residue strings with an extra winding, deduplicated up to cyclic
// shifts; slower than the library routine but shares no code with it
std::vector<int> canonical_rotation(std::vector<int> d) {
  std::vector<int> best = d;
  for (std::size_t r = 1; r < d.size(); ++r) {
    std::rotate(d.begin(), d.begin() + 1, d.end());
    if (d < best) best = d;
  }
  return best;
}

// A jump sequence d with sum(d) = c is realizable over residues {0..q-1}
// exactly when its prefix sums fit inside a window of width q-1.
std::set<std::vector<int>> brute_force_sequences(int q, int T, int c_lo, int c_hi) {
  const int reach = (q - 1) + std::max(std::abs(c_lo), std::abs(c_hi));
  std::set<std::vector<int>> out;
  std::vector<int> d(static_cast<std::size_t>(T), -reach);
  while (true) {
    int sum = 0;
    int prefix = 0;
    int lo = 0;
    int hi = 0;
    for (int t = 0; t < T; ++t) {
      sum += d[static_cast<std::size_t>(t)];
      if (t + 1 < T) {
        prefix += d[static_cast<std::size_t>(t)];
        lo = std::min(lo, prefix);
        hi = std::max(hi, prefix);
      }
    }
    if (sum >= c_lo && sum <= c_hi && hi - lo <= q - 1) out.insert(canonical_rotation(d));
    int i = T - 1;
    while (i >= 0 && d[static_cast<std::size_t>(i)] == reach) {
      d[static_cast<std::size_t>(i)] = -reach;
      --i;
    }
    if (i < 0) break;
    ++d[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace

TEST_CASE("delta sequences expose the kick offsets") {
  SECTION("single jump of ten thirteenths") {
    const DeltaSequence ds = epsmaps::make_delta(13, {10});
    REQUIRE(ds.period() == 1);
    REQUIRE(ds.dsum() == 10);
    REQUIRE(ds.delta(0) == Catch::Approx(20.0 * pi / 13.0).epsilon(1e-15));
    REQUIRE(ds.delta(7) == ds.delta(0));
    REQUIRE(ds.Delta_T() == Catch::Approx(20.0 * pi / 13.0).epsilon(1e-15));
  }

  SECTION("alternating pair averages to zero") {
    const DeltaSequence ds = epsmaps::make_delta(2, {-1, 1});
    REQUIRE(ds.delta(0) == Catch::Approx(-pi).epsilon(1e-15));
    REQUIRE(ds.delta(1) == Catch::Approx(pi).epsilon(1e-15));
    REQUIRE(ds.delta(2) == ds.delta(0));
    REQUIRE(ds.delta(-1) == ds.delta(1));
    REQUIRE(ds.Delta_T() == 0.0);
  }

  SECTION("rejects empty and nonsense input") {
    REQUIRE_THROWS_AS(epsmaps::make_delta(0, {1}), std::invalid_argument);
    REQUIRE_THROWS_AS(epsmaps::make_delta(3, {}), std::invalid_argument);
  }
}

TEST_CASE("the step updates theta before J") {
  const TorusMapSpec spec{0.7, 0.1, epsmaps::make_delta(5, {2})};
  const PhasePoint pt{1.0, 2.0};
  const PhasePoint out = epsmaps::step(pt, 0, spec, true);

  REQUIRE(out.theta == 3.0);
  const double expected_J = 2.0 + spec.deltas.delta(0) + 0.1 + 0.7 * std::sin(3.0);
  REQUIRE(out.J == expected_J);

  // updating J from the old angle instead would land measurably elsewhere
  const double wrong_J = 2.0 + spec.deltas.delta(0) + 0.1 + 0.7 * std::sin(1.0);
  REQUIRE(std::abs(out.J - wrong_J) > 0.1);

  const PhasePoint red = epsmaps::step(pt, 0, spec, false);
  REQUIRE(red.theta == epsmaps::mod_2pi(3.0));
  REQUIRE(red.theta >= 0.0);
  REQUIRE(red.theta < two_pi);
  REQUIRE(red.J >= 0.0);
  REQUIRE(red.J < two_pi);
}

TEST_CASE("one step preserves phase space area") {
  const std::vector<TorusMapSpec> specs = {
      {0.032, 1.253, epsmaps::make_delta(13, {10})},
      {-0.395, 1.122, epsmaps::make_delta(2, {-1, 1})},
      {1.5, 0.7, epsmaps::make_delta(3, {1, -1, 0})},
  };
  Rng rng(91);
  const double h = 1e-5;
  for (const TorusMapSpec& spec : specs) {
    for (int trial = 0; trial < 40; ++trial) {
      const PhasePoint pt{two_pi * rng.uniform(), two_pi * rng.uniform()};
      const std::int64_t t = trial % (2 * spec.deltas.period());

      auto at = [&](double dth, double dj) {
        return epsmaps::step(PhasePoint{pt.theta + dth, pt.J + dj}, t, spec, true);
      };
      const PhasePoint tp = at(h, 0.0), tm = at(-h, 0.0);
      const PhasePoint jp = at(0.0, h), jm = at(0.0, -h);
      const double a = (tp.theta - tm.theta) / (2.0 * h);
      const double b = (jp.theta - jm.theta) / (2.0 * h);
      const double c = (tp.J - tm.J) / (2.0 * h);
      const double d = (jp.J - jm.J) / (2.0 * h);
      REQUIRE(std::abs(a * d - b * c - 1.0) < 1e-9);

      // the analytic tangent matrix should agree with the differences
      Mat2 acc;
      epsmaps::step_with_tangent(pt, t, spec, acc, true);
      REQUIRE(std::abs(acc.a - a) < 1e-7);
      REQUIRE(std::abs(acc.b - b) < 1e-7);
      REQUIRE(std::abs(acc.c - c) < 1e-7);
      REQUIRE(std::abs(acc.d - d) < 1e-7);
      REQUIRE(std::abs(acc.det() - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("period maps from shifted starts are conjugate") {
  const TorusMapSpec spec{0.25, 0.4, epsmaps::make_delta(3, {1, -1, 0})};
  const int T = spec.deltas.period();
  Rng rng(133);
  for (int shift = 1; shift < T; ++shift) {
    for (int trial = 0; trial < 20; ++trial) {
      const PhasePoint x{two_pi * rng.uniform(), two_pi * rng.uniform()};

      // C = F_{shift-1} o ... o F_0 carries orbits of F^(T)_0 to F^(T)_shift
      auto C = [&](PhasePoint p) {
        for (int t = 0; t < shift; ++t) p = epsmaps::step(p, t, spec, true);
        return p;
      };
      const PhasePoint lhs = C(epsmaps::period_map(x, spec, 0, true));
      const PhasePoint rhs = epsmaps::period_map(C(x), spec, shift, true);
      REQUIRE(std::abs(lhs.theta - rhs.theta) < 1e-10);
      REQUIRE(std::abs(lhs.J - rhs.J) < 1e-10);
    }
  }
}

TEST_CASE("with no kick the lift shears at the mean drift") {
  const TorusMapSpec spec{0.0, 1.253, epsmaps::make_delta(13, {4, -2, 7})};
  const int T = spec.deltas.period();
  const double per_period = static_cast<double>(T) * (spec.deltas.Delta_T() + spec.drift);

  LiftState st{PhasePoint{0.3, 0.9}, 0, 0};
  const double J0 = st.J();
  std::int64_t t = 0;
  for (int period = 1; period <= 400; ++period) {
    for (int i = 0; i < T; ++i) st = epsmaps::lift_step(st, t++, spec);
    const double expected = J0 + static_cast<double>(period) * per_period;
    REQUIRE(st.J() == Catch::Approx(expected).margin(1e-8));
  }
}

TEST_CASE("torus reduction commutes with iteration") {
  const TorusMapSpec spec{1.5, 0.7, epsmaps::make_delta(13, {10})};
  PhasePoint red{1.234, 5.678};
  LiftState lift{red, 0, 0};
  double worst = 0.0;
  for (std::int64_t t = 0; t < 1000; ++t) {
    red = epsmaps::step(red, t, spec, false);
    lift = epsmaps::lift_step(lift, t, spec);
    worst = std::max(worst, std::abs(lift.torus.theta - red.theta));
    // reconstructing the lift and reducing it lands back on the torus point
    REQUIRE(epsmaps::mod_2pi(lift.theta()) == Catch::Approx(red.theta).margin(1e-8));
  }
  REQUIRE(worst < 1e-10);
  REQUIRE(lift.torus.J == red.J);
  // a chaotic run this long must have wound around many times
  REQUIRE(lift.wind_J > 100);
}

TEST_CASE("jump sequence enumeration matches brute force") {
  SECTION("order one leaves only the winding") {
    const auto seqs = epsmaps::enumerate_delta_sequences(1, 3, -2, 2);
    REQUIRE(seqs.size() == 5);
    std::set<int> windings;
    for (const DeltaSequence& ds : seqs) {
      windings.insert(ds.dsum());
      // the sole residue is zero, so the whole winding sits in one jump
      int nonzero = 0;
      for (int x : ds.d)
        if (x != 0) ++nonzero;
      REQUIRE(nonzero <= 1);
    }
    REQUIRE(windings == std::set<int>{-2, -1, 0, 1, 2});
  }

  SECTION("the ten thirteenths family is the lone winding ten sequence") {
    const auto seqs = epsmaps::enumerate_delta_sequences(13, 1, 10, 10);
    REQUIRE(seqs.size() == 1);
    REQUIRE(seqs[0].q == 13);
    REQUIRE(seqs[0].d == std::vector<int>{10});
    REQUIRE(seqs[0].delta(0) == Catch::Approx(20.0 * pi / 13.0).epsilon(1e-15));
  }

  SECTION("order two holds the alternating pair") {
    const auto seqs = epsmaps::enumerate_delta_sequences(2, 2, 0, 0);
    std::set<std::vector<int>> got;
    for (const DeltaSequence& ds : seqs) got.insert(ds.d);
    REQUIRE(got == std::set<std::vector<int>>{{0, 0}, {-1, 1}});
  }

  SECTION("independent enumeration agrees on small cases") {
    struct Case {
      int q, T, c_lo, c_hi;
    };
    for (const Case& cs : {Case{3, 3, -2, 2}, Case{2, 2, 0, 1}, Case{4, 2, -1, 3}}) {
      const auto seqs = epsmaps::enumerate_delta_sequences(cs.q, cs.T, cs.c_lo, cs.c_hi);
      std::set<std::vector<int>> got;
      for (const DeltaSequence& ds : seqs) {
        REQUIRE(ds.q == cs.q);
        got.insert(ds.d);
      }
      REQUIRE(got.size() == seqs.size());
      REQUIRE(got == brute_force_sequences(cs.q, cs.T, cs.c_lo, cs.c_hi));
    }
  }

  SECTION("guards against runaway input") {
    REQUIRE_THROWS_AS(epsmaps::enumerate_delta_sequences(50, 10, 0, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(epsmaps::enumerate_delta_sequences(3, 2, 1, 0), std::invalid_argument);
  }
}

TEST_CASE("portraits are deterministic and respect the integrable limit") {
  std::vector<PhasePoint> seeds;
  Rng rng(57);
  for (int i = 0; i < 12; ++i) seeds.push_back({two_pi * rng.uniform(), two_pi * rng.uniform()});

  SECTION("zero kick and zero drift freeze J") {
    const TorusMapSpec spec{0.0, 0.0, epsmaps::make_delta(1, {0})};
    const auto cloud = epsmaps::portrait(spec, seeds, 200);
    REQUIRE(cloud.size() == seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      REQUIRE(cloud[i].size() == 201);
      REQUIRE(cloud[i][0].theta == epsmaps::mod_2pi(seeds[i].theta));
      for (const PhasePoint& p : cloud[i]) REQUIRE(p.J == cloud[i][0].J);
    }
  }

  SECTION("threaded and serial runs are byte identical") {
    const TorusMapSpec spec{0.8, 0.3, epsmaps::make_delta(2, {-1, 1})};
    const auto serial = epsmaps::portrait(spec, seeds, 500, 1);
    const auto threaded = epsmaps::portrait(spec, seeds, 500, 3);
    REQUIRE(serial.size() == threaded.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
      REQUIRE(std::memcmp(serial[i].data(), threaded[i].data(),
                          serial[i].size() * sizeof(PhasePoint)) == 0);
    }
  }
}

TEST_CASE("a small kick carves an island around the elliptic point") {
  // period one with delta_0 = 20*pi/13, drift 1.455, kick 0.040
  const TorusMapSpec spec{0.040, 1.455, epsmaps::make_delta(13, {10})};
  const double rhs = (two_pi - spec.deltas.delta(0) - spec.drift) / spec.k_tilde;
  REQUIRE(std::abs(rhs) < 1.0);
  const double theta_star = pi - std::asin(rhs);

  // elliptic root has cos(theta*) < 0, so the residue lies inside (0, 1)
  const double trace = 2.0 + spec.k_tilde * std::cos(theta_star);
  const double residue = (2.0 - trace) / 4.0;
  REQUIRE(residue > 0.0);
  REQUIRE(residue < 1.0);

  // the fixed point closes through one full turn in J
  PhasePoint fp{theta_star, 0.0};
  const PhasePoint once = epsmaps::step(fp, 0, spec, true);
  REQUIRE(once.theta == Catch::Approx(theta_star).margin(1e-12));
  REQUIRE(once.J == Catch::Approx(two_pi).margin(1e-12));

  // a nearby seed librates without escaping
  PhasePoint seed{theta_star + 0.05, 0.01};
  const PhasePoint center = epsmaps::reduce(fp);
  double worst = 0.0;
  for (std::int64_t t = 0; t < 10000; ++t) {
    seed = epsmaps::step(seed, t, spec, false);
    worst = std::max(worst, torus_dist(seed, center));
  }
  REQUIRE(worst < 1.0);
}
