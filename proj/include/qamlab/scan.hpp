#pragma once
// Ensemble tau-scans: evolve plane waves drawn from a Gaussian momentum
// distribution and histogram |psi|^2 on the ladder m + beta after each kick.
// One ensemble is drawn per scan and reused for every tau column, and all
// accumulation runs in a fixed order, so a seed pins the output bytes.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qamlab/parallel.hpp"
#include "qamlab/quantum.hpp"
#include "qamlab/rng.hpp"

namespace qamlab::quantum {

struct BinGrid {
  double lo = -160.0;  // left edge of the first unit-width bin
  int nbins = 300;

  int index(double p) const {
    const int i = static_cast<int>(std::floor(p - lo));
    return i < 0 ? 0 : (i >= nbins ? nbins - 1 : i);
  }
  double center(int i) const { return lo + static_cast<double>(i) + 0.5; }
};

struct ScanConfig {
  double k = 0.0;
  double eta = 0.0;                  // absolute gravity parameter
  std::optional<double> eta_ratio;   // when set, eta = ratio * tau per column
  std::vector<double> tau_grid;
  int n_kicks = 100;
  int ensemble = 100;
  double p0_mean = 0.0;
  double p0_sigma = 2.5;
  std::optional<std::uint64_t> seed;  // mandatory, no silent default
  BinGrid bins;
  unsigned threads = 1;
  bool record_history = false;        // keep every kick, not just the last
  double trunc_tol = default_trunc_tol;
};

struct MomentumScan {
  ScanConfig config;
  std::vector<double> bin_centers;
  std::vector<double> p0;                                 // drawn ensemble
  std::vector<std::vector<double>> final_prob;            // [tau][bin]
  std::vector<std::vector<std::vector<double>>> history;  // [tau][kick][bin]
};

inline MomentumScan scan_tau(const ScanConfig& cfg) {
  if (!cfg.seed) throw std::invalid_argument("scan_tau: RNG seed is required");
  if (cfg.n_kicks < 0 || cfg.ensemble < 1 || cfg.tau_grid.empty())
    throw std::invalid_argument("scan_tau: bad grid or ensemble");
  for (double tau : cfg.tau_grid)
    if (!std::isfinite(tau)) throw std::invalid_argument("scan_tau: non-finite tau");
  if (!std::isfinite(cfg.k) || !std::isfinite(cfg.eta) || !std::isfinite(cfg.p0_sigma))
    throw std::invalid_argument("scan_tau: non-finite parameter");

  MomentumScan scan;
  scan.config = cfg;
  scan.bin_centers.resize(static_cast<std::size_t>(cfg.bins.nbins));
  for (int i = 0; i < cfg.bins.nbins; ++i)
    scan.bin_centers[static_cast<std::size_t>(i)] = cfg.bins.center(i);

  Rng rng(*cfg.seed);
  scan.p0.resize(static_cast<std::size_t>(cfg.ensemble));
  for (double& p : scan.p0) p = rng.normal(cfg.p0_mean, cfg.p0_sigma);

  const std::size_t n_cols = cfg.tau_grid.size();
  scan.final_prob.assign(n_cols, {});
  if (cfg.record_history) scan.history.assign(n_cols, {});

  parallel_for(n_cols, cfg.threads, [&](std::size_t c) {
    const double tau = cfg.tau_grid[c];
    const double eta = cfg.eta_ratio ? *cfg.eta_ratio * tau : cfg.eta;
    const int rows = cfg.record_history ? cfg.n_kicks : 1;
    std::vector<std::vector<double>> hist(
        static_cast<std::size_t>(rows),
        std::vector<double>(static_cast<std::size_t>(cfg.bins.nbins), 0.0));
    const double weight = 1.0 / static_cast<double>(cfg.ensemble);

    for (int e = 0; e < cfg.ensemble; ++e) {
      const double p0 = scan.p0[static_cast<std::size_t>(e)];
      const std::int64_t m0 = static_cast<std::int64_t>(std::floor(p0));
      const double beta = p0 - static_cast<double>(m0);
      RotorState st = make_plane_wave(m0, beta, cfg.k);
      KickSchedule sched{cfg.k, tau, eta, beta};

      auto deposit = [&](std::vector<double>& row, const RotorState& s) {
        for (std::int64_t m = s.m_min; m <= s.m_max; ++m) {
          const double pr = std::norm(s.at(m));
          if (pr == 0.0) continue;
          row[static_cast<std::size_t>(cfg.bins.index(static_cast<double>(m) + s.beta))] +=
              weight * pr;
        }
      };

      if (cfg.n_kicks == 0) {
        deposit(hist[0], st);
      } else {
        evolve(st, sched, cfg.n_kicks,
               [&](int n, const RotorState& s) {
                 if (cfg.record_history) deposit(hist[static_cast<std::size_t>(n)], s);
                 else if (n == cfg.n_kicks - 1) deposit(hist[0], s);
               },
               cfg.trunc_tol);
      }
    }

    scan.final_prob[c] = hist.back();
    if (cfg.record_history) scan.history[c] = std::move(hist);
  });
  return scan;
}

}  // namespace qamlab::quantum
