#pragma once
// QAM detection: local maxima outside the bulk, nearest-neighbour track
// linking across kicks, least-squares acceleration fits, and matching of
// fitted slopes against stable-orbit predictions.  run_pipeline ties the
// quantum scan, the tracker, and the orbit catalog together per tau column.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qamlab/orbits.hpp"
#include "qamlab/scan.hpp"

namespace qamlab::detect {

struct TrackerOptions {
  double mass_threshold = 0.002;  // probability mass inside the centroid window
  double gate = 1.5;              // max distance between track line and a peak
  double min_coverage = 0.6;      // fraction of kicks covered, birth to scan end
  double centroid_halfwidth = 2.0;
  double min_separation = 2.0;    // closer maxima collapse onto the heavier one
  double v_max = 5.0;             // fastest drift considered, ladder units/kick
  int min_baseline = 30;          // kick separation of hypothesis anchor pairs
  int hough_top = 200;            // voted lines scored exactly per extraction
  int min_points = 20;            // absolute floor under the coverage fraction
  int discard_first = 10;         // transient kicks excluded from the fit
  double min_displacement = 0.5;  // net centroid motion; vetoes static outliers
};

struct TrackPoint {
  int kick = 0;  // 1-based, distribution after this many kicks
  double centroid = 0.0;
  double mass = 0.0;
};

struct Track {
  std::vector<TrackPoint> points;
};

struct BulkWindow {
  double lo = 0.0;
  double hi = 0.0;
};

// interval holding `coverage` of the control distribution, trimmed evenly
// from both tails, then dilated
inline BulkWindow bulk_from_control(const std::vector<double>& control,
                                    const std::vector<double>& centers,
                                    double coverage = 0.9, double dilate = 2.0) {
  if (control.empty() || control.size() != centers.size())
    throw std::invalid_argument("bulk_from_control: bad histogram");
  double total = 0.0;
  for (double h : control) total += h;
  if (total <= 0.0) throw std::invalid_argument("bulk_from_control: empty control");
  const double tail = (1.0 - coverage) / 2.0 * total;
  std::size_t lo = 0, hi = control.size() - 1;
  double acc = 0.0;
  while (lo < hi && acc + control[lo] <= tail) acc += control[lo++];
  acc = 0.0;
  while (hi > lo && acc + control[hi] <= tail) acc += control[hi--];
  return {centers[lo] - 0.5 - dilate, centers[hi] + 0.5 + dilate};
}

namespace detail {

struct Candidate {
  double centroid = 0.0;
  double mass = 0.0;
};

inline std::vector<Candidate> peaks_in_row(const std::vector<double>& row,
                                           const std::vector<double>& centers,
                                           const BulkWindow& bulk,
                                           const TrackerOptions& opt) {
  std::vector<Candidate> raw;
  for (std::size_t i = 1; i + 1 < row.size(); ++i) {
    if (centers[i] >= bulk.lo && centers[i] <= bulk.hi) continue;
    if (!(row[i] > row[i - 1] && row[i] >= row[i + 1])) continue;
    double mass = 0.0, weighted = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (std::abs(centers[j] - centers[i]) > opt.centroid_halfwidth) continue;
      mass += row[j];
      weighted += row[j] * centers[j];
    }
    if (mass < opt.mass_threshold) continue;
    raw.push_back({weighted / mass, mass});
  }
  // maxima with overlapping centroid windows describe one structure; keep the
  // heaviest representative of each cluster
  std::sort(raw.begin(), raw.end(), [](const Candidate& a, const Candidate& b) {
    if (a.mass != b.mass) return a.mass > b.mass;
    return a.centroid < b.centroid;
  });
  std::vector<Candidate> out;
  for (const Candidate& c : raw) {
    bool shadowed = false;
    for (const Candidate& kept : out)
      if (std::abs(c.centroid - kept.centroid) < opt.min_separation) {
        shadowed = true;
        break;
      }
    if (!shadowed) out.push_back(c);
  }
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    return a.centroid < b.centroid;
  });
  return out;
}

}  // namespace detail

// A mode drifts at constant velocity, so a track is a straight line through
// the (kick, centroid) cloud of per-kick maxima.  A decaying mode also
// strands stalled remnants behind its front, and that debris field supports
// spurious lines of every intermediate slope.  The real structures ride the
// outer envelope, so candidate lines are proposed by Hough voting over
// anchor pairs drawn from the outermost few maxima per kick and side, then
// settled onto their own inliers by repeated least squares, scored by how
// many kicks contribute a peak within the gate, and accepted strongest
// first; a weaker line whose corridor shadows an accepted one is the same
// structure seen twice and is dropped.  Accepted lines may share maxima.
inline std::vector<Track> track_peaks(const std::vector<std::vector<double>>& history,
                                      const std::vector<double>& centers,
                                      const BulkWindow& bulk,
                                      const TrackerOptions& opt = {}) {
  if (history.size() < 20) throw std::invalid_argument("track_peaks: need >= 20 kicks");
  const int n_kicks = static_cast<int>(history.size());

  std::vector<std::vector<detail::Candidate>> rows(history.size());
  for (std::size_t t = 0; t < history.size(); ++t)
    rows[t] = detail::peaks_in_row(history[t], centers, bulk, opt);

  // per row and side, the outermost candidates seed line hypotheses
  struct Anchor {
    int row = 0;
    double centroid = 0.0;
    int side = 0;
  };
  std::vector<std::vector<Anchor>> anchors(rows.size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    std::vector<Anchor> neg, pos;
    for (const auto& c : rows[t]) {
      if (c.centroid < bulk.lo) neg.push_back({static_cast<int>(t), c.centroid, -1});
      else pos.push_back({static_cast<int>(t), c.centroid, +1});
    }
    std::sort(neg.begin(), neg.end(),
              [](const Anchor& a, const Anchor& b) { return a.centroid < b.centroid; });
    std::sort(pos.begin(), pos.end(),
              [](const Anchor& a, const Anchor& b) { return a.centroid > b.centroid; });
    if (neg.size() > 3) neg.resize(3);
    if (pos.size() > 3) pos.resize(3);
    anchors[t] = std::move(neg);
    anchors[t].insert(anchors[t].end(), pos.begin(), pos.end());
  }

  // centroid = b + v * (kick - k_mid), quantized onto Hough cells
  const double k_mid = 0.5 * static_cast<double>(1 + n_kicks);
  const int baseline = std::min(opt.min_baseline, n_kicks / 2);
  struct Hyp {
    double v = 0.0, b = 0.0;
  };

  // nearest candidate of row t to position c, within the gate
  auto nearest = [&](std::size_t t, double c) -> int {
    int best = -1;
    double best_d = opt.gate;
    for (std::size_t i = 0; i < rows[t].size(); ++i) {
      const double d = std::abs(rows[t][i].centroid - c);
      if (d <= best_d && (best < 0 || d < best_d)) {
        best = static_cast<int>(i);
        best_d = d;
      }
    }
    return best;
  };

  std::map<std::pair<long, long>, std::pair<int, Hyp>> cells;
  for (std::size_t t1 = 0; t1 + static_cast<std::size_t>(baseline) < rows.size(); ++t1)
    for (const Anchor& a1 : anchors[t1])
      for (std::size_t t2 = t1 + static_cast<std::size_t>(baseline); t2 < rows.size();
           ++t2)
        for (const Anchor& a2 : anchors[t2]) {
          if (a2.side != a1.side) continue;
          const double v = (a2.centroid - a1.centroid) / static_cast<double>(t2 - t1);
          if (std::abs(v) > opt.v_max) continue;
          const double b = a1.centroid + v * (k_mid - static_cast<double>(t1 + 1));
          const std::pair<long, long> key{
              static_cast<long>(std::floor(v / 0.05)),
              static_cast<long>(std::floor(b))};
          auto [it, fresh] = cells.try_emplace(key, 0, Hyp{v, b});
          ++it->second.first;
        }

  std::vector<std::pair<std::pair<long, long>, std::pair<int, Hyp>>> ranked(
      cells.begin(), cells.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second.first != b.second.first) return a.second.first > b.second.first;
    return a.first < b.first;
  });
  if (ranked.size() > static_cast<std::size_t>(opt.hough_top))
    ranked.resize(static_cast<std::size_t>(opt.hough_top));

  auto count_inliers = [&](const Hyp& h) {
    std::size_t count = 0;
    for (std::size_t t = 0; t < rows.size(); ++t)
      if (nearest(t, h.b + h.v * (static_cast<double>(t + 1) - k_mid)) >= 0) ++count;
    return count;
  };
  // a two-point exemplar line is noisy; settle it onto its own inliers
  // before comparing hypotheses
  auto refine = [&](Hyp h) {
    for (int iter = 0; iter < 3; ++iter) {
      double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0, n = 0.0;
      for (std::size_t t = 0; t < rows.size(); ++t) {
        const int hit = nearest(t, h.b + h.v * (static_cast<double>(t + 1) - k_mid));
        if (hit < 0) continue;
        const double x = static_cast<double>(t + 1) - k_mid;
        const double y = rows[t][static_cast<std::size_t>(hit)].centroid;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        n += 1.0;
      }
      const double det = n * sxx - sx * sx;
      if (det <= 0.0) break;
      h.v = (n * sxy - sx * sy) / det;
      h.b = (sy - h.v * sx) / n;
    }
    return h;
  };

  const std::size_t floor_pts = static_cast<std::size_t>(std::max(opt.min_points, 2));
  std::vector<std::pair<std::size_t, Hyp>> scored;
  for (const auto& cell : ranked) {
    const Hyp h = refine(cell.second.second);
    const std::size_t count = count_inliers(h);
    if (count >= floor_pts) scored.push_back({count, h});
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    if (a.second.v != b.second.v) return a.second.v < b.second.v;
    return a.second.b < b.second.b;
  });

  std::vector<Hyp> accepted;
  for (const auto& [count, h] : scored) {
    bool shadowed = false;
    for (const Hyp& kept : accepted) {
      int close = 0;
      for (int t = 1; t <= n_kicks; ++t) {
        const double x = static_cast<double>(t) - k_mid;
        if (std::abs((h.b + h.v * x) - (kept.b + kept.v * x)) < opt.min_separation)
          ++close;
      }
      if (static_cast<double>(close) > 0.6 * static_cast<double>(n_kicks)) {
        shadowed = true;
        break;
      }
    }
    if (shadowed) continue;
    accepted.push_back(h);
    if (accepted.size() >= 24) break;
  }

  std::vector<Track> out;
  for (const Hyp& h : accepted) {
    Track tr;
    for (std::size_t t = 0; t < rows.size(); ++t) {
      const int hit = nearest(t, h.b + h.v * (static_cast<double>(t + 1) - k_mid));
      if (hit >= 0)
        tr.points.push_back({static_cast<int>(t) + 1,
                             rows[t][static_cast<std::size_t>(hit)].centroid,
                             rows[t][static_cast<std::size_t>(hit)].mass});
    }
    if (tr.points.size() < floor_pts) continue;
    // a persistent mode keeps reporting until the scan ends; judge coverage
    // over the kicks available to the track since its birth
    const double avail = static_cast<double>(n_kicks) -
                         static_cast<double>(tr.points.front().kick) + 1.0;
    if (static_cast<double>(tr.points.size()) < opt.min_coverage * avail) continue;
    // trimming the bulk to 90% strands a few control members outside it;
    // they sit still, while a genuine mode runs away from the bulk
    const double moved = std::abs(tr.points.back().centroid - tr.points.front().centroid);
    if (moved < opt.min_displacement) continue;
    out.push_back(std::move(tr));
  }

  std::sort(out.begin(), out.end(), [](const Track& a, const Track& b) {
    if (a.points.front().kick != b.points.front().kick)
      return a.points.front().kick < b.points.front().kick;
    return a.points.front().centroid < b.points.front().centroid;
  });
  return out;
}

struct FitResult {
  double a = 0.0;
  double r2 = 0.0;
};

// least-squares slope of centroid vs kick, transient kicks dropped
inline FitResult fit_acceleration(const Track& track, int discard_first = 10) {
  std::vector<const TrackPoint*> pts;
  for (const TrackPoint& p : track.points)
    if (p.kick > discard_first) pts.push_back(&p);
  if (pts.size() < 2) return {0.0, 0.0};
  double sx = 0.0, sy = 0.0;
  for (const auto* p : pts) {
    sx += static_cast<double>(p->kick);
    sy += p->centroid;
  }
  const double n = static_cast<double>(pts.size());
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto* p : pts) {
    const double dx = static_cast<double>(p->kick) - mx;
    const double dy = p->centroid - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) return {0.0, 0.0};
  const double a = sxy / sxx;
  if (syy <= 0.0) return {a, 0.0};
  const double ss_res = syy - sxy * sxy / sxx;
  return {a, 1.0 - ss_res / syy};
}

struct CatalogEntry {
  int p_res = 1;  // resonance rational p/q the detuning refers to
  int q_res = 1;
  double epsilon = 0.0;
  orbits::PeriodicOrbit orbit;
  orbits::AccelerationPrediction pred;
};

struct MatchedOrbit {
  int q = 1, p = 1;  // resonance rational
  int j = 0, pp = 1;  // jumping index and orbit period
  double a_predicted = 0.0;
  double relative_error = 0.0;
};

struct QamDetection {
  double tau = 0.0;
  double fitted_a = 0.0;
  double fit_r2 = 0.0;
  double peak_mass = 0.0;
  Track track;
  std::optional<MatchedOrbit> match;
};

// pair tracks with stable catalog orbits one to one, smallest floored
// relative error first and ties toward the smaller detuning; a predicted
// mode shows up as one streak, so a second track near the same prediction
// stays unmatched
inline void match_predictions(std::vector<QamDetection>& detections,
                              const std::vector<CatalogEntry>& catalog,
                              double tol = 0.15, double a_floor = 0.05) {
  for (QamDetection& det : detections) det.match.reset();
  struct Pair {
    double err = 0.0;
    std::size_t det = 0, entry = 0;
  };
  std::vector<Pair> pairs;
  for (std::size_t d = 0; d < detections.size(); ++d)
    for (std::size_t e = 0; e < catalog.size(); ++e) {
      if (!catalog[e].orbit.stable) continue;
      const double denom = std::max(std::abs(catalog[e].pred.a), a_floor);
      const double err = std::abs(detections[d].fitted_a - catalog[e].pred.a) / denom;
      if (err < tol) pairs.push_back({err, d, e});
    }
  std::sort(pairs.begin(), pairs.end(), [&](const Pair& a, const Pair& b) {
    if (a.err != b.err) return a.err < b.err;
    const double ea = std::abs(catalog[a.entry].epsilon);
    const double eb = std::abs(catalog[b.entry].epsilon);
    if (ea != eb) return ea < eb;
    if (a.det != b.det) return a.det < b.det;
    return a.entry < b.entry;
  });
  std::vector<char> det_used(detections.size(), 0), entry_used(catalog.size(), 0);
  for (const Pair& p : pairs) {
    if (det_used[p.det] || entry_used[p.entry]) continue;
    det_used[p.det] = 1;
    entry_used[p.entry] = 1;
    const CatalogEntry& entry = catalog[p.entry];
    detections[p.det].match = MatchedOrbit{entry.q_res, entry.p_res, entry.orbit.jump_j,
                                           entry.orbit.period_p, entry.pred.a, p.err};
  }
}

struct PipelineConfig {
  quantum::ScanConfig scan;  // history recording is forced on
  int p_res = 1;
  int q_res = 2;
  std::vector<std::vector<int>> families;  // d-lists over q_res
  std::vector<int> p_list = {1};
  std::vector<int> j_list;  // explicit jumps; empty = centred automatically
  int j_span = 1;
  TrackerOptions tracker;
  double match_tol = 0.15;
  double a_floor = 0.05;
  orbits::NewtonOptions newton{.grid_n = 48};
  double min_abs_epsilon = 1e-12;
};

struct ColumnAnalysis {
  double tau = 0.0;
  double epsilon = 0.0;
  std::vector<CatalogEntry> catalog;
  std::vector<QamDetection> detections;
};

struct PipelineResult {
  quantum::MomentumScan scan;
  quantum::MomentumScan control;
  BulkWindow bulk;
  std::vector<ColumnAnalysis> columns;
};

inline std::vector<CatalogEntry> build_catalog(double tau, double eta, double k,
                                               const PipelineConfig& cfg) {
  std::vector<CatalogEntry> catalog;
  const double tau_res = epsmaps::two_pi * static_cast<double>(cfg.p_res) /
                         static_cast<double>(cfg.q_res);
  const double epsilon = tau - tau_res;
  if (std::abs(epsilon) < cfg.min_abs_epsilon) return catalog;
  const double k_tilde = k * epsilon;
  const double drift = tau * eta;

  for (const auto& d : cfg.families) {
    epsmaps::TorusMapSpec spec{k_tilde, drift, epsmaps::make_delta(cfg.q_res, d)};
    const int T = spec.deltas.period();
    for (int p : cfg.p_list) {
      std::vector<int> js = cfg.j_list;
      if (js.empty()) {
        const int centre = static_cast<int>(std::llround(
            static_cast<double>(p) * static_cast<double>(T) *
            (spec.deltas.Delta_T() + drift) / epsmaps::two_pi));
        for (int j = centre - cfg.j_span; j <= centre + cfg.j_span; ++j) js.push_back(j);
      }
      for (int j : js) {
        for (auto& orb : orbits::find_periodic_orbits(spec, p, j, cfg.newton)) {
          bool dup = false;
          for (const CatalogEntry& kept : catalog) {
            if (kept.orbit.period_p != orb.period_p || kept.orbit.jump_j != orb.jump_j ||
                kept.orbit.spec.deltas.d != orb.spec.deltas.d)
              continue;
            for (std::size_t shift = 0; shift < kept.orbit.points.size() && !dup; ++shift) {
              double worst = 0.0;
              for (std::size_t i = 0; i < orb.points.size(); ++i)
                worst = std::max(
                    worst, orbits::detail::torus_dist(
                               orb.points[i],
                               kept.orbit.points[(i + shift) % kept.orbit.points.size()]));
              dup = worst < cfg.newton.dedup_tol;
            }
            if (dup) break;
          }
          if (dup) continue;
          CatalogEntry entry;
          entry.p_res = cfg.p_res;
          entry.q_res = cfg.q_res;
          entry.epsilon = epsilon;
          entry.pred = orbits::predict_acceleration(orb, epsilon);
          entry.orbit = std::move(orb);
          catalog.push_back(std::move(entry));
        }
      }
    }
  }
  return catalog;
}

inline PipelineResult run_pipeline(PipelineConfig cfg) {
  cfg.scan.record_history = true;
  PipelineResult res;
  res.scan = quantum::scan_tau(cfg.scan);

  quantum::ScanConfig control_cfg = cfg.scan;
  control_cfg.k = 0.0;
  control_cfg.record_history = false;
  control_cfg.tau_grid = {cfg.scan.tau_grid.front()};
  res.control = quantum::scan_tau(control_cfg);
  res.bulk = bulk_from_control(res.control.final_prob.at(0), res.control.bin_centers);

  const std::size_t n_cols = cfg.scan.tau_grid.size();
  res.columns.resize(n_cols);
  parallel_for(n_cols, cfg.scan.threads, [&](std::size_t c) {
    ColumnAnalysis& col = res.columns[c];
    col.tau = cfg.scan.tau_grid[c];
    const double eta = cfg.scan.eta_ratio ? *cfg.scan.eta_ratio * col.tau : cfg.scan.eta;
    col.epsilon = col.tau - epsmaps::two_pi * static_cast<double>(cfg.p_res) /
                                static_cast<double>(cfg.q_res);
    col.catalog = build_catalog(col.tau, eta, cfg.scan.k, cfg);

    const auto tracks = track_peaks(res.scan.history[c], res.scan.bin_centers, res.bulk,
                                    cfg.tracker);
    for (const Track& tr : tracks) {
      QamDetection det;
      det.tau = col.tau;
      const FitResult fit = fit_acceleration(tr, cfg.tracker.discard_first);
      det.fitted_a = fit.a;
      det.fit_r2 = fit.r2;
      double mass = 0.0;
      for (const TrackPoint& p : tr.points) mass += p.mass;
      det.peak_mass = mass / static_cast<double>(tr.points.size());
      det.track = tr;
      col.detections.push_back(std::move(det));
    }
    match_predictions(col.detections, col.catalog, cfg.match_tol, cfg.a_floor);
  });
  return res;
}

}  // namespace qamlab::detect
