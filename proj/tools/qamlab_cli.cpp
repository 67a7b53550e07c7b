// qamlab command line tool.  Thin front-end over the library: resonance
// inspection, momentum scans, phase portraits, orbit catalogs, acceleration
// predictions, QAM detection, and ray stability diagnostics.  Every CSV
// starts with "# key=value" comment lines echoing the tool version and the
// full run configuration, so outputs are reproducible byte for byte.

#include <algorithm>
#include <cinttypes>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "qamlab/qamlab.hpp"

namespace {

using namespace qamlab;

struct Echo {
  std::vector<std::pair<std::string, std::string>> kv;

  void add(const std::string& key, const std::string& value) { kv.push_back({key, value}); }
  void add(const std::string& key, const char* value) { kv.push_back({key, value}); }
  void add(const std::string& key, double value) { add(key, format_g17(value)); }
  void add(const std::string& key, int value) { add(key, std::to_string(value)); }
  void add(const std::string& key, unsigned value) { add(key, std::to_string(value)); }
  void add(const std::string& key, std::uint64_t value) { add(key, std::to_string(value)); }
  void add(const std::string& key, bool value) { add(key, value ? "true" : "false"); }

  void write(CsvWriter& w, const char* subcommand) const {
    w.comment("version", version_string);
    w.comment("subcommand", subcommand);
    for (const auto& [key, value] : kv) w.comment(key, value);
  }
};

std::string join(const std::vector<int>& xs, char sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out.push_back(sep);
    out += std::to_string(xs[i]);
  }
  return out;
}

std::string join(const std::vector<double>& xs, char sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out.push_back(sep);
    out += format_g17(xs[i]);
  }
  return out;
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    int value = 0;
    try {
      value = std::stoi(item, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad integer list entry '" + item + "'");
    }
    if (used != item.size())
      throw std::invalid_argument("bad integer list entry '" + item + "'");
    out.push_back(value);
  }
  if (out.empty()) throw std::invalid_argument("empty integer list");
  return out;
}

void finish(CsvWriter& w, const std::string& path) {
  if (!w.good()) throw std::runtime_error("write failed for " + path);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

// flat "key = value" lines, '#' comments; keys may use '_' or '-'
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (first && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    first = false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line without '=': " + text);
    std::string key = trim(text.substr(0, eq));
    std::string value = trim(text.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config line without a key: " + text);
    for (char& c : key)
      if (c == '_') c = '-';
    if (value.size() >= 2 && ((value.front() == '"' && value.back() == '"') ||
                              (value.front() == '\'' && value.back() == '\'')))
      value = value.substr(1, value.size() - 2);
    out.push_back({key, value});
  }
  return out;
}

// pull --config out of the token stream and splice the file's entries in as
// ordinary flags, skipping any key the command line already sets
std::vector<std::string> merge_config(std::vector<std::string> tokens) {
  std::string config_path;
  std::vector<std::string> out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] == "--config") {
      if (i + 1 >= tokens.size()) throw std::invalid_argument("--config needs a file path");
      config_path = tokens[++i];
    } else if (tokens[i].rfind("--config=", 0) == 0) {
      config_path = tokens[i].substr(9);
    } else {
      out.push_back(tokens[i]);
    }
  }
  if (config_path.empty()) return out;
  for (const auto& [key, value] : read_config_file(config_path)) {
    const std::string flag = "--" + key;
    bool overridden = false;
    for (const std::string& t : out)
      if (t == flag || t.rfind(flag + "=", 0) == 0 ||
          (key == "output" && (t == "-o" || t.rfind("-o=", 0) == 0))) {
        overridden = true;
        break;
      }
    if (!overridden) out.push_back(flag + "=" + value);
  }
  return out;
}

void add_config_option(CLI::App* cmd) {
  static std::string sink;
  cmd->add_option("--config", sink, "flat key = value file; command-line flags win");
}

// gravity flags; eta = ratio * tau is recomputed per tau-grid point
struct EtaArgs {
  double eta = 0.0;
  double eta_ratio = 0.0;
  CLI::Option* abs_opt = nullptr;
  CLI::Option* ratio_opt = nullptr;

  void attach(CLI::App* cmd) {
    abs_opt = cmd->add_option("--eta", eta, "gravity parameter, absolute");
    ratio_opt =
        cmd->add_option("--eta-ratio", eta_ratio, "gravity as a ratio, eta = ratio * tau");
    abs_opt->excludes(ratio_opt);
  }

  bool has_ratio() const { return ratio_opt && ratio_opt->count() > 0; }
  bool has_eta() const { return abs_opt && abs_opt->count() > 0; }

  void require() const {
    if (!has_eta() && !has_ratio())
      throw std::invalid_argument("need --eta or --eta-ratio");
  }

  double at(double tau) const { return has_ratio() ? eta_ratio * tau : eta; }

  void echo(Echo& e) const {
    if (has_ratio()) e.add("eta_ratio", eta_ratio);
    else e.add("eta", eta);
  }
};

// tau grid: either an explicit list of tau/2pi values or an inclusive
// lo/hi/n linspace
struct TauGridArgs {
  std::vector<double> explicit_x;
  double lo = 0.0, hi = 0.0;
  int n = 0;

  void attach(CLI::App* cmd) {
    auto* list_opt = cmd->add_option("--tau-over-2pi", explicit_x, "explicit tau/2pi values");
    auto* lo_opt = cmd->add_option("--tau-lo", lo, "first tau/2pi of a linear grid");
    auto* hi_opt = cmd->add_option("--tau-hi", hi, "last tau/2pi of a linear grid");
    auto* n_opt = cmd->add_option("--tau-n", n, "number of grid points");
    for (auto* o : {lo_opt, hi_opt, n_opt}) list_opt->excludes(o);
  }

  std::vector<double> grid() const {
    if (!explicit_x.empty()) {
      std::vector<double> tau;
      for (double x : explicit_x) tau.push_back(epsmaps::two_pi * x);
      return tau;
    }
    if (n < 1) throw std::invalid_argument("need --tau-over-2pi or --tau-lo/--tau-hi/--tau-n");
    if (n == 1) return {epsmaps::two_pi * lo};
    std::vector<double> tau;
    for (int i = 0; i < n; ++i)
      tau.push_back(epsmaps::two_pi *
                    (lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1)));
    return tau;
  }

  void echo(Echo& e) const {
    if (!explicit_x.empty()) {
      e.add("tau_over_2pi", join(explicit_x, ';'));
    } else {
      e.add("tau_lo", lo);
      e.add("tau_hi", hi);
      e.add("tau_n", n);
    }
  }
};

struct ScanArgs {
  double k = 0.0;
  EtaArgs eta;
  TauGridArgs taus;
  int n_kicks = 100;
  int ensemble = 100;
  double p0_mean = 0.0;
  double p0_sigma = 2.5;
  std::uint64_t seed = 0;
  double bins_lo = -160.0;
  int bins_n = 300;
  unsigned threads = 1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--k", k, "kick strength")->required();
    eta.attach(cmd);
    taus.attach(cmd);
    cmd->add_option("--n-kicks", n_kicks, "kicks per column");
    cmd->add_option("--ensemble", ensemble, "plane waves per column");
    cmd->add_option("--p0-mean", p0_mean, "initial momentum mean");
    cmd->add_option("--p0-sigma", p0_sigma, "initial momentum spread");
    cmd->add_option("--seed", seed, "RNG seed for the ensemble draw")->required();
    cmd->add_option("--bins-lo", bins_lo, "left edge of the momentum grid");
    cmd->add_option("--bins-n", bins_n, "number of unit-width bins");
    cmd->add_option("--threads", threads, "worker pool size");
  }

  quantum::ScanConfig config(bool history) const {
    eta.require();
    quantum::ScanConfig cfg;
    cfg.k = k;
    if (eta.has_ratio()) cfg.eta_ratio = eta.eta_ratio;
    else cfg.eta = eta.eta;
    cfg.tau_grid = taus.grid();
    cfg.n_kicks = n_kicks;
    cfg.ensemble = ensemble;
    cfg.p0_mean = p0_mean;
    cfg.p0_sigma = p0_sigma;
    cfg.seed = seed;
    cfg.bins.lo = bins_lo;
    cfg.bins.nbins = bins_n;
    cfg.threads = threads;
    cfg.record_history = history;
    return cfg;
  }

  void echo(Echo& e) const {
    e.add("k", k);
    eta.echo(e);
    taus.echo(e);
    e.add("n_kicks", n_kicks);
    e.add("ensemble", ensemble);
    e.add("p0_mean", p0_mean);
    e.add("p0_sigma", p0_sigma);
    e.add("seed", seed);
    e.add("bins_lo", bins_lo);
    e.add("bins_n", bins_n);
    e.add("threads", threads);
  }
};

// resonance rational plus the delta-sequence families and (p, j) ranges that
// define an orbit catalog at one tau
struct CatalogArgs {
  int p_res = 1;
  int q_res = 2;
  std::vector<std::string> family_text;
  std::vector<int> p_list{1};
  std::vector<int> j_list;
  int j_span = 1;
  int enumerate_T = 0;
  int c_lo = 0;
  int c_hi = 0;
  int grid_n = 64;
  unsigned threads = 1;

  void attach(CLI::App* cmd, bool with_threads) {
    cmd->add_option("--p-res", p_res, "resonance numerator");
    cmd->add_option("--q-res", q_res, "resonance denominator");
    auto* fam = cmd->add_option("--family", family_text,
                                "delta family, comma-separated d entries (repeatable)");
    cmd->add_option("--p", p_list, "orbit periods to search");
    cmd->add_option("--j", j_list, "jump indices to search");
    cmd->add_option("--j-span", j_span, "half-width of the automatic jump window");
    auto* enum_opt = cmd->add_option("--enumerate-T", enumerate_T,
                                     "sweep all delta families of this period");
    cmd->add_option("--c-lo", c_lo, "lowest per-period winding in the sweep");
    cmd->add_option("--c-hi", c_hi, "highest per-period winding in the sweep");
    enum_opt->excludes(fam);
    cmd->add_option("--grid-n", grid_n, "Newton seed grid per axis");
    if (with_threads) cmd->add_option("--threads", threads, "worker pool size");
  }

  std::vector<std::vector<int>> families() const {
    if (enumerate_T > 0) {
      std::vector<std::vector<int>> out;
      for (const auto& seq : epsmaps::enumerate_delta_sequences(q_res, enumerate_T, c_lo, c_hi))
        out.push_back(seq.d);
      return out;
    }
    if (family_text.empty()) return {{0}};
    std::vector<std::vector<int>> out;
    for (const auto& text : family_text) out.push_back(parse_int_list(text));
    return out;
  }

  detect::PipelineConfig pipeline() const {
    detect::PipelineConfig cfg;
    cfg.p_res = p_res;
    cfg.q_res = q_res;
    cfg.families = families();
    cfg.p_list = p_list;
    cfg.j_list = j_list;
    cfg.j_span = j_span;
    cfg.newton.grid_n = grid_n;
    cfg.newton.threads = threads;
    return cfg;
  }

  void echo(Echo& e) const {
    e.add("p_res", p_res);
    e.add("q_res", q_res);
    if (enumerate_T > 0) {
      e.add("enumerate_T", enumerate_T);
      e.add("c_lo", c_lo);
      e.add("c_hi", c_hi);
    } else {
      std::string fams;
      for (const auto& d : families()) {
        if (!fams.empty()) fams.push_back('|');
        fams += join(d, ';');
      }
      e.add("family", fams);
    }
    e.add("p", join(p_list, ';'));
    if (!j_list.empty()) e.add("j", join(j_list, ';'));
    else e.add("j_span", j_span);
    e.add("grid_n", grid_n);
  }
};

void write_catalog_csv(const std::string& path, const Echo& echo, const char* subcommand,
                       const std::vector<detect::CatalogEntry>& catalog) {
  CsvWriter w(path);
  echo.write(w, subcommand);
  w.header({"q", "T", "d_list", "k_tilde", "drift", "p", "j", "theta0", "J0", "trace",
            "residue", "stable", "a_predicted", "epsilon"});
  for (const auto& entry : catalog) {
    const auto& orb = entry.orbit;
    w.row() << entry.q_res << orb.spec.deltas.period() << join(orb.spec.deltas.d, ';')
            << orb.spec.k_tilde << orb.spec.drift << orb.period_p << orb.jump_j
            << orb.points.at(0).theta << orb.points.at(0).J << orb.trace << orb.residue
            << (orb.stable ? 1 : 0) << entry.pred.a << entry.epsilon;
  }
  finish(w, path);
}

// ---- resonance ------------------------------------------------------------

struct ResonanceArgs {
  int p = 0;
  int q = 0;
  double tau_x = 0.0;
  CLI::Option* tau_opt = nullptr;
  int q_max = 13;
  std::string output;
};

int run_resonance(const ResonanceArgs& a) {
  Echo echo;
  if (a.tau_opt->count() > 0) {
    echo.add("tau_over_2pi", a.tau_x);
    echo.add("q_max", a.q_max);
    const double tau = epsmaps::two_pi * a.tau_x;
    const auto near = resonance::nearest_resonances(tau, a.q_max);
    for (const auto& [spec, epsilon] : near)
      std::printf("resonance %d/%d  tau_res=%.6f  epsilon=%+.6f\n", spec.p, spec.q,
                  spec.tau_res, epsilon);
    if (near.empty()) std::printf("no resonance with q <= %d in the window\n", a.q_max);
    if (!a.output.empty()) {
      CsvWriter w(a.output);
      echo.write(w, "resonance");
      w.header({"p", "q", "tau_res", "epsilon"});
      for (const auto& [spec, epsilon] : near)
        w.row() << spec.p << spec.q << spec.tau_res << epsilon;
      finish(w, a.output);
    }
    return 0;
  }

  if (a.p < 1 || a.q < 1) throw std::invalid_argument("need --p and --q, or --tau-over-2pi");
  echo.add("p", a.p);
  echo.add("q", a.q);
  const auto spec = resonance::make_spec(a.p, a.q);
  std::printf("resonance %d/%d  tau_res=%.6f  order=%d\n", spec.p, spec.q, spec.tau_res,
              spec.order);
  std::optional<CsvWriter> w;
  if (!a.output.empty()) {
    w.emplace(a.output);
    echo.write(*w, "resonance");
    w->header({"beta_r_num", "beta_r_den", "s", "re", "im", "modulus"});
  }
  for (const auto& beta : spec.beta_r_set) {
    std::printf("beta_r = %" PRId64 "/%" PRId64 "\n", beta.num, beta.den);
    const auto gauss = resonance::gauss_coefficients(a.p, a.q, beta);
    for (int s = 0; s < gauss.q; ++s) {
      const auto g = gauss.values[static_cast<std::size_t>(s)];
      std::printf("  G_%-3d  % .10f  % .10f  |G|=%.10f\n", s, g.real(), g.imag(),
                  std::abs(g));
      if (w) w->row() << beta.num << beta.den << s << g.real() << g.imag() << std::abs(g);
    }
  }
  if (w) finish(*w, a.output);
  return 0;
}

// ---- evolve ---------------------------------------------------------------

struct EvolveArgs {
  ScanArgs scan;
  std::string output;
  std::string heatmap;
  std::string history_out;
  double history_at = 0.0;
  CLI::Option* history_opt = nullptr;
  std::string overlay;
  int overlay_p_res = 1;
  int overlay_q_res = 2;
  std::vector<std::string> overlay_family;
};

int run_evolve(const EvolveArgs& a) {
  const bool has_history = a.history_opt->count() > 0;
  Echo echo;
  a.scan.echo(echo);

  const auto cfg = a.scan.config(has_history);
  const auto scan = quantum::scan_tau(cfg);

  {
    CsvWriter w(a.output);
    echo.write(w, "evolve");
    w.header({"tau_over_2pi", "momentum", "probability"});
    for (std::size_t c = 0; c < cfg.tau_grid.size(); ++c) {
      const double x = cfg.tau_grid[c] / epsmaps::two_pi;
      for (std::size_t i = 0; i < scan.bin_centers.size(); ++i)
        w.row() << x << scan.bin_centers[i] << scan.final_prob[c][i];
    }
    finish(w, a.output);
  }

  if (!a.heatmap.empty()) {
    CsvWriter w(a.heatmap);
    echo.write(w, "evolve");
    w.comment("normalization", "per-column max");
    w.header({"tau_over_2pi", "momentum", "value"});
    for (std::size_t c = 0; c < cfg.tau_grid.size(); ++c) {
      const double x = cfg.tau_grid[c] / epsmaps::two_pi;
      double top = 0.0;
      for (double v : scan.final_prob[c]) top = std::max(top, v);
      const double norm = top > 0.0 ? 1.0 / top : 0.0;
      for (std::size_t i = 0; i < scan.bin_centers.size(); ++i)
        w.row() << x << scan.bin_centers[i] << scan.final_prob[c][i] * norm;
    }
    finish(w, a.heatmap);
  }

  if (has_history) {
    if (a.history_out.empty()) throw std::invalid_argument("--history-at needs --history-output");
    std::size_t best = 0;
    for (std::size_t c = 1; c < cfg.tau_grid.size(); ++c)
      if (std::abs(cfg.tau_grid[c] - epsmaps::two_pi * a.history_at) <
          std::abs(cfg.tau_grid[best] - epsmaps::two_pi * a.history_at))
        best = c;
    CsvWriter w(a.history_out);
    echo.write(w, "evolve");
    w.comment("history_tau_over_2pi", format_g17(cfg.tau_grid[best] / epsmaps::two_pi));
    w.header({"kick", "momentum", "probability"});
    for (std::size_t t = 0; t < scan.history[best].size(); ++t)
      for (std::size_t i = 0; i < scan.bin_centers.size(); ++i)
        w.row() << static_cast<int>(t) + 1 << scan.bin_centers[i] << scan.history[best][t][i];
    finish(w, a.history_out);
  }

  if (!a.overlay.empty()) {
    if (a.overlay_family.empty())
      throw std::invalid_argument("--overlay needs at least one --overlay-family");
    CsvWriter w(a.overlay);
    echo.write(w, "evolve");
    w.comment("overlay_p_res", std::to_string(a.overlay_p_res));
    w.comment("overlay_q_res", std::to_string(a.overlay_q_res));
    w.header({"tau_over_2pi", "T", "p", "j", "dsum", "a", "final_momentum"});
    const double tau_res = epsmaps::two_pi * static_cast<double>(a.overlay_p_res) /
                           static_cast<double>(a.overlay_q_res);
    for (const auto& text : a.overlay_family) {
      const auto f = parse_int_list(text);
      if (f.size() != 4) throw std::invalid_argument("--overlay-family wants T,p,j,dsum");
      const auto [T, p, j, dsum] = std::tuple{f[0], f[1], f[2], f[3]};
      if (T < 1 || p < 1) throw std::invalid_argument("--overlay-family wants T >= 1, p >= 1");
      const double delta_T = epsmaps::two_pi * static_cast<double>(dsum) /
                             (static_cast<double>(a.overlay_q_res) * static_cast<double>(T));
      for (double tau : cfg.tau_grid) {
        const double epsilon = tau - tau_res;
        if (epsilon == 0.0) continue;
        const double numer = epsmaps::two_pi * static_cast<double>(j) /
                                 (static_cast<double>(p) * static_cast<double>(T)) -
                             delta_T - tau * a.scan.eta.at(tau);
        const double accel = numer / epsilon;
        w.row() << tau / epsmaps::two_pi << T << p << j << dsum << accel
                << accel * static_cast<double>(cfg.n_kicks);
      }
    }
    finish(w, a.overlay);
  }
  return 0;
}

// ---- portrait -------------------------------------------------------------

struct PortraitArgs {
  double k_tilde = 0.0;
  double drift = 0.0;
  CLI::Option* k_tilde_opt = nullptr;
  CLI::Option* drift_opt = nullptr;
  double k = 0.0;
  CLI::Option* k_opt = nullptr;
  double tau_x = 0.0;
  CLI::Option* tau_opt = nullptr;
  EtaArgs eta;
  int p_res = 1;
  int q_res = 2;
  std::string family_text = "0";
  int theta_n = 24;
  int j_n = 24;
  int iters = 300;
  unsigned threads = 1;
  std::string output;
};

int run_portrait(const PortraitArgs& a) {
  const bool has_k_tilde = a.k_tilde_opt->count() > 0;
  const bool has_drift = a.drift_opt->count() > 0;
  const bool has_k = a.k_opt->count() > 0;
  const bool has_tau = a.tau_opt->count() > 0;
  double k_tilde = a.k_tilde;
  double drift = a.drift;
  double tau = 0.0;
  if (has_k_tilde != has_drift)
    throw std::invalid_argument("--k-tilde and --drift come together");
  if (has_k_tilde) {
    if (has_k || has_tau)
      throw std::invalid_argument("give either --k-tilde/--drift or --k/--tau-over-2pi");
  } else {
    if (!has_k || !has_tau)
      throw std::invalid_argument("give either --k-tilde/--drift or --k/--tau-over-2pi");
    a.eta.require();
    tau = epsmaps::two_pi * a.tau_x;
    const double tau_res = epsmaps::two_pi * static_cast<double>(a.p_res) /
                           static_cast<double>(a.q_res);
    k_tilde = a.k * (tau - tau_res);
    drift = tau * a.eta.at(tau);
  }

  const auto d = parse_int_list(a.family_text);
  epsmaps::TorusMapSpec spec{k_tilde, drift, epsmaps::make_delta(a.q_res, d)};

  if (a.theta_n < 1 || a.j_n < 1) throw std::invalid_argument("need positive seed counts");
  std::vector<epsmaps::PhasePoint> seeds;
  for (int i = 0; i < a.theta_n; ++i)
    for (int m = 0; m < a.j_n; ++m)
      seeds.push_back({epsmaps::two_pi * (static_cast<double>(i) + 0.5) /
                           static_cast<double>(a.theta_n),
                       epsmaps::two_pi * (static_cast<double>(m) + 0.5) /
                           static_cast<double>(a.j_n)});

  const auto cloud = epsmaps::portrait(spec, seeds, a.iters, a.threads);

  Echo echo;
  echo.add("q", a.q_res);
  echo.add("T", spec.deltas.period());
  echo.add("d", join(d, ';'));
  echo.add("k_tilde", k_tilde);
  echo.add("drift", drift);
  if (has_k) {
    echo.add("k", a.k);
    echo.add("tau_over_2pi", a.tau_x);
    echo.add("p_res", a.p_res);
    a.eta.echo(echo);
  }
  echo.add("theta_n", a.theta_n);
  echo.add("j_n", a.j_n);
  echo.add("iters", a.iters);

  CsvWriter w(a.output);
  echo.write(w, "portrait");
  w.header({"seed_index", "iter", "theta", "J"});
  for (std::size_t s = 0; s < cloud.size(); ++s)
    for (std::size_t it = 0; it < cloud[s].size(); ++it)
      w.row() << static_cast<int>(s) << static_cast<int>(it) << cloud[s][it].theta
              << cloud[s][it].J;
  finish(w, a.output);
  return 0;
}

// ---- orbits ---------------------------------------------------------------

struct OrbitsArgs {
  double k = 0.0;
  double tau_x = 0.0;
  EtaArgs eta;
  CatalogArgs catalog;
  std::string output;
};

int run_orbits(const OrbitsArgs& a) {
  a.eta.require();
  const double tau = epsmaps::two_pi * a.tau_x;

  Echo echo;
  echo.add("k", a.k);
  echo.add("tau_over_2pi", a.tau_x);
  a.eta.echo(echo);
  a.catalog.echo(echo);

  const auto cfg = a.catalog.pipeline();
  const auto catalog = detect::build_catalog(tau, a.eta.at(tau), a.k, cfg);
  write_catalog_csv(a.output, echo, "orbits", catalog);
  std::printf("%zu orbits\n", catalog.size());
  return 0;
}

// ---- predict --------------------------------------------------------------

struct PredictArgs {
  int T = 1;
  int p = 1;
  int j = 1;
  int dsum = 0;
  double tau_x = 0.0;
  EtaArgs eta;
  int p_res = 0;
  int q_res = 0;
  int q_max = 13;
  std::string output;
};

int run_predict(const PredictArgs& a) {
  a.eta.require();
  if (a.T < 1 || a.p < 1) throw std::invalid_argument("need --T >= 1 and --p >= 1");
  const double tau = epsmaps::two_pi * a.tau_x;

  int p_res = a.p_res, q_res = a.q_res;
  if ((p_res > 0) != (q_res > 0))
    throw std::invalid_argument("--p-res and --q-res come together");
  if (p_res == 0) {
    const auto near = resonance::nearest_resonances(tau, a.q_max, 1.0);
    if (near.empty())
      throw std::invalid_argument("no resonance with q <= " + std::to_string(a.q_max) +
                                  " near this tau; give --p-res/--q-res");
    p_res = near.front().first.p;
    q_res = near.front().first.q;
  }

  const double tau_res =
      epsmaps::two_pi * static_cast<double>(p_res) / static_cast<double>(q_res);
  const double epsilon = tau - tau_res;
  if (epsilon == 0.0)
    throw std::invalid_argument("tau sits exactly on the resonance; no detuned picture");
  const double delta_T = epsmaps::two_pi * static_cast<double>(a.dsum) /
                         (static_cast<double>(q_res) * static_cast<double>(a.T));
  const double drift = tau * a.eta.at(tau);
  const double accel = (epsmaps::two_pi * static_cast<double>(a.j) /
                            (static_cast<double>(a.p) * static_cast<double>(a.T)) -
                        delta_T - drift) /
                       epsilon;

  std::printf("resonance %d/%d  epsilon=%+.6g  a=%.10g\n", p_res, q_res, epsilon, accel);

  if (!a.output.empty()) {
    Echo echo;
    echo.add("T", a.T);
    echo.add("p", a.p);
    echo.add("j", a.j);
    echo.add("dsum", a.dsum);
    echo.add("tau_over_2pi", a.tau_x);
    a.eta.echo(echo);
    echo.add("p_res", p_res);
    echo.add("q_res", q_res);
    CsvWriter w(a.output);
    echo.write(w, "predict");
    w.header({"q", "T", "dsum", "p", "j", "Delta_T", "drift", "epsilon", "a"});
    w.row() << q_res << a.T << a.dsum << a.p << a.j << delta_T << drift << epsilon << accel;
    finish(w, a.output);
  }
  return 0;
}

// ---- detect ---------------------------------------------------------------

struct DetectArgs {
  ScanArgs scan;
  CatalogArgs catalog;
  double match_tol = 0.15;
  double a_floor = 0.05;
  detect::TrackerOptions tracker;
  std::string output;
  std::string catalog_out;
};

int run_detect(const DetectArgs& a) {
  detect::PipelineConfig cfg = a.catalog.pipeline();
  cfg.scan = a.scan.config(true);
  cfg.newton.threads = a.scan.threads;
  cfg.match_tol = a.match_tol;
  cfg.a_floor = a.a_floor;
  cfg.tracker = a.tracker;

  Echo echo;
  a.scan.echo(echo);
  a.catalog.echo(echo);
  echo.add("match_tol", a.match_tol);
  echo.add("a_floor", a.a_floor);
  echo.add("mass_threshold", a.tracker.mass_threshold);
  echo.add("gate", a.tracker.gate);
  echo.add("min_coverage", a.tracker.min_coverage);

  const auto res = detect::run_pipeline(cfg);

  CsvWriter w(a.output);
  echo.write(w, "detect");
  w.header({"tau_over_2pi", "fitted_a", "r2", "peak_mass", "matched_q", "matched_p",
            "matched_j", "matched_pp", "a_predicted", "relative_error"});
  for (const auto& col : res.columns)
    for (const auto& det : col.detections) {
      auto row = w.row();
      row << col.tau / epsmaps::two_pi << det.fitted_a << det.fit_r2 << det.peak_mass;
      if (det.match) {
        row << det.match->q << det.match->p << det.match->j << det.match->pp
            << det.match->a_predicted << det.match->relative_error;
      } else {
        row << "" << "" << "" << "" << "" << "";
      }
    }
  finish(w, a.output);

  if (!a.catalog_out.empty()) {
    CsvWriter cw(a.catalog_out);
    echo.write(cw, "detect");
    cw.header({"q", "T", "d_list", "k_tilde", "drift", "p", "j", "theta0", "J0", "trace",
               "residue", "stable", "a_predicted", "epsilon"});
    for (const auto& col : res.columns)
      for (const auto& entry : col.catalog) {
        const auto& orb = entry.orbit;
        cw.row() << entry.q_res << orb.spec.deltas.period() << join(orb.spec.deltas.d, ';')
                 << orb.spec.k_tilde << orb.spec.drift << orb.period_p << orb.jump_j
                 << orb.points.at(0).theta << orb.points.at(0).J << orb.trace << orb.residue
                 << (orb.stable ? 1 : 0) << entry.pred.a << entry.epsilon;
      }
    finish(cw, a.catalog_out);
  }

  std::size_t matched = 0, total = 0;
  for (const auto& col : res.columns)
    for (const auto& det : col.detections) {
      ++total;
      if (det.match) ++matched;
    }
  std::printf("%zu tracks, %zu matched\n", total, matched);
  return 0;
}

// ---- stability ------------------------------------------------------------

struct StabilityArgs {
  bool random_diag = false;
  double k_tilde = 0.04;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  double k = 0.0;
  double tau_x = 0.0;
  EtaArgs eta;
  CatalogArgs catalog;
  bool pick_unstable = false;
  int n = 10000;
  std::string output;
};

int run_stability(const StabilityArgs& a) {
  if (a.n < 2) throw std::invalid_argument("need --n >= 2");
  Echo echo;
  std::vector<double> thetas;
  double k_tilde = 0.0;

  if (a.random_diag) {
    if (a.seed_opt->count() == 0)
      throw std::invalid_argument("--random-diag draws angles; --seed is required");
    k_tilde = a.k_tilde;
    echo.add("mode", "random-diag");
    echo.add("k_tilde", k_tilde);
    echo.add("seed", a.seed);
    echo.add("n", a.n);
    Rng rng(a.seed);
    thetas.resize(static_cast<std::size_t>(a.n));
    for (double& th : thetas) th = epsmaps::two_pi * rng.uniform();
  } else {
    a.eta.require();
    const double tau = epsmaps::two_pi * a.tau_x;
    const auto cfg = a.catalog.pipeline();
    const auto catalog = detect::build_catalog(tau, a.eta.at(tau), a.k, cfg);
    const detect::CatalogEntry* pick = nullptr;
    for (const auto& entry : catalog)
      if (entry.orbit.stable != a.pick_unstable) {
        pick = &entry;
        break;
      }
    if (!pick)
      throw std::invalid_argument(std::string("catalog holds no ") +
                                  (a.pick_unstable ? "unstable" : "stable") + " orbit here");
    k_tilde = pick->orbit.spec.k_tilde;
    thetas = orbits::orbit_to_ray(pick->orbit, a.n);
    echo.add("mode", a.pick_unstable ? "orbit-unstable" : "orbit-stable");
    echo.add("k", a.k);
    echo.add("tau_over_2pi", a.tau_x);
    a.eta.echo(echo);
    a.catalog.echo(echo);
    echo.add("orbit_p", pick->orbit.period_p);
    echo.add("orbit_j", pick->orbit.jump_j);
    echo.add("residue", pick->orbit.residue);
    echo.add("n", a.n);
  }

  const auto growth = orbits::det_growth(orbits::build_ray_hessian(thetas, k_tilde));

  CsvWriter w(a.output);
  echo.write(w, "stability");
  w.header({"n", "log_det"});
  for (std::size_t i = 0; i < growth.size(); ++i)
    w.row() << static_cast<int>(i) + 1 << growth[i];
  finish(w, a.output);

  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < growth.size(); ++i) {
    const double x = static_cast<double>(i) + 1.0;
    sx += x;
    sy += growth[i];
    sxx += x * x;
    sxy += x * growth[i];
  }
  const double nn = static_cast<double>(growth.size());
  const double slope = (nn * sxy - sx * sy) / (nn * sxx - sx * sx);
  std::printf("slope=%.6g lyapunov=%.6g\n", slope, orbits::ray_lyapunov(thetas, k_tilde));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantum accelerator mode laboratory"};
  app.require_subcommand(1);

  ResonanceArgs res_args;
  auto* cmd_res = app.add_subcommand("resonance", "resonant quasimomenta and Gauss sums");
  add_config_option(cmd_res);
  cmd_res->add_option("--p", res_args.p, "resonance numerator");
  cmd_res->add_option("--q", res_args.q, "resonance denominator");
  res_args.tau_opt = cmd_res->add_option("--tau-over-2pi", res_args.tau_x,
                                         "list resonances near this tau instead");
  cmd_res->add_option("--q-max", res_args.q_max, "largest denominator to list");
  cmd_res->add_option("-o,--output", res_args.output, "CSV output path");

  EvolveArgs ev_args;
  auto* cmd_ev = app.add_subcommand("evolve", "momentum-distribution tau scan");
  add_config_option(cmd_ev);
  ev_args.scan.attach(cmd_ev);
  cmd_ev->add_option("-o,--output", ev_args.output, "scan CSV path")->required();
  cmd_ev->add_option("--heatmap", ev_args.heatmap, "column-normalized heatmap CSV path");
  ev_args.history_opt =
      cmd_ev->add_option("--history-at", ev_args.history_at,
                         "dump per-kick history of the column nearest this tau/2pi");
  cmd_ev->add_option("--history-output", ev_args.history_out, "history CSV path");
  cmd_ev->add_option("--overlay", ev_args.overlay, "theoretical-curve overlay CSV path");
  cmd_ev->add_option("--overlay-p-res", ev_args.overlay_p_res, "overlay resonance numerator");
  cmd_ev->add_option("--overlay-q-res", ev_args.overlay_q_res, "overlay resonance denominator");
  cmd_ev->add_option("--overlay-family", ev_args.overlay_family,
                     "overlay family as T,p,j,dsum (repeatable)");

  PortraitArgs po_args;
  auto* cmd_po = app.add_subcommand("portrait", "phase portrait of the period map");
  add_config_option(cmd_po);
  po_args.k_tilde_opt = cmd_po->add_option("--k-tilde", po_args.k_tilde, "map kick strength");
  po_args.drift_opt = cmd_po->add_option("--drift", po_args.drift, "map drift tau*eta");
  po_args.k_opt = cmd_po->add_option("--k", po_args.k, "physical kick strength");
  po_args.tau_opt = cmd_po->add_option("--tau-over-2pi", po_args.tau_x, "kick period over 2pi");
  po_args.eta.attach(cmd_po);
  cmd_po->add_option("--p-res", po_args.p_res, "resonance numerator");
  cmd_po->add_option("--q-res", po_args.q_res, "resonance denominator");
  cmd_po->add_option("--family", po_args.family_text, "delta family, comma-separated");
  cmd_po->add_option("--theta-n", po_args.theta_n, "seed grid size along theta");
  cmd_po->add_option("--j-n", po_args.j_n, "seed grid size along J");
  cmd_po->add_option("--iters", po_args.iters, "period-map iterations per seed");
  cmd_po->add_option("--threads", po_args.threads, "worker pool size");
  cmd_po->add_option("-o,--output", po_args.output, "portrait CSV path")->required();

  OrbitsArgs or_args;
  auto* cmd_or = app.add_subcommand("orbits", "periodic-orbit catalog at one tau");
  add_config_option(cmd_or);
  cmd_or->add_option("--k", or_args.k, "kick strength")->required();
  cmd_or->add_option("--tau-over-2pi", or_args.tau_x, "kick period over 2pi")->required();
  or_args.eta.attach(cmd_or);
  or_args.catalog.attach(cmd_or, true);
  cmd_or->add_option("-o,--output", or_args.output, "catalog CSV path")->required();

  PredictArgs pr_args;
  auto* cmd_pr = app.add_subcommand("predict", "closed-form acceleration of a mode family");
  add_config_option(cmd_pr);
  cmd_pr->add_option("--T", pr_args.T, "delta-sequence period");
  cmd_pr->add_option("--p", pr_args.p, "orbit period");
  cmd_pr->add_option("--j", pr_args.j, "jump index");
  cmd_pr->add_option("--dsum", pr_args.dsum, "sum of the d entries over one period");
  cmd_pr->add_option("--tau-over-2pi", pr_args.tau_x, "kick period over 2pi")->required();
  pr_args.eta.attach(cmd_pr);
  cmd_pr->add_option("--p-res", pr_args.p_res, "resonance numerator");
  cmd_pr->add_option("--q-res", pr_args.q_res, "resonance denominator");
  cmd_pr->add_option("--q-max", pr_args.q_max, "denominator cap for the automatic resonance");
  cmd_pr->add_option("-o,--output", pr_args.output, "CSV output path");

  DetectArgs de_args;
  auto* cmd_de = app.add_subcommand("detect", "QAM detection pipeline over a tau scan");
  add_config_option(cmd_de);
  de_args.scan.attach(cmd_de);
  de_args.catalog.attach(cmd_de, false);
  cmd_de->add_option("--match-tol", de_args.match_tol, "relative-error tolerance for a match");
  cmd_de->add_option("--a-floor", de_args.a_floor, "error denominator floor");
  cmd_de->add_option("--mass-threshold", de_args.tracker.mass_threshold,
                     "minimum window mass of a peak");
  cmd_de->add_option("--gate", de_args.tracker.gate, "track-to-peak association distance");
  cmd_de->add_option("--min-coverage", de_args.tracker.min_coverage,
                     "fraction of kicks a track must cover");
  cmd_de->add_option("--min-separation", de_args.tracker.min_separation,
                     "peak merge distance");
  cmd_de->add_option("--discard-first", de_args.tracker.discard_first,
                     "transient kicks dropped from fits");
  cmd_de->add_option("-o,--output", de_args.output, "detections CSV path")->required();
  cmd_de->add_option("--catalog-output", de_args.catalog_out, "orbit catalog CSV path");

  StabilityArgs st_args;
  auto* cmd_st = app.add_subcommand("stability", "log-determinant growth along a ray");
  add_config_option(cmd_st);
  cmd_st->add_flag("--random-diag", st_args.random_diag, "random angles instead of an orbit ray");
  cmd_st->add_option("--k-tilde", st_args.k_tilde, "map kick strength for --random-diag");
  st_args.seed_opt = cmd_st->add_option("--seed", st_args.seed, "RNG seed for --random-diag");
  cmd_st->add_option("--k", st_args.k, "kick strength");
  cmd_st->add_option("--tau-over-2pi", st_args.tau_x, "kick period over 2pi");
  st_args.eta.attach(cmd_st);
  st_args.catalog.attach(cmd_st, false);
  cmd_st->add_flag("--unstable", st_args.pick_unstable, "take the unstable orbit instead");
  cmd_st->add_option("--n", st_args.n, "ray length in kicks");
  cmd_st->add_option("-o,--output", st_args.output, "growth CSV path")->required();

  std::vector<std::string> tokens(argv + 1, argv + argc);
  try {
    tokens = merge_config(std::move(tokens));
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }
  std::reverse(tokens.begin(), tokens.end());

  try {
    app.parse(std::move(tokens));
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cmd_res->parsed()) return run_resonance(res_args);
    if (cmd_ev->parsed()) return run_evolve(ev_args);
    if (cmd_po->parsed()) return run_portrait(po_args);
    if (cmd_or->parsed()) return run_orbits(or_args);
    if (cmd_pr->parsed()) return run_predict(pr_args);
    if (cmd_de->parsed()) return run_detect(de_args);
    if (cmd_st->parsed()) return run_stability(st_args);
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
