// End-to-end checks of the command line tool.  The binary under test comes
// in through the QAMLAB_BIN environment variable; every invocation goes to a
// fresh file in a scratch directory and gets judged on exit code, stdout
// text, and the CSV bytes it leaves behind.

#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

using Catch::Approx;

namespace {

const std::string& bin_path() {
  static const std::string path = [] {
    const char* env = std::getenv("QAMLAB_BIN");
    REQUIRE(env != nullptr);
    return std::string(env);
  }();
  return path;
}

const std::string& scratch_dir() {
  static const std::string dir = [] {
    char tmpl[] = "/tmp/qamlab_cli_XXXXXX";
    char* made = mkdtemp(tmpl);
    REQUIRE(made != nullptr);
    return std::string(made);
  }();
  return dir;
}

std::string scratch(const std::string& name) { return scratch_dir() + "/" + name; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run(const std::string& args) {
  static int counter = 0;
  const std::string capture = scratch("stdout_" + std::to_string(counter++) + ".txt");
  const std::string cmd = bin_path() + " " + args + " > " + capture + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_file(capture);
  return r;
}

// data rows of a CSV, comments and header stripped, split on commas
std::vector<std::vector<std::string>> csv_rows(const std::string& path) {
  std::istringstream in(read_file(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  bool seen_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header) {
      seen_header = true;
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    rows.push_back(std::move(fields));
  }
  return rows;
}

std::string csv_header(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') return line;
  return "";
}

double stdout_number(const std::string& text, const std::string& key) {
  const auto pos = text.find(key);
  REQUIRE(pos != std::string::npos);
  return std::strtod(text.c_str() + pos + key.size(), nullptr);
}

}  // namespace

TEST_CASE("resonance subcommand prints beta_r sets and Gauss moduli") {
  const auto main_res = run("resonance --p 1 --q 2");
  REQUIRE(main_res.code == 0);
  CHECK(main_res.out.find("beta_r = 0/1") != std::string::npos);
  CHECK(main_res.out.find("0.7071067812") != std::string::npos);

  const auto first_order = run("resonance --p 1 --q 1");
  REQUIRE(first_order.code == 0);
  CHECK(first_order.out.find("beta_r = 1/2") != std::string::npos);
  CHECK(first_order.out.find("|G|=1.0000000000") != std::string::npos);

  const auto near = run("resonance --tau-over-2pi 0.541 --q-max 13");
  REQUIRE(near.code == 0);
  CHECK(near.out.find("resonance 7/13") != std::string::npos);

  const std::string csv = scratch("gauss.csv");
  REQUIRE(run("resonance --p 2 --q 3 -o " + csv).code == 0);
  CHECK(csv_header(csv) == "beta_r_num,beta_r_den,s,re,im,modulus");
  const auto rows = csv_rows(csv);
  REQUIRE(rows.size() == 2 * 3);
  for (const auto& row : rows)
    CHECK(std::stod(row.at(5)) == Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("predict subcommand evaluates the detuning-ratio acceleration") {
  const auto zero = run("predict --T 1 --p 5 --j 1 --dsum 0 --tau-over-2pi 0.5026 --eta-ratio 0.126");
  REQUIRE(zero.code == 0);
  CHECK(std::abs(stdout_number(zero.out, "a=")) < 0.05);
  CHECK(zero.out.find("resonance 1/2") != std::string::npos);

  const std::string csv = scratch("predict.csv");
  REQUIRE(run("predict --T 1 --p 5 --j 1 --dsum 0 --tau-over-2pi 0.51 --eta-ratio 0.126 -o " +
              csv).code == 0);
  CHECK(csv_header(csv) == "q,T,dsum,p,j,Delta_T,drift,epsilon,a");
  const auto rows = csv_rows(csv);
  REQUIRE(rows.size() == 1);
  const double tau = 2.0 * std::numbers::pi * 0.51;
  const double expect =
      (2.0 * std::numbers::pi / 5.0 - 0.126 * tau * tau) / (tau - std::numbers::pi);
  CHECK(std::stod(rows[0].at(8)) == Approx(expect).epsilon(1e-12));

  CHECK(run("predict --tau-over-2pi 0.5 --eta 0.1").code == 2);
}

TEST_CASE("evolve subcommand writes a deterministic scan CSV") {
  const std::string first = scratch("scan_a.csv");
  const std::string second = scratch("scan_b.csv");
  const std::string args =
      "evolve --k 0.8 --eta 0.02 --tau-lo 0.50 --tau-hi 0.51 --tau-n 2 "
      "--n-kicks 10 --ensemble 5 --seed 42 -o ";
  REQUIRE(run(args + first).code == 0);
  REQUIRE(run(args + second).code == 0);

  const std::string bytes = read_file(first);
  CHECK(bytes == read_file(second));
  CHECK(bytes.rfind("# version=", 0) == 0);
  CHECK(bytes.find("# subcommand=evolve\n") != std::string::npos);
  CHECK(bytes.find("# seed=42\n") != std::string::npos);
  CHECK(csv_header(first) == "tau_over_2pi,momentum,probability");

  const auto rows = csv_rows(first);
  REQUIRE(rows.size() == 2 * 300);
  double mass = 0.0;
  for (std::size_t i = 0; i < 300; ++i) mass += std::stod(rows[i].at(2));
  CHECK(mass == Approx(1.0).margin(1e-6));

  CHECK(run("evolve --k 0.8 --eta 0.02 --tau-n 2 --tau-lo 0.5 --tau-hi 0.51 -o " +
            scratch("noseed.csv")).code == 2);
  CHECK(run("evolve --k 0.8 --tau-n 1 --tau-lo 0.5 --seed 1 -o " + scratch("noeta.csv")).code ==
        2);
}

TEST_CASE("evolve config file feeds the run and flags override it") {
  const std::string conf = scratch("evolve.conf");
  {
    std::ofstream out(conf);
    out << "# comment line\n"
        << "k = 0.8\n"
        << "eta = 0.02\n"
        << "tau_over_2pi = 0.505\n"
        << "n-kicks = 10\n"
        << "ensemble = 4\n"
        << "seed = 9\n";
  }
  const std::string base = scratch("conf_base.csv");
  REQUIRE(run("evolve --config " + conf + " -o " + base).code == 0);
  CHECK(read_file(base).find("# ensemble=4\n") != std::string::npos);

  const std::string over = scratch("conf_over.csv");
  REQUIRE(run("evolve --config " + conf + " --ensemble 6 -o " + over).code == 0);
  CHECK(read_file(over).find("# ensemble=6\n") != std::string::npos);

  CHECK(run("evolve --config " + scratch("missing.conf") + " -o " + scratch("x.csv")).code == 2);
}

TEST_CASE("portrait subcommand iterates a uniform seed grid") {
  const std::string csv = scratch("portrait.csv");
  REQUIRE(run("portrait --k-tilde 0.032 --drift 1.253 --theta-n 4 --j-n 3 --iters 7 -o " +
              csv).code == 0);
  CHECK(csv_header(csv) == "seed_index,iter,theta,J");
  const auto rows = csv_rows(csv);
  REQUIRE(rows.size() == 4 * 3 * 8);
  const double two_pi = 2.0 * std::numbers::pi;
  for (const auto& row : rows) {
    const double theta = std::stod(row.at(2));
    CHECK(theta >= 0.0);
    CHECK(theta < two_pi);
  }
  CHECK(read_file(csv).find("# k_tilde=0.032") != std::string::npos);

  CHECK(run("portrait --k-tilde 0.032 --k 0.8 --drift 1.2 --tau-over-2pi 0.51 --eta 0.1 -o " +
            scratch("both_modes.csv")).code == 2);
  CHECK(run("portrait --k 0.8 --tau-over-2pi 0.51 -o " + scratch("no_eta.csv")).code == 2);
}

TEST_CASE("orbits subcommand catalogs the period-5 pair") {
  const std::string csv = scratch("orbits.csv");
  REQUIRE(run("orbits --k 2.5132741228718345 --tau-over-2pi 0.51 --eta-ratio 0.126 "
              "--family 0 --p 5 --j 1 -o " + csv).code == 0);
  CHECK(csv_header(csv) ==
        "q,T,d_list,k_tilde,drift,p,j,theta0,J0,trace,residue,stable,a_predicted,epsilon");
  const auto rows = csv_rows(csv);
  REQUIRE(rows.size() == 2);
  int stable_count = 0;
  for (const auto& row : rows) {
    CHECK(row.at(5) == "5");
    CHECK(row.at(6) == "1");
    CHECK(std::stod(row.at(13)) == Approx(2.0 * std::numbers::pi * 0.01).epsilon(1e-12));
    if (row.at(11) == "1") {
      ++stable_count;
      CHECK(std::stod(row.at(12)) == Approx(-0.59163187980736931).epsilon(1e-9));
    }
  }
  CHECK(stable_count == 1);
}

TEST_CASE("stability subcommand separates flat and growing rays") {
  const std::string orbit_csv = scratch("stab_orbit.csv");
  const auto orbit = run("stability --k 2.5132741228718345 --tau-over-2pi 0.51 "
                         "--eta-ratio 0.126 --family 0 --p 5 --j 1 --n 4000 -o " + orbit_csv);
  REQUIRE(orbit.code == 0);
  CHECK(std::abs(stdout_number(orbit.out, "slope=")) < 1e-3);
  CHECK(csv_header(orbit_csv) == "n,log_det");
  CHECK(csv_rows(orbit_csv).size() == 4000);

  const auto random = run("stability --random-diag --k-tilde 0.16 --seed 7 --n 4000 -o " +
                          scratch("stab_rand.csv"));
  REQUIRE(random.code == 0);
  CHECK(stdout_number(random.out, "slope=") > 0.01);

  CHECK(run("stability --random-diag --k-tilde 0.16 --n 100 -o " +
            scratch("stab_noseed.csv")).code == 2);
}

TEST_CASE("detect subcommand finds and matches the known mode") {
  const std::string csv = scratch("detect.csv");
  const std::string args =
      "detect --k 2.5132741228718345 --eta-ratio 0.126 --tau-over-2pi 0.51 "
      "--n-kicks 100 --ensemble 100 --seed 2026 --family 0 --p 5 --j 1 -o ";
  REQUIRE(run(args + csv).code == 0);
  CHECK(csv_header(csv) ==
        "tau_over_2pi,fitted_a,r2,peak_mass,matched_q,matched_p,matched_j,matched_pp,"
        "a_predicted,relative_error");

  int matched = 0;
  for (const auto& row : csv_rows(csv)) {
    REQUIRE(row.size() == 10);
    if (row.at(4).empty()) continue;
    ++matched;
    CHECK(row.at(7) == "5");
    CHECK(std::stod(row.at(8)) == Approx(-0.59163187980736931).epsilon(1e-9));
    CHECK(std::stod(row.at(9)) < 0.10);
  }
  CHECK(matched == 1);

  const std::string again = scratch("detect_again.csv");
  REQUIRE(run(args + again).code == 0);
  CHECK(read_file(csv) == read_file(again));
}

TEST_CASE("bad invocations exit with the config code and bad writes with the runtime code") {
  CHECK(run("nonsense").code == 2);
  CHECK(run("evolve --bogus 1").code == 2);
  CHECK(run("evolve --k 0.5 --eta 0.01 --tau-n 1 --tau-lo 0.5 --seed 1 -o "
            "/nonexistent-dir/out.csv").code == 1);
  CHECK(run("--help").code == 0);
}
