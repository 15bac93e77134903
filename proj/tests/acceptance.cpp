// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "birkhoff/cli.hpp"
#include "birkhoff/config.hpp"
#include "birkhoff/interval_maps.hpp"
#include "birkhoff/markov_thermo.hpp"
#include "birkhoff/moran.hpp"
#include "birkhoff/oracle.hpp"
#include "birkhoff/spectrum.hpp"

using namespace birkhoff;
namespace fs = std::filesystem;

namespace {

const double kLog2 = std::log(2.0);

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string config(const std::string& name) {
  return std::string(BIRKHOFF_CONFIG_DIR) + "/" + name;
}

MarkovSystem full_shift(std::size_t m) {
  return MarkovSystem::symbolic(Transition01(m, std::vector<int>(m, 1)));
}

MarkovSystem golden() { return MarkovSystem::symbolic({{1, 1}, {1, 0}}); }

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Random irreducible transition matrix on m states: a Hamiltonian cycle
// plus random extra edges.
MarkovSystem random_irreducible(std::mt19937_64& rng, std::size_t m) {
  Transition01 t(m, std::vector<int>(m, 0));
  std::bernoulli_distribution coin(0.4);
  for (std::size_t i = 0; i < m; ++i) {
    t[i][(i + 1) % m] = 1;
    for (std::size_t j = 0; j < m; ++j)
      if (coin(rng)) t[i][j] = 1;
  }
  return MarkovSystem::symbolic(t);
}

Outcome ac1() {
  auto cfg = load_config(config("be_doubling.yaml"));
  auto t0 = std::chrono::steady_clock::now();
  auto t = spectrum_grid(build_query(cfg));
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double worst = 0;
  for (const auto& r : t.rows) {
    double e = (r.a <= 0 || r.a >= 1)
                   ? 0.0
                   : (-r.a * std::log(r.a) - (1 - r.a) * std::log(1 - r.a)) / kLog2;
    worst = std::max(worst, std::fabs(r.delta0 - e));
  }
  return {t.rows.size() == 33 && worst <= 1e-3 && secs < 10,
          std::to_string(t.rows.size()) + " points, max error " + fmt_g(worst) + ", " +
              fmt_g(secs) + " s"};
}

Outcome ac2() {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> um(1, 6);
  std::uniform_real_distribution<double> uc(-5, 5);
  auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  for (int k = 0; k < 100; ++k) {
    std::size_t m = um(rng);
    std::vector<double> c(m);
    double s = 0;
    for (auto& v : c) s += std::exp(v = uc(rng));
    worst = std::max(worst, std::fabs(pressure_locally_constant(full_shift(m), c) - std::log(s)));
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= 1e-10 && secs < 1, "max error " + fmt_g(worst) + ", " + fmt_g(secs) + " s"};
}

Outcome ac3() {
  auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  const double quoted[] = {0.63093, 0.69424};
  int idx = 0;
  for (const char* name : {"cookie_cutter_33.yaml", "cookie_cutter_24.yaml"}) {
    auto cfg = load_config(config(name));
    auto q = build_query(cfg);
    double d = hyperbolic_dimension(q).value;
    std::vector<double> slopes;
    for (const auto& b : q.levels[0].system.source_map()->branches())
      slopes.push_back(std::fabs(b.derivative(b.domain().midpoint())));
    worst = std::max(worst, std::fabs(d - moran_root(slopes)));
    worst = std::max(worst, std::fabs(d - quoted[idx++]));
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= 1e-5 && secs < 1, "max error " + fmt_g(worst) + ", " + fmt_g(secs) + " s"};
}

Outcome ac4() {
  auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  std::size_t points = 0;
  for (const auto& sys : {full_shift(2), golden()}) {
    SpectrumLevel lvl{sys, {0, 1}, {kLog2, kLog2}, 0};
    Interval h = ergodic_average_range(sys, lvl.f);
    for (int i = 1; i <= 11; ++i) {
      double a = h.lo + (h.hi - h.lo) * i / 12.0;
      double d = delta0(lvl, a, 1e-8, 1e-10).value;
      double c = cvp_bruteforce(sys, lvl.f, lvl.phi, a, 50).value;
      worst = std::max(worst, std::fabs(d - c));
      ++points;
    }
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {worst <= 2e-3 && secs < 60,
          std::to_string(points) + " points, max difference " + fmt_g(worst) + ", " +
              fmt_g(secs) + " s"};
}

Outcome ac5() {
  double r1 = conformality_residual(full_shift(2), std::vector<double>{0, 0}, 8);
  double r2 = conformality_residual(full_shift(2), std::vector<double>{std::log(0.3), std::log(0.7)}, 8);
  double r3 = conformality_residual(golden(), std::vector<double>{0, 0}, 8);
  double worst = std::max({r1, r2, r3});
  return {worst <= 1e-8, "max residual " + fmt_g(worst)};
}

Outcome ac6() {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::size_t> um(1, 4);
  std::uniform_real_distribution<double> upsi(-2, 2), uq(0.01, 1);
  double worst_excess = -1e300, worst_eq = 0;
  for (int k = 0; k < 200; ++k) {
    auto sys = random_irreducible(rng, um(rng));
    std::size_t m = sys.size();
    std::vector<double> psi(m);
    for (auto& v : psi) v = upsi(rng);
    double p = pressure_locally_constant(sys, psi);
    std::vector<std::vector<double>> q(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
      double s = 0;
      for (auto j : sys.successors(i)) s += q[i][j] = uq(rng);
      for (auto j : sys.successors(i)) q[i][j] /= s;
    }
    auto mu = markov_measure_from_kernel(sys, q);
    worst_excess = std::max(worst_excess, mu.entropy + integrate(mu, psi) - p);
    auto eq = equilibrium_measure(sys, psi);
    worst_eq = std::max(worst_eq, std::fabs(eq.entropy + integrate(eq, psi) - p));
  }
  return {worst_excess <= 1e-8 && worst_eq <= 1e-8,
          "max h+int psi-P " + fmt_g(worst_excess) + ", equality gap " + fmt_g(worst_eq)};
}

Outcome ac7() {
  std::size_t tables = 0, bad = 0;
  for (const char* name : {"be_doubling.yaml", "golden_mean.yaml", "cookie_cutter_33.yaml",
                           "cookie_cutter_24.yaml", "manneville_pomeau.yaml"}) {
    auto t = spectrum_grid(build_query(load_config(config(name))));
    bad += check_unimodal(t).size();
    ++tables;
  }
  auto cfg = load_config(config("be_doubling.yaml"));
  cfg.a_grid = linspace(0, 1, 9);
  auto coarse = spectrum_grid(build_query(cfg));
  cfg.a_grid = linspace(0, 1, 33);
  auto fine = spectrum_grid(build_query(cfg));
  auto rep = check_semicontinuity(coarse, fine);
  return {bad == 0 && rep.pass,
          std::to_string(tables) + " tables, " + std::to_string(bad) +
              " unimodality violations, semicontinuity " + (rep.pass ? "ok" : "violated") +
              " at " + std::to_string(rep.checked) + " points"};
}

Outcome ac8() {
  auto t0 = std::chrono::steady_clock::now();
  auto cfg = load_config(config("moran_be.yaml"));
  auto plan = plan_construction(build_stages(cfg), cfg.moran->target_a);
  auto tree = build_tree(plan, cfg.moran->max_depth);
  auto est = estimate_dimension(tree);
  auto samples = sample_points(tree, 100, cfg.seed);
  double worst = 0;
  bool within = samples.size() == 100;
  for (const auto& s : samples) {
    double dev = std::fabs(s.avg_f.back() - cfg.moran->target_a);
    worst = std::max(worst, dev);
    within = within && dev <= s.slack.back();
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  double err = std::fabs(est.point - 0.81128);
  return {tree.depth() >= 400 && err <= 0.05 && within && secs < 30,
          "depth " + std::to_string(tree.depth()) + ", estimate " + fmt_g(est.point) +
              ", max |A-3/4| " + fmt_g(worst) + " (slack " +
              fmt_g(samples.empty() ? 0.0 : samples[0].slack.back()) + "), " + fmt_g(secs) + " s"};
}

Outcome ac9() {
  auto cfg = load_config(config("manneville_pomeau.yaml"));
  auto q = build_query(cfg);
  auto t = spectrum_grid(q);
  double f0 = q.parabolic.empty() ? NAN : q.parabolic[0].f_value;
  bool hp_ok = t.hp && std::fabs(t.hp->lo - f0) <= 1e-12 && std::fabs(t.hp->hi - f0) <= 1e-12;
  bool mono = t.hyp_per_level.size() >= 2;
  for (std::size_t i = 1; i < t.hyp_per_level.size(); ++i)
    mono = mono && t.hyp_per_level[i] >= t.hyp_per_level[i - 1] - 1e-12;
  bool clamp = true, flagged = false;
  std::size_t interior = 0;
  for (const auto& r : t.rows) {
    if (t.hp && r.a > t.hp->lo && r.a < t.hp->hi) {
      ++interior;
      clamp = clamp && std::fabs(r.delta0 - t.hyp_dim) <= 1e-12;
    }
    if (r.in_hp) flagged = flagged || r.flag.rfind("hp", 0) == 0;
  }
  std::string levels;
  for (double v : t.hyp_per_level) levels += (levels.empty() ? "" : ";") + fmt_g(v);
  return {hp_ok && mono && clamp && flagged,
          "Hp=[" + fmt_g(t.hp ? t.hp->lo : NAN) + "," + fmt_g(t.hp ? t.hp->hi : NAN) +
              "], f(0)=" + fmt_g(f0) + ", hypDim per level " + levels + ", " +
              std::to_string(interior) + " rows in int(Hp)"};
}

Outcome ac10() {
  auto base = fs::temp_directory_path() / "birkhoff_acceptance";
  fs::remove_all(base);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string s = ss.str();
    return s.substr(s.find('\n') + 1);
  };
  std::ostringstream log;
  std::size_t compared = 0;
  bool same = true;
  auto twice = [&](const std::string& cmd, const std::string& cfg, const std::string& file) {
    std::string out[2];
    for (int k = 0; k < 2; ++k) {
      fs::path d = base / (cmd + std::to_string(k));
      fs::create_directories(d);
      CliOptions o;
      o.command = cmd;
      o.config_path = config(cfg);
      o.out_dir = d.string();
      if (run(o, log) != kExitOk) same = false;
      out[k] = slurp(d / file);
    }
    same = same && !out[0].empty() && out[0] == out[1];
    ++compared;
  };
  twice("spectrum", "be_doubling.yaml", "spectrum.csv");
  twice("spectrum", "manneville_pomeau.yaml", "spectrum.csv");
  twice("pressure", "be_doubling.yaml", "pressure.csv");
  twice("moran", "moran_two_stage.yaml", "samples.csv");
  fs::remove_all(base);
  return {same, std::to_string(compared) + " outputs compared"};
}

}  // namespace

int main() {
  struct Criterion {
    const char* id;
    const char* name;
    std::function<Outcome()> fn;
  };
  std::vector<Criterion> all{
      {"AC1", "digit-frequency spectrum", ac1},
      {"AC2", "closed-form pressure", ac2},
      {"AC3", "hyperbolic dimension of cookie-cutters", ac3},
      {"AC4", "variational oracle agreement", ac4},
      {"AC5", "conformality residual", ac5},
      {"AC6", "variational inequality", ac6},
      {"AC7", "spectrum shape", ac7},
      {"AC8", "Moran construction", ac8},
      {"AC9", "parabolic classification", ac9},
      {"AC10", "determinism", ac10},
  };
  int failed = 0;
  for (const auto& c : all) {
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %s: %s (%s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
