#include <cmath>
#include <random>
#include <string>

#include "birkhoff/config.hpp"
#include "birkhoff/markov_thermo.hpp"
#include "birkhoff/spectrum.hpp"
#include "doctest.h"

using namespace birkhoff;

namespace {

const double kLog2 = std::log(2.0);

double binary_entropy_dim(double a) {
  if (a <= 0 || a >= 1) return 0.0;
  return (-a * std::log(a) - (1 - a) * std::log(1 - a)) / kLog2;
}

SpectrumLevel be_level() {
  return {MarkovSystem::symbolic({{1, 1}, {1, 1}}), {0, 1}, {kLog2, kLog2}, 0};
}

SpectrumLevel golden_level(std::vector<double> f) {
  return {MarkovSystem::symbolic({{1, 1}, {1, 0}}), std::move(f), {kLog2, kLog2}, 0};
}

SpectrumQuery be_query(std::vector<double> grid) {
  SpectrumQuery q;
  q.levels.push_back(be_level());
  q.a_grid = std::move(grid);
  q.tol_delta = 1e-7;
  q.tol_q = 1e-10;
  return q;
}

SpectrumTable synthetic(std::vector<double> a, std::vector<double> d) {
  SpectrumTable t;
  t.h = {a.front(), a.back()};
  t.hyp_dim = 1.0;
  t.tol_delta = 1e-6;
  for (std::size_t i = 0; i < a.size(); ++i) {
    SpectrumRow r;
    r.a = a[i];
    r.delta0 = d[i];
    r.in_h = true;
    r.flag = "interior";
    t.rows.push_back(r);
  }
  return t;
}

}  // namespace

TEST_CASE("q-infimum of the pressure") {
  auto lvl = be_level();
  auto half = inf_q_pressure(lvl, 0.5, 0.0, 1e-10);
  CHECK(std::fabs(half.q_star) <= 1e-4);
  CHECK(half.value == doctest::Approx(kLog2).epsilon(1e-10));
  CHECK_FALSE(half.tail_limit);

  auto quarter = inf_q_pressure(lvl, 0.25, binary_entropy_dim(0.25), 1e-10);
  CHECK(std::fabs(quarter.value) <= 1e-4);

  SpectrumLevel flat{MarkovSystem::symbolic({{1, 1}, {1, 0}}), {0.4, 0.4}, {kLog2, kLog2}, 0};
  auto c = inf_q_pressure(flat, 0.4, 0.0, 1e-10);
  CHECK(c.value == doctest::Approx(std::log((1 + std::sqrt(5.0)) / 2)).epsilon(1e-10));

  auto edge = inf_q_pressure(lvl, 1.0, 0.0, 1e-10);
  CHECK(edge.tail_limit);
  CHECK(std::fabs(edge.value) <= 1e-8);
}

TEST_CASE("delta0 on the doubling map") {
  auto lvl = be_level();
  CHECK(delta0(lvl, 0.5, 1e-7, 1e-10).value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(delta0(lvl, 0.25, 1e-7, 1e-10).value == doctest::Approx(0.81128).epsilon(1e-3));
  auto out = delta0(lvl, 1.5, 1e-7, 1e-10);
  CHECK(out.value == kNegInf);
  CHECK(out.flag == "outside");
  // Dirac directions at the endpoints carry no entropy.
  CHECK(delta0(lvl, 0.0, 1e-7, 1e-10).value == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("spectrum table for the binary digit frequency") {
  auto t = spectrum_grid(be_query({0, 0.25, 0.5, 0.75, 1}));
  REQUIRE(t.rows.size() == 5);
  double expect[] = {0, 0.81128, 1, 0.81128, 0};
  for (int i = 0; i < 5; ++i) {
    CHECK(t.rows[i].delta0 == doctest::Approx(expect[i]).epsilon(1e-4));
    CHECK(t.rows[i].in_h);
    CHECK_FALSE(t.rows[i].in_hp);
  }
  CHECK(t.rows[0].flag == "endpoint");
  CHECK(t.rows[2].flag == "interior");
  CHECK(t.hyp_dim == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_FALSE(t.hp.has_value());
  CHECK(check_unimodal(t).empty());
}

TEST_CASE("constant potential") {
  SpectrumQuery q;
  q.levels.push_back({MarkovSystem::symbolic({{1, 1}, {1, 1}}), {0.3, 0.3}, {kLog2, kLog2}, 0});
  q.a_grid = {0.0, 0.3, 0.6};
  auto t = spectrum_grid(q);
  CHECK(t.rows[0].delta0 == kNegInf);
  CHECK_FALSE(t.rows[0].in_h);
  CHECK(t.rows[1].delta0 == doctest::Approx(t.hyp_dim).epsilon(1e-6));
  CHECK(t.rows[2].delta0 == kNegInf);
}

TEST_CASE("the interval H") {
  auto be = be_query({0.5});
  auto h = compute_H(be);
  CHECK(h.lo == doctest::Approx(0.0));
  CHECK(h.hi == doctest::Approx(1.0));

  SpectrumQuery g;
  g.levels.push_back(golden_level({0, 1}));
  auto hg = compute_H(g);
  CHECK(hg.lo == doctest::Approx(0.0));
  CHECK(hg.hi == doctest::Approx(0.5));

  SpectrumQuery fam;
  fam.levels.push_back({MarkovSystem::symbolic({{1, 1}, {1, 1}}), {0, 0.25}, {kLog2, kLog2}, 0});
  fam.levels.push_back(golden_level({0.5, 1}));
  fam.levels.back().level = 1;
  auto hf = compute_H(fam);
  CHECK(hf.lo == doctest::Approx(0.0));
  CHECK(hf.hi == doctest::Approx(0.75));
}

TEST_CASE("parabolic part of H") {
  auto be = be_query({0.5});
  auto none = classify_Hp(be, {});
  CHECK_FALSE(none.hp.has_value());
  auto two = classify_Hp(be, {{0.0, 0.2}, {1.0, 0.6}});
  REQUIRE(two.hp.has_value());
  CHECK(two.hp->lo == 0.2);
  CHECK(two.hp->hi == 0.6);
  CHECK(two.warnings.empty());
  auto outside = classify_Hp(be, {{0.0, 1.4}});
  CHECK_FALSE(outside.warnings.empty());
  CHECK(outside.h.hi == doctest::Approx(1.4));
}

TEST_CASE("hyperbolic dimension") {
  CHECK(bowen_root(MarkovSystem::symbolic({{1, 1}, {1, 1}}), {kLog2, kLog2}) ==
        doctest::Approx(1.0).epsilon(1e-9));
  CHECK(bowen_root(MarkovSystem::symbolic({{1, 1}, {1, 1}}), {std::log(3.0), std::log(3.0)}) ==
        doctest::Approx(kLog2 / std::log(3.0)).epsilon(1e-7));
  double r = bowen_root(MarkovSystem::symbolic({{1, 1}, {1, 1}}), {kLog2, std::log(4.0)});
  CHECK(std::pow(2.0, -r) + std::pow(4.0, -r) == doctest::Approx(1.0).epsilon(1e-7));
  CHECK(r == doctest::Approx(0.69424).epsilon(1e-5));
}

TEST_CASE("inf_q pressure is decreasing in delta") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ua(0.05, 0.95), ud(0.0, 1.2);
  auto lvl = golden_level({0, 1});
  lvl.phi = {kLog2, std::log(3.0)};
  for (int k = 0; k < 50; ++k) {
    double a = 0.5 * ua(rng), d1 = ud(rng), d2 = ud(rng);
    if (d1 > d2) std::swap(d1, d2);
    double p1 = inf_q_pressure(lvl, a, d1, 1e-10).value;
    double p2 = inf_q_pressure(lvl, a, d2, 1e-10).value;
    CHECK(p2 <= p1 - (d2 - d1) * kLog2 + 1e-8);
  }
}

TEST_CASE("tilted pressure is affine in a") {
  std::mt19937_64 rng(19);
  std::uniform_real_distribution<double> u(-2, 2);
  auto lvl = golden_level({0.1, 0.9});
  for (int k = 0; k < 100; ++k) {
    double a = u(rng), b = u(rng), q = u(rng), d = std::fabs(u(rng));
    CHECK(tilted_pressure(lvl, b, q, d) ==
          doctest::Approx(tilted_pressure(lvl, a, q, d) + q * (a - b)).epsilon(1e-10));
  }
}

TEST_CASE("equilibrium state at the solver optimum") {
  for (auto lvl : {be_level(), golden_level({0, 1})}) {
    lvl.phi = {kLog2, std::log(3.0)};
    auto h = ergodic_average_range(lvl.system, lvl.f);
    for (double t : {0.2, 0.4, 0.6, 0.8}) {
      double a = h.lo + t * (h.hi - h.lo);
      auto d = delta0(lvl, a, 1e-9, 1e-11);
      std::vector<double> psi(lvl.f.size());
      for (std::size_t i = 0; i < psi.size(); ++i)
        psi[i] = d.q_star * (lvl.f[i] - a) - d.value * lvl.phi[i];
      auto mu = equilibrium_measure(lvl.system, psi);
      CHECK(std::fabs(integrate(mu, lvl.f) - a) <= 1e-3);
      CHECK(std::fabs(mu.entropy / integrate(mu, lvl.phi) - d.value) <= 2e-3);
    }
  }
}

TEST_CASE("finite delta0 never exceeds the hyperbolic dimension") {
  SpectrumQuery q;
  q.levels.push_back(golden_level({0, 1}));
  q.levels[0].phi = {kLog2, std::log(3.0)};
  for (int i = 0; i <= 20; ++i) q.a_grid.push_back(-0.1 + 0.035 * i);
  auto t = spectrum_grid(q);
  for (const auto& r : t.rows)
    if (std::isfinite(r.delta0)) {
      CHECK(r.delta0 <= t.hyp_dim + q.tol_delta);
      CHECK(r.delta0 >= 0.0);
    } else {
      CHECK_FALSE(r.in_h);
    }
  CHECK(check_unimodal(t).empty());
}

TEST_CASE("unimodality check") {
  auto bad = check_unimodal(synthetic({0, 0.5, 1}, {0.5, 0.2, 0.5}));
  REQUIRE(bad.size() == 1);
  CHECK(bad[0].deficit == doctest::Approx(0.3));
  CHECK(check_unimodal(synthetic({0, 1}, {0.9, 0.1})).empty());
  CHECK(check_unimodal(synthetic({0, 0.5, 1}, {0.2, 0.5, 0.3})).empty());
}

TEST_CASE("semicontinuity check") {
  std::vector<double> coarse, fine;
  for (int i = 0; i <= 8; ++i) coarse.push_back(i / 8.0);
  for (int i = 0; i <= 32; ++i) fine.push_back(i / 32.0);
  auto tc = spectrum_grid(be_query(coarse));
  auto tf = spectrum_grid(be_query(fine));
  auto rep = check_semicontinuity(tc, tf);
  CHECK(rep.pass);
  CHECK(rep.checked == 9);

  auto spiked = tc;
  spiked.rows[3].delta0 -= 0.2;
  auto tf2 = tf;
  tf2.rows[12].delta0 -= 0.2;
  auto bad = check_semicontinuity(spiked, tf2);
  CHECK_FALSE(bad.pass);
  bool continuity = false;
  for (const auto& v : bad.violations) continuity |= v.kind == "continuity" && v.a == 3.0 / 8;
  CHECK(continuity);

  // A coarse value disagreeing with the refined table at the same a.
  auto off = tc;
  off.rows[5].delta0 += 0.01;
  CHECK_FALSE(check_semicontinuity(off, tf).pass);
}

TEST_CASE("Manneville-Pomeau truncation family") {
  auto cfg = load_config(std::string(BIRKHOFF_CONFIG_DIR) + "/manneville_pomeau.yaml");
  auto q = build_query(cfg);
  REQUIRE(q.levels.size() == 4);
  auto t = spectrum_grid(q);
  REQUIRE(t.hp.has_value());
  CHECK(t.hp->lo == doctest::Approx(0.3));
  CHECK(t.hp->hi == doctest::Approx(0.3));
  for (std::size_t i = 1; i < t.hyp_per_level.size(); ++i)
    CHECK(t.hyp_per_level[i] >= t.hyp_per_level[i - 1] - 1e-9);
  bool saw_hp = false;
  for (const auto& r : t.rows) {
    if (std::fabs(r.a - 0.3) < 1e-12) {
      saw_hp = true;
      CHECK(r.in_hp);
      CHECK(r.delta0 <= t.hyp_dim + q.tol_delta);
      CHECK(r.delta0 >= t.hyp_per_level.front() - q.tol_delta);
    }
    if (std::isfinite(r.delta0)) CHECK(r.delta0 <= t.hyp_dim + q.tol_delta);
  }
  CHECK(saw_hp);
  CHECK(check_unimodal(t).empty());

  // Only the lower semicontinuity test applies at a = f(0).
  auto fine_cfg = cfg;
  fine_cfg.a_grid = linspace(-0.2, 0.8, 81);
  auto tf = spectrum_grid(build_query(fine_cfg));
  auto rep = check_semicontinuity(t, tf);
  for (const auto& v : rep.violations)
    if (std::fabs(v.a - 0.3) < 1e-12) CHECK(v.kind == "lsc");
}
