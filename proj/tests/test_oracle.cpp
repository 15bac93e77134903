#include <algorithm>
#include <cmath>
#include <random>

#include "birkhoff/error.hpp"
#include "birkhoff/markov_thermo.hpp"
#include "birkhoff/oracle.hpp"
#include "birkhoff/spectrum.hpp"
#include "doctest.h"

using namespace birkhoff;

namespace {

const double kLog2 = std::log(2.0);

MarkovSystem full2() { return MarkovSystem::symbolic({{1, 1}, {1, 1}}); }
MarkovSystem golden() { return MarkovSystem::symbolic({{1, 1}, {1, 0}}); }

double h2(double a) { return (-a * std::log(a) - (1 - a) * std::log(1 - a)) / kLog2; }

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("constrained variational problem on the full 2-shift") {
  auto r = cvp_bruteforce(full2(), {0, 1}, {kLog2, kLog2}, 0.25, 50);
  CHECK(r.value == doctest::Approx(0.81128).epsilon(1e-3));
  CHECK(r.kkt_residual <= 1e-6);
  CHECK(r.method == "tiltedFamily");
  CHECK(r.kernels_scanned > 0);
  auto half = cvp_bruteforce(full2(), {0, 1}, {kLog2, kLog2}, 0.5, 50);
  CHECK(half.value == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(half.grid_value == doctest::Approx(1.0).epsilon(1e-6));
  // Best kernel in the grid search is Bernoulli(1/2,1/2).
  CHECK(half.argmax_stationary[0] == doctest::Approx(0.5));
}

TEST_CASE("oracle agrees with delta0 on the golden-mean shift") {
  SpectrumLevel lvl{golden(), {0, 1}, {kLog2, kLog2}, 0};
  for (double a : {0.1, 0.2, 0.3, 0.4}) {
    auto r = cvp_bruteforce(golden(), {0, 1}, {kLog2, kLog2}, a, 50);
    double d = delta0(lvl, a, 1e-8, 1e-10).value;
    CHECK(std::fabs(r.value - d) <= 2e-3);
  }
}

TEST_CASE("oracle preconditions") {
  CHECK(code_of([] { cvp_bruteforce(full2(), {0, 1}, {kLog2, kLog2}, 1.0, 50); }) ==
        ErrorCode::InfeasibleConstraint);
  CHECK(code_of([] { cvp_bruteforce(golden(), {0, 1}, {kLog2, kLog2}, 0.7, 50); }) ==
        ErrorCode::InfeasibleConstraint);
  Transition01 five(5, std::vector<int>(5, 1));
  CHECK_THROWS_AS(cvp_bruteforce(MarkovSystem::symbolic(five), std::vector<double>(5, 0.0),
                                 std::vector<double>(5, 1.0), 0.0, 10),
                  Error);
}

TEST_CASE("tilted family dominates the kernel mesh up to the window slack") {
  const std::size_t mesh = 40;
  const double w = 1.0 / mesh;
  for (double a : {0.15, 0.3, 0.45, 0.6, 0.85}) {
    auto r = cvp_bruteforce(full2(), {0, 1}, {kLog2, kLog2}, a, mesh);
    double lo = std::max(1e-9, a - w), hi = std::min(1 - 1e-9, a + w);
    double best = (lo <= 0.5 && 0.5 <= hi) ? 1.0 : std::max(h2(lo), h2(hi));
    CHECK(r.grid_value <= best + 1e-9);
    CHECK(r.tilted_value >= r.grid_value - (best - h2(a)) - 1e-9);
  }
}

TEST_CASE("digit frequency spectra") {
  CHECK(besicovitch_eggleston(0.5, 2, {0, 1}) == doctest::Approx(1.0));
  CHECK(besicovitch_eggleston(0.25, 2, {0, 1}) == doctest::Approx(0.81128).epsilon(1e-4));
  CHECK(besicovitch_eggleston(1.0, 3, {0, 1, 2}) == doctest::Approx(1.0));
  CHECK(besicovitch_eggleston(0.0, 2, {0, 1}) == doctest::Approx(0.0));
  CHECK(code_of([] { besicovitch_eggleston(2.5, 3, {0, 1, 2}); }) == ErrorCode::OutOfHull);

  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.01, 1.99);
  for (int k = 0; k < 50; ++k) {
    double a = u(rng), b = u(rng);
    double m = besicovitch_eggleston(0.5 * (a + b), 3, {0, 1, 2});
    CHECK(m >= 0.5 * (besicovitch_eggleston(a, 3, {0, 1, 2}) +
                      besicovitch_eggleston(b, 3, {0, 1, 2})) - 1e-9);
  }
}

TEST_CASE("Moran roots") {
  CHECK(moran_root({2, 2}) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(moran_root({3, 3}) == doctest::Approx(kLog2 / std::log(3.0)).epsilon(1e-10));
  double x = (std::sqrt(5.0) - 1) / 2;
  CHECK(moran_root({2, 4}) == doctest::Approx(-std::log(x) / kLog2).epsilon(1e-10));
  CHECK(moran_root({1.5, 1.5, 1.5}) > 1.0);

  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> u(1.1, 6.0), bump(0.01, 2.0);
  for (int k = 0; k < 50; ++k) {
    std::vector<double> s{u(rng), u(rng), u(rng)};
    double r0 = moran_root(s);
    s[k % 3] += bump(rng);
    CHECK(moran_root(s) < r0);
  }
}
