#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "birkhoff/markov_thermo.hpp"

// Ground truth for the spectrum solver: brute-force constrained variational
// problem on tiny subshifts, digit-frequency spectra, Moran roots.
namespace birkhoff {

struct OracleResult {
  double value = 0.0;         // tilted-family value (exact constraint)
  double grid_value = 0.0;    // best kernel on the mesh inside the a-window
  double tilted_value = 0.0;
  double kkt_residual = 0.0;  // |int f dmu - a| of the tilted maximizer
  double tilt_q = 0.0;
  std::string method;         // tiltedFamily | gridSearch | analytic
  std::string resolution;
  std::size_t kernels_scanned = 0;
  std::vector<std::vector<double>> argmax_kernel;
  std::vector<double> argmax_stationary;
};

// Maximizes h(mu)/lambda(mu) over Markov measures with int f dmu = a.
OracleResult cvp_bruteforce(const MarkovSystem& sys,
                            const std::vector<double>& f,
                            const std::vector<double>& phi, double a,
                            std::size_t mesh);

// Constrained maximum of Shannon entropy over p with sum p_i v_i = a,
// divided by log m.
double besicovitch_eggleston(double a, std::size_t base,
                             const std::vector<double>& digit_values);

// The delta with sum s_i^{-delta} = 1.
double moran_root(const std::vector<double>& slopes);

}  // namespace birkhoff
