#include "birkhoff/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "birkhoff/error.hpp"

namespace birkhoff {

namespace {

[[noreturn]] void oracle_error(ErrorCode code, const char* op,
                               const std::string& msg) {
  throw Error(code, "oracle", op, msg);
}

struct Stats {
  double entropy, lyapunov, mean_f;
};

Stats stats_of(const MarkovMeasure& mu, const std::vector<double>& f,
               const std::vector<double>& phi) {
  Stats s{mu.entropy, 0.0, 0.0};
  for (std::size_t i = 0; i < f.size(); ++i) {
    s.lyapunov += mu.stationary[i] * phi[i];
    s.mean_f += mu.stationary[i] * f[i];
  }
  return s;
}

// Stationary vector of a small kernel; false when it is not unique.
bool stationary(const std::vector<std::vector<double>>& q,
                std::vector<double>& pi) {
  const std::size_t n = q.size();
  double a[4][5] = {};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a[i][j] = q[j][i] - (i == j ? 1.0 : 0.0);
  for (std::size_t j = 0; j <= n; ++j) a[n - 1][j] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (std::fabs(a[piv][col]) < 1e-12) return false;
    if (piv != col)
      for (std::size_t c = 0; c <= n; ++c) std::swap(a[col][c], a[piv][c]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      double m = a[r][col] / a[col][col];
      for (std::size_t c = col; c <= n; ++c) a[r][c] -= m * a[col][c];
    }
  }
  pi.resize(n);
  for (std::size_t i = 0; i < n; ++i) pi[i] = std::max(0.0, a[i][n] / a[i][i]);
  return true;
}

}  // namespace

OracleResult cvp_bruteforce(const MarkovSystem& sys,
                            const std::vector<double>& f,
                            const std::vector<double>& phi, double a,
                            std::size_t mesh) {
  const std::size_t m = sys.size();
  if (m == 0 || m > 4)
    oracle_error(ErrorCode::InvalidArgument, "cvp_bruteforce",
                 "brute force needs 1 to 4 cells");
  if (f.size() != m || phi.size() != m)
    oracle_error(ErrorCode::InvalidArgument, "cvp_bruteforce",
                 "f and phi must have one value per cell");
  if (mesh == 0)
    oracle_error(ErrorCode::InvalidArgument, "cvp_bruteforce", "mesh = 0");
  if (!is_irreducible(sys))
    oracle_error(ErrorCode::InvalidArgument, "cvp_bruteforce",
                 "transition graph is reducible; decompose by component");
  for (double p : phi)
    if (!(p > 0.0))
      oracle_error(ErrorCode::InvalidArgument, "cvp_bruteforce",
                   "phi must be positive");
  Interval range = ergodic_average_range(sys, f);
  if (!(a > range.lo + 1e-12 && a < range.hi - 1e-12))
    oracle_error(ErrorCode::InfeasibleConstraint, "cvp_bruteforce",
                 "a is not interior to the range of ergodic averages");

  OracleResult out;
  const double window = 1.0 / double(mesh);

  // (i) Grid over per-row simplex compositions with spacing 1/mesh.
  std::vector<std::vector<std::vector<double>>> row_options(m);
  double total = 1.0;
  for (std::size_t i = 0; i < m; ++i) {
    auto succ = sys.successors(i);
    const std::size_t d = succ.size();
    std::vector<std::size_t> parts(d, 0);
    std::function<void(std::size_t, std::size_t)> compose = [&](std::size_t k,
                                                               std::size_t left) {
      if (k + 1 == d) {
        parts[k] = left;
        std::vector<double> row(m, 0.0);
        for (std::size_t t = 0; t < d; ++t)
          row[succ[t]] = double(parts[t]) / double(mesh);
        row_options[i].push_back(std::move(row));
        return;
      }
      for (std::size_t c = 0; c <= left; ++c) {
        parts[k] = c;
        compose(k + 1, left - c);
      }
    };
    if (d == 1) {
      std::vector<double> row(m, 0.0);
      row[succ[0]] = 1.0;
      row_options[i].push_back(std::move(row));
    } else {
      // Count first so an oversized mesh fails before allocating.
      double count = 1.0;
      for (std::size_t t = 1; t < d; ++t)
        count = count * double(mesh + t) / double(t);
      total *= count;
      if (total > 5e6)
        oracle_error(ErrorCode::MeshTooLarge, "cvp_bruteforce",
                     "more than 5e6 kernels at this mesh");
      compose(0, mesh);
    }
  }
  std::vector<std::size_t> idx(m, 0);
  std::vector<std::vector<double>> kernel(m);
  std::vector<double> pi;
  bool found = false;
  double best = -std::numeric_limits<double>::infinity();
  for (bool more = true; more;) {
    for (std::size_t i = 0; i < m; ++i) kernel[i] = row_options[i][idx[i]];
    ++out.kernels_scanned;
    if (stationary(kernel, pi)) {
      double h = 0.0, lam = 0.0, mf = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        lam += pi[i] * phi[i];
        mf += pi[i] * f[i];
        for (std::size_t j = 0; j < m; ++j)
          if (kernel[i][j] > 0.0) h -= pi[i] * kernel[i][j] * std::log(kernel[i][j]);
      }
      if (std::fabs(mf - a) <= window && lam > 0.0 && h / lam > best) {
        best = h / lam;
        found = true;
        out.argmax_kernel = kernel;
        out.argmax_stationary = pi;
      }
    }
    more = false;
    for (std::size_t i = m; i-- > 0;) {
      if (++idx[i] < row_options[i].size()) {
        more = true;
        break;
      }
      idx[i] = 0;
    }
  }
  if (!found)
    oracle_error(ErrorCode::InfeasibleConstraint, "cvp_bruteforce",
                 "no mesh kernel satisfies the a-window");
  out.grid_value = best;

  // (ii) Tilted family with the constraint solved in q, delta updated as
  // h/lambda until it stops moving.
  auto measure = [&](double q, double delta) {
    std::vector<double> psi(m);
    for (std::size_t i = 0; i < m; ++i) psi[i] = q * f[i] - delta * phi[i];
    return equilibrium_measure(sys, psi);
  };
  auto solve_q = [&](double delta) {
    auto g = [&](double q) { return stats_of(measure(q, delta), f, phi).mean_f - a; };
    double lo = -1.0, hi = 1.0;
    while (g(lo) > 0.0) {
      lo *= 2.0;
      if (lo < -1e12)
        oracle_error(ErrorCode::InfeasibleConstraint, "cvp_bruteforce", "tilt diverged");
    }
    while (g(hi) < 0.0) {
      hi *= 2.0;
      if (hi > 1e12)
        oracle_error(ErrorCode::InfeasibleConstraint, "cvp_bruteforce", "tilt diverged");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::fabs(lo)); ++it) {
      double mid = 0.5 * (lo + hi);
      (g(mid) < 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
  };
  double delta = 0.0, q = 0.0;
  MarkovMeasure mu;
  for (int it = 0; it < 200; ++it) {
    q = solve_q(delta);
    mu = measure(q, delta);
    Stats s = stats_of(mu, f, phi);
    double next = s.entropy / s.lyapunov;
    bool done = std::fabs(next - delta) < 1e-12;
    delta = next;
    if (done) break;
  }
  Stats s = stats_of(mu, f, phi);
  out.tilted_value = delta;
  out.tilt_q = q;
  out.kkt_residual = std::fabs(s.mean_f - a);
  out.value = delta;
  out.method = "tiltedFamily";
  out.resolution = "per-row simplex mesh 1/" + std::to_string(mesh) +
                   ", a-window +-" + std::to_string(window) + ", " +
                   std::to_string(out.kernels_scanned) + " kernels";
  return out;
}

double besicovitch_eggleston(double a, std::size_t base,
                             const std::vector<double>& v) {
  if (base < 2 || v.size() != base)
    oracle_error(ErrorCode::InvalidArgument, "besicovitch_eggleston",
                 "need one digit value per symbol and base >= 2");
  const double lo = *std::min_element(v.begin(), v.end());
  const double hi = *std::max_element(v.begin(), v.end());
  const double tol = 1e-12 * std::max(1.0, std::fabs(a));
  if (a < lo - tol || a > hi + tol)
    oracle_error(ErrorCode::OutOfHull, "besicovitch_eggleston",
                 "a outside the hull of the digit values");
  const double lb = std::log(double(base));
  if (hi - lo <= tol) return 1.0;
  if (a <= lo + tol || a >= hi - tol) {
    double target = a <= lo + tol ? lo : hi;
    double count = 0.0;
    for (double x : v)
      if (std::fabs(x - target) <= tol) count += 1.0;
    return std::log(count) / lb;
  }
  // p_i proportional to exp(t v_i); the mean is increasing in t.
  auto tilt = [&](double t, double& entropy) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double x : v) mx = std::max(mx, t * x);
    double z = 0.0, mean = 0.0;
    std::vector<double> w(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      w[i] = std::exp(t * v[i] - mx);
      z += w[i];
    }
    entropy = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      double p = w[i] / z;
      mean += p * v[i];
      if (p > 0.0) entropy -= p * std::log(p);
    }
    return mean;
  };
  double e = 0.0, lo_t = -1.0, hi_t = 1.0;
  while (tilt(lo_t, e) > a) lo_t *= 2.0;
  while (tilt(hi_t, e) < a) hi_t *= 2.0;
  for (int it = 0; it < 300 && hi_t - lo_t > 1e-15; ++it) {
    double mid = 0.5 * (lo_t + hi_t);
    (tilt(mid, e) < a ? lo_t : hi_t) = mid;
  }
  tilt(0.5 * (lo_t + hi_t), e);
  return e / lb;
}

double moran_root(const std::vector<double>& slopes) {
  if (slopes.empty())
    oracle_error(ErrorCode::InvalidArgument, "moran_root", "no slopes");
  for (double s : slopes)
    if (!std::isfinite(s) || s < 1.0 + 1e-6)
      oracle_error(ErrorCode::InvalidArgument, "moran_root",
                   "slopes must be finite and >= 1 + 1e-6");
  auto g = [&](double d) {
    double s = 0.0;
    for (double x : slopes) s += std::pow(x, -d);
    return s - 1.0;
  };
  double lo = 0.0, hi = 1.0 + 1e-6;
  while (g(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
  }
  while (hi - lo > 1e-14 * std::max(1.0, hi)) {
    double mid = 0.5 * (lo + hi);
    (g(mid) > 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace birkhoff
