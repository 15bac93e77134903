#include "birkhoff/spectrum.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "birkhoff/error.hpp"

namespace birkhoff {

namespace {

constexpr double kEndpointTol = 1e-12;

[[noreturn]] void spectrum_error(ErrorCode code, const char* op,
                                 const std::string& msg) {
  throw Error(code, "spectrum", op, msg);
}

void validate(const SpectrumLevel& lvl, const char* op) {
  if (lvl.f.size() != lvl.system.size() || lvl.phi.size() != lvl.system.size())
    spectrum_error(ErrorCode::InvalidArgument, op,
                   "f and phi must have one value per cell");
}

double min_phi(const SpectrumLevel& lvl) {
  return *std::min_element(lvl.phi.begin(), lvl.phi.end());
}

}  // namespace

double tilted_pressure(const SpectrumLevel& lvl, double a, double q,
                       double delta) {
  std::vector<double> psi(lvl.f.size());
  for (std::size_t i = 0; i < psi.size(); ++i)
    psi[i] = q * (lvl.f[i] - a) - delta * lvl.phi[i];
  return pressure_locally_constant(lvl.system, psi);
}

InfPressure inf_q_pressure(const SpectrumLevel& lvl, double a, double delta,
                           double tol_q) {
  validate(lvl, "inf_q_pressure");
  if (!(tol_q > 0.0))
    spectrum_error(ErrorCode::InvalidArgument, "inf_q_pressure", "tolQ <= 0");
  auto p = [&](double q) { return tilted_pressure(lvl, a, q, delta); };
  const Interval range = ergodic_average_range(lvl.system, lvl.f);
  const double scale = std::max(1.0, std::fabs(a));
  const bool at_hi = std::fabs(a - range.hi) <= kEndpointTol * scale;
  const bool at_lo = std::fabs(a - range.lo) <= kEndpointTol * scale;
  const double p0 = p(0.0);

  if ((at_hi || at_lo) && !(at_hi && at_lo)) {
    // Every invariant measure sits on one side of a, so P is monotone in q
    // and the infimum is the limit along the descending tail.
    const double sign = at_hi ? 1.0 : -1.0;
    double prev = p0;
    double q = sign;
    for (int k = 0; k <= 60; ++k, q *= 2.0) {
      double v = p(q);
      if (std::fabs(v - prev) < tol_q) return {q, std::min(v, prev), true};
      prev = v;
    }
    spectrum_error(ErrorCode::BracketOverflow, "inf_q_pressure",
                   "tail limit did not settle by |q| = 2^60");
  }

  // Walk outward while P keeps decreasing; convexity then pins the
  // minimizer between the point before last and the first rise.
  struct Walk {
    double inner = 0.0, outer = 0.0;
    bool moved = false;
  };
  auto walk = [&](double sign) {
    double q_prev2 = 0.0, q_prev = 0.0, f_prev = p0;
    double q = sign;
    for (int k = 0; k <= 60; ++k, q *= 2.0) {
      double v = p(q);
      if (v >= f_prev) return Walk{q_prev2, q, q_prev != 0.0};
      q_prev2 = q_prev;
      q_prev = q;
      f_prev = v;
    }
    spectrum_error(ErrorCode::BracketOverflow, "inf_q_pressure",
                   "no coercive bracket within |q| <= 2^60 (a outside H?)");
  };
  Walk right = walk(1.0);
  double lo, hi;
  if (right.moved) {
    lo = right.inner;
    hi = right.outer;
  } else {
    Walk left = walk(-1.0);
    lo = left.moved ? left.outer : -1.0;
    hi = left.moved ? left.inner : 1.0;
  }

  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = hi - g * (hi - lo), d = lo + g * (hi - lo);
  double fc = p(c), fd = p(d);
  for (int it = 0; it < 200 && hi - lo > tol_q * std::max(1.0, std::fabs(c));
       ++it) {
    if (fc < fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - g * (hi - lo);
      fc = p(c);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + g * (hi - lo);
      fd = p(d);
    }
  }
  InfPressure out;
  if (fc <= fd) {
    out.q_star = c;
    out.value = fc;
  } else {
    out.q_star = d;
    out.value = fd;
  }
  if (p0 <= out.value) {
    out.q_star = 0.0;
    out.value = p0;
  }
  return out;
}

InfPressure inf_q_pressure(const SpectrumQuery& query, double a, double delta) {
  if (query.levels.empty())
    spectrum_error(ErrorCode::InvalidArgument, "inf_q_pressure", "no systems");
  return inf_q_pressure(query.levels.back(), a, delta, query.tol_q);
}

Delta0 delta0(const SpectrumLevel& lvl, double a, double tol_delta,
              double tol_q) {
  validate(lvl, "delta0");
  if (!(tol_delta > 0.0))
    spectrum_error(ErrorCode::InvalidArgument, "delta0", "tolDelta <= 0");
  Delta0 out;
  const Interval range = ergodic_average_range(lvl.system, lvl.f);
  const double scale = std::max(1.0, std::fabs(a));
  if (a < range.lo - kEndpointTol * scale || a > range.hi + kEndpointTol * scale) {
    out.flag = "outside";
    return out;
  }
  const bool endpoint = std::fabs(a - range.hi) <= kEndpointTol * scale ||
                        std::fabs(a - range.lo) <= kEndpointTol * scale;
  out.flag = endpoint ? "endpoint" : "interior";
  const double phi_min = min_phi(lvl);
  if (!(phi_min > 0.0))
    spectrum_error(ErrorCode::InvalidArgument, "delta0",
                   "phi must be positive on every cell");

  auto inf_at = [&](double delta) {
    try {
      return inf_q_pressure(lvl, a, delta, tol_q);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::BracketOverflow)
        throw Error(ErrorCode::NotInH, "spectrum", "delta0", e.detail());
      throw;
    }
  };
  InfPressure at0 = inf_at(0.0);
  if (!(at0.value > 0.0)) {
    out.value = 0.0;
    out.q_star = at0.q_star;
    out.inf_p = at0.value;
    return out;
  }
  double lo = 0.0;
  double hi = topological_entropy(lvl.system) / phi_min;
  while (hi - lo > tol_delta) {
    double mid = 0.5 * (lo + hi);
    if (inf_at(mid).value > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  out.value = 0.5 * (lo + hi);
  InfPressure fin = inf_at(out.value);
  out.q_star = fin.q_star;
  out.inf_p = fin.value;
  return out;
}

Delta0 delta0(const SpectrumQuery& query, double a) {
  if (query.levels.empty())
    spectrum_error(ErrorCode::InvalidArgument, "delta0", "no systems");
  Delta0 best;
  best.flag = "outside";
  for (const auto& lvl : query.levels) {
    Delta0 d = delta0(lvl, a, query.tol_delta, query.tol_q);
    if (d.value > best.value || (best.flag == "outside" && d.flag != "outside"))
      best = d;
  }
  return best;
}

Interval compute_H(const SpectrumQuery& query) {
  if (query.levels.empty())
    spectrum_error(ErrorCode::InvalidArgument, "compute_H", "no systems");
  std::optional<Interval> h;
  for (const auto& lvl : query.levels) {
    validate(lvl, "compute_H");
    Interval r = ergodic_average_range(lvl.system, lvl.f);
    h = h ? hull(*h, r) : r;
  }
  return *h;
}

HpClassification classify_Hp(const SpectrumQuery& query,
                             const std::vector<ParabolicValue>& parabolic) {
  HpClassification out;
  out.h = compute_H(query);
  if (parabolic.empty()) return out;
  Interval hp{parabolic.front().f_value, parabolic.front().f_value};
  for (const auto& p : parabolic) {
    hp.lo = std::min(hp.lo, p.f_value);
    hp.hi = std::max(hp.hi, p.f_value);
    if (p.f_value < out.h.lo - kEndpointTol || p.f_value > out.h.hi + kEndpointTol) {
      out.warnings.push_back(
          std::string(to_string(ErrorCode::ParabolicValueOutsideH)) + ": f(" +
          std::to_string(p.x) + ") = " + std::to_string(p.f_value) +
          " lies outside the range of the truncated systems; H widened");
      out.h = hull(out.h, Interval{p.f_value, p.f_value});
    }
  }
  out.hp = intersect(hp, out.h);
  return out;
}

double bowen_root(const MarkovSystem& sys, const std::vector<double>& phi) {
  if (phi.size() != sys.size())
    spectrum_error(ErrorCode::InvalidArgument, "hyperbolic_dimension",
                   "phi must have one value per cell");
  double phi_min = *std::min_element(phi.begin(), phi.end());
  if (!(phi_min > 0.0))
    spectrum_error(ErrorCode::InvalidArgument, "hyperbolic_dimension",
                   "phi must be positive on every cell");
  double h = topological_entropy(sys);
  if (h <= 0.0) return 0.0;
  auto p = [&](double delta) {
    std::vector<double> psi(phi.size());
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = -delta * phi[i];
    return pressure_locally_constant(sys, psi);
  };
  double lo = 0.0, hi = h / phi_min;
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    double mid = 0.5 * (lo + hi);
    if (p(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

HyperbolicDimension hyperbolic_dimension(const SpectrumQuery& query) {
  HyperbolicDimension out;
  for (const auto& lvl : query.levels) {
    validate(lvl, "hyperbolic_dimension");
    double d = bowen_root(lvl.system, lvl.phi);
    out.per_level.push_back(d);
    out.value = std::max(out.value, d);
  }
  return out;
}

SpectrumTable spectrum_grid(const SpectrumQuery& query) {
  if (query.levels.empty())
    spectrum_error(ErrorCode::InvalidArgument, "spectrum_grid", "no systems");
  if (query.a_grid.empty())
    spectrum_error(ErrorCode::InvalidArgument, "spectrum_grid", "empty aGrid");
  SpectrumTable table;
  table.tol_delta = query.tol_delta;
  HpClassification cls = classify_Hp(query, query.parabolic);
  table.h = cls.h;
  table.hp = cls.hp;
  table.warnings = cls.warnings;
  HyperbolicDimension hyp = hyperbolic_dimension(query);
  table.hyp_dim = hyp.value;
  table.hyp_per_level = hyp.per_level;

  std::vector<double> grid = query.a_grid;
  std::sort(grid.begin(), grid.end());
  table.rows.resize(grid.size());
  const Interval h = table.h;
  const std::optional<Interval> hp = table.hp;

  auto eval_row = [&](std::size_t r) {
    SpectrumRow row;
    row.a = grid[r];
    const double tol = kEndpointTol * std::max(1.0, std::fabs(row.a));
    row.in_h = std::isfinite(row.a) && row.a >= h.lo - tol && row.a <= h.hi + tol;
    row.in_hp = hp && row.a >= hp->lo - tol && row.a <= hp->hi + tol;
    if (!row.in_h) {
      row.flag = "outside";
      return row;
    }
    try {
      Delta0 best;
      best.flag = "outside";
      for (const auto& lvl : query.levels) {
        Delta0 d = delta0(lvl, row.a, query.tol_delta, query.tol_q);
        if (d.value > best.value ||
            (best.flag == "outside" && d.flag != "outside")) {
          best = d;
          row.level = lvl.level;
        }
      }
      row.delta0 = best.value;
      row.q_star = best.q_star;
      row.inf_p = best.inf_p;
      row.flag = best.flag;
    } catch (const Error& e) {
      row.delta0 = std::numeric_limits<double>::quiet_NaN();
      row.flag = std::string("error:") + to_string(e.code());
      return row;
    }
    if (row.in_hp) {
      bool interior = hp->length() > 0.0 && row.a > hp->lo + tol &&
                      row.a < hp->hi - tol;
      if (interior) {
        row.delta0 = table.hyp_dim;
        row.flag = "hp_clamped";
      } else {
        row.flag = "hp";
      }
    }
    return row;
  };

  std::size_t workers = query.threads ? query.threads
                                      : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, grid.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t r; (r = next.fetch_add(1)) < grid.size();)
      table.rows[r] = eval_row(r);
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return table;
}

std::vector<UnimodalViolation> check_unimodal(const SpectrumTable& table) {
  std::vector<UnimodalViolation> out;
  const auto& rows = table.rows;
  const double slack = 2.0 * table.tol_delta;
  for (std::size_t j = 1; j + 1 < rows.size(); ++j) {
    if (std::isnan(rows[j].delta0)) continue;
    for (std::size_t i = 0; i < j; ++i) {
      if (std::isnan(rows[i].delta0) || rows[i].delta0 == kNegInf) continue;
      for (std::size_t k = j + 1; k < rows.size(); ++k) {
        if (std::isnan(rows[k].delta0) || rows[k].delta0 == kNegInf) continue;
        double floor = std::min(rows[i].delta0, rows[k].delta0);
        if (rows[j].delta0 < floor - slack)
          out.push_back({i, j, k, floor - rows[j].delta0});
      }
    }
  }
  return out;
}

SemicontinuityReport check_semicontinuity(const SpectrumTable& table,
                                          const SpectrumTable& refined) {
  SemicontinuityReport rep;
  const auto& fine = refined.rows;
  const double slack = 2.0 * std::max(table.tol_delta, refined.tol_delta);
  auto finite = [](double v) { return std::isfinite(v); };
  auto find_fine = [&](double a) -> std::ptrdiff_t {
    for (std::size_t k = 0; k < fine.size(); ++k)
      if (std::fabs(fine[k].a - a) <= 1e-12 * std::max(1.0, std::fabs(a)))
        return std::ptrdiff_t(k);
    return -1;
  };
  auto add = [&](double a, const char* kind, double dev, double allowed) {
    rep.violations.push_back({a, kind, dev, allowed});
  };

  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const SpectrumRow& row = table.rows[i];
    if (!row.in_h || !finite(row.delta0)) continue;
    ++rep.checked;
    std::ptrdiff_t k = find_fine(row.a);
    if (k < 0) {
      add(row.a, "grid", 0.0, 0.0);
      continue;
    }
    const double v = row.delta0;
    if (finite(fine[k].delta0) && std::fabs(fine[k].delta0 - v) > slack)
      add(row.a, "consistency", std::fabs(fine[k].delta0 - v), slack);

    const bool hp_boundary =
        table.hp && (std::fabs(row.a - table.hp->lo) <= 1e-12 ||
                     std::fabs(row.a - table.hp->hi) <= 1e-12);
    if (hp_boundary) {
      // Lower semicontinuity only: nearby values may jump up, not down.
      for (std::ptrdiff_t n : {k - 1, k + 1}) {
        if (n < 0 || n >= std::ptrdiff_t(fine.size())) continue;
        if (fine[n].in_h && finite(fine[n].delta0) && fine[n].delta0 < v - slack)
          add(row.a, "lsc", v - fine[n].delta0, slack);
      }
      continue;
    }
    if (row.in_hp) continue;
    if (k == 0 || k + 1 >= std::ptrdiff_t(fine.size())) continue;
    const SpectrumRow& l = fine[k - 1];
    const SpectrumRow& r = fine[k + 1];
    if (!finite(l.delta0) || !finite(r.delta0)) continue;

    // Modulus from refined slopes in the coarse window, leaving out the two
    // pairs that touch a itself.
    double a_lo = i > 0 ? table.rows[i - 1].a : row.a;
    double a_hi = i + 1 < table.rows.size() ? table.rows[i + 1].a : row.a;
    double slope = 0.0;
    for (std::size_t n = 0; n + 1 < fine.size(); ++n) {
      if (std::ptrdiff_t(n) == k - 1 || std::ptrdiff_t(n) == k) continue;
      if (fine[n].a < a_lo - 1e-12 || fine[n + 1].a > a_hi + 1e-12) continue;
      if (!finite(fine[n].delta0) || !finite(fine[n + 1].delta0)) continue;
      double w = fine[n + 1].a - fine[n].a;
      if (w > 0.0)
        slope = std::max(slope, std::fabs(fine[n + 1].delta0 - fine[n].delta0) / w);
    }
    double t = (row.a - l.a) / (r.a - l.a);
    double interp = l.delta0 + t * (r.delta0 - l.delta0);
    double h = std::max(row.a - l.a, r.a - row.a);
    double allowed = 2.0 * slope * h + slack;
    if (std::fabs(v - interp) > allowed)
      add(row.a, "continuity", std::fabs(v - interp), allowed);
  }
  rep.pass = rep.violations.empty();
  return rep;
}

}  // namespace birkhoff
