#include "birkhoff/interval_maps.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "birkhoff/error.hpp"

namespace birkhoff {

namespace {

constexpr double kDomainTol = 1e-12;
constexpr double kRangeTol = 1e-9;
constexpr double kParabolicTol = 1e-12;
constexpr std::size_t kMonotoneSamples = 10000;

[[noreturn]] void map_error(ErrorCode code, const char* op,
                            const std::string& msg) {
  throw Error(code, "interval_maps", op, msg);
}

// Minimizes (sign = +1) or maximizes (sign = -1) fn on [a, b].
double golden_extremum(const std::function<double(double)>& fn, double a,
                       double b, double sign) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = sign * fn(c), fd = sign * fn(d);
  for (int it = 0; it < 80 && (b - a) > 1e-15 * (1.0 + std::fabs(a)); ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = sign * fn(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = sign * fn(d);
    }
  }
  return sign * std::min(fc, fd);
}

Interval function_range(const std::function<double(double)>& fn,
                        const Interval& dom) {
  constexpr int kSamples = 64;
  std::vector<double> xs(kSamples + 1), ys(kSamples + 1);
  for (int k = 0; k <= kSamples; ++k) {
    xs[k] = dom.lo + dom.length() * double(k) / kSamples;
    ys[k] = fn(xs[k]);
  }
  xs[kSamples] = dom.hi;
  ys[kSamples] = fn(dom.hi);
  auto [mn, mx] = std::minmax_element(ys.begin(), ys.end());
  double lo = *mn, hi = *mx;
  auto refine = [&](std::size_t k, double sign) {
    if (k == 0 || k == std::size_t(kSamples)) return;
    double v = golden_extremum(fn, xs[k - 1], xs[k + 1], sign);
    if (sign > 0)
      lo = std::min(lo, v);
    else
      hi = std::max(hi, v);
  };
  refine(std::size_t(mn - ys.begin()), 1.0);
  refine(std::size_t(mx - ys.begin()), -1.0);
  return {lo, hi};
}

}  // namespace

// ---------------------------------------------------------------- Branch

Branch::Branch(const BranchSpec& spec) : spec_(spec), domain_(spec.domain) {
  if (!(domain_.lo < domain_.hi))
    map_error(ErrorCode::InvalidArgument, "build_map", "empty branch domain");
  if (spec_.kind == BranchKind::general) {
    forward_ = Expression::parse(spec_.forward);
    derivative_ = Expression::parse(spec_.derivative);
  }
  increasing_ = derivative(domain_.midpoint()) > 0.0;
}

double Branch::operator()(double x) const {
  switch (spec_.kind) {
    case BranchKind::affine: return spec_.slope * x + spec_.intercept;
    case BranchKind::power:
      return x + spec_.coefficient * std::pow(x, 1.0 + spec_.exponent) -
             spec_.shift;
    case BranchKind::general: return (*forward_)(x);
  }
  return 0.0;
}

double Branch::derivative(double x) const {
  switch (spec_.kind) {
    case BranchKind::affine: return spec_.slope;
    case BranchKind::power:
      return 1.0 + spec_.coefficient * (1.0 + spec_.exponent) *
                       std::pow(x, spec_.exponent);
    case BranchKind::general: return (*derivative_)(x);
  }
  return 0.0;
}

Interval Branch::image() const {
  double a = (*this)(domain_.lo), b = (*this)(domain_.hi);
  return {std::min(a, b), std::max(a, b)};
}

double Branch::inverse(double y) const {
  Interval img = image();
  y = std::clamp(y, img.lo, img.hi);
  if (spec_.kind == BranchKind::affine)
    return std::clamp((y - spec_.intercept) / spec_.slope, domain_.lo,
                      domain_.hi);
  double lo = domain_.lo, hi = domain_.hi;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    bool below = (*this)(mid) < y;
    if (below == increasing_)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// ------------------------------------------------------------------ Map

PiecewiseMonotoneMap::PiecewiseMonotoneMap(std::vector<Branch> branches,
                                           bool repeller,
                                           std::vector<ParabolicPoint> parabolic)
    : branches_(std::move(branches)),
      repeller_(repeller),
      parabolic_(std::move(parabolic)) {}

std::vector<double> PiecewiseMonotoneMap::breakpoints() const {
  std::vector<double> pts;
  for (const auto& b : branches_) {
    pts.push_back(b.domain().lo);
    pts.push_back(b.domain().hi);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

bool PiecewiseMonotoneMap::is_interior_breakpoint(double x) const {
  if (x <= 0.0 || x >= 1.0) return false;
  for (const auto& b : branches_)
    if (x == b.domain().lo || x == b.domain().hi) return true;
  return false;
}

std::optional<std::size_t> PiecewiseMonotoneMap::locate(double x) const {
  for (std::size_t i = 0; i < branches_.size(); ++i)
    if (branches_[i].domain().contains(x)) return i;
  return std::nullopt;
}

bool PiecewiseMonotoneMap::all_affine() const {
  return std::all_of(branches_.begin(), branches_.end(), [](const Branch& b) {
    return b.kind() == BranchKind::affine;
  });
}

PiecewiseMonotoneMap build_map(const std::vector<BranchSpec>& branch_specs,
                               bool repeller) {
  if (branch_specs.empty())
    map_error(ErrorCode::InvalidArgument, "build_map", "no branches");
  std::vector<Branch> branches;
  for (const auto& spec : branch_specs) {
    if (spec.domain.lo < -kDomainTol || spec.domain.hi > 1.0 + kDomainTol)
      map_error(ErrorCode::InvalidArgument, "build_map",
                "branch domain outside [0,1]");
    branches.emplace_back(spec);
  }
  std::sort(branches.begin(), branches.end(),
            [](const Branch& a, const Branch& b) {
              return a.domain().lo < b.domain().lo;
            });

  for (std::size_t i = 1; i < branches.size(); ++i) {
    const Interval& prev = branches[i - 1].domain();
    const Interval& cur = branches[i].domain();
    if (cur.lo < prev.hi - kDomainTol)
      map_error(ErrorCode::OverlappingDomains, "build_map",
                "branches " + std::to_string(i - 1) + " and " +
                    std::to_string(i) + " have intersecting interiors");
    if (!repeller && cur.lo > prev.hi + kDomainTol)
      map_error(ErrorCode::IncompleteCover, "build_map",
                "gap between branches without repeller flag");
  }
  if (!repeller && (branches.front().domain().lo > kDomainTol ||
                    branches.back().domain().hi < 1.0 - kDomainTol))
    map_error(ErrorCode::IncompleteCover, "build_map",
              "branches do not cover [0,1]");

  std::vector<ParabolicPoint> parabolic;
  for (std::size_t bi = 0; bi < branches.size(); ++bi) {
    const Branch& b = branches[bi];
    const Interval& d = b.domain();
    const double sign = b.increasing() ? 1.0 : -1.0;
    double prev_value = b(d.lo);
    auto check_range = [&](double y) {
      if (!(y >= -kRangeTol && y <= 1.0 + kRangeTol))
        map_error(ErrorCode::RangeEscape, "build_map",
                  "branch " + std::to_string(bi) + " leaves [0,1]");
    };
    check_range(prev_value);
    check_range(b(d.hi));
    for (std::size_t k = 0; k < kMonotoneSamples; ++k) {
      double x = d.lo + d.length() * (double(k) + 0.5) / kMonotoneSamples;
      double dv = b.derivative(x);
      double y = b(x);
      check_range(y);
      if (!(sign * dv > 0.0) || sign * (y - prev_value) < 0.0)
        map_error(ErrorCode::NonMonotoneBranch, "build_map",
                  "branch " + std::to_string(bi) +
                      " changes monotonicity near x=" + std::to_string(x));
      prev_value = y;
    }
    for (double p : {d.lo, d.hi}) {
      if (std::fabs(b(p) - p) <= kParabolicTol &&
          std::fabs(std::fabs(b.derivative(p)) - 1.0) <= kParabolicTol)
        parabolic.push_back({p, bi});
    }
  }
  return PiecewiseMonotoneMap(std::move(branches), repeller,
                              std::move(parabolic));
}

PiecewiseMonotoneMap manneville_pomeau(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0))
    map_error(ErrorCode::InvalidArgument, "manneville_pomeau",
              "gamma must lie in (0,1)");
  // x* solves x + x^(1+gamma) = 1.
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid + std::pow(mid, 1.0 + gamma) < 1.0)
      lo = mid;
    else
      hi = mid;
  }
  double split = 0.5 * (lo + hi);
  BranchSpec left;
  left.domain = {0.0, split};
  left.kind = BranchKind::power;
  left.coefficient = 1.0;
  left.exponent = gamma;
  BranchSpec right = left;
  right.domain = {split, 1.0};
  right.shift = 1.0;
  return build_map({left, right});
}

// ------------------------------------------------------------ Potential

RegularPotential::RegularPotential(std::vector<PotentialPiece> pieces)
    : pieces_(std::move(pieces)) {
  if (pieces_.empty())
    map_error(ErrorCode::InvalidArgument, "regular_potential", "no pieces");
  std::sort(pieces_.begin(), pieces_.end(),
            [](const PotentialPiece& a, const PotentialPiece& b) {
              return a.domain.lo < b.domain.lo;
            });
  bool all_constant = true;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    auto& p = pieces_[i];
    if (!(p.domain.lo < p.domain.hi))
      map_error(ErrorCode::InvalidArgument, "regular_potential",
                "empty piece");
    if (i > 0 && p.domain.lo < pieces_[i - 1].domain.hi - kDomainTol)
      map_error(ErrorCode::OverlappingDomains, "regular_potential",
                "pieces overlap");
    if (p.constant) {
      double c = *p.constant;
      p.fn = [c](double) { return c; };
    }
    all_constant = all_constant && p.constant.has_value();
    double l = p.fn(p.domain.lo), r = p.fn(p.domain.hi);
    if (!std::isfinite(l) || !std::isfinite(r))
      map_error(ErrorCode::InvalidArgument, "regular_potential",
                "piece without finite one-sided limits");
    right_[p.domain.lo] = l;
    left_[p.domain.hi] = r;
  }
  kind_ = all_constant ? Kind::step : Kind::smooth_piecewise;
}

RegularPotential RegularPotential::constant(double c, Interval domain) {
  return RegularPotential({PotentialPiece{domain, {}, c}});
}

RegularPotential RegularPotential::step(const std::vector<Interval>& cells,
                                        std::span<const double> values) {
  if (cells.size() != values.size())
    map_error(ErrorCode::InvalidArgument, "regular_potential",
              "cell/value count mismatch");
  std::vector<PotentialPiece> pieces;
  for (std::size_t i = 0; i < cells.size(); ++i)
    pieces.push_back({cells[i], {}, values[i]});
  return RegularPotential(std::move(pieces));
}

RegularPotential RegularPotential::from_expression(const Expression& e,
                                                   Interval domain) {
  if (!e.depends_on_x()) return constant(e(0.0), domain);
  return RegularPotential({PotentialPiece{domain, e, std::nullopt}});
}

double RegularPotential::left_limit(double x) const {
  for (auto it = pieces_.rbegin(); it != pieces_.rend(); ++it)
    if (it->domain.lo < x && x <= it->domain.hi) return it->fn(x);
  map_error(ErrorCode::InvalidArgument, "regular_potential",
            "no left limit at " + std::to_string(x));
}

double RegularPotential::right_limit(double x) const {
  for (const auto& p : pieces_)
    if (p.domain.lo <= x && x < p.domain.hi) return p.fn(x);
  map_error(ErrorCode::InvalidArgument, "regular_potential",
            "no right limit at " + std::to_string(x));
}

double RegularPotential::operator()(double x) const {
  auto l = left_.find(x);
  auto r = right_.find(x);
  if (l != left_.end() && r != right_.end())
    return 0.5 * (l->second + r->second);
  if (l != left_.end()) return l->second;
  if (r != right_.end()) return r->second;
  for (const auto& p : pieces_)
    if (p.domain.contains(x)) return p.fn(x);
  map_error(ErrorCode::InvalidArgument, "regular_potential",
            "potential undefined at " + std::to_string(x));
}

std::vector<double> RegularPotential::interior_breakpoints() const {
  std::vector<double> pts;
  for (const auto& [x, v] : left_)
    if (right_.count(x)) pts.push_back(x);
  return pts;
}

Interval RegularPotential::bounds_on(const Interval& cell) const {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& p : pieces_) {
    if (overlap_length(p.domain, cell) <= 0.0) continue;
    Interval sub{std::max(p.domain.lo, cell.lo), std::min(p.domain.hi, cell.hi)};
    Interval r = p.constant ? Interval{*p.constant, *p.constant}
                            : function_range(p.fn, sub);
    lo = std::min(lo, r.lo);
    hi = std::max(hi, r.hi);
  }
  if (lo > hi)
    map_error(ErrorCode::InvalidArgument, "regular_potential",
              "cell outside the potential's domain");
  return {lo, hi};
}

double RegularPotential::sup_abs() const {
  double s = 0.0;
  for (const auto& p : pieces_) {
    Interval r = bounds_on(p.domain);
    s = std::max({s, std::fabs(r.lo), std::fabs(r.hi)});
  }
  return s;
}

RegularPotential log_derivative(const PiecewiseMonotoneMap& map) {
  std::vector<PotentialPiece> pieces;
  for (const auto& b : map.branches()) {
    PotentialPiece piece{b.domain(), {}, std::nullopt};
    if (b.kind() == BranchKind::affine) {
      piece.constant = std::log(std::fabs(b.spec().slope));
    } else {
      piece.fn = [b](double x) { return std::log(std::fabs(b.derivative(x))); };
    }
    pieces.push_back(std::move(piece));
  }
  return RegularPotential(std::move(pieces));
}

// -------------------------------------------------------- Step sandwich

StepApproximation step_approximation(const RegularPotential& pot,
                                     const PiecewiseMonotoneMap& map,
                                     double eps, std::size_t max_cells) {
  if (!(eps > 0.0))
    map_error(ErrorCode::InvalidArgument, "step_approximation", "eps <= 0");
  std::vector<Interval> cells;
  std::vector<double> cuts = pot.interior_breakpoints();
  for (const auto& p : pot.pieces()) {
    cuts.push_back(p.domain.lo);
    cuts.push_back(p.domain.hi);
  }
  for (const auto& b : map.branches()) {
    std::vector<double> pts{b.domain().lo, b.domain().hi};
    for (double c : cuts)
      if (c > b.domain().lo && c < b.domain().hi) pts.push_back(c);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    for (std::size_t i = 0; i + 1 < pts.size(); ++i)
      cells.push_back({pts[i], pts[i + 1]});
  }

  std::vector<Interval> bounds;
  double gap = 0.0;
  for (;;) {
    bounds.clear();
    gap = 0.0;
    std::size_t wide = 0;
    for (const auto& c : cells) {
      bounds.push_back(pot.bounds_on(c));
      double g = bounds.back().length();
      gap = std::max(gap, g);
      if (g > eps) ++wide;
    }
    if (wide == 0) break;
    if (cells.size() + wide > max_cells)
      map_error(ErrorCode::UnreachableTolerance, "step_approximation",
                "achieved gap " + std::to_string(gap) + " with " +
                    std::to_string(cells.size()) + " cells");
    std::vector<Interval> next;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (bounds[i].length() > eps) {
        double m = cells[i].midpoint();
        next.push_back({cells[i].lo, m});
        next.push_back({m, cells[i].hi});
      } else {
        next.push_back(cells[i]);
      }
    }
    cells = std::move(next);
  }

  std::vector<double> lows, highs;
  for (const auto& b : bounds) {
    lows.push_back(b.lo);
    highs.push_back(b.hi);
  }
  return StepApproximation{RegularPotential::step(cells, lows),
                           RegularPotential::step(cells, highs), cells, gap};
}

// ------------------------------------------------------------- Cylinders

std::optional<Interval> cylinder_interval(const PiecewiseMonotoneMap& map,
                                          const CylinderWord& word) {
  if (word.symbols.empty())
    map_error(ErrorCode::InvalidArgument, "cylinder_interval", "empty word");
  for (auto s : word.symbols)
    if (s >= map.size())
      map_error(ErrorCode::InvalidArgument, "cylinder_interval",
                "symbol " + std::to_string(s) + " has no branch");
  Interval cur = map.branch(word.symbols.back()).domain();
  for (std::size_t k = word.symbols.size() - 1; k-- > 0;) {
    const Branch& b = map.branch(word.symbols[k]);
    auto hit = intersect(cur, b.image());
    if (!hit || hit->length() <= 1e-15 * std::max(1.0, cur.length()))
      return std::nullopt;
    double a = b.inverse(hit->lo), c = b.inverse(hit->hi);
    cur = {std::min(a, c), std::max(a, c)};
  }
  return cur;
}

BirkhoffSum birkhoff_sum(const PiecewiseMonotoneMap& map,
                         const RegularPotential& pot, double x,
                         std::size_t n) {
  if (!(x >= 0.0 && x <= 1.0))
    map_error(ErrorCode::InvalidArgument, "birkhoff_sum", "x outside [0,1]");
  BirkhoffSum out;
  for (std::size_t i = 0; i < n; ++i) {
    if (map.is_interior_breakpoint(x))
      map_error(ErrorCode::OrbitHitsBreakpoint, "birkhoff_sum",
                "orbit hits a breakpoint at step " + std::to_string(i));
    auto b = map.locate(x);
    if (!b)
      map_error(ErrorCode::OrbitLeavesDomain, "birkhoff_sum",
                "orbit leaves the branch domains at step " + std::to_string(i));
    out.sum += pot(x);
    ++out.steps;
    x = map.branch(*b)(x);
  }
  return out;
}

}  // namespace birkhoff
