#include "birkhoff/markov_thermo.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <unordered_map>

#include "birkhoff/error.hpp"

namespace birkhoff {

namespace {

constexpr double kCoverTol = 1e-9;
constexpr std::size_t kMaxPowerSteps = 100000;

[[noreturn]] void thermo_error(ErrorCode code, const char* op,
                               const std::string& msg) {
  throw Error(code, "markov_thermo", op, msg);
}

struct WordHash {
  std::size_t operator()(const std::vector<std::size_t>& w) const noexcept {
    std::size_t h = 1469598103934665603ull;
    for (auto s : w) h = (h ^ (s + 0x9e3779b97f4a7c15ull)) * 1099511628211ull;
    return h;
  }
};

// Power iteration for the Perron root of a nonnegative irreducible operator.
// The update v <- Mv + r v with r the current root estimate damps the
// rotation of periodic graphs; convergence is declared when the
// Collatz-Wielandt bounds min/max (Mv)_i / v_i agree to 1e-13.
template <class Apply>
std::pair<double, std::vector<double>> power_iterate(std::size_t n,
                                                     Apply apply,
                                                     std::size_t& steps) {
  std::vector<double> v(n, 1.0 / double(n)), w(n);
  double prev_lo = 0.0, prev_hi = 0.0;
  for (steps = 1; steps <= kMaxPowerSteps; ++steps) {
    apply(v, w);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (v[i] > 1e-280) {
        double r = w[i] / v[i];
        lo = std::min(lo, r);
        hi = std::max(hi, r);
      }
    }
    if (!(hi > 0.0))
      thermo_error(ErrorCode::NoConvergence, "pressure_locally_constant",
                   "transfer matrix has zero spectral radius");
    if (hi - lo <= 1e-13 * hi ||
        (steps > 3 && std::fabs(hi - prev_hi) <= 1e-15 * hi &&
         std::fabs(lo - prev_lo) <= 1e-15 * hi && hi - lo <= 1e-11 * hi)) {
      double sum = std::accumulate(w.begin(), w.end(), 0.0);
      for (auto& x : w) x /= sum;
      return {0.5 * (lo + hi), w};
    }
    prev_lo = lo;
    prev_hi = hi;
    double shift = 0.5 * (lo + hi);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = w[i] + shift * v[i];
      sum += v[i];
    }
    for (auto& x : v) x /= sum;
  }
  thermo_error(ErrorCode::NoConvergence, "pressure_locally_constant",
               "power iteration exceeded 1e5 steps (relative residual " +
                   std::to_string(prev_hi - prev_lo) + ")");
}

double shift_of(std::span<const double> psi) {
  double s = -std::numeric_limits<double>::infinity();
  for (double x : psi) s = std::max(s, x);
  return s;
}

std::vector<double> weights(std::span<const double> psi, double shift) {
  std::vector<double> w(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i)
    w[i] = std::max(std::exp(psi[i] - shift), 1e-300);
  return w;
}

bool has_cycle(const MarkovSystem& sys, const std::vector<std::size_t>& comp) {
  if (comp.size() > 1) return true;
  return sys.has_edge(comp[0], comp[0]);
}

}  // namespace

// ---------------------------------------------------------- MarkovSystem

MarkovSystem::MarkovSystem(std::vector<Interval> cells,
                           std::vector<std::vector<std::size_t>> successors,
                           std::vector<std::size_t> cell_branch,
                           std::shared_ptr<const PiecewiseMonotoneMap> map)
    : cells_(std::move(cells)),
      successors_(std::move(successors)),
      cell_branch_(std::move(cell_branch)),
      map_(std::move(map)) {
  if (cells_.size() != successors_.size() ||
      cell_branch_.size() != successors_.size())
    thermo_error(ErrorCode::InvalidArgument, "markov_system",
                 "inconsistent sizes");
  for (auto& s : successors_) {
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    for (auto j : s)
      if (j >= successors_.size())
        thermo_error(ErrorCode::InvalidArgument, "markov_system",
                     "successor out of range");
  }
}

MarkovSystem MarkovSystem::symbolic(const Transition01& transition) {
  const std::size_t m = transition.size();
  if (m == 0)
    thermo_error(ErrorCode::InvalidArgument, "markov_system", "empty matrix");
  std::vector<std::vector<std::size_t>> succ(m);
  std::vector<Interval> cells;
  for (std::size_t i = 0; i < m; ++i) {
    if (transition[i].size() != m)
      thermo_error(ErrorCode::InvalidArgument, "markov_system",
                   "transition matrix is not square");
    for (std::size_t j = 0; j < m; ++j) {
      if (transition[i][j] != 0 && transition[i][j] != 1)
        thermo_error(ErrorCode::InvalidArgument, "markov_system",
                     "transition entries must be 0 or 1");
      if (transition[i][j]) succ[i].push_back(j);
    }
    cells.push_back({double(i), double(i + 1)});
  }
  std::vector<std::size_t> branch(m);
  std::iota(branch.begin(), branch.end(), 0);
  return MarkovSystem(std::move(cells), std::move(succ), std::move(branch),
                      nullptr);
}

bool MarkovSystem::has_edge(std::size_t i, std::size_t j) const {
  const auto& s = successors_.at(i);
  return std::binary_search(s.begin(), s.end(), j);
}

std::size_t MarkovSystem::edge_count() const {
  std::size_t e = 0;
  for (const auto& s : successors_) e += s.size();
  return e;
}

Transition01 MarkovSystem::dense_transition() const {
  Transition01 a(size(), std::vector<int>(size(), 0));
  for (std::size_t i = 0; i < size(); ++i)
    for (auto j : successors_[i]) a[i][j] = 1;
  return a;
}

void MarkovSystem::set_potential(const std::string& id,
                                 std::vector<double> values) {
  if (values.size() != size())
    thermo_error(ErrorCode::InvalidArgument, "markov_system",
                 "potential '" + id + "' has wrong length");
  potentials_[id] = std::move(values);
}

const std::vector<double>& MarkovSystem::potential(const std::string& id) const {
  auto it = potentials_.find(id);
  if (it == potentials_.end())
    thermo_error(ErrorCode::InvalidArgument, "markov_system",
                 "no potential '" + id + "'");
  return it->second;
}

MarkovSystem MarkovSystem::restrict_to(std::span<const std::size_t> keep) const {
  std::vector<std::size_t> index(size(), std::numeric_limits<std::size_t>::max());
  for (std::size_t k = 0; k < keep.size(); ++k) index[keep[k]] = k;
  std::vector<Interval> cells;
  std::vector<std::vector<std::size_t>> succ;
  std::vector<std::size_t> branch;
  std::vector<std::vector<std::size_t>> words;
  for (auto i : keep) {
    cells.push_back(cells_[i]);
    branch.push_back(cell_branch_[i]);
    std::vector<std::size_t> s;
    for (auto j : successors_[i])
      if (index[j] != std::numeric_limits<std::size_t>::max())
        s.push_back(index[j]);
    succ.push_back(std::move(s));
    if (!words_.empty()) words.push_back(words_[i]);
  }
  MarkovSystem out(std::move(cells), std::move(succ), std::move(branch), map_);
  out.words_ = std::move(words);
  for (const auto& [id, vals] : potentials_) {
    std::vector<double> v;
    for (auto i : keep) v.push_back(vals[i]);
    out.potentials_[id] = std::move(v);
  }
  return out;
}

// ------------------------------------------------------------- structure

std::vector<std::vector<std::size_t>> strongly_connected_components(
    const MarkovSystem& sys) {
  // Iterative Tarjan.
  const std::size_t n = sys.size();
  constexpr std::size_t kUnset = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> index(n, kUnset), low(n, 0), stack;
  std::vector<bool> on_stack(n, false);
  std::vector<std::vector<std::size_t>> comps;
  std::size_t counter = 0;
  struct Frame {
    std::size_t v;
    std::size_t next;
  };
  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnset) continue;
    std::vector<Frame> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame& f = call.back();
      auto succ = sys.successors(f.v);
      if (f.next < succ.size()) {
        std::size_t w = succ[f.next++];
        if (index[w] == kUnset) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
        continue;
      }
      std::size_t v = f.v;
      if (low[v] == index[v]) {
        std::vector<std::size_t> comp;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        comps.push_back(std::move(comp));
      }
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
    }
  }
  std::sort(comps.begin(), comps.end());
  return comps;
}

bool is_irreducible(const MarkovSystem& sys) {
  auto comps = strongly_connected_components(sys);
  return comps.size() == 1 && has_cycle(sys, comps[0]);
}

std::vector<Interval> cells_from_partition(const std::vector<double>& partition) {
  if (partition.size() < 2)
    thermo_error(ErrorCode::InvalidArgument, "build_markov_system",
                 "partition needs at least two points");
  std::vector<Interval> cells;
  for (std::size_t i = 0; i + 1 < partition.size(); ++i) {
    if (!(partition[i] < partition[i + 1]))
      thermo_error(ErrorCode::InvalidArgument, "build_markov_system",
                   "partition is not increasing");
    cells.push_back({partition[i], partition[i + 1]});
  }
  return cells;
}

std::optional<Interval> cell_cylinder(const MarkovSystem& sys,
                                      std::span<const std::size_t> word) {
  const PiecewiseMonotoneMap* map = sys.source_map();
  if (!map)
    thermo_error(ErrorCode::InvalidArgument, "cell_cylinder",
                 "system has no interval map");
  if (word.empty())
    thermo_error(ErrorCode::InvalidArgument, "cell_cylinder", "empty word");
  Interval cur = sys.cell(word.back());
  for (std::size_t k = word.size() - 1; k-- > 0;) {
    const Branch& b = map->branch(sys.cell_branch(word[k]));
    auto hit = intersect(cur, b.image());
    if (!hit || (hit->length() <= 0.0 && cur.length() > 0.0)) return std::nullopt;
    double a = b.inverse(hit->lo), c = b.inverse(hit->hi);
    Interval pre{std::min(a, c), std::max(a, c)};
    auto in_cell = intersect(pre, sys.cell(word[k]));
    if (!in_cell || (in_cell->length() <= 0.0 && pre.length() > 0.0))
      return std::nullopt;
    cur = *in_cell;
  }
  return cur;
}

MarkovSystem build_markov_system(
    std::shared_ptr<const PiecewiseMonotoneMap> map,
    const std::vector<Interval>& input_cells) {
  if (!map)
    thermo_error(ErrorCode::InvalidArgument, "build_markov_system", "no map");
  std::vector<Interval> cells = input_cells;
  if (cells.empty())
    for (const auto& b : map->branches()) cells.push_back(b.domain());
  std::sort(cells.begin(), cells.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  const std::size_t m = cells.size();
  std::vector<std::size_t> branch(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!(cells[i].lo < cells[i].hi))
      thermo_error(ErrorCode::InvalidArgument, "build_markov_system",
                   "empty cell");
    if (i > 0 && cells[i].lo < cells[i - 1].hi - 1e-12)
      thermo_error(ErrorCode::InvalidArgument, "build_markov_system",
                   "cells overlap");
    bool found = false;
    for (std::size_t b = 0; b < map->size(); ++b)
      if (map->branch(b).domain().contains(cells[i], 1e-12)) {
        branch[i] = b;
        found = true;
        break;
      }
    if (!found)
      thermo_error(ErrorCode::NotMarkov, "build_markov_system",
                   "cell " + std::to_string(i) +
                       " straddles a branch boundary (partition does not "
                       "refine the branch partition)");
  }

  std::vector<std::vector<std::size_t>> succ(m);
  for (std::size_t i = 0; i < m; ++i) {
    const Branch& b = map->branch(branch[i]);
    double y0 = b(cells[i].lo), y1 = b(cells[i].hi);
    Interval image{std::min(y0, y1), std::max(y0, y1)};
    for (std::size_t j = 0; j < m; ++j) {
      double ov = overlap_length(image, cells[j]);
      if (ov >= cells[j].length() - kCoverTol)
        succ[i].push_back(j);
      else if (ov > kCoverTol)
        thermo_error(ErrorCode::NotMarkov, "build_markov_system",
                     "T(Y_" + std::to_string(i) + ") partially covers Y_" +
                         std::to_string(j) + " (overlap " +
                         std::to_string(ov) + ")");
    }
  }
  MarkovSystem full(cells, succ, branch, map);

  // Drop dead states until every cell has a successor and a predecessor.
  std::vector<bool> alive(m, true);
  for (bool changed = true; changed;) {
    changed = false;
    std::vector<std::size_t> indeg(m, 0), outdeg(m, 0);
    for (std::size_t i = 0; i < m; ++i) {
      if (!alive[i]) continue;
      for (auto j : succ[i])
        if (alive[j]) {
          ++outdeg[i];
          ++indeg[j];
        }
    }
    for (std::size_t i = 0; i < m; ++i)
      if (alive[i] && (indeg[i] == 0 || outdeg[i] == 0)) {
        alive[i] = false;
        changed = true;
      }
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < m; ++i)
    if (alive[i]) keep.push_back(i);
  if (keep.empty())
    thermo_error(ErrorCode::TrivialCore, "build_markov_system",
                 "no recurrent cells");
  MarkovSystem pruned = full.restrict_to(keep);

  double best_entropy = 0.0;
  std::vector<std::size_t> best;
  for (const auto& comp : strongly_connected_components(pruned)) {
    if (!has_cycle(pruned, comp)) continue;
    MarkovSystem sub = pruned.restrict_to(comp);
    std::vector<double> zero(sub.size(), 0.0);
    double h = perron(sub, zero, false).log_radius;
    if (h > best_entropy + 1e-12) {
      best_entropy = h;
      best = comp;
    }
  }
  if (best.empty() || best_entropy <= 1e-12)
    thermo_error(ErrorCode::TrivialCore, "build_markov_system",
                 "irreducible core has zero entropy");
  MarkovSystem core = pruned.restrict_to(best);

  // Markov property on cylinder representatives to depth 3.
  std::function<void(std::vector<std::size_t>&)> check =
      [&](std::vector<std::size_t>& w) {
        if (!cell_cylinder(core, w))
          thermo_error(ErrorCode::NotMarkov, "build_markov_system",
                       "admissible word has an empty cylinder");
        if (w.size() == 3) return;
        for (auto j : core.successors(w.back())) {
          w.push_back(j);
          check(w);
          w.pop_back();
        }
      };
  if (core.edge_count() * core.size() <= 200000)
    for (std::size_t i = 0; i < core.size(); ++i) {
      std::vector<std::size_t> w{i};
      check(w);
    }
  return core;
}

std::vector<Interval> truncation_cells(const PiecewiseMonotoneMap& map,
                                       std::size_t level) {
  std::vector<Interval> cells;
  for (std::size_t bi = 0; bi < map.size(); ++bi) {
    const Branch& b = map.branch(bi);
    const ParabolicPoint* parabolic = nullptr;
    for (const auto& p : map.parabolic_points())
      if (p.branch == bi) parabolic = &p;
    if (!parabolic) {
      cells.push_back(b.domain());
      continue;
    }
    if (level == 0) continue;
    bool at_lo = parabolic->x == b.domain().lo;
    double z = at_lo ? b.domain().hi : b.domain().lo;
    for (std::size_t k = 0; k < level; ++k) {
      double next = b.inverse(z);
      cells.push_back({std::min(z, next), std::max(z, next)});
      z = next;
    }
  }
  std::sort(cells.begin(), cells.end(),
            [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
  return cells;
}

MarkovSystem refine_to_cylinders(const MarkovSystem& sys, std::size_t depth,
                                 std::size_t max_cells) {
  if (depth == 0)
    thermo_error(ErrorCode::InvalidArgument, "refine_to_cylinders",
                 "depth must be positive");
  std::vector<std::vector<std::size_t>> words;
  for (std::size_t i = 0; i < sys.size(); ++i) words.push_back({i});
  for (std::size_t d = 1; d < depth; ++d) {
    std::vector<std::vector<std::size_t>> next;
    for (const auto& w : words)
      for (auto j : sys.successors(w.back())) {
        next.push_back(w);
        next.back().push_back(j);
        if (next.size() > max_cells)
          thermo_error(ErrorCode::CapExceeded, "refine_to_cylinders",
                       "more than " + std::to_string(max_cells) + " cells");
      }
    words = std::move(next);
  }
  const std::size_t n = words.size();
  std::unordered_map<std::vector<std::size_t>, std::vector<std::size_t>, WordHash>
      by_prefix;
  for (std::size_t k = 0; k < n; ++k)
    by_prefix[std::vector<std::size_t>(words[k].begin(), words[k].end() - 1)]
        .push_back(k);
  std::vector<std::vector<std::size_t>> succ(n);
  std::vector<Interval> cells(n);
  std::vector<std::size_t> branch(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& w = words[k];
    if (depth == 1) {
      for (auto j : sys.successors(w[0])) succ[k].push_back(j);
    } else {
      std::vector<std::size_t> tail(w.begin() + 1, w.end());
      auto it = by_prefix.find(tail);
      if (it != by_prefix.end()) succ[k] = it->second;
    }
    branch[k] = sys.cell_branch(w[0]);
    if (sys.source_map()) {
      auto c = cell_cylinder(sys, w);
      cells[k] = c ? *c : Interval{sys.cell(w[0]).lo, sys.cell(w[0]).lo};
    } else {
      cells[k] = sys.cell(w[0]);
    }
  }
  MarkovSystem out(std::move(cells), std::move(succ), std::move(branch),
                   sys.shared_map());
  for (const auto& [id, vals] : sys.potentials()) {
    std::vector<double> v(n);
    for (std::size_t k = 0; k < n; ++k) v[k] = vals[words[k][0]];
    out.set_potential(id, std::move(v));
  }
  out.set_words(std::move(words));
  return out;
}

std::vector<Interval> cell_bounds(const MarkovSystem& sys,
                                  const RegularPotential& pot) {
  if (!sys.source_map())
    thermo_error(ErrorCode::InvalidArgument, "cell_values",
                 "symbolic systems carry no geometry");
  std::vector<Interval> out;
  for (const auto& c : sys.cells()) {
    if (c.length() > 0.0) {
      out.push_back(pot.bounds_on(c));
    } else {
      double v = pot(c.lo);
      out.push_back({v, v});
    }
  }
  return out;
}

std::vector<double> cell_values(const MarkovSystem& sys,
                                const RegularPotential& pot) {
  std::vector<double> v;
  for (const auto& b : cell_bounds(sys, pot)) v.push_back(b.midpoint());
  return v;
}

// -------------------------------------------------------- thermodynamics

PerronResult perron(const MarkovSystem& sys, std::span<const double> psi,
                    bool with_left) {
  const std::size_t n = sys.size();
  if (psi.size() != n)
    thermo_error(ErrorCode::InvalidArgument, "pressure_locally_constant",
                 "potential length does not match the system");
  for (double x : psi)
    if (!std::isfinite(x))
      thermo_error(ErrorCode::InvalidArgument, "pressure_locally_constant",
                   "potential is not finite");
  const double shift = shift_of(psi);
  const std::vector<double> w = weights(psi, shift);
  PerronResult out;
  std::size_t steps = 0;
  auto right = [&](const std::vector<double>& v, std::vector<double>& o) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (auto j : sys.successors(i)) s += v[j];
      o[i] = w[i] * s;
    }
  };
  auto [rho, r] = power_iterate(n, right, steps);
  out.log_radius = std::log(rho) + shift;
  out.right = std::move(r);
  out.iterations = steps;
  if (with_left) {
    auto left = [&](const std::vector<double>& v, std::vector<double>& o) {
      std::fill(o.begin(), o.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        double c = v[i] * w[i];
        for (auto j : sys.successors(i)) o[j] += c;
      }
    };
    auto [rho_l, l] = power_iterate(n, left, steps);
    (void)rho_l;
    out.left = std::move(l);
    out.iterations += steps;
  }
  return out;
}

double pressure_locally_constant(const MarkovSystem& sys,
                                 std::span<const double> psi) {
  if (psi.size() != sys.size())
    thermo_error(ErrorCode::InvalidArgument, "pressure_locally_constant",
                 "potential length does not match the system");
  auto comps = strongly_connected_components(sys);
  if (comps.size() == 1) {
    if (!has_cycle(sys, comps[0]))
      thermo_error(ErrorCode::InvalidArgument, "pressure_locally_constant",
                   "system has no cycles");
    return perron(sys, psi, false).log_radius;
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& comp : comps) {
    if (!has_cycle(sys, comp)) continue;
    MarkovSystem sub = sys.restrict_to(comp);
    std::vector<double> p;
    for (auto i : comp) p.push_back(psi[i]);
    best = std::max(best, perron(sub, p, false).log_radius);
  }
  if (!std::isfinite(best))
    thermo_error(ErrorCode::InvalidArgument, "pressure_locally_constant",
                 "system has no cycles");
  return best;
}

double topological_entropy(const MarkovSystem& sys) {
  std::vector<double> zero(sys.size(), 0.0);
  return pressure_locally_constant(sys, zero);
}

PressureBracket pressure_regular(const MarkovSystem& sys,
                                 const RegularPotential& pot, double tol,
                                 std::size_t max_cells) {
  if (!(tol > 0.0))
    thermo_error(ErrorCode::InvalidArgument, "pressure_regular", "tol <= 0");
  PressureBracket br;
  for (std::size_t depth = 1;; ++depth) {
    MarkovSystem refined =
        depth == 1 ? sys : refine_to_cylinders(sys, depth, max_cells);
    std::vector<double> lo, hi;
    for (const auto& b : cell_bounds(refined, pot)) {
      lo.push_back(b.lo);
      hi.push_back(b.hi);
    }
    br.lower = pressure_locally_constant(refined, lo);
    br.upper = pressure_locally_constant(refined, hi);
    br.cell_count = refined.size();
    if (br.upper - br.lower <= tol) {
      br.converged = true;
      return br;
    }
    if (refined.edge_count() > max_cells) {
      br.converged = false;
      return br;
    }
  }
}

MarkovMeasure equilibrium_measure(const MarkovSystem& sys,
                                  std::span<const double> psi) {
  if (!is_irreducible(sys))
    thermo_error(ErrorCode::InvalidArgument, "equilibrium_measure",
                 "system is not irreducible");
  const std::size_t n = sys.size();
  PerronResult pr = perron(sys, psi, true);
  const double shift = shift_of(psi);
  const std::vector<double> w = weights(psi, shift);
  const double rho = std::exp(pr.log_radius - shift);
  MarkovMeasure mu;
  mu.kernel.assign(n, std::vector<double>(n, 0.0));
  mu.stationary.resize(n);
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mu.stationary[i] = pr.left[i] * pr.right[i];
    z += mu.stationary[i];
  }
  for (auto& p : mu.stationary) p /= z;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (auto j : sys.successors(i)) {
      mu.kernel[i][j] = w[i] * pr.right[j] / (rho * pr.right[i]);
      row += mu.kernel[i][j];
    }
    for (auto j : sys.successors(i)) mu.kernel[i][j] /= row;
  }
  MarkovMeasure full = markov_measure_from_kernel(sys, mu.kernel);
  full.stationary = mu.stationary;
  // Recompute integrals against the eigenvector stationary vector.
  full.entropy = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (auto j : sys.successors(i)) {
      double q = full.kernel[i][j];
      if (q > 0.0) full.entropy -= full.stationary[i] * q * std::log(q);
    }
  full.integrals.clear();
  for (const auto& [id, vals] : sys.potentials())
    full.integrals[id] = integrate(full, vals);
  full.integrals["psi"] = integrate(full, psi);
  full.lyapunov = full.integrals.count("phi")
                      ? full.integrals.at("phi")
                      : std::numeric_limits<double>::quiet_NaN();
  return full;
}

double integrate(const MarkovMeasure& mu, std::span<const double> values) {
  if (values.size() != mu.stationary.size())
    thermo_error(ErrorCode::InvalidArgument, "integrate", "length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) s += mu.stationary[i] * values[i];
  return s;
}

MarkovMeasure markov_measure_from_kernel(
    const MarkovSystem& sys, const std::vector<std::vector<double>>& kernel) {
  const std::size_t n = sys.size();
  if (kernel.size() != n)
    thermo_error(ErrorCode::InvalidArgument, "markov_measure", "kernel size");
  for (std::size_t i = 0; i < n; ++i) {
    if (kernel[i].size() != n)
      thermo_error(ErrorCode::InvalidArgument, "markov_measure", "kernel size");
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (kernel[i][j] < 0.0 || (kernel[i][j] > 0.0 && !sys.has_edge(i, j)))
        thermo_error(ErrorCode::InvalidArgument, "markov_measure",
                     "kernel not supported on the transition graph");
      row += kernel[i][j];
    }
    if (std::fabs(row - 1.0) > 1e-9)
      thermo_error(ErrorCode::InvalidArgument, "markov_measure",
                   "kernel row does not sum to 1");
  }
  // Solve pi (Q - I) = 0 with sum(pi) = 1 by Gaussian elimination.
  std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      a[i][j] = kernel[j][i] - (i == j ? 1.0 : 0.0);
  for (std::size_t j = 0; j <= n; ++j) a[n - 1][j] = 1.0;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    if (std::fabs(a[piv][col]) < 1e-12)
      thermo_error(ErrorCode::InvalidArgument, "markov_measure",
                   "stationary distribution is not unique");
    std::swap(a[col], a[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (std::size_t c = col; c <= n; ++c) a[r][c] -= f * a[col][c];
    }
  }
  MarkovMeasure mu;
  mu.kernel = kernel;
  mu.stationary.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    mu.stationary[i] = std::max(0.0, a[i][n] / a[i][i]);
  double z = std::accumulate(mu.stationary.begin(), mu.stationary.end(), 0.0);
  for (auto& p : mu.stationary) p /= z;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double q = kernel[i][j];
      if (q > 0.0) mu.entropy -= mu.stationary[i] * q * std::log(q);
    }
  for (const auto& [id, vals] : sys.potentials())
    mu.integrals[id] = integrate(mu, vals);
  mu.lyapunov = mu.integrals.count("phi")
                    ? mu.integrals.at("phi")
                    : std::numeric_limits<double>::quiet_NaN();
  return mu;
}

double conformality_residual(const MarkovSystem& sys,
                             std::span<const double> psi, std::size_t depth) {
  if (depth == 0 || depth > 12)
    thermo_error(ErrorCode::InvalidArgument, "conformality_residual",
                 "depth must lie in [1, 12]");
  if (!is_irreducible(sys))
    thermo_error(ErrorCode::InvalidArgument, "conformality_residual",
                 "system is not irreducible");
  PerronResult pr = perron(sys, psi, false);
  const double p = pr.log_radius;
  const std::vector<double>& nu = pr.right;  // cell masses, sum 1

  // Masses of the deepest cylinders from the cylinder formula, coarser ones
  // by additivity over children.
  using Word = std::vector<std::size_t>;
  std::vector<std::unordered_map<Word, double, WordHash>> mass(depth + 1);
  double residual = 0.0;
  std::function<double(Word&, double)> descend = [&](Word& w, double s_psi) {
    double m;
    if (w.size() == depth) {
      double s_without_last = s_psi - psi[w.back()];
      m = std::exp(s_without_last - double(depth - 1) * p) * nu[w.back()];
      double image = 0.0;
      for (auto j : sys.successors(w.back())) image += nu[j];
      double rhs = std::exp(double(depth) * p - s_psi) * m;
      residual = std::max(residual, std::fabs(image - rhs));
    } else {
      m = 0.0;
      for (auto j : sys.successors(w.back())) {
        w.push_back(j);
        m += descend(w, s_psi + psi[j]);
        w.pop_back();
      }
    }
    mass[w.size()][w] = m;
    return m;
  };
  std::size_t words = sys.size();
  for (std::size_t d = 1; d < depth; ++d) words *= std::max<std::size_t>(1, sys.edge_count() / sys.size() + 1);
  if (words > 4000000)
    thermo_error(ErrorCode::InvalidArgument, "conformality_residual",
                 "too many words at this depth");
  for (std::size_t i = 0; i < sys.size(); ++i) {
    Word w{i};
    descend(w, psi[i]);
  }
  for (std::size_t k = 1; k < depth; ++k) {
    for (const auto& [w, m] : mass[k]) {
      double lhs;
      if (k == 1) {
        lhs = 0.0;
        for (auto j : sys.successors(w[0])) lhs += mass[1].at(Word{j});
      } else {
        lhs = mass[k - 1].at(Word(w.begin() + 1, w.end()));
      }
      double rhs = std::exp(p - psi[w[0]]) * m;
      residual = std::max(residual, std::fabs(lhs - rhs));
    }
  }
  return residual;
}

Interval ergodic_average_range(const MarkovSystem& sys,
                               std::span<const double> values) {
  if (values.size() != sys.size())
    thermo_error(ErrorCode::InvalidArgument, "ergodic_average_range",
                 "length mismatch");
  // Karp's minimum mean cycle, edge weight = value at the source vertex.
  auto min_mean = [&](const MarkovSystem& g, const std::vector<double>& w) {
    const std::size_t n = g.size();
    const double inf = std::numeric_limits<double>::infinity();
    auto walk = [&](std::size_t steps, auto&& visit) {
      std::vector<double> d(n, inf), next(n);
      d[0] = 0.0;
      visit(std::size_t(0), d);
      for (std::size_t k = 1; k <= steps; ++k) {
        std::fill(next.begin(), next.end(), inf);
        for (std::size_t u = 0; u < n; ++u) {
          if (d[u] == inf) continue;
          for (auto v : g.successors(u))
            next[v] = std::min(next[v], d[u] + w[u]);
        }
        d.swap(next);
        visit(k, d);
      }
      return d;
    };
    std::vector<double> dn = walk(n, [](std::size_t, const std::vector<double>&) {});
    std::vector<double> worst(n, -inf);
    walk(n - 1, [&](std::size_t k, const std::vector<double>& d) {
      for (std::size_t v = 0; v < n; ++v)
        if (dn[v] < inf && d[v] < inf)
          worst[v] = std::max(worst[v], (dn[v] - d[v]) / double(n - k));
    });
    double best = inf;
    for (std::size_t v = 0; v < n; ++v)
      if (dn[v] < inf) best = std::min(best, worst[v]);
    return best;
  };
  Interval out{std::numeric_limits<double>::infinity(),
               -std::numeric_limits<double>::infinity()};
  for (const auto& comp : strongly_connected_components(sys)) {
    if (!has_cycle(sys, comp)) continue;
    MarkovSystem sub = sys.restrict_to(comp);
    std::vector<double> w, neg;
    for (auto i : comp) {
      w.push_back(values[i]);
      neg.push_back(-values[i]);
    }
    out.lo = std::min(out.lo, min_mean(sub, w));
    out.hi = std::max(out.hi, -min_mean(sub, neg));
  }
  if (out.lo > out.hi)
    thermo_error(ErrorCode::InvalidArgument, "ergodic_average_range",
                 "system has no cycles");
  return out;
}

BigImageResult big_image_constant(const MarkovSystem& sys, std::size_t depth) {
  const PiecewiseMonotoneMap* map = sys.source_map();
  if (!map)
    thermo_error(ErrorCode::InvalidArgument, "big_image_constant",
                 "system has no interval map");
  if (depth == 0 || depth > 10)
    thermo_error(ErrorCode::InvalidArgument, "big_image_constant",
                 "depth must lie in [1, 10]");
  BigImageResult out;
  out.predicted = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sys.size(); ++i) {
    const Branch& b = map->branch(sys.cell_branch(i));
    double y0 = b(sys.cell(i).lo), y1 = b(sys.cell(i).hi);
    out.predicted = std::min(out.predicted, std::fabs(y1 - y0));
  }
  out.min_image_length = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> w;
  std::function<void()> visit = [&]() {
    if (auto c = cell_cylinder(sys, w)) {
      Interval img = *c;
      for (auto s : w) {
        const Branch& b = map->branch(sys.cell_branch(s));
        double y0 = b(img.lo), y1 = b(img.hi);
        img = {std::min(y0, y1), std::max(y0, y1)};
      }
      out.min_image_length = std::min(out.min_image_length, img.length());
    }
    if (w.size() == depth) return;
    for (auto j : sys.successors(w.back())) {
      w.push_back(j);
      visit();
      w.pop_back();
    }
  };
  for (std::size_t i = 0; i < sys.size(); ++i) {
    w = {i};
    visit();
  }
  out.consistent = std::fabs(out.min_image_length - out.predicted) <= 1e-9;
  return out;
}

}  // namespace birkhoff
