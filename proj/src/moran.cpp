#include "birkhoff/moran.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <map>
#include <limits>
#include <random>
#include <unordered_map>

#include "birkhoff/error.hpp"

namespace birkhoff {

namespace {

constexpr double kKeyScale = 1e9;
constexpr double kNodeStepBudget = 3e8;
constexpr std::size_t kMaxStageLength = 1000000;

[[noreturn]] void moran_error(ErrorCode code, const char* op,
                              const std::string& msg) {
  throw Error(code, "moran", op, msg);
}

double logaddexp(double x, double y) {
  if (x == -std::numeric_limits<double>::infinity()) return y;
  if (y == -std::numeric_limits<double>::infinity()) return x;
  double m = std::max(x, y);
  return m + std::log1p(std::exp(-std::fabs(x - y)));
}

struct Node {
  std::uint32_t cell;
  double sf, sphi, logmu, log_count;
};

struct Key {
  std::int64_t sf, sphi, logmu;
  std::uint32_t cell;
  bool operator==(const Key&) const = default;
};

struct KeyHash {
  std::size_t operator()(const Key& k) const noexcept {
    std::uint64_t h = 0x9e3779b97f4a7c15ull * (k.cell + 1);
    for (std::int64_t v : {k.sf, k.sphi, k.logmu}) {
      h ^= std::uint64_t(v) + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    }
    return std::size_t(h);
  }
};

Key key_of(const Node& n) {
  return {std::llround(n.sf * kKeyScale), std::llround(n.sphi * kKeyScale),
          std::llround(n.logmu * kKeyScale), n.cell};
}

// Windows (aa), (ab) and the SMB window on a full stage word.
struct Windows {
  double a, lambda, h, eps;

  bool final_ok(const Node& n, std::size_t k) const {
    double w = 2.0 * double(k) * eps;
    return std::fabs(n.logmu + double(k) * h) < w &&
           std::fabs(n.sf - double(k) * a) < w &&
           std::fabs(n.sphi - double(k) * lambda) < w;
  }
};

class Expander {
 public:
  Expander(const PlanStage& st, bool first)
      : sys_(st.spec.system), f_(st.spec.f), phi_(st.spec.phi),
        kernel_(st.gibbs.kernel), pi_(st.gibbs.stationary), first_(first),
        bridge_(st.spec.bridge_cell),
        win_{st.a, st.lambda, st.h, st.eps} {}

  const Windows& windows() const { return win_; }

  std::vector<Node> initial() const {
    std::vector<Node> out;
    if (first_) {
      for (std::uint32_t i = 0; i < sys_.size(); ++i)
        out.push_back({i, f_[i], phi_[i], std::log(pi_[i]), 0.0});
    } else {
      std::uint32_t b = std::uint32_t(bridge_);
      out.push_back({b, f_[b], phi_[b], 0.0, 0.0});
    }
    return out;
  }

  // Extends every node by one cell; edges (new node, parent) if requested.
  void step(const std::vector<Node>& cur, std::vector<Node>& next,
            std::vector<std::pair<std::uint32_t, std::uint32_t>>* edges) {
    next.clear();
    index_.clear();
    index_.reserve(cur.size() * 2);
    for (std::uint32_t u = 0; u < cur.size(); ++u) {
      const Node& p = cur[u];
      for (auto c : sys_.successors(p.cell)) {
        Node n{std::uint32_t(c), p.sf + f_[c], p.sphi + phi_[c],
               p.logmu + std::log(kernel_[p.cell][c]), p.log_count};
        auto [it, inserted] = index_.try_emplace(key_of(n), std::uint32_t(next.size()));
        if (inserted)
          next.push_back(n);
        else
          next[it->second].log_count = logaddexp(next[it->second].log_count, n.log_count);
        if (edges) edges->push_back({it->second, u});
      }
    }
  }

  double coverage(const std::vector<Node>& layer, std::size_t k) const {
    double cov = 0.0;
    for (const auto& n : layer)
      if (win_.final_ok(n, k)) cov += std::exp(n.log_count + n.logmu);
    return cov;
  }

 private:
  const MarkovSystem& sys_;
  const std::vector<double>& f_;
  const std::vector<double>& phi_;
  const std::vector<std::vector<double>>& kernel_;
  const std::vector<double>& pi_;
  bool first_;
  std::size_t bridge_;
  Windows win_;
  std::unordered_map<Key, std::uint32_t, KeyHash> index_;
};

// Shortest number of edges from every cell to `target` (0 at the target).
std::vector<std::size_t> distance_to(const MarkovSystem& sys, std::size_t target) {
  const std::size_t n = sys.size();
  constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();
  std::vector<std::vector<std::size_t>> pred(n);
  for (std::size_t i = 0; i < n; ++i)
    for (auto j : sys.successors(i)) pred[j].push_back(i);
  std::vector<std::size_t> d(n, kInf);
  std::deque<std::size_t> q{target};
  d[target] = 0;
  while (!q.empty()) {
    auto v = q.front();
    q.pop_front();
    for (auto u : pred[v])
      if (d[u] == kInf) {
        d[u] = d[v] + 1;
        q.push_back(u);
      }
  }
  return d;
}

std::size_t graph_diameter(const MarkovSystem& sys) {
  std::size_t diam = 0;
  for (std::size_t t = 0; t < sys.size(); ++t)
    for (auto d : distance_to(sys, t))
      if (d != std::numeric_limits<std::size_t>::max()) diam = std::max(diam, d);
  return diam;
}

// Lexicographically smallest shortest connector from `last` (exclusive) to
// `target` (exclusive); nullopt if unreachable.
std::optional<std::vector<std::size_t>> connector_path(
    const MarkovSystem& sys, const std::vector<std::size_t>& dist,
    std::size_t last) {
  constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();
  std::size_t best = kInf, first = 0;
  for (auto c : sys.successors(last))
    if (dist[c] < best) {
      best = dist[c];
      first = c;
    }
  if (best == kInf) return std::nullopt;
  std::vector<std::size_t> path;
  std::size_t v = first;
  while (dist[v] > 0) {
    path.push_back(v);
    for (auto c : sys.successors(v))
      if (dist[c] + 1 == dist[v]) {
        v = c;
        break;
      }
  }
  return path;
}

double sup_abs_sum(const StageSpec& s) {
  double out = 0.0;
  for (std::size_t i = 0; i < s.f.size(); ++i)
    out = std::max(out, std::fabs(s.f[i]) + std::fabs(s.phi[i]));
  return out;
}

std::size_t matching_cell(const StageSpec& prev, const StageSpec& next) {
  const std::size_t b = next.bridge_cell;
  if (b >= next.system.size())
    moran_error(ErrorCode::InvalidArgument, "plan_construction",
                "bridge cell out of range");
  if (!prev.system.source_map() || !next.system.source_map()) {
    if (b >= prev.system.size())
      moran_error(ErrorCode::InfeasibleSchedule, "plan_construction",
                  "bridge cell is not a cell of the previous system");
    return b;
  }
  const Interval& c = next.system.cell(b);
  for (std::size_t i = 0; i < prev.system.size(); ++i) {
    const Interval& d = prev.system.cell(i);
    if (std::fabs(d.lo - c.lo) <= 1e-12 && std::fabs(d.hi - c.hi) <= 1e-12) return i;
  }
  moran_error(ErrorCode::InfeasibleSchedule, "plan_construction",
              "consecutive systems share no bridge cell");
}

struct Selection {
  std::vector<std::uint32_t> kept;  // indices into the final layer
  std::size_t j = 0;
  double mass = 0.0;
};

// Window-passing final nodes restricted to the majority return-time class.
Selection select_final(const PlanStage& st, const Expander& ex,
                       const std::vector<Node>& layer) {
  const Windows& w = ex.windows();
  Selection sel;
  std::vector<std::size_t> dist;
  if (st.has_next) dist = distance_to(st.spec.system, st.bridge_prev);
  std::map<std::size_t, double> class_count;
  std::vector<std::size_t> node_j(layer.size(), 0);
  for (std::uint32_t i = 0; i < layer.size(); ++i) {
    if (!w.final_ok(layer[i], st.m)) continue;
    if (st.has_next) {
      auto path = connector_path(st.spec.system, dist, layer[i].cell);
      if (!path) continue;
      node_j[i] = path->size();
    }
    auto [it, ins] = class_count.try_emplace(node_j[i], layer[i].log_count);
    if (!ins) it->second = logaddexp(it->second, layer[i].log_count);
  }
  if (class_count.empty()) return sel;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [j, c] : class_count)
    if (c > best + 1e-12) {
      best = c;
      sel.j = j;
    }
  for (std::uint32_t i = 0; i < layer.size(); ++i)
    if (w.final_ok(layer[i], st.m) && node_j[i] == sel.j &&
        (!st.has_next || class_count.count(node_j[i]))) {
      if (st.has_next) {
        auto path = connector_path(st.spec.system, dist, layer[i].cell);
        if (!path) continue;
      }
      sel.kept.push_back(i);
      sel.mass += std::exp(layer[i].log_count + layer[i].logmu);
    }
  return sel;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Index drawn with probability proportional to exp(logw).
std::size_t draw_index(std::mt19937_64& rng, const std::vector<double>& logw) {
  double mx = *std::max_element(logw.begin(), logw.end());
  double total = 0.0;
  for (double l : logw) total += std::exp(l - mx);
  double u = double(rng() >> 11) * 0x1.0p-53 * total;
  for (std::size_t i = 0; i < logw.size(); ++i) {
    u -= std::exp(logw[i] - mx);
    if (u < 0.0) return i;
  }
  return logw.size() - 1;
}

}  // namespace

// Merged-word layers of one stage with the parent edges needed to walk words
// backwards.
struct StageGraph {
  std::vector<std::vector<std::uint32_t>> cell;
  std::vector<std::vector<double>> log_count;
  std::vector<std::vector<std::uint32_t>> pred_off;
  std::vector<std::vector<std::uint32_t>> pred;
  std::vector<std::uint32_t> kept;
  std::vector<double> kept_log_count;
  std::vector<std::uint32_t> kept_cell;
};

// ------------------------------------------------------------- planning

ConstructionPlan plan_construction(const std::vector<StageSpec>& specs,
                                   double target_a) {
  if (specs.empty())
    moran_error(ErrorCode::InvalidArgument, "plan_construction", "no stages");
  ConstructionPlan plan;
  plan.target_a = target_a;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const StageSpec& s = specs[i];
    const std::size_t n = s.system.size();
    if (s.f.size() != n || s.phi.size() != n || s.psi.size() != n)
      moran_error(ErrorCode::InvalidArgument, "plan_construction",
                  "f, phi and psi need one value per cell");
    if (!(s.eps > 0.0))
      moran_error(ErrorCode::InvalidArgument, "plan_construction", "eps <= 0");
    if (i > 0 && !(s.eps < specs[i - 1].eps))
      moran_error(ErrorCode::InvalidArgument, "plan_construction",
                  "eps must strictly decrease across stages");
    PlanStage st;
    st.spec = s;
    st.gibbs = equilibrium_measure(s.system, s.psi);
    st.eps = s.eps;
    st.h = st.gibbs.entropy;
    for (std::size_t c = 0; c < n; ++c) {
      st.a += st.gibbs.stationary[c] * s.f[c];
      st.lambda += st.gibbs.stationary[c] * s.phi[c];
    }
    if (!(st.lambda > 0.0))
      moran_error(ErrorCode::InvalidArgument, "plan_construction",
                  "stage Gibbs measure has lambda <= 0");
    st.l = 2 * graph_diameter(s.system);
    st.has_next = i + 1 < specs.size();
    if (st.has_next) st.bridge_prev = matching_cell(s, specs[i + 1]);

    st.m_lower = 1;
    if (i > 0) {
      const PlanStage& prev = plan.stages.back();
      st.carry = double(prev.m) * prev.eps;
      double sup = std::max(sup_abs_sum(prev.spec), sup_abs_sum(s));
      double need = 4.0 * st.carry + double(prev.j) * sup;
      st.m_lower = std::size_t(std::floor(need / st.eps)) + 1;
    }
    if (s.m != 0 && s.m < st.m_lower)
      moran_error(ErrorCode::InfeasibleSchedule, "plan_construction",
                  "m = " + std::to_string(s.m) +
                      " violates the inductive inequality (needs >= " +
                      std::to_string(st.m_lower) + ")");

    Expander ex(st, i == 0);
    std::vector<Node> layer = ex.initial(), next;
    double node_steps = 0.0, best_cov = 0.0;
    std::size_t k = 1;
    for (;; ++k) {
      if (k >= st.m_lower) {
        double cov = ex.coverage(layer, k);
        best_cov = std::max(best_cov, cov);
        if (s.m == k || (s.m == 0 && cov > 1.0 - st.eps)) {
          st.m = k;
          st.coverage = cov;
          st.coverage_met = cov > 1.0 - st.eps;
          break;
        }
      }
      node_steps += double(layer.size());
      if (k >= kMaxStageLength || node_steps > kNodeStepBudget || layer.empty())
        moran_error(ErrorCode::InfeasibleSchedule, "plan_construction",
                    "stage " + std::to_string(i + 1) +
                        ": coverage > 1 - eps not reached by m = " +
                        std::to_string(k) + " (best achieved " +
                        std::to_string(best_cov) + ")");
      ex.step(layer, next, nullptr);
      layer.swap(next);
    }
    Selection sel = select_final(st, ex, layer);
    if (sel.kept.empty())
      moran_error(ErrorCode::InfeasibleSchedule, "plan_construction",
                  "stage " + std::to_string(i + 1) + " selects no words");
    st.j = sel.j;
    if (st.has_next && st.j > st.l)
      moran_error(ErrorCode::InfeasibleSchedule, "plan_construction",
                  "return time exceeds 2 * graph diameter");
    plan.stages.push_back(std::move(st));
  }
  return plan;
}

// ---------------------------------------------------------------- tree

MoranTree build_tree(const ConstructionPlan& plan, std::size_t max_depth) {
  if (plan.stages.empty())
    moran_error(ErrorCode::InvalidArgument, "build_tree", "empty plan");
  MoranTree tree;
  tree.plan_ = plan;
  std::size_t depth = 0;
  double log_mass = 0.0;
  for (std::size_t i = 0; i < plan.stages.size(); ++i) {
    const PlanStage& st = plan.stages[i];
    if (depth + st.m > max_depth) {
      if (i == 0)
        moran_error(ErrorCode::InvalidArgument, "build_tree",
                    "first stage is deeper than maxDepth");
      break;
    }
    Expander ex(st, i == 0);
    auto g = std::make_shared<StageGraph>();
    std::vector<Node> layer = ex.initial(), next;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
    auto record = [&](const std::vector<Node>& l) {
      std::vector<std::uint32_t> cells;
      std::vector<double> counts;
      for (const auto& n : l) {
        cells.push_back(n.cell);
        counts.push_back(n.log_count);
      }
      g->cell.push_back(std::move(cells));
      g->log_count.push_back(std::move(counts));
    };
    record(layer);
    g->pred_off.emplace_back();
    g->pred.emplace_back();
    for (std::size_t k = 1; k < st.m; ++k) {
      edges.clear();
      ex.step(layer, next, &edges);
      layer.swap(next);
      if (layer.empty())
        moran_error(ErrorCode::EmptySelection, "build_tree",
                    "no prefix survives the windows");
      record(layer);
      std::vector<std::uint32_t> off(layer.size() + 1, 0), pred(edges.size());
      for (const auto& e : edges) ++off[e.first + 1];
      for (std::size_t v = 0; v < layer.size(); ++v) off[v + 1] += off[v];
      std::vector<std::uint32_t> fill(off.begin(), off.end() - 1);
      for (const auto& e : edges) pred[fill[e.first]++] = e.second;
      g->pred_off.push_back(std::move(off));
      g->pred.push_back(std::move(pred));
    }
    Selection sel = select_final(st, ex, layer);
    if (sel.kept.empty())
      moran_error(ErrorCode::EmptySelection, "build_tree",
                  "stage " + std::to_string(i + 1) + ": no word meets the windows");

    MoranLevel lvl;
    lvl.stage = i;
    lvl.start_depth = depth;
    lvl.word_length = st.m;
    lvl.connector_length = st.has_next ? sel.j : 0;
    lvl.depth = depth + st.m;
    lvl.selected_mass = sel.mass;
    lvl.log_count = -std::numeric_limits<double>::infinity();
    lvl.min_sum_phi = std::numeric_limits<double>::infinity();
    lvl.max_log_image = -std::numeric_limits<double>::infinity();
    lvl.min_connector_phi = std::numeric_limits<double>::infinity();
    const MarkovSystem& sys = st.spec.system;
    std::vector<std::size_t> dist;
    if (st.has_next) dist = distance_to(sys, st.bridge_prev);
    std::vector<std::vector<std::size_t>> connectors(sys.size());
    for (auto idx : sel.kept) {
      const Node& n = layer[idx];
      g->kept.push_back(idx);
      g->kept_log_count.push_back(n.log_count);
      g->kept_cell.push_back(n.cell);
      lvl.log_count = logaddexp(lvl.log_count, n.log_count);
      lvl.min_sum_phi = std::min(lvl.min_sum_phi, n.sphi);
      lvl.window_f = std::max(lvl.window_f, std::fabs(n.sf - double(st.m) * st.a));
      lvl.window_phi =
          std::max(lvl.window_phi, std::fabs(n.sphi - double(st.m) * st.lambda));
      lvl.window_smb =
          std::max(lvl.window_smb, std::fabs(n.logmu + double(st.m) * st.h));
      double image = 0.0;
      if (const PiecewiseMonotoneMap* map = sys.source_map()) {
        const Branch& b = map->branch(sys.cell_branch(n.cell));
        image = std::log(std::fabs(b(sys.cell(n.cell).hi) - b(sys.cell(n.cell).lo)));
      }
      lvl.max_log_image = std::max(lvl.max_log_image, image);
      if (st.has_next) {
        auto path = *connector_path(sys, dist, n.cell);
        double cphi = 0.0;
        for (auto c : path) cphi += st.spec.phi[c];
        lvl.min_connector_phi = std::min(lvl.min_connector_phi, cphi);
        connectors[n.cell] = std::move(path);
      }
    }
    if (!st.has_next) lvl.min_connector_phi = 0.0;
    log_mass -= lvl.log_count;
    lvl.log_mass = log_mass;
    depth = lvl.depth + lvl.connector_length;
    tree.levels_.push_back(lvl);
    tree.graphs_.push_back(g);
    tree.connectors_.push_back(std::move(connectors));
  }
  tree.depth_ = tree.levels_.back().depth;
  return tree;
}

std::optional<std::vector<std::vector<std::size_t>>> MoranTree::stage_words(
    std::size_t stage, std::size_t limit) const {
  const MoranLevel& lvl = levels_.at(stage);
  if (lvl.log_count > std::log(double(limit)) + 1e-9) return std::nullopt;
  const StageGraph& g = *graphs_.at(stage);
  std::vector<std::vector<std::size_t>> out;
  std::vector<std::size_t> rev;
  std::function<void(std::size_t, std::uint32_t)> back = [&](std::size_t k,
                                                             std::uint32_t v) {
    rev.push_back(g.cell[k][v]);
    if (k == 0) {
      out.emplace_back(rev.rbegin(), rev.rend());
    } else {
      for (auto e = g.pred_off[k][v]; e < g.pred_off[k][v + 1]; ++e)
        back(k - 1, g.pred[k][e]);
    }
    rev.pop_back();
  };
  for (auto v : g.kept) back(g.cell.size() - 1, v);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> MoranTree::connector(std::size_t stage,
                                              std::size_t last) const {
  return connectors_.at(stage).at(last);
}

std::optional<std::vector<std::vector<std::size_t>>> MoranTree::level_words(
    std::size_t level, std::size_t limit) const {
  double total = 0.0;
  for (std::size_t s = 0; s <= level; ++s) total += levels_.at(s).log_count;
  if (total > std::log(double(limit)) + 1e-9) return std::nullopt;
  std::vector<std::vector<std::size_t>> acc{{}};
  for (std::size_t s = 0; s <= level; ++s) {
    auto words = *stage_words(s, limit);
    std::vector<std::vector<std::size_t>> next;
    for (const auto& prefix : acc)
      for (const auto& w : words) {
        auto v = prefix;
        v.insert(v.end(), w.begin(), w.end());
        if (s < level) {
          auto c = connector(s, w.back());
          v.insert(v.end(), c.begin(), c.end());
        }
        next.push_back(std::move(v));
      }
    acc = std::move(next);
  }
  return acc;
}

double MoranTree::window_slack(std::size_t level) const {
  const double target = plan_.target_a;
  double num = 0.0;
  std::size_t depth = 0;
  for (std::size_t s = 0; s <= level; ++s) {
    const PlanStage& st = plan_.stages[s];
    const MoranLevel& lvl = levels_.at(s);
    num += 2.0 * double(st.m) * st.eps + double(st.m) * std::fabs(st.a - target);
    depth += st.m;
    if (s < level) {
      double fmax = 0.0;
      for (double v : st.spec.f) fmax = std::max(fmax, std::fabs(v - target));
      num += double(lvl.connector_length) * fmax;
      depth += lvl.connector_length;
    }
  }
  return num / double(depth);
}

std::vector<std::size_t> MoranTree::draw(std::uint64_t stream_seed) const {
  std::mt19937_64 rng(splitmix64(stream_seed));
  std::vector<std::size_t> word;
  for (std::size_t s = 0; s < levels_.size(); ++s) {
    const StageGraph& g = *graphs_[s];
    std::size_t k = g.cell.size() - 1;
    std::uint32_t v = g.kept[draw_index(rng, g.kept_log_count)];
    std::vector<std::size_t> rev{g.cell[k][v]};
    std::vector<double> w;
    for (; k > 0; --k) {
      w.clear();
      for (auto e = g.pred_off[k][v]; e < g.pred_off[k][v + 1]; ++e)
        w.push_back(g.log_count[k - 1][g.pred[k][e]]);
      v = g.pred[k][g.pred_off[k][v] + draw_index(rng, w)];
      rev.push_back(g.cell[k - 1][v]);
    }
    word.insert(word.end(), rev.rbegin(), rev.rend());
    if (s + 1 < levels_.size()) {
      auto c = connector(s, word.back());
      word.insert(word.end(), c.begin(), c.end());
    }
  }
  return word;
}

// ------------------------------------------------------------ estimates

DimensionEstimate estimate_dimension(const MoranTree& tree) {
  const auto& levels = tree.levels();
  if (levels.empty())
    moran_error(ErrorCode::InvalidArgument, "estimate_dimension",
                "tree has no stage levels");
  DimensionEstimate out;
  double num = 0.0, den = 0.0;
  for (std::size_t s = 0; s < levels.size(); ++s) {
    num += levels[s].log_count;
    den += levels[s].min_sum_phi;
    out.per_level.push_back(num / (den - levels[s].max_log_image));
    den += levels[s].min_connector_phi;
  }
  out.point = *std::min_element(out.per_level.begin(), out.per_level.end());
  const PlanStage& last = tree.plan().stages[levels.size() - 1];
  double gap = last.lambda - 4.0 * last.eps;
  out.lower = gap > 0.0 ? out.point - 4.0 * last.eps / gap
                        : -std::numeric_limits<double>::infinity();
  return out;
}

std::vector<SamplePoint> sample_points(const MoranTree& tree, std::size_t n,
                                       std::uint64_t seed) {
  if (n > 10000)
    moran_error(ErrorCode::InvalidArgument, "sample_points", "n > 10^4");
  const auto& levels = tree.levels();
  const auto& stages = tree.plan().stages;
  // Stage owning each position of a drawn word.
  std::vector<std::size_t> owner;
  for (std::size_t s = 0; s < levels.size(); ++s)
    owner.insert(owner.end(), levels[s].word_length +
                                  (s + 1 < levels.size() ? levels[s].connector_length : 0),
                 s);
  std::vector<SamplePoint> out;
  for (std::size_t p = 0; p < n; ++p) {
    std::vector<std::size_t> word = tree.draw(seed * 0x100000001b3ull + p);
    SamplePoint sp;
    double sf = 0.0, sphi = 0.0;
    std::size_t lv = 0;
    for (std::size_t k = 0; k < word.size(); ++k) {
      const StageSpec& spec = stages[owner[k]].spec;
      sf += spec.f[word[k]];
      sphi += spec.phi[word[k]];
      if (lv < levels.size() && k + 1 == levels[lv].depth) {
        sp.depths.push_back(k + 1);
        sp.avg_f.push_back(sf / double(k + 1));
        sp.avg_phi.push_back(sphi / double(k + 1));
        sp.slack.push_back(tree.window_slack(lv));
        ++lv;
      }
    }
    sp.x = std::numeric_limits<double>::quiet_NaN();
    const PiecewiseMonotoneMap* map = stages[owner.back()].spec.system.source_map();
    if (map) {
      const MarkovSystem& last_sys = stages[owner.back()].spec.system;
      double x = last_sys.cell(word.back()).midpoint();
      for (std::size_t k = word.size() - 1; k-- > 0;) {
        const MarkovSystem& sys = stages[owner[k]].spec.system;
        const Branch& b = sys.source_map()->branch(sys.cell_branch(word[k]));
        const Interval& cell = sys.cell(word[k]);
        x = std::clamp(b.inverse(x), cell.lo, cell.hi);
      }
      sp.x = x;
    }
    out.push_back(std::move(sp));
  }
  return out;
}

}  // namespace birkhoff
