#include "birkhoff/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "birkhoff/error.hpp"

namespace birkhoff {

namespace {

[[noreturn]] void config_error(const std::string& msg) {
  throw Error(ErrorCode::ConfigError, "cli", "parse_config", msg);
}

void reject_duplicates(const YAML::Node& node, const std::string& where) {
  if (node.IsMap()) {
    std::set<std::string> seen;
    for (const auto& kv : node) {
      auto k = kv.first.as<std::string>();
      if (!seen.insert(k).second)
        config_error("duplicate key '" + k + "' in " + where);
      reject_duplicates(kv.second, where + "." + k);
    }
  } else if (node.IsSequence()) {
    for (std::size_t i = 0; i < node.size(); ++i)
      reject_duplicates(node[i], where + "[" + std::to_string(i) + "]");
  }
}

void allow_keys(const YAML::Node& node, std::initializer_list<const char*> keys,
                const std::string& where) {
  if (!node.IsMap()) config_error(where + " must be a mapping");
  for (const auto& kv : node) {
    auto k = kv.first.as<std::string>();
    if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; }))
      config_error("unknown key '" + k + "' in " + where);
  }
}

double num(const YAML::Node& n, const std::string& what) {
  if (!n || !n.IsScalar()) config_error(what + " must be a number");
  return evaluate_number(n.as<std::string>());
}

std::size_t count(const YAML::Node& n, const std::string& what) {
  double v = num(n, what);
  if (v < 0 || v != std::floor(v) || v > 1e15)
    config_error(what + " must be a nonnegative integer");
  return std::size_t(v);
}

std::vector<double> num_list(const YAML::Node& n, const std::string& what) {
  if (!n || !n.IsSequence()) config_error(what + " must be a list");
  std::vector<double> out;
  for (std::size_t i = 0; i < n.size(); ++i) out.push_back(num(n[i], what));
  return out;
}

Interval interval(const YAML::Node& n, const std::string& what) {
  auto v = num_list(n, what);
  if (v.size() != 2 || !(v[0] < v[1]))
    config_error(what + " must be [lo, hi] with lo < hi");
  return {v[0], v[1]};
}

Transition01 transition(const YAML::Node& n) {
  if (!n.IsSequence()) config_error("transition must be a matrix");
  Transition01 t;
  for (std::size_t i = 0; i < n.size(); ++i) {
    std::vector<int> row;
    for (double v : num_list(n[i], "transition row")) {
      if (v != 0.0 && v != 1.0) config_error("transition entries must be 0 or 1");
      row.push_back(int(v));
    }
    t.push_back(std::move(row));
  }
  return t;
}

std::vector<double> grid_spec(const YAML::Node& n, const std::string& what,
                              std::optional<std::pair<double, double>>* span) {
  if (n.IsMap()) {
    allow_keys(n, {"linspace"}, what);
    auto v = num_list(n["linspace"], what + ".linspace");
    if (v.size() != 3) config_error(what + ".linspace must be [lo, hi, n]");
    if (span) *span = std::make_pair(v[0], v[1]);
    return linspace(v[0], v[1], std::size_t(v[2]));
  }
  return num_list(n, what);
}

BranchSpec branch_spec(const YAML::Node& n, std::size_t i) {
  const std::string where = "map.branches[" + std::to_string(i) + "]";
  allow_keys(n, {"domain", "slope", "intercept", "coefficient", "exponent", "shift",
                 "forward", "derivative"},
             where);
  BranchSpec b;
  b.domain = interval(n["domain"], where + ".domain");
  if (n["forward"]) {
    b.kind = BranchKind::general;
    b.forward = n["forward"].as<std::string>();
    if (!n["derivative"]) config_error(where + ": general branches need a derivative");
    b.derivative = n["derivative"].as<std::string>();
  } else if (n["exponent"]) {
    b.kind = BranchKind::power;
    b.exponent = num(n["exponent"], where + ".exponent");
    b.coefficient = n["coefficient"] ? num(n["coefficient"], where) : 1.0;
    b.shift = n["shift"] ? num(n["shift"], where) : 0.0;
  } else {
    b.kind = BranchKind::affine;
    b.slope = num(n["slope"], where + ".slope");
    b.intercept = n["intercept"] ? num(n["intercept"], where) : 0.0;
  }
  return b;
}

std::shared_ptr<const PiecewiseMonotoneMap> parse_map(const YAML::Node& n) {
  allow_keys(n, {"preset", "gamma", "slopes", "repeller", "branches"}, "map");
  bool repeller = n["repeller"] ? n["repeller"].as<bool>() : false;
  if (n["preset"]) {
    auto preset = n["preset"].as<std::string>();
    if (preset == "doubling") {
      BranchSpec l, r;
      l.domain = {0.0, 0.5};
      l.slope = 2.0;
      r.domain = {0.5, 1.0};
      r.slope = 2.0;
      r.intercept = -1.0;
      return std::make_shared<PiecewiseMonotoneMap>(build_map({l, r}));
    }
    if (preset == "manneville_pomeau") {
      return std::make_shared<PiecewiseMonotoneMap>(
          manneville_pomeau(num(n["gamma"], "map.gamma")));
    }
    if (preset == "cookie_cutter") {
      auto s = num_list(n["slopes"], "map.slopes");
      if (s.size() != 2 || s[0] <= 1.0 || s[1] <= 1.0 || 1.0 / s[0] + 1.0 / s[1] > 1.0)
        config_error("map.slopes must be two slopes > 1 with 1/s1 + 1/s2 <= 1");
      BranchSpec l, r;
      l.domain = {0.0, 1.0 / s[0]};
      l.slope = s[0];
      r.domain = {1.0 - 1.0 / s[1], 1.0};
      r.slope = s[1];
      r.intercept = 1.0 - s[1];
      return std::make_shared<PiecewiseMonotoneMap>(build_map({l, r}, true));
    }
    config_error("unknown map preset '" + preset + "'");
  }
  const YAML::Node br = n["branches"];
  if (!br || !br.IsSequence() || br.size() == 0)
    config_error("map needs a preset or a nonempty branch list");
  std::vector<BranchSpec> specs;
  for (std::size_t i = 0; i < br.size(); ++i) specs.push_back(branch_spec(br[i], i));
  return std::make_shared<PiecewiseMonotoneMap>(build_map(specs, repeller));
}

PotentialConfig parse_potential(const YAML::Node& n, const std::string& name) {
  const std::string where = "potentials." + name;
  PotentialConfig p;
  if (n.IsScalar()) {
    p.kind = PotentialConfig::Kind::expression;
    p.expression = Expression::parse(n.as<std::string>());
    return p;
  }
  allow_keys(n, {"cells", "expression", "steps"}, where);
  if (n["cells"]) {
    p.kind = PotentialConfig::Kind::cells;
    p.cells = num_list(n["cells"], where + ".cells");
  } else if (n["expression"]) {
    p.kind = PotentialConfig::Kind::expression;
    p.expression = Expression::parse(n["expression"].as<std::string>());
  } else if (n["steps"]) {
    p.kind = PotentialConfig::Kind::steps;
    const YAML::Node s = n["steps"];
    if (!s.IsSequence()) config_error(where + ".steps must be a list");
    for (std::size_t i = 0; i < s.size(); ++i) {
      allow_keys(s[i], {"domain", "value"}, where + ".steps");
      p.steps.push_back({interval(s[i]["domain"], where + ".steps.domain"),
                         num(s[i]["value"], where + ".steps.value")});
    }
  } else {
    config_error(where + " needs cells, expression or steps");
  }
  return p;
}

StageConfig parse_stage(const YAML::Node& n, std::size_t i) {
  const std::string where = "moran.stages[" + std::to_string(i) + "]";
  allow_keys(n, {"eps", "m", "bridge_cell", "transition", "f", "phi", "psi"}, where);
  StageConfig s;
  s.eps = num(n["eps"], where + ".eps");
  if (n["m"]) s.m = count(n["m"], where + ".m");
  if (n["bridge_cell"]) s.bridge_cell = count(n["bridge_cell"], where + ".bridge_cell");
  if (n["transition"]) s.transition = transition(n["transition"]);
  if (n["f"]) s.f = num_list(n["f"], where + ".f");
  if (n["phi"]) s.phi = num_list(n["phi"], where + ".phi");
  s.psi = num_list(n["psi"], where + ".psi");
  return s;
}

RegularPotential regular(const PotentialConfig& p) {
  if (p.kind == PotentialConfig::Kind::expression)
    return RegularPotential::from_expression(*p.expression, {0.0, 1.0});
  std::vector<Interval> cells;
  std::vector<double> values;
  for (const auto& [c, v] : p.steps) {
    cells.push_back(c);
    values.push_back(v);
  }
  return RegularPotential::step(cells, values);
}

}  // namespace

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  if (n == 0) config_error("grid needs at least one point");
  if (n == 1) return {lo};
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = i + 1 == n ? hi : lo + (hi - lo) * double(i) / double(n - 1);
  return out;
}

RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ParseError, "cli", "parse_config", e.what());
  }
  if (!root.IsMap()) config_error("config must be a mapping");
  reject_duplicates(root, "config");
  allow_keys(root, {"name", "description", "map", "markov", "potentials", "query",
                    "pressure", "oracle", "moran", "check", "seed", "threads"},
             "config");
  RunConfig cfg;
  try {
    if (root["map"]) cfg.map = parse_map(root["map"]);

    if (const YAML::Node mk = root["markov"]) {
      allow_keys(mk, {"partition", "cells", "transition", "refine_depth",
                      "truncation_levels"},
                 "markov");
      if (mk["partition"])
        cfg.cells = cells_from_partition(num_list(mk["partition"], "markov.partition"));
      if (mk["cells"]) {
        const YAML::Node c = mk["cells"];
        if (!c.IsSequence()) config_error("markov.cells must be a list");
        for (std::size_t i = 0; i < c.size(); ++i)
          cfg.cells.push_back(interval(c[i], "markov.cells"));
      }
      if (mk["transition"]) cfg.transition = transition(mk["transition"]);
      if (mk["refine_depth"]) cfg.refine_depth = count(mk["refine_depth"], "markov.refine_depth");
      if (mk["truncation_levels"])
        for (double v : num_list(mk["truncation_levels"], "markov.truncation_levels"))
          cfg.truncation_levels.push_back(std::size_t(v));
    }
    if (!cfg.map && !cfg.transition)
      config_error("config needs a map or a symbolic transition matrix");
    if (cfg.map && cfg.transition)
      config_error("give either a map or a symbolic transition, not both");
    if (cfg.refine_depth == 0) config_error("markov.refine_depth must be >= 1");

    const YAML::Node pots = root["potentials"];
    if (!pots || !pots.IsMap()) config_error("potentials must be a mapping");
    for (const auto& kv : pots) {
      auto name = kv.first.as<std::string>();
      cfg.potentials.emplace(name, parse_potential(kv.second, name));
    }
    if (!cfg.potentials.count("f")) config_error("potentials must define f");
    if (!cfg.map && !cfg.potentials.count("phi"))
      config_error("symbolic systems need an explicit phi");

    if (const YAML::Node q = root["query"]) {
      allow_keys(q, {"a_grid", "tol_delta", "tol_q", "parabolic"}, "query");
      if (q["a_grid"]) cfg.a_grid = grid_spec(q["a_grid"], "query.a_grid", &cfg.a_span);
      if (q["tol_delta"]) cfg.tol_delta = num(q["tol_delta"], "query.tol_delta");
      if (q["tol_q"]) cfg.tol_q = num(q["tol_q"], "query.tol_q");
      if (const YAML::Node p = q["parabolic"]) {
        if (p.IsScalar() && p.as<std::string>() == "auto") {
          cfg.parabolic_auto = true;
        } else if (p.IsScalar() && p.as<std::string>() == "none") {
          cfg.parabolic_auto = false;
        } else {
          cfg.parabolic_auto = false;
          cfg.parabolic_x = num_list(p, "query.parabolic");
        }
      }
    }
    if (!(cfg.tol_delta > 0.0) || !(cfg.tol_q > 0.0))
      config_error("tolerances must be positive");

    if (const YAML::Node p = root["pressure"]) {
      allow_keys(p, {"q", "delta", "a"}, "pressure");
      if (p["q"]) cfg.pressure_q = grid_spec(p["q"], "pressure.q", nullptr);
      if (p["delta"]) cfg.pressure_delta = grid_spec(p["delta"], "pressure.delta", nullptr);
      if (p["a"]) cfg.pressure_a = num(p["a"], "pressure.a");
    }
    if (const YAML::Node o = root["oracle"]) {
      allow_keys(o, {"mesh", "a"}, "oracle");
      if (o["mesh"]) cfg.oracle_mesh = count(o["mesh"], "oracle.mesh");
      if (o["a"]) cfg.oracle_a = grid_spec(o["a"], "oracle.a", nullptr);
    }
    if (const YAML::Node c = root["check"]) {
      allow_keys(c, {"refine"}, "check");
      if (c["refine"]) cfg.check_refine = count(c["refine"], "check.refine");
    }
    if (const YAML::Node m = root["moran"]) {
      allow_keys(m, {"target_a", "max_depth", "samples", "stages"}, "moran");
      MoranConfig mc;
      mc.target_a = num(m["target_a"], "moran.target_a");
      if (m["max_depth"]) mc.max_depth = count(m["max_depth"], "moran.max_depth");
      if (m["samples"]) mc.samples = count(m["samples"], "moran.samples");
      const YAML::Node st = m["stages"];
      if (!st || !st.IsSequence() || st.size() == 0)
        config_error("moran.stages must be a nonempty list");
      for (std::size_t i = 0; i < st.size(); ++i) mc.stages.push_back(parse_stage(st[i], i));
      cfg.moran = std::move(mc);
    }
    if (root["seed"]) cfg.seed = count(root["seed"], "seed");
    if (root["threads"]) cfg.threads = count(root["threads"], "threads");
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ConfigError, "cli", "parse_config", e.what());
  }
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::ConfigError, "cli", "load_config", "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_config(ss.str());
  cfg.source = path;
  return cfg;
}

std::vector<SpectrumLevel> build_levels(const RunConfig& cfg) {
  const PotentialConfig& fcfg = cfg.potentials.at("f");
  const PotentialConfig* phicfg =
      cfg.potentials.count("phi") ? &cfg.potentials.at("phi") : nullptr;

  if (!cfg.map) {
    MarkovSystem sys = MarkovSystem::symbolic(*cfg.transition);
    auto cells_of = [&](const PotentialConfig& p, const char* name) {
      if (p.kind != PotentialConfig::Kind::cells || p.cells.size() != sys.size())
        config_error(std::string("symbolic systems need ") + name +
                     " as one value per cell");
      return p.cells;
    };
    if (cfg.refine_depth > 1) {
      sys.set_potential("f", cells_of(fcfg, "f"));
      sys.set_potential("phi", cells_of(*phicfg, "phi"));
      MarkovSystem r = refine_to_cylinders(sys, cfg.refine_depth);
      return {SpectrumLevel{r, r.potential("f"), r.potential("phi"), 0}};
    }
    return {SpectrumLevel{sys, cells_of(fcfg, "f"), cells_of(*phicfg, "phi"), 0}};
  }

  std::optional<RegularPotential> f_reg, phi_reg;
  if (fcfg.kind != PotentialConfig::Kind::cells) f_reg = regular(fcfg);
  if (!phicfg)
    phi_reg = log_derivative(*cfg.map);
  else if (phicfg->kind != PotentialConfig::Kind::cells)
    phi_reg = regular(*phicfg);

  auto make = [&](const MarkovSystem& core_in, std::size_t level) {
    MarkovSystem core = core_in;
    auto by_cell = [&](const PotentialConfig& p, const char* name) {
      std::vector<Interval> listed = cfg.cells;
      if (listed.empty())
        for (const auto& b : cfg.map->branches()) listed.push_back(b.domain());
      std::sort(listed.begin(), listed.end(),
                [](const Interval& a, const Interval& b) { return a.lo < b.lo; });
      if (p.cells.size() != listed.size())
        config_error(std::string(name) + ".cells needs one value per Markov cell");
      std::vector<double> v;
      for (const auto& c : core.cells()) {
        auto it = std::find_if(listed.begin(), listed.end(), [&](const Interval& d) {
          return std::fabs(d.lo - c.lo) <= 1e-12 && std::fabs(d.hi - c.hi) <= 1e-12;
        });
        v.push_back(p.cells[std::size_t(it - listed.begin())]);
      }
      return v;
    };
    if (!f_reg) core.set_potential("f", by_cell(fcfg, "f"));
    if (!phi_reg) core.set_potential("phi", by_cell(*phicfg, "phi"));
    MarkovSystem sys =
        cfg.refine_depth > 1 ? refine_to_cylinders(core, cfg.refine_depth) : core;
    SpectrumLevel lvl;
    lvl.f = f_reg ? cell_values(sys, *f_reg) : sys.potential("f");
    lvl.phi = phi_reg ? cell_values(sys, *phi_reg) : sys.potential("phi");
    lvl.level = level;
    lvl.system = std::move(sys);
    return lvl;
  };

  std::vector<SpectrumLevel> out;
  if (!cfg.truncation_levels.empty()) {
    if (cfg.map->parabolic_points().empty())
      config_error("truncation_levels given but the map has no parabolic point");
    if (!f_reg || !phi_reg)
      config_error("truncation families need f and phi as functions of x");
    for (auto l : cfg.truncation_levels) {
      if (l == 0) config_error("truncation levels start at 1");
      out.push_back(make(build_markov_system(cfg.map, truncation_cells(*cfg.map, l)), l));
    }
    return out;
  }
  out.push_back(make(build_markov_system(cfg.map, cfg.cells), 0));
  return out;
}

std::vector<ParabolicValue> parabolic_values(const RunConfig& cfg) {
  std::vector<double> xs = cfg.parabolic_x;
  if (cfg.parabolic_auto && cfg.map)
    for (const auto& p : cfg.map->parabolic_points()) xs.push_back(p.x);
  if (xs.empty()) return {};
  const PotentialConfig& f = cfg.potentials.at("f");
  if (f.kind == PotentialConfig::Kind::cells)
    config_error("parabolic points need f as a function of x");
  RegularPotential fr = regular(f);
  std::vector<ParabolicValue> out;
  for (double x : xs) out.push_back({x, fr(x)});
  return out;
}

SpectrumQuery build_query(const RunConfig& cfg) {
  SpectrumQuery q;
  q.levels = build_levels(cfg);
  q.a_grid = cfg.a_grid;
  q.tol_delta = cfg.tol_delta;
  q.tol_q = cfg.tol_q;
  q.parabolic = parabolic_values(cfg);
  q.threads = cfg.threads;
  return q;
}

std::vector<StageSpec> build_stages(const RunConfig& cfg) {
  if (!cfg.moran) config_error("config has no moran section");
  std::vector<SpectrumLevel> levels;
  std::vector<StageSpec> out;
  for (const auto& sc : cfg.moran->stages) {
    StageSpec s;
    s.eps = sc.eps;
    s.m = sc.m;
    s.bridge_cell = sc.bridge_cell;
    if (sc.transition) {
      s.system = MarkovSystem::symbolic(*sc.transition);
      if (!sc.f || !sc.phi)
        config_error("stage with its own transition needs f and phi");
    } else {
      if (levels.empty()) levels = build_levels(cfg);
      s.system = levels.back().system;
      s.f = levels.back().f;
      s.phi = levels.back().phi;
    }
    if (sc.f) s.f = *sc.f;
    if (sc.phi) s.phi = *sc.phi;
    s.psi = sc.psi;
    if (s.psi.size() != s.system.size() || s.f.size() != s.system.size() ||
        s.phi.size() != s.system.size())
      config_error("stage f, phi and psi need one value per cell");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace birkhoff
