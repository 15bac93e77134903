#include "birkhoff/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "birkhoff/config.hpp"
#include "birkhoff/error.hpp"
#include "birkhoff/moran.hpp"
#include "birkhoff/oracle.hpp"

namespace birkhoff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void log_line(std::ostream& log, const json& j) { log << j.dump() << '\n'; }

std::string timestamp_line(const std::string& what) {
  auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return "# birkhoff " + what + " generated " + buf + "\n";
}

std::string format_interval(const Interval& i) {
  return "[" + format_number(i.lo) + ";" + format_number(i.hi) + "]";
}

Interval parse_interval(const std::string& s) {
  if (s.size() < 5 || s.front() != '[' || s.back() != ']')
    throw Error(ErrorCode::ParseError, "cli", "parse_table", "bad interval '" + s + "'");
  auto semi = s.find(';');
  return {parse_number(s.substr(1, semi - 1)),
          parse_number(s.substr(semi + 1, s.size() - semi - 2))};
}

void write_file(const fs::path& path, const std::string& body, std::ostream& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw Error(ErrorCode::ConfigError, "cli", "write_output",
                "cannot write " + path.string());
  out << body;
  log_line(log, {{"level", "info"}, {"event", "wrote"}, {"file", path.string()}});
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

// Grid override: n points over the configured span (or over H).
void apply_grid(RunConfig& cfg, const CliOptions& opt, const Interval& h) {
  if (!opt.grid) return;
  double lo = h.lo, hi = h.hi;
  if (cfg.a_span) {
    lo = cfg.a_span->first;
    hi = cfg.a_span->second;
  } else if (!cfg.a_grid.empty()) {
    lo = *std::min_element(cfg.a_grid.begin(), cfg.a_grid.end());
    hi = *std::max_element(cfg.a_grid.begin(), cfg.a_grid.end());
  }
  cfg.a_grid = linspace(lo, hi, *opt.grid);
  cfg.a_span = std::make_pair(lo, hi);
}

int cmd_spectrum(RunConfig& cfg, const CliOptions& opt, std::ostream& log) {
  SpectrumQuery q = build_query(cfg);
  apply_grid(cfg, opt, compute_H(q));
  q.a_grid = cfg.a_grid;
  if (q.a_grid.empty())
    throw Error(ErrorCode::ConfigError, "cli", "spectrum", "query.a_grid is empty");
  SpectrumTable t = spectrum_grid(q);
  for (const auto& w : t.warnings)
    log_line(log, {{"level", "warning"}, {"module", "spectrum"},
                   {"operation", "classify_Hp"}, {"message", w}});
  for (const auto& r : t.rows)
    if (r.flag.rfind("error:", 0) == 0)
      log_line(log, {{"level", "warning"}, {"module", "spectrum"},
                     {"operation", "spectrum_grid"}, {"a", r.a}, {"flag", r.flag}});
  write_file(fs::path(opt.out_dir) / "spectrum.csv", format_table(t), log);
  return kExitOk;
}

int cmd_pressure(RunConfig& cfg, const CliOptions& opt, std::ostream& log) {
  auto levels = build_levels(cfg);
  const SpectrumLevel& lvl = levels.back();
  std::vector<double> qs = cfg.pressure_q.empty() ? linspace(-4, 4, 17) : cfg.pressure_q;
  std::vector<double> ds = cfg.pressure_delta.empty() ? std::vector<double>{0.0}
                                                      : cfg.pressure_delta;
  std::ostringstream out;
  out << timestamp_line("pressure");
  out << "# cells=" << lvl.system.size()
      << ", h_top=" << format_number(topological_entropy(lvl.system)) << "\n";
  out << "q,delta,a,P\n";
  for (double d : ds)
    for (double q : qs)
      out << format_number(q) << ',' << format_number(d) << ','
          << format_number(cfg.pressure_a) << ','
          << format_number(tilted_pressure(lvl, cfg.pressure_a, q, d)) << '\n';
  write_file(fs::path(opt.out_dir) / "pressure.csv", out.str(), log);
  return kExitOk;
}

int cmd_hypdim(RunConfig& cfg, const CliOptions& opt, std::ostream& log) {
  SpectrumQuery q = build_query(cfg);
  HyperbolicDimension hd = hyperbolic_dimension(q);
  std::ostringstream out;
  out << timestamp_line("hypdim");
  out << "# hyp_dim=" << format_number(hd.value) << "\n";
  out << "level,cells,hyp_dim\n";
  for (std::size_t i = 0; i < q.levels.size(); ++i)
    out << q.levels[i].level << ',' << q.levels[i].system.size() << ','
        << format_number(hd.per_level[i]) << '\n';
  write_file(fs::path(opt.out_dir) / "hypdim.csv", out.str(), log);
  return kExitOk;
}

int cmd_oracle(RunConfig& cfg, const CliOptions& opt, std::ostream& log) {
  auto levels = build_levels(cfg);
  const SpectrumLevel& lvl = levels.back();
  Interval h = ergodic_average_range(lvl.system, lvl.f);
  std::vector<double> as = cfg.oracle_a;
  if (as.empty())
    for (int k = 1; k <= 11; ++k) as.push_back(h.lo + (h.hi - h.lo) * k / 12.0);
  std::ostringstream out;
  out << timestamp_line("oracle");
  out << "# mesh=" << cfg.oracle_mesh << "\n";
  out << "a,delta0,cvp,grid_value,kkt_residual,abs_diff\n";
  for (double a : as) {
    Delta0 d = delta0(lvl, a, cfg.tol_delta, cfg.tol_q);
    OracleResult o = cvp_bruteforce(lvl.system, lvl.f, lvl.phi, a, cfg.oracle_mesh);
    out << format_number(a) << ',' << format_number(d.value) << ','
        << format_number(o.value) << ',' << format_number(o.grid_value) << ','
        << format_number(o.kkt_residual) << ','
        << format_number(std::fabs(d.value - o.value)) << '\n';
  }
  write_file(fs::path(opt.out_dir) / "oracle.csv", out.str(), log);
  return kExitOk;
}

int cmd_moran(RunConfig& cfg, const CliOptions& opt, std::ostream& log) {
  ConstructionPlan plan = plan_construction(build_stages(cfg), cfg.moran->target_a);
  MoranTree tree = build_tree(plan, cfg.moran->max_depth);
  DimensionEstimate est = estimate_dimension(tree);
  auto samples = sample_points(tree, cfg.moran->samples, cfg.seed);

  json doc;
  doc["target_a"] = plan.target_a;
  doc["depth"] = tree.depth();
  doc["seed"] = cfg.seed;
  doc["dimension"] = {{"point", est.point}, {"lower", est.lower}, {"per_level", est.per_level}};
  json levels = json::array();
  for (std::size_t s = 0; s < tree.levels().size(); ++s) {
    const MoranLevel& l = tree.levels()[s];
    const PlanStage& st = plan.stages[s];
    json jl = {{"stage", s + 1},
               {"m", st.m},
               {"m_lower", st.m_lower},
               {"eps", st.eps},
               {"a", st.a},
               {"lambda", st.lambda},
               {"h", st.h},
               {"coverage", st.coverage},
               {"coverage_met", st.coverage_met},
               {"j", l.connector_length},
               {"l", st.l},
               {"bridge_cell", st.spec.bridge_cell},
               {"start_depth", l.start_depth},
               {"depth", l.depth},
               {"log_count", l.log_count},
               {"log_mass", l.log_mass},
               {"selected_mass", l.selected_mass},
               {"window_f", l.window_f},
               {"window_phi", l.window_phi},
               {"window_smb", l.window_smb},
               {"window_slack", tree.window_slack(s)},
               {"dimension", est.per_level[s]}};
    if (auto words = tree.stage_words(s, 256)) {
      jl["words"] = *words;
      jl["member_mass"] = std::exp(-l.log_count);
    }
    levels.push_back(std::move(jl));
  }
  doc["levels"] = std::move(levels);
  write_file(fs::path(opt.out_dir) / "moran_tree.json", doc.dump(2) + "\n", log);

  std::ostringstream out;
  out << timestamp_line("samples");
  out << "# seed=" << cfg.seed << ", points=" << samples.size() << "\n";
  out << "x,depth,A_f,A_phi\n";
  for (const auto& sp : samples)
    for (std::size_t k = 0; k < sp.depths.size(); ++k)
      out << format_number(sp.x) << ',' << sp.depths[k] << ','
          << format_number(sp.avg_f[k]) << ',' << format_number(sp.avg_phi[k]) << '\n';
  write_file(fs::path(opt.out_dir) / "samples.csv", out.str(), log);
  return kExitOk;
}

int cmd_check(RunConfig* cfg, const CliOptions& opt, std::ostream& log) {
  SpectrumTable table, refined;
  bool have_refined = false;
  if (!opt.input.empty()) {
    table = read_table(opt.input);
    if (!opt.refined.empty()) {
      refined = read_table(opt.refined);
      have_refined = true;
    }
  } else {
    if (!cfg)
      throw Error(ErrorCode::ConfigError, "cli", "check", "check needs --config or --input");
    SpectrumQuery q = build_query(*cfg);
    apply_grid(*cfg, opt, compute_H(q));
    q.a_grid = cfg->a_grid;
    if (q.a_grid.empty())
      throw Error(ErrorCode::ConfigError, "cli", "check", "query.a_grid is empty");
    table = spectrum_grid(q);
    double lo = q.a_grid.front(), hi = q.a_grid.back();
    std::size_t n = (q.a_grid.size() - 1) * cfg->check_refine + 1;
    if (cfg->a_span && q.a_grid.size() > 1) {
      q.a_grid = linspace(lo, hi, n);
      refined = spectrum_grid(q);
      have_refined = true;
    }
  }
  std::ostringstream rep;
  rep << "rows: " << table.rows.size() << "\n";
  auto uni = check_unimodal(table);
  rep << "unimodal: " << (uni.empty() ? "pass" : "FAIL") << " (" << uni.size()
      << " violating triples)\n";
  for (const auto& v : uni)
    rep << "  triple a=" << format_number(table.rows[v.i].a) << ","
        << format_number(table.rows[v.j].a) << "," << format_number(table.rows[v.k].a)
        << " deficit " << format_number(v.deficit) << "\n";
  std::size_t bad = uni.size();
  if (have_refined) {
    auto sc = check_semicontinuity(table, refined);
    rep << "semicontinuity: " << (sc.pass ? "pass" : "FAIL") << " (" << sc.checked
        << " points checked against " << refined.rows.size() << " refined rows)\n";
    for (const auto& v : sc.violations)
      rep << "  " << v.kind << " at a=" << format_number(v.a) << " deviation "
          << format_number(v.deviation) << " allowed " << format_number(v.allowed) << "\n";
    bad += sc.violations.size();
  } else {
    rep << "semicontinuity: skipped (no refined table)\n";
  }
  fs::create_directories(opt.out_dir);
  write_file(fs::path(opt.out_dir) / "report.txt", rep.str(), log);
  if (bad) {
    log_line(log, {{"level", "error"}, {"module", "spectrum"}, {"operation", "check"},
                   {"code", "PropertyViolation"}, {"violations", bad}});
    return kExitViolations;
  }
  return kExitOk;
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

double parse_number(const std::string& s) {
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::ParseError, "cli", "parse_table", "bad number '" + s + "'");
}

std::string format_table(const SpectrumTable& t, bool timestamp) {
  std::ostringstream out;
  if (timestamp) out << timestamp_line("spectrum");
  out << "# hyp_dim=" << format_number(t.hyp_dim) << ", H=" << format_interval(t.h)
      << ", Hp=" << (t.hp ? format_interval(*t.hp) : std::string("empty"))
      << ", tol_delta=" << format_number(t.tol_delta) << ", hyp_per_level=";
  for (std::size_t i = 0; i < t.hyp_per_level.size(); ++i)
    out << (i ? ";" : "") << format_number(t.hyp_per_level[i]);
  out << "\n";
  const bool multi = t.hyp_per_level.size() > 1;
  out << "a,delta0,q_star,inf_p,in_H,in_Hp,flag\n";
  for (const auto& r : t.rows) {
    out << format_number(r.a) << ',' << format_number(r.delta0) << ','
        << format_number(r.q_star) << ',' << format_number(r.inf_p) << ','
        << (r.in_h ? 1 : 0) << ',' << (r.in_hp ? 1 : 0) << ',' << r.flag;
    if (multi) out << ";level=" << r.level;
    out << '\n';
  }
  return out.str();
}

SpectrumTable parse_table(const std::string& csv) {
  SpectrumTable t;
  std::istringstream in(csv);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# hyp_dim=", 0) != 0) continue;
      for (auto& field : split(line.substr(2), ',')) {
        auto kv = field;
        kv.erase(0, kv.find_first_not_of(' '));
        auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        std::string k = kv.substr(0, eq), v = kv.substr(eq + 1);
        if (k == "hyp_dim") t.hyp_dim = parse_number(v);
        else if (k == "H") t.h = parse_interval(v);
        else if (k == "Hp") { if (v != "empty") t.hp = parse_interval(v); }
        else if (k == "tol_delta") t.tol_delta = parse_number(v);
        else if (k == "hyp_per_level" && !v.empty())
          for (auto& x : split(v, ';')) t.hyp_per_level.push_back(parse_number(x));
      }
      continue;
    }
    if (!header) {
      if (line != "a,delta0,q_star,inf_p,in_H,in_Hp,flag")
        throw Error(ErrorCode::ParseError, "cli", "parse_table",
                    "unexpected header '" + line + "'");
      header = true;
      continue;
    }
    auto cols = split(line, ',');
    if (cols.size() != 7)
      throw Error(ErrorCode::ParseError, "cli", "parse_table", "expected 7 columns");
    SpectrumRow r;
    r.a = parse_number(cols[0]);
    r.delta0 = parse_number(cols[1]);
    r.q_star = parse_number(cols[2]);
    r.inf_p = parse_number(cols[3]);
    r.in_h = cols[4] == "1";
    r.in_hp = cols[5] == "1";
    r.flag = cols[6];
    auto lv = r.flag.find(";level=");
    if (lv != std::string::npos) {
      r.level = std::stoul(r.flag.substr(lv + 7));
      r.flag.erase(lv);
    }
    t.rows.push_back(std::move(r));
  }
  if (!header)
    throw Error(ErrorCode::ParseError, "cli", "parse_table", "missing CSV header");
  return t;
}

SpectrumTable read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw Error(ErrorCode::ConfigError, "cli", "read_table", "cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_table(ss.str());
}

int run(const CliOptions& opt, std::ostream& log) {
  static const char* commands[] = {"pressure", "spectrum", "hypdim", "oracle", "moran", "check"};
  try {
    if (std::find(std::begin(commands), std::end(commands), opt.command) == std::end(commands))
      throw Error(ErrorCode::InvalidArgument, "cli", "run",
                  "unknown command '" + opt.command + "'");
    std::optional<RunConfig> cfg;
    if (!opt.config_path.empty()) {
      cfg = load_config(opt.config_path);
      if (opt.seed) cfg->seed = *opt.seed;
      if (opt.tol_delta) cfg->tol_delta = *opt.tol_delta;
      if (opt.tol_q) cfg->tol_q = *opt.tol_q;
      if (!(cfg->tol_delta > 0.0) || !(cfg->tol_q > 0.0))
        throw Error(ErrorCode::InvalidArgument, "cli", "run", "tolerances must be positive");
    } else if (opt.command != "check") {
      throw Error(ErrorCode::ConfigError, "cli", "run", "--config is required");
    }
    if (opt.command == "moran" && !cfg->moran)
      throw Error(ErrorCode::ConfigError, "cli", "moran", "config has no moran section");
    fs::create_directories(opt.out_dir);
    if (opt.command == "spectrum") return cmd_spectrum(*cfg, opt, log);
    if (opt.command == "pressure") return cmd_pressure(*cfg, opt, log);
    if (opt.command == "hypdim") return cmd_hypdim(*cfg, opt, log);
    if (opt.command == "oracle") return cmd_oracle(*cfg, opt, log);
    if (opt.command == "moran") return cmd_moran(*cfg, opt, log);
    return cmd_check(cfg ? &*cfg : nullptr, opt, log);
  } catch (const Error& e) {
    log_line(log, {{"level", "error"}, {"module", e.module()}, {"operation", e.operation()},
                   {"code", to_string(e.code())}, {"message", e.detail()}});
    return is_validation_error(e.code()) ? kExitValidation : kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    log_line(log, {{"level", "error"}, {"module", "cli"}, {"operation", "write_output"},
                   {"code", "IOError"}, {"message", e.what()}});
    return kExitValidation;
  } catch (const std::exception& e) {
    log_line(log, {{"level", "error"}, {"module", "cli"}, {"operation", opt.command},
                   {"code", "InternalError"}, {"message", e.what()}});
    return kExitNumerical;
  }
}

}  // namespace birkhoff
