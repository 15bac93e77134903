#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "birkhoff/cli.hpp"
#include "doctest.h"

using namespace birkhoff;
namespace fs = std::filesystem;

namespace {

std::string config(const std::string& name) {
  return std::string(BIRKHOFF_CONFIG_DIR) + "/" + name;
}

fs::path fresh_dir(const std::string& tag) {
  fs::path d = fs::temp_directory_path() / ("birkhoff_cli_" + tag);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string body(const std::string& csv) { return csv.substr(csv.find('\n') + 1); }

std::vector<std::string> data_lines(const std::string& csv) {
  std::vector<std::string> out;
  std::istringstream in(csv);
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    out.push_back(line);
  }
  return out;
}

int run_cmd(const std::string& cmd, const std::string& cfg, const fs::path& out,
            std::ostream& log) {
  CliOptions o;
  o.command = cmd;
  o.config_path = cfg;
  o.out_dir = out.string();
  return run(o, log);
}

fs::path write_yaml(const fs::path& dir, const std::string& text) {
  fs::path p = dir / "cfg.yaml";
  std::ofstream(p) << text;
  return p;
}

int shell(const std::string& cmd) {
  int st = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

}  // namespace

TEST_CASE("spectrum command on the digit-frequency config") {
  auto dir = fresh_dir("be");
  std::ostringstream log;
  REQUIRE(run_cmd("spectrum", config("be_doubling.yaml"), dir, log) == kExitOk);
  auto csv = slurp(dir / "spectrum.csv");
  CHECK(csv.rfind("#", 0) == 0);
  auto t = parse_table(csv);
  REQUIRE(t.rows.size() == 33);
  CHECK(data_lines(csv).size() == 33);
  for (const auto& r : t.rows) {
    double expect =
        (r.a <= 0 || r.a >= 1) ? 0.0
                               : (-r.a * std::log(r.a) - (1 - r.a) * std::log(1 - r.a)) / std::log(2.0);
    CHECK(std::fabs(r.delta0 - expect) <= 1e-5);
  }
}

TEST_CASE("validation errors exit with code 2") {
  std::ostringstream log;
  auto dir = fresh_dir("bad");
  CHECK(run_cmd("spectrum", config("overlapping_branches.yaml"), dir, log) == kExitValidation);
  CHECK(log.str().find("OverlappingDomains") != std::string::npos);
  auto line = log.str().substr(0, log.str().find('\n'));
  auto j = nlohmann::json::parse(line);
  CHECK(j["level"] == "error");
  CHECK(j["module"] == "interval_maps");
  CHECK(j.contains("operation"));

  std::ostringstream log2;
  auto p = write_yaml(dir, "map: {preset: doubling}\npotentials: {f: {cells: [0, 1]}}\nbogus: 1\n");
  CHECK(run_cmd("spectrum", p.string(), dir, log2) == kExitValidation);
  CHECK(log2.str().find("ConfigError") != std::string::npos);

  std::ostringstream log3;
  CHECK(run_cmd("spectrum", (dir / "missing.yaml").string(), dir, log3) == kExitValidation);
}

TEST_CASE("numerical failures exit with code 3") {
  auto dir = fresh_dir("num");
  auto p = write_yaml(dir,
                      "map: {preset: doubling}\n"
                      "potentials: {f: {cells: [0, 1]}}\n"
                      "moran:\n"
                      "  target_a: 3/4\n"
                      "  stages:\n"
                      "    - {eps: 0.001, m: 3, psi: [log(1/4), log(3/4)]}\n");
  std::ostringstream log;
  CHECK(run_cmd("moran", p.string(), dir, log) == kExitNumerical);
  CHECK(log.str().find("InfeasibleSchedule") != std::string::npos);
}

TEST_CASE("check command") {
  auto dir = fresh_dir("check");
  std::ostringstream log;
  REQUIRE(run_cmd("spectrum", config("be_doubling.yaml"), dir, log) == kExitOk);
  auto t = read_table((dir / "spectrum.csv").string());

  CliOptions o;
  o.command = "check";
  o.input = (dir / "spectrum.csv").string();
  o.out_dir = dir.string();
  CHECK(run(o, log) == kExitOk);
  CHECK(fs::exists(dir / "report.txt"));

  t.rows[16].delta0 = 0.1;  // dip at a = 1/2
  std::ofstream(dir / "bad.csv") << format_table(t);
  o.input = (dir / "bad.csv").string();
  CHECK(run(o, log) == kExitViolations);
  CHECK(slurp(dir / "report.txt").find("unimodal") != std::string::npos);

  CliOptions c;
  c.command = "check";
  c.config_path = config("be_doubling.yaml");
  c.out_dir = dir.string();
  c.grid = 9;
  CHECK(run(c, log) == kExitOk);
}

TEST_CASE("spectrum tables round-trip") {
  SpectrumTable t;
  t.h = {0.0, 0.5};
  t.hp = Interval{0.3, 0.3};
  t.hyp_dim = 0.123456789012345;
  t.tol_delta = 1e-7;
  t.hyp_per_level = {0.1, 0.123456789012};
  for (int i = 0; i < 4; ++i) {
    SpectrumRow r;
    r.a = 0.1 * i;
    r.delta0 = i == 3 ? kNegInf : 1.0 / (i + 3);
    r.q_star = -0.5 * i;
    r.inf_p = 1e-9 * i;
    r.in_h = i != 3;
    r.in_hp = i == 2;
    r.flag = i == 2 ? "hp" : "interior";
    r.level = i;
    t.rows.push_back(r);
  }
  auto text = format_table(t, false);
  auto back = parse_table(text);
  CHECK(format_table(back, false) == text);
  REQUIRE(back.rows.size() == 4);
  CHECK(back.rows[3].delta0 == kNegInf);
  CHECK(back.rows[2].in_hp);
  CHECK(back.rows[1].delta0 == doctest::Approx(0.25).epsilon(1e-12));
  REQUIRE(back.hp.has_value());
  CHECK(back.hp->lo == doctest::Approx(0.3));
  CHECK(back.h.hi == doctest::Approx(0.5));
  CHECK(text.find("-inf") != std::string::npos);

  CHECK(format_number(kNegInf) == "-inf");
  CHECK(parse_number("-inf") == kNegInf);
  CHECK(format_number(1.0 / 3) == "0.333333333333");
}

TEST_CASE("identical runs give identical bodies") {
  for (const char* name : {"golden_mean.yaml", "manneville_pomeau.yaml"}) {
    auto d1 = fresh_dir("det1"), d2 = fresh_dir("det2");
    std::ostringstream log;
    REQUIRE(run_cmd("spectrum", config(name), d1, log) == kExitOk);
    REQUIRE(run_cmd("spectrum", config(name), d2, log) == kExitOk);
    CHECK(body(slurp(d1 / "spectrum.csv")) == body(slurp(d2 / "spectrum.csv")));
  }
  auto d1 = fresh_dir("det3"), d2 = fresh_dir("det4");
  std::ostringstream log;
  REQUIRE(run_cmd("moran", config("moran_two_stage.yaml"), d1, log) == kExitOk);
  REQUIRE(run_cmd("moran", config("moran_two_stage.yaml"), d2, log) == kExitOk);
  CHECK(body(slurp(d1 / "samples.csv")) == body(slurp(d2 / "samples.csv")));
  CHECK(slurp(d1 / "moran_tree.json") == slurp(d2 / "moran_tree.json"));
}

TEST_CASE("other commands write their tables") {
  auto dir = fresh_dir("cmds");
  std::ostringstream log;
  REQUIRE(run_cmd("pressure", config("be_doubling.yaml"), dir, log) == kExitOk);
  auto p = slurp(dir / "pressure.csv");
  CHECK(p.find("q,delta,a,P") != std::string::npos);
  CHECK(data_lines(p).size() == 17 * 3);

  REQUIRE(run_cmd("hypdim", config("cookie_cutter_24.yaml"), dir, log) == kExitOk);
  auto h = data_lines(slurp(dir / "hypdim.csv"));
  REQUIRE(h.size() == 1);
  CHECK(h[0].find("0.6942") != std::string::npos);

  REQUIRE(run_cmd("oracle", config("golden_mean.yaml"), dir, log) == kExitOk);
  auto o = data_lines(slurp(dir / "oracle.csv"));
  CHECK_FALSE(o.empty());
  for (const auto& line : o) {
    double diff = std::stod(line.substr(line.rfind(',') + 1));
    CHECK(diff <= 2e-3);
  }

  REQUIRE(run_cmd("moran", config("moran_two_stage.yaml"), dir, log) == kExitOk);
  auto doc = nlohmann::json::parse(slurp(dir / "moran_tree.json"));
  CHECK(doc["levels"].size() == 2);
  CHECK(doc["depth"].get<std::size_t>() > 0);
  CHECK(data_lines(slurp(dir / "samples.csv")).size() == 50 * 2);
}

TEST_CASE("command-line binary") {
  const std::string bin = BIRKHOFF_CLI_PATH;
  auto dir = fresh_dir("bin");
  CHECK(shell(bin + " spectrum --config " + config("be_doubling.yaml") + " --out " +
              dir.string() + " --grid 9 --tol-delta 1e-6") == 0);
  CHECK(data_lines(slurp(dir / "spectrum.csv")).size() == 9);
  CHECK(shell(bin + " spectrum --config " + config("overlapping_branches.yaml") + " --out " +
              dir.string()) == 2);
  CHECK(shell(bin + " nonsense") == 2);
  CHECK(shell(bin + " spectrum") == 2);
}
