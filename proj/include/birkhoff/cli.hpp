#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "birkhoff/spectrum.hpp"

namespace birkhoff {

struct CliOptions {
  std::string command;  // pressure | spectrum | hypdim | oracle | moran | check
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> grid;
  std::optional<double> tol_delta;
  std::optional<double> tol_q;
  std::string input;    // check: spectrum.csv to test
  std::string refined;  // check: finer spectrum.csv for semicontinuity
};

enum ExitCode : int {
  kExitOk = 0,
  kExitValidation = 2,
  kExitNumerical = 3,
  kExitViolations = 4,
};

// Runs one command; diagnostics go to `log` as one JSON object per line.
int run(const CliOptions& options, std::ostream& log);

// 12 significant digits; -inf and nan spelled out.
std::string format_number(double v);
double parse_number(const std::string& s);

// CSV with a timestamped first comment line, a metadata comment line and
// the columns a,delta0,q_star,inf_p,in_H,in_Hp,flag.
std::string format_table(const SpectrumTable& table, bool timestamp = true);
SpectrumTable parse_table(const std::string& csv);
SpectrumTable read_table(const std::string& path);

}  // namespace birkhoff
