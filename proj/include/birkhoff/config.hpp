#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "birkhoff/expr.hpp"
#include "birkhoff/interval_maps.hpp"
#include "birkhoff/markov_thermo.hpp"
#include "birkhoff/moran.hpp"
#include "birkhoff/spectrum.hpp"

// Run configuration read from a YAML document. Every numeric scalar may be a
// constant expression ("log(2)", "1/3").
namespace birkhoff {

struct PotentialConfig {
  enum class Kind { cells, expression, steps };
  Kind kind = Kind::cells;
  std::vector<double> cells;                    // one value per Markov cell
  std::optional<Expression> expression;
  std::vector<std::pair<Interval, double>> steps;
};

struct StageConfig {
  double eps = 0.1;
  std::size_t m = 0;
  std::size_t bridge_cell = 0;
  std::optional<Transition01> transition;  // stage-specific symbolic system
  std::optional<std::vector<double>> f, phi;
  std::vector<double> psi;  // Gibbs potential per cell
};

struct MoranConfig {
  double target_a = 0.0;
  std::size_t max_depth = 100000;
  std::size_t samples = 100;
  std::vector<StageConfig> stages;
};

struct RunConfig {
  std::string source;

  std::shared_ptr<const PiecewiseMonotoneMap> map;  // null: symbolic only
  std::optional<Transition01> transition;
  std::vector<Interval> cells;
  std::vector<std::size_t> truncation_levels;
  std::size_t refine_depth = 1;

  std::map<std::string, PotentialConfig> potentials;

  std::vector<double> a_grid;
  std::optional<std::pair<double, double>> a_span;
  double tol_delta = 1e-6;
  double tol_q = 1e-9;
  bool parabolic_auto = true;
  std::vector<double> parabolic_x;
  std::size_t threads = 0;

  std::vector<double> pressure_q;
  std::vector<double> pressure_delta;
  double pressure_a = 0.0;

  std::size_t oracle_mesh = 50;
  std::vector<double> oracle_a;

  std::size_t check_refine = 4;

  std::optional<MoranConfig> moran;
  std::uint64_t seed = 1;
};

RunConfig parse_config(const std::string& yaml_text);
RunConfig load_config(const std::string& path);

std::vector<double> linspace(double lo, double hi, std::size_t n);

// The Markov systems of the run (one, or one per truncation level) with f and
// phi evaluated per cell.
std::vector<SpectrumLevel> build_levels(const RunConfig& cfg);

std::vector<ParabolicValue> parabolic_values(const RunConfig& cfg);

SpectrumQuery build_query(const RunConfig& cfg);

std::vector<StageSpec> build_stages(const RunConfig& cfg);

}  // namespace birkhoff
