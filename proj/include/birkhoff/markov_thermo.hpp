#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "birkhoff/interval.hpp"
#include "birkhoff/interval_maps.hpp"

// Subshifts of finite type for Markov sets, transfer-matrix pressure, Gibbs
// measures and graph bounds on ergodic averages.
namespace birkhoff {

using Transition01 = std::vector<std::vector<int>>;

// A finite Markov partition as a subshift of finite type. Transitions are
// stored as sorted successor lists so refined systems with thousands of
// cells stay sparse.
class MarkovSystem {
 public:
  MarkovSystem() = default;
  MarkovSystem(std::vector<Interval> cells,
               std::vector<std::vector<std::size_t>> successors,
               std::vector<std::size_t> cell_branch,
               std::shared_ptr<const PiecewiseMonotoneMap> map);

  // Purely symbolic system (no interval map behind it); cells are unit
  // placeholders.
  static MarkovSystem symbolic(const Transition01& transition);

  std::size_t size() const noexcept { return successors_.size(); }
  const std::vector<Interval>& cells() const noexcept { return cells_; }
  const Interval& cell(std::size_t i) const { return cells_.at(i); }
  std::span<const std::size_t> successors(std::size_t i) const {
    return successors_.at(i);
  }
  bool has_edge(std::size_t i, std::size_t j) const;
  std::size_t edge_count() const;
  Transition01 dense_transition() const;

  const PiecewiseMonotoneMap* source_map() const noexcept { return map_.get(); }
  std::shared_ptr<const PiecewiseMonotoneMap> shared_map() const { return map_; }
  std::size_t cell_branch(std::size_t i) const { return cell_branch_.at(i); }

  // Base-system word of each cell when this system is a cylinder refinement.
  const std::vector<std::vector<std::size_t>>& words() const { return words_; }
  void set_words(std::vector<std::vector<std::size_t>> words) {
    words_ = std::move(words);
  }

  void set_potential(const std::string& id, std::vector<double> values);
  bool has_potential(const std::string& id) const {
    return potentials_.count(id) > 0;
  }
  const std::vector<double>& potential(const std::string& id) const;
  const std::map<std::string, std::vector<double>>& potentials() const {
    return potentials_;
  }

  // Subsystem on the listed cells (in the given order).
  MarkovSystem restrict_to(std::span<const std::size_t> keep) const;

 private:
  std::vector<Interval> cells_;
  std::vector<std::vector<std::size_t>> successors_;
  std::vector<std::size_t> cell_branch_;
  std::shared_ptr<const PiecewiseMonotoneMap> map_;
  std::vector<std::vector<std::size_t>> words_;
  std::map<std::string, std::vector<double>> potentials_;
};

struct MarkovMeasure {
  std::vector<double> stationary;
  std::vector<std::vector<double>> kernel;
  double entropy = 0.0;
  double lyapunov = 0.0;  // NaN when the system has no "phi" potential
  std::map<std::string, double> integrals;
};

struct PressureBracket {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t cell_count = 0;
  bool converged = true;
  double width() const { return upper - lower; }
};

struct PerronResult {
  double log_radius = 0.0;
  std::vector<double> right;  // M r = rho r, normalized to sum 1
  std::vector<double> left;   // l M = rho l, normalized to sum 1
  std::size_t iterations = 0;
};

// ----------------------------------------------------------- structure

std::vector<std::vector<std::size_t>> strongly_connected_components(
    const MarkovSystem& sys);
bool is_irreducible(const MarkovSystem& sys);

// Transitions from image covering on the given cells, then pruning to the
// irreducible core of maximal entropy.
MarkovSystem build_markov_system(
    std::shared_ptr<const PiecewiseMonotoneMap> map,
    const std::vector<Interval>& cells);

// Cells from consecutive breakpoints (gaps are not cells when the map is a
// repeller and the breakpoints skip them).
std::vector<Interval> cells_from_partition(const std::vector<double>& partition);

// Markov cells avoiding a neighbourhood of every parabolic endpoint: the
// parabolic branch is cut at its first `level` preimages of the far endpoint.
std::vector<Interval> truncation_cells(const PiecewiseMonotoneMap& map,
                                       std::size_t level);

// Cell interval of an admissible cell word (inverse-branch composition).
std::optional<Interval> cell_cylinder(const MarkovSystem& sys,
                                      std::span<const std::size_t> word);

// Higher-block presentation on all admissible words of length `depth`.
MarkovSystem refine_to_cylinders(const MarkovSystem& sys, std::size_t depth,
                                 std::size_t max_cells = 1u << 14);

// Per-cell midpoint of the potential's range on each cell.
std::vector<double> cell_values(const MarkovSystem& sys,
                                const RegularPotential& pot);
std::vector<Interval> cell_bounds(const MarkovSystem& sys,
                                  const RegularPotential& pot);

// --------------------------------------------------------- thermodynamics

// Perron data of M_ij = A_ij exp(psi_i) for an irreducible system.
PerronResult perron(const MarkovSystem& sys, std::span<const double> psi,
                    bool with_left = true);

double pressure_locally_constant(const MarkovSystem& sys,
                                 std::span<const double> psi);
double topological_entropy(const MarkovSystem& sys);

PressureBracket pressure_regular(const MarkovSystem& sys,
                                 const RegularPotential& pot, double tol,
                                 std::size_t max_cells = 1u << 14);

MarkovMeasure equilibrium_measure(const MarkovSystem& sys,
                                  std::span<const double> psi);

// Stationary Markov measure for a row-stochastic kernel supported on the
// transition graph. Throws InvalidArgument when the kernel's stationary
// vector is not unique.
MarkovMeasure markov_measure_from_kernel(
    const MarkovSystem& sys, const std::vector<std::vector<double>>& kernel);

double integrate(const MarkovMeasure& mu, std::span<const double> values);

double conformality_residual(const MarkovSystem& sys,
                             std::span<const double> psi, std::size_t depth);

// [min, max] of the integral of a per-cell function over invariant measures.
Interval ergodic_average_range(const MarkovSystem& sys,
                               std::span<const double> values);

struct BigImageResult {
  double min_image_length = 0.0;
  double predicted = 0.0;
  bool consistent = false;
};

BigImageResult big_image_constant(const MarkovSystem& sys, std::size_t depth);

}  // namespace birkhoff
