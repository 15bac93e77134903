#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "birkhoff/expr.hpp"
#include "birkhoff/interval.hpp"

// Piecewise monotone interval maps, regular potentials and their cylinder
// geometry.
namespace birkhoff {

enum class BranchKind { affine, power, general };

// Description of one branch as it comes from a config.
//
//   affine:  T(x) = slope * x + intercept
//   power:   T(x) = x + coefficient * x^(1 + exponent) - shift
//   general: T(x) = forward(x), T'(x) = derivative(x)
struct BranchSpec {
  Interval domain;
  BranchKind kind = BranchKind::affine;
  double slope = 1.0;
  double intercept = 0.0;
  double coefficient = 1.0;
  double exponent = 0.0;
  double shift = 0.0;
  std::string forward;
  std::string derivative;
};

class Branch {
 public:
  explicit Branch(const BranchSpec& spec);

  double operator()(double x) const;
  double derivative(double x) const;
  // Inverse on the branch image; y is clamped into the image first.
  double inverse(double y) const;

  const Interval& domain() const noexcept { return domain_; }
  Interval image() const;
  bool increasing() const noexcept { return increasing_; }
  BranchKind kind() const noexcept { return spec_.kind; }
  const BranchSpec& spec() const noexcept { return spec_; }

 private:
  BranchSpec spec_;
  Interval domain_;
  std::optional<Expression> forward_;
  std::optional<Expression> derivative_;
  bool increasing_ = true;
};

struct ParabolicPoint {
  double x;
  std::size_t branch;
};

class PiecewiseMonotoneMap {
 public:
  PiecewiseMonotoneMap(std::vector<Branch> branches, bool repeller,
                       std::vector<ParabolicPoint> parabolic);

  std::size_t size() const noexcept { return branches_.size(); }
  const Branch& branch(std::size_t i) const { return branches_.at(i); }
  std::span<const Branch> branches() const { return branches_; }
  bool repeller() const noexcept { return repeller_; }
  const std::vector<ParabolicPoint>& parabolic_points() const {
    return parabolic_;
  }

  // Branch endpoints c_1 < ... < c_{n+1} (gap endpoints included).
  std::vector<double> breakpoints() const;
  bool is_interior_breakpoint(double x) const;
  // Index of the branch whose closed domain contains x; the left-most one
  // when x is shared.
  std::optional<std::size_t> locate(double x) const;
  bool all_affine() const;

 private:
  std::vector<Branch> branches_;
  bool repeller_;
  std::vector<ParabolicPoint> parabolic_;
};

// Validates branch specs and builds the map. Gaps between branch domains are
// accepted only when `repeller` is set.
PiecewiseMonotoneMap build_map(const std::vector<BranchSpec>& branch_specs,
                               bool repeller = false);

// T(x) = x + x^(1+gamma) mod 1 on [0,1], with T(1) = 1.
PiecewiseMonotoneMap manneville_pomeau(double gamma);

struct PotentialPiece {
  Interval domain;
  std::function<double(double)> fn;
  std::optional<double> constant;
};

// A function with one-sided limits everywhere that takes the mean of the two
// limits at interior breakpoints. Pieces are kept sorted; gaps between
// pieces are allowed (the potential is then undefined there).
class RegularPotential {
 public:
  enum class Kind { step, smooth_piecewise };

  explicit RegularPotential(std::vector<PotentialPiece> pieces);

  static RegularPotential constant(double c, Interval domain = {0.0, 1.0});
  static RegularPotential step(const std::vector<Interval>& cells,
                               std::span<const double> values);
  static RegularPotential from_expression(const Expression& e,
                                          Interval domain = {0.0, 1.0});

  double operator()(double x) const;
  double left_limit(double x) const;
  double right_limit(double x) const;

  Kind kind() const noexcept { return kind_; }
  bool is_step() const noexcept { return kind_ == Kind::step; }
  std::span<const PotentialPiece> pieces() const { return pieces_; }
  const std::map<double, double>& left_limits() const { return left_; }
  const std::map<double, double>& right_limits() const { return right_; }
  std::vector<double> interior_breakpoints() const;

  // Inf and sup over the open cell (piece boundaries excluded).
  Interval bounds_on(const Interval& cell) const;
  double sup_abs() const;

 private:
  std::vector<PotentialPiece> pieces_;
  std::map<double, double> left_;
  std::map<double, double> right_;
  Kind kind_;
};

// phi = log|T'| as a regular potential on the branch domains.
RegularPotential log_derivative(const PiecewiseMonotoneMap& map);

struct CylinderWord {
  std::vector<std::size_t> symbols;
  std::size_t depth() const noexcept { return symbols.size(); }
};

struct StepApproximation {
  RegularPotential lower;
  RegularPotential upper;
  std::vector<Interval> cells;
  double gap = 0.0;
};

// Step functions lower <= pot <= upper with sup(upper - lower) <= eps on a
// partition refining the branch partition. Throws UnreachableTolerance when
// more than `max_cells` cells would be needed.
StepApproximation step_approximation(const RegularPotential& pot,
                                     const PiecewiseMonotoneMap& map,
                                     double eps,
                                     std::size_t max_cells = 1u << 14);

// C_{i_1...i_k} by composing inverse branches; nullopt when inadmissible.
std::optional<Interval> cylinder_interval(const PiecewiseMonotoneMap& map,
                                          const CylinderWord& word);

struct BirkhoffSum {
  double sum = 0.0;
  std::size_t steps = 0;
  double average() const { return steps ? sum / double(steps) : 0.0; }
};

BirkhoffSum birkhoff_sum(const PiecewiseMonotoneMap& map,
                         const RegularPotential& pot, double x,
                         std::size_t n);

}  // namespace birkhoff
