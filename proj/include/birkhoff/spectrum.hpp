#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "birkhoff/interval.hpp"
#include "birkhoff/markov_thermo.hpp"

// The dimension Birkhoff spectrum a -> delta0(a) on locally constant data.
namespace birkhoff {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// One Markov system of a (possibly nested) family with per-cell f and phi.
struct SpectrumLevel {
  MarkovSystem system;
  std::vector<double> f;
  std::vector<double> phi;
  std::size_t level = 0;
};

struct ParabolicValue {
  double x = 0.0;
  double f_value = 0.0;
};

struct SpectrumQuery {
  std::vector<SpectrumLevel> levels;
  std::vector<double> a_grid;
  double tol_delta = 1e-6;
  double tol_q = 1e-9;
  std::vector<ParabolicValue> parabolic;
  std::size_t threads = 0;  // 0: hardware concurrency
};

struct InfPressure {
  double q_star = 0.0;
  double value = 0.0;
  bool tail_limit = false;
};

struct Delta0 {
  double value = kNegInf;
  double q_star = 0.0;
  double inf_p = 0.0;
  std::string flag;  // interior | endpoint | outside
};

struct HpClassification {
  std::optional<Interval> hp;
  Interval h;  // H, widened to contain declared parabolic values
  std::vector<std::string> warnings;
};

struct HyperbolicDimension {
  double value = 0.0;
  std::vector<double> per_level;
};

struct SpectrumRow {
  double a = 0.0;
  double delta0 = kNegInf;
  double q_star = 0.0;
  double inf_p = 0.0;
  bool in_h = false;
  bool in_hp = false;
  std::string flag;
  std::size_t level = 0;
};

struct SpectrumTable {
  std::vector<SpectrumRow> rows;
  double hyp_dim = 0.0;
  Interval h;
  std::optional<Interval> hp;
  double tol_delta = 1e-6;
  std::vector<double> hyp_per_level;
  std::vector<std::string> warnings;
};

// P(q(f-a) - delta phi) on one system.
double tilted_pressure(const SpectrumLevel& lvl, double a, double q,
                       double delta);

// Interior case: golden section on an expanded bracket. At an endpoint of the
// range of ergodic averages the infimum is a limit in q and is flagged.
InfPressure inf_q_pressure(const SpectrumLevel& lvl, double a, double delta,
                           double tol_q);
InfPressure inf_q_pressure(const SpectrumQuery& query, double a, double delta);

Delta0 delta0(const SpectrumLevel& lvl, double a, double tol_delta,
              double tol_q);
// Supremum over the levels of the family.
Delta0 delta0(const SpectrumQuery& query, double a);

Interval compute_H(const SpectrumQuery& query);
HpClassification classify_Hp(const SpectrumQuery& query,
                             const std::vector<ParabolicValue>& parabolic);

// Root of P(-delta phi) = 0 on one system.
double bowen_root(const MarkovSystem& sys, const std::vector<double>& phi);
HyperbolicDimension hyperbolic_dimension(const SpectrumQuery& query);

SpectrumTable spectrum_grid(const SpectrumQuery& query);

struct UnimodalViolation {
  std::size_t i, j, k;
  double deficit;
};
std::vector<UnimodalViolation> check_unimodal(const SpectrumTable& table);

struct SemicontinuityViolation {
  double a;
  std::string kind;  // consistency | continuity | lsc | grid
  double deviation;
  double allowed;
};

struct SemicontinuityReport {
  bool pass = true;
  std::size_t checked = 0;
  std::vector<SemicontinuityViolation> violations;
};

SemicontinuityReport check_semicontinuity(const SpectrumTable& table,
                                          const SpectrumTable& refined);

}  // namespace birkhoff
