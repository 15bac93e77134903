#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "birkhoff/markov_thermo.hpp"

// Finite-depth realization of the nested-cylinder (w-measure) construction:
// stage words selected by Birkhoff and entropy windows, equidistributed mass,
// Frostman-type dimension estimate and seeded sampling.
//
// Stage words are never listed one by one. Words with identical statistics
// (last cell, sum f, sum phi, log Gibbs mass) are merged into one node of a
// layered graph, which keeps depth ~10^3 tractable; counts are exact.
namespace birkhoff {

struct StageSpec {
  MarkovSystem system;
  std::vector<double> f, phi;  // per cell
  std::vector<double> psi;     // Gibbs potential; equilibrium state is mu_i
  double eps = 0.1;
  std::size_t m = 0;           // 0: smallest admissible
  std::size_t bridge_cell = 0; // stage >= 2: cell where the stage's words start
};

struct PlanStage {
  StageSpec spec;
  MarkovMeasure gibbs;
  double a = 0.0, lambda = 0.0, h = 0.0, eps = 0.0;
  std::size_t m = 0;
  std::size_t m_lower = 0;     // from the inductive inequality
  double coverage = 0.0;       // Gibbs mass of the window-selected words
  bool coverage_met = false;
  double carry = 0.0;          // m_{i-1} eps_{i-1}; 0 for the first stage
  std::size_t j = 0;           // return time into the next stage
  std::size_t l = 0;           // cap 2 * graph diameter
  std::size_t bridge_prev = 0; // next stage's bridge cell, indexed in this system
  bool has_next = false;
};

struct ConstructionPlan {
  std::vector<PlanStage> stages;
  double target_a = 0.0;
};

ConstructionPlan plan_construction(const std::vector<StageSpec>& stages,
                                   double target_a);

struct MoranLevel {
  std::size_t stage = 0;
  std::size_t start_depth = 0;
  std::size_t word_length = 0;
  std::size_t connector_length = 0;  // j; connector follows the stage word
  std::size_t depth = 0;             // cumulative depth after the stage word
  double log_count = 0.0;            // log # members of this stage
  double log_mass = 0.0;             // log mass of one level member (cumulative)
  double selected_mass = 0.0;        // Gibbs mass of the kept class
  double min_sum_phi = 0.0;
  double min_connector_phi = 0.0;
  double max_log_image = 0.0;
  double window_f = 0.0;             // |S_f - n a| bound of a kept word
  double window_phi = 0.0;
  double window_smb = 0.0;
};

struct StageGraph;  // merged-word layers, private to the implementation

class MoranTree {
 public:
  const std::vector<MoranLevel>& levels() const { return levels_; }
  std::size_t depth() const { return depth_; }
  const ConstructionPlan& plan() const { return plan_; }

  // All member words of one stage (without connectors), lexicographically,
  // if there are at most `limit`; nullopt otherwise.
  std::optional<std::vector<std::vector<std::size_t>>> stage_words(
      std::size_t stage, std::size_t limit) const;
  // Connector cells placed after a stage word ending in `last`.
  std::vector<std::size_t> connector(std::size_t stage, std::size_t last) const;
  // Concatenated words of every level member, if there are at most `limit`.
  std::optional<std::vector<std::vector<std::size_t>>> level_words(
      std::size_t level, std::size_t limit) const;

  // Slack on |A_depth(x, f) - target| at the end of level s.
  double window_slack(std::size_t level) const;

  // One uniformly drawn member word of the finest level, connectors included.
  std::vector<std::size_t> draw(std::uint64_t stream_seed) const;

 private:
  friend MoranTree build_tree(const ConstructionPlan& plan,
                              std::size_t max_depth);
  ConstructionPlan plan_;
  std::vector<MoranLevel> levels_;
  std::size_t depth_ = 0;
  std::vector<std::shared_ptr<const StageGraph>> graphs_;
  std::vector<std::vector<std::vector<std::size_t>>> connectors_;
};

MoranTree build_tree(const ConstructionPlan& plan, std::size_t max_depth);

struct DimensionEstimate {
  double lower = 0.0;
  double point = 0.0;
  std::vector<double> per_level;
};

DimensionEstimate estimate_dimension(const MoranTree& tree);

struct SamplePoint {
  double x = 0.0;  // NaN for purely symbolic systems
  std::vector<std::size_t> depths;
  std::vector<double> avg_f;
  std::vector<double> avg_phi;
  std::vector<double> slack;
};

std::vector<SamplePoint> sample_points(const MoranTree& tree, std::size_t n,
                                       std::uint64_t seed);

}  // namespace birkhoff
