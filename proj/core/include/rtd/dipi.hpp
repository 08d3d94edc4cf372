#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "rtd/model.hpp"

namespace rtd {

/// Per first-decision alternative bounds on the (unnormalized) expected
/// utility, plus the probability mass already absorbed under it.
struct ActionBounds {
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<double> covered;
};

struct StepReport {
  int step = 0;
  bool exhausted = false;      // nothing left to absorb; no work done
  std::uint64_t units = 0;     // 1 + first-time node expansions
  std::vector<std::pair<VarId, int>> instantiation;  // first leaf absorbed this step
  double mass = 0.0;           // path mass of that leaf
  std::vector<double> mass_added;  // per action
  ActionBounds bounds;
};

struct TreeOptions {
  bool use_cache = true;
  std::size_t max_nodes = std::size_t{1} << 22;
};

/// Searchable operator tree for the nested maximize/marginalize expected
/// utility expression.  Levels: first decision, then each later decision's
/// newly observed chance variables followed by that decision, then the never
/// observed chance variables.  Within a block, variables that complete
/// zero-bearing factors come first, then the most skewed (own cpt), then the
/// lowest id.  Single owner; not thread-safe.
class EvaluationTree {
 public:
  EvaluationTree(const InfluenceDiagram& diagram, const Evidence& evidence, TreeOptions options = {});
  ~EvaluationTree();
  EvaluationTree(EvaluationTree&&) noexcept;
  EvaluationTree& operator=(EvaluationTree&&) noexcept;

  /// Absorbs one more instantiation per alternative at every max-branch,
  /// following the largest unexplored mass at every sum-branch.
  StepReport step();

  bool exhausted() const;
  ActionBounds bounds() const;
  int steps_taken() const;
  std::uint64_t units() const;
  std::size_t node_count() const;
  Sign sign() const;

  VarId first_decision() const;
  /// Variables in branching order (the level sequence).
  const std::vector<VarId>& level_order() const;
  /// Ordered child expansion of the chance levels: variable -> skew score.
  double skew(VarId var) const;
  const InfluenceDiagram& diagram() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct DecideResult {
  int action = 0;
  ActionBounds bounds;
  int steps_used = 0;
  bool converged = false;
  bool exhausted = false;
  /// Selected action's bound; normalized by the evidence mass once exhausted.
  double score = 0.0;
  std::uint64_t units = 0;
};

/// Runs up to `budget` steps or until exhaustion / provable dominance.
DecideResult decide(EvaluationTree& tree, int budget, std::ostream* trace = nullptr);

/// Action under the partial-evaluation selection rule: argmax of lower
/// (maximize) or argmin of lower cost (minimize); lowest index on ties.
int select_action(const ActionBounds& bounds, Sign sign);
bool provably_best(const ActionBounds& bounds, Sign sign, int leader);

void write_trace_header(std::ostream& os, std::size_t actions);
void write_trace_line(std::ostream& os, const StepReport& report, const InfluenceDiagram& diagram);

struct PartialMarginals {
  std::vector<std::vector<double>> marginals;  // per target, normalized (uniform if no mass)
  double covered = 0.0;
  int steps = 0;
  bool exhausted = false;
  std::uint64_t units = 0;
};

/// Budgeted posterior marginals: enumerates complete chance instantiations in
/// descending mass order (best-first), one per step, accumulating mass per
/// target value.
PartialMarginals partial_marginals(const InfluenceDiagram& diagram, const Evidence& evidence,
                                   const std::vector<VarId>& targets, int budget);

}  // namespace rtd
