#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rtd/model.hpp"

namespace rtd {

enum class ElimMode { Sum, Max, Min };

/// Cell-count ceiling for any intermediate table.
inline constexpr std::size_t kDefaultMaxCells = std::size_t{1} << 26;

/// Pointwise product over the ordered union scope (f's scope, then g's new vars).
Factor combine(const Factor& f, const Factor& g, std::size_t max_cells = kDefaultMaxCells);

/// Pointwise sum over the ordered union scope.
Factor add(const Factor& f, const Factor& g, std::size_t max_cells = kDefaultMaxCells);

struct Elimination {
  Factor result;
  /// Max/Min mode: chosen value index per remaining assignment (lowest index on ties).
  std::optional<std::vector<int>> argbest;
};

Elimination eliminate(const Factor& f, VarId var, ElimMode mode);

/// Reorders a factor's scope (tables permuted accordingly).
Factor reorder(const Factor& f, const std::vector<VarId>& scope);

struct PlanStep {
  enum class Kind { Combine, SumOut, MaxOut };
  Kind kind = Kind::Combine;
  VarId var = -1;              // SumOut / MaxOut
  std::vector<int> operands;   // Combine: pool ids consumed
  int result = -1;             // pool id produced
  std::size_t cells = 0;       // table size of the produced (Combine) or consumed (Out) factor
};

struct EliminationPlan {
  std::vector<PlanStep> steps;
  std::size_t peak_cells = 0;

  /// Variables in the order they are eliminated (sum or max).
  std::vector<VarId> order() const;
  void print(std::ostream& os, const InfluenceDiagram& diagram) const;
};

/// Greedy min-size elimination order (ties by variable id) over the chance
/// interaction graph, decision max-outs pinned last-to-first.  Variables in
/// `targets` and in the evidence are kept.
EliminationPlan plan(const InfluenceDiagram& diagram, const Evidence& evidence,
                     const std::vector<VarId>& targets);

/// Decision rule for one decision: scope is the context it was maximized in.
struct DecisionRule {
  VarId decision = -1;
  std::vector<VarId> scope;
  std::vector<int> card;
  std::vector<int> choice;  // row-major over scope
};

struct Policy {
  std::vector<DecisionRule> rules;
};

struct DecisionResult {
  int action = 0;              // value index of the first free decision
  VarId decision = -1;
  double score = 0.0;          // optimal expected utility given the evidence
  std::vector<double> action_values;  // expected utility per alternative, given the evidence
  double evidence_mass = 1.0;
  Policy policy;
  std::uint64_t compute_units = 0;  // cell operations
};

struct ExactOptions {
  std::size_t max_cells = kDefaultMaxCells;
};

/// Exact posterior of a chance variable; throws ZeroMassError on impossible evidence.
std::vector<double> posterior(const InfluenceDiagram& diagram, const Evidence& evidence, VarId target,
                              std::uint64_t* compute_units = nullptr, const ExactOptions& opts = {});

/// Exact evaluation of the first non-evidenced decision (perfect-recall semantics).
DecisionResult evaluate_decision(const InfluenceDiagram& diagram, const Evidence& evidence,
                                 const ExactOptions& opts = {});

/// Nested exhaustive enumeration with the same semantics; the test oracle.
DecisionResult brute_force_decision(const InfluenceDiagram& diagram, const Evidence& evidence,
                                    std::size_t max_assignments = std::size_t{1} << 20);

/// Probability of the evidence (decisions fixed at their first value; evidence
/// must not depend on free decisions).
double evidence_probability(const InfluenceDiagram& diagram, const Evidence& evidence);

/// Variables that can influence the query: ancestors (through chance arcs) of
/// `keep`, the evidence and, optionally, every utility scope.
std::vector<bool> relevant_variables(const InfluenceDiagram& diagram, const Evidence& evidence,
                                     const std::vector<VarId>& keep, bool with_utilities);

/// Evaluation blocks shared by the exact engine, the oracle and the search.
struct TemporalBlocks {
  std::vector<VarId> free_decisions;          // temporal order
  std::vector<std::vector<VarId>> observed;   // observed[k]: chance vars first seen by decision k
  std::vector<VarId> unobserved;              // chance vars never observed
};

/// Partitions non-evidenced variables.  Throws ScopeError if the first free
/// decision observes a non-evidenced variable, InvalidEvidence if evidence
/// depends on a free decision, or ScopeError when there is no free decision.
TemporalBlocks temporal_blocks(const InfluenceDiagram& diagram, const Evidence& evidence);

}  // namespace rtd
