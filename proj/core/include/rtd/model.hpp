#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace rtd {

using VarId = int;

enum class VarKind { Chance, Decision };
enum class Sign { Maximize, Minimize };

struct Variable {
  VarId id = 0;
  std::string name;
  std::vector<std::string> domain;
  VarKind kind = VarKind::Chance;

  int size() const { return static_cast<int>(domain.size()); }
};

enum class FactorRole { Generic, Cpt, Utility };

/// Nonnegative (or, for utilities, arbitrary finite) table over an ordered
/// scope.  Row-major: the last scope variable varies fastest.
struct Factor {
  std::vector<VarId> scope;
  std::vector<int> card;
  std::vector<double> table;
  FactorRole role = FactorRole::Generic;
  VarId child = -1;  // meaningful when role == Cpt

  Factor() = default;
  Factor(std::vector<VarId> scope, std::vector<int> card, std::vector<double> table,
         FactorRole role = FactorRole::Generic, VarId child = -1);

  static Factor constant(double value, FactorRole role = FactorRole::Generic);

  std::size_t size() const { return table.size(); }
  bool contains(VarId v) const;
  int position(VarId v) const;  // -1 if absent
  std::vector<std::size_t> strides() const;

  /// Entry for a full assignment indexed by variable id (vector covers all ids).
  double at(const std::vector<int>& assignment) const;
  std::size_t offset(const std::vector<int>& assignment) const;
};

struct DecisionStage {
  VarId var = 0;
  std::vector<VarId> observes;
};

struct InfluenceDiagram {
  std::vector<Variable> variables;
  std::vector<Factor> cpts;  // one per chance variable, role Cpt
  std::vector<DecisionStage> decisions;  // temporal order
  std::vector<Factor> utilities;  // summed
  Sign sign = Sign::Maximize;

  int num_vars() const { return static_cast<int>(variables.size()); }
  std::vector<int> cardinalities() const;
  const Factor* cpt_of(VarId child) const;
  std::optional<VarId> find(const std::string& name) const;
  bool is_decision(VarId v) const { return variables[v].kind == VarKind::Decision; }
  /// Chance-parent plus information-arc predecessors, per variable.
  std::vector<std::vector<VarId>> predecessors() const;
  /// Topological order over all variables (chance arcs + information arcs);
  /// empty when cyclic.  Ties broken by lowest id.
  std::vector<VarId> topological_order() const;
  /// Sum over utility factors of each factor's min / max entry.
  double utility_min() const;
  double utility_max() const;
};

/// Variable id -> observed value index.
using Evidence = std::map<VarId, int>;

/// Per variable, the admissible value indices (ascending).
struct DomainMask {
  std::vector<std::vector<int>> keep;

  static DomainMask full(const InfluenceDiagram& diagram);
};

/// All invariant violations; empty means the diagram is valid.
std::vector<std::string> validate(const InfluenceDiagram& diagram);

void check_evidence(const InfluenceDiagram& diagram, const Evidence& evidence);

/// Restricts every evidenced variable in scope to its observed value and drops
/// it from the scope.  Throws InvalidEvidence on an out-of-range value.
Factor apply_evidence(const Factor& factor, const Evidence& evidence);

/// Slices domains and tables down to the kept values.  Cpt rows are not
/// renormalized.  Throws InvalidMask on an empty keep-set.
InfluenceDiagram apply_mask(const InfluenceDiagram& diagram, const DomainMask& mask);

/// Re-expresses evidence in a masked diagram's value indices; nullopt when an
/// observed value was masked away.
std::optional<Evidence> remap_evidence(const DomainMask& mask, const Evidence& evidence);

}  // namespace rtd
