#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "rtd/model.hpp"

namespace rtd::olma {

enum class GateFn { And, Or, Nand, Xor };
enum class GateMode { Ok = 0, Stuck0 = 1, Stuck1 = 2, Unknown = 3 };
inline constexpr int kModes = 4;

struct Gate {
  std::string name;
  GateFn fn = GateFn::And;
  int in0 = 0, in1 = 0;  // line ids
  int out = 0;
};

/// Lines 0..num_inputs-1 are primary inputs; gates are listed in evaluation order.
struct Circuit {
  std::vector<std::string> lines;
  int num_inputs = 0;
  std::vector<Gate> gates;
  std::vector<int> sensors;
  std::vector<int> probes;

  int num_actions() const { return 1 + static_cast<int>(probes.size() + gates.size()); }
};

/// G1=NAND(A,B)->n1, G2=OR(A,B)->n2, G3=AND(n1,n2)->Sum, G4=AND(A,B)->Carry.
Circuit build_half_adder();

std::string validate_circuit(const Circuit& c);

struct Action {
  enum class Kind { Wait, Probe, Replace };
  Kind kind = Kind::Wait;
  int target = -1;  // probe: index into Circuit::probes; replace: gate index
};

/// Alternatives: Wait, Probe(each probe line), Replace(each gate).
Action decode_action(const Circuit& c, int index);
std::string action_name(const Circuit& c, int index);

struct CostModel {
  double r = 3.0;        // per replaced gate
  double c_probe = 1.0;  // per probe
  double f = 1.0;        // per tick with any gate faulted
  double p = 0.003;      // per gate per tick
  double t = 50.0;       // outcome-state duration

  /// Throws ConfigError unless 3*r/f <= t <= r/(3*p*f).
  void check() const;
};

/// Splitmix64: small, portable, fully specified.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();
  double uniform();  // [0, 1)
  int below(int n);  // [0, n)

 private:
  std::uint64_t state_;
};

struct EquipmentStep {
  std::vector<GateMode> modes;
  std::vector<int> lines;
  std::vector<int> injected;  // gates that faulted this tick
};

/// Per-line values for the given modes and input values; Unknown draws a coin.
std::vector<int> evaluate_lines(const Circuit& c, const std::vector<GateMode>& modes, const std::vector<int>& inputs,
                                Rng& rng);

/// One tick: fault injection, fresh uniform inputs, line evaluation.
EquipmentStep step_equipment(const Circuit& c, std::vector<GateMode> modes, double p, Rng& rng);

using GateBelief = std::array<double, kModes>;
using BeliefState = std::vector<GateBelief>;

BeliefState all_ok_beliefs(const Circuit& c);

struct SenseReport {
  std::vector<int> sensors;               // values of Circuit::sensors
  std::optional<std::pair<int, int>> probe;  // (index into Circuit::probes, value)
};

SenseReport sense(const Circuit& c, const std::vector<int>& lines, std::optional<int> pending_probe);

/// Rolling two-stage decision basis.  Stage 0 is the state at the current
/// report, stage 1 the state at the next report, stage 2 the outcome state.
struct DecisionBasis {
  InfluenceDiagram diagram;
  std::vector<VarId> mode0, mode1, mode2;  // per gate
  std::vector<VarId> line0, line1;         // per line
  VarId d0 = -1, d1 = -1;
  VarId probe1 = -1;  // reading taken at the next report: none, 0, 1
};

/// `stage_ticks` is the expected number of ticks until the next report; fault
/// probability and per-tick failure cost of stage 1 are scaled by it.
DecisionBasis build_decision_basis(const Circuit& c, const BeliefState& beliefs, const CostModel& cost,
                                   int stage_ticks = 1);

Evidence report_evidence(const Circuit& c, const DecisionBasis& basis, const SenseReport& report);

/// Distribution of a gate's mode after `ticks` ticks starting from `prior`,
/// with `replaced` meaning the gate is fresh for the last tick only.
GateBelief transition(const GateBelief& prior, bool replaced, double p, int ticks);

enum class Algorithm { Random, Exact, Dipi, K, PK };

struct AgentSpec {
  Algorithm algorithm = Algorithm::Exact;
  int steps = 1;  // D-IPI steps or K/PK iterations
};

Algorithm parse_algorithm(const std::string& name);
std::string algorithm_name(Algorithm a);

struct AgentState {
  BeliefState beliefs;
  int stage_ticks = 1;  // ticks the previous cycle took
  Rng rng{0};           // random agent only
};

struct CycleResult {
  int action = 0;
  std::uint64_t units = 1;  // decision plus roll-forward
  int ticks = 1;            // thinking time on the tick clock
  bool failed = false;      // evaluator failure, fell back to Wait
  bool beliefs_kept = false;  // roll-forward hit zero mass
};

/// Extend the basis, acquire the report, find the minimum expected cost
/// action, post it and roll the beliefs forward over the ticks it took.
CycleResult agent_cycle(AgentState& state, const SenseReport& report, const AgentSpec& spec, const Circuit& c,
                        const CostModel& cost, double units_per_tick);

struct StagePosterior {
  BeliefState modes;  // per gate, stage 0
  std::uint64_t units = 0;
  bool zero_mass = false;
};

/// Per-gate stage-0 posteriors: exact for the exact agent, budgeted
/// best-first enumeration (budget = spec.steps) for the budgeted agents.
StagePosterior stage_posteriors(const DecisionBasis& basis, const Evidence& evidence, const AgentSpec& spec);

/// Next-cycle priors: stage posteriors pushed through the action and `ticks`
/// ticks of fault exposure.
BeliefState roll_forward(const BeliefState& posterior, const Circuit& c, int action, const CostModel& cost, int ticks);

/// max(1, ceil(units / units_per_tick)).
int run_tick_clock(std::uint64_t units, double units_per_tick);

struct ActionOutcome {
  double cost = 0.0;
  bool replaced = false;
  bool probed = false;
  std::optional<int> pending_probe;
};

/// Replace resets the gate to OK (cost r); Probe schedules a reading for the
/// next report (cost c_probe); Wait is free.
ActionOutcome apply_action(const Circuit& c, std::vector<GateMode>& modes, int action, const CostModel& cost);

struct TickRecord {
  int tick = 0;
  std::vector<GateMode> modes;
  std::vector<int> lines;
  std::vector<int> injected;
  bool faulted = false;
};

struct DecisionRecord {
  int tick = 0;  // tick of the report it answered
  int action = 0;
  std::uint64_t units = 0;
  int ticks = 1;
  bool failed = false;
  bool beliefs_kept = false;
  bool applied = false;  // false when the horizon ran out first
};

struct Transcript {
  std::vector<TickRecord> ticks;
  std::vector<DecisionRecord> decisions;
  int replacements = 0;
  int probes = 0;
  int faulted_ticks = 0;
  int failures = 0;
  double total_cost = 0.0;

  /// Tab-separated event log; see the README for the row kinds.
  void write(std::ostream& os, const Circuit& c) const;
  std::string str(const Circuit& c) const;
};

const char* mode_name(GateMode m);

}  // namespace rtd::olma
