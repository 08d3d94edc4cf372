#include "rtd/olma.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "rtd/dipi.hpp"
#include "rtd/errors.hpp"
#include "rtd/exact.hpp"
#include "rtd/kappa.hpp"

namespace rtd::olma {
namespace {

int gate_logic(GateFn fn, int a, int b) {
  switch (fn) {
    case GateFn::And: return a & b;
    case GateFn::Or: return a | b;
    case GateFn::Nand: return 1 - (a & b);
    case GateFn::Xor: return a ^ b;
  }
  return 0;
}

const char* kModeNames[kModes] = {"OK", "Stuck0", "Stuck1", "Unknown"};

// Budgeted posteriors are mixed with this much of the prior so a confident
// but wrong estimate cannot make later reports impossible.
constexpr double kSupportMix = 1e-3;

Variable make_var(VarId id, std::string name, std::vector<std::string> domain, VarKind kind = VarKind::Chance) {
  Variable v;
  v.id = id;
  v.name = std::move(name);
  v.domain = std::move(domain);
  v.kind = kind;
  return v;
}

double action_cost(const Circuit& c, int a, const CostModel& cost) {
  switch (decode_action(c, a).kind) {
    case Action::Kind::Wait: return 0.0;
    case Action::Kind::Probe: return cost.c_probe;
    case Action::Kind::Replace: return cost.r;
  }
  return 0.0;
}

bool replaces(const Circuit& c, int a, int gate) {
  const Action act = decode_action(c, a);
  return act.kind == Action::Kind::Replace && act.target == gate;
}

GateBelief normalized(GateBelief b) {
  double z = 0.0;
  for (double x : b) z += x;
  if (z > 0.0)
    for (double& x : b) x /= z;
  return b;
}

// f * [any gate faulted] over a block of mode variables.
Factor any_fault_cost(const std::vector<VarId>& modes, double weight) {
  std::vector<int> card(modes.size(), kModes);
  std::size_t n = 1;
  for (std::size_t i = 0; i < modes.size(); ++i) n *= kModes;
  std::vector<double> table(n, weight);
  table[0] = 0.0;  // every gate OK
  return Factor(modes, card, table, FactorRole::Utility);
}

}  // namespace

Circuit build_half_adder() {
  Circuit c;
  c.lines = {"A", "B", "n1", "n2", "Sum", "Carry"};
  c.num_inputs = 2;
  c.gates = {{"G1", GateFn::Nand, 0, 1, 2},
             {"G2", GateFn::Or, 0, 1, 3},
             {"G3", GateFn::And, 2, 3, 4},
             {"G4", GateFn::And, 0, 1, 5}};
  c.sensors = {0, 1, 4, 5};
  c.probes = {2, 3};
  return c;
}

std::string validate_circuit(const Circuit& c) {
  const int n = static_cast<int>(c.lines.size());
  std::vector<bool> driven(n, false);
  for (int i = 0; i < c.num_inputs && i < n; ++i) driven[i] = true;
  for (const auto& g : c.gates) {
    if (g.in0 < 0 || g.in0 >= n || g.in1 < 0 || g.in1 >= n || g.out < 0 || g.out >= n)
      return "gate " + g.name + " references a missing line";
    if (!driven[g.in0] || !driven[g.in1]) return "gate " + g.name + " reads a line not yet driven";
    if (driven[g.out]) return "line " + c.lines[g.out] + " has two drivers";
    driven[g.out] = true;
  }
  for (int s : c.sensors)
    if (s < 0 || s >= n) return "sensor references a missing line";
  for (int p : c.probes)
    if (p < 0 || p >= n) return "probe references a missing line";
  return {};
}

Action decode_action(const Circuit& c, int index) {
  const int np = static_cast<int>(c.probes.size());
  if (index <= 0) return {};
  if (index <= np) return {Action::Kind::Probe, index - 1};
  if (index < c.num_actions()) return {Action::Kind::Replace, index - 1 - np};
  throw ConfigError("action index out of range");
}

std::string action_name(const Circuit& c, int index) {
  const Action a = decode_action(c, index);
  switch (a.kind) {
    case Action::Kind::Wait: return "Wait";
    case Action::Kind::Probe: return "Probe(" + c.lines[c.probes[a.target]] + ")";
    case Action::Kind::Replace: return "Replace(" + c.gates[a.target].name + ")";
  }
  return {};
}

void CostModel::check() const {
  if (!(r > 0.0 && f > 0.0 && c_probe >= 0.0 && p >= 0.0 && p < 1.0 && t > 0.0))
    throw ConfigError("cost model: r, f, t must be positive, c_probe >= 0, 0 <= p < 1");
  if (!(t >= 3.0 * r / f)) throw ConfigError("cost model: t must be well above r/f");
  if (p > 0.0 && !(t <= r / (3.0 * p * f))) throw ConfigError("cost model: t must be well below r/(p*f)");
}

std::uint64_t Rng::next() {
  std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

int Rng::below(int n) { return static_cast<int>(next() % static_cast<std::uint64_t>(n)); }

std::vector<int> evaluate_lines(const Circuit& c, const std::vector<GateMode>& modes, const std::vector<int>& inputs,
                                Rng& rng) {
  std::vector<int> lines(c.lines.size(), 0);
  for (int i = 0; i < c.num_inputs; ++i) lines[i] = inputs[i];
  for (std::size_t g = 0; g < c.gates.size(); ++g) {
    const Gate& gate = c.gates[g];
    int v = 0;
    switch (modes[g]) {
      case GateMode::Ok: v = gate_logic(gate.fn, lines[gate.in0], lines[gate.in1]); break;
      case GateMode::Stuck0: v = 0; break;
      case GateMode::Stuck1: v = 1; break;
      case GateMode::Unknown: v = rng.below(2); break;
    }
    lines[gate.out] = v;
  }
  return lines;
}

EquipmentStep step_equipment(const Circuit& c, std::vector<GateMode> modes, double p, Rng& rng) {
  EquipmentStep s;
  for (std::size_t g = 0; g < modes.size(); ++g) {
    if (modes[g] != GateMode::Ok) continue;
    if (rng.uniform() < p) {
      modes[g] = static_cast<GateMode>(1 + rng.below(3));
      s.injected.push_back(static_cast<int>(g));
    }
  }
  std::vector<int> inputs(c.num_inputs);
  for (int& x : inputs) x = rng.below(2);
  s.lines = evaluate_lines(c, modes, inputs, rng);
  s.modes = std::move(modes);
  return s;
}

BeliefState all_ok_beliefs(const Circuit& c) { return BeliefState(c.gates.size(), GateBelief{1.0, 0.0, 0.0, 0.0}); }

SenseReport sense(const Circuit& c, const std::vector<int>& lines, std::optional<int> pending_probe) {
  SenseReport r;
  for (int s : c.sensors) r.sensors.push_back(lines[s]);
  if (pending_probe) r.probe = std::make_pair(*pending_probe, lines[c.probes[*pending_probe]]);
  return r;
}

GateBelief transition(const GateBelief& prior, bool replaced, double p, int ticks) {
  if (replaced) return {1.0 - p, p / 3.0, p / 3.0, p / 3.0};
  const double stay = std::pow(1.0 - p, std::max(ticks, 1));
  const double fault = (1.0 - stay) / 3.0;
  GateBelief out{prior[0] * stay, prior[1], prior[2], prior[3]};
  for (int m = 1; m < kModes; ++m) out[m] += prior[0] * fault;
  return out;
}

DecisionBasis build_decision_basis(const Circuit& c, const BeliefState& beliefs, const CostModel& cost,
                                   int stage_ticks) {
  if (beliefs.size() != c.gates.size()) throw ConfigError("belief state does not match the circuit");
  DecisionBasis b;
  InfluenceDiagram& d = b.diagram;
  d.sign = Sign::Minimize;
  const std::vector<std::string> mode_dom(kModeNames, kModeNames + kModes);
  const std::vector<std::string> bit = {"0", "1"};
  std::vector<std::string> acts;
  for (int a = 0; a < c.num_actions(); ++a) acts.push_back(action_name(c, a));
  const int ng = static_cast<int>(c.gates.size());

  auto add = [&](std::string name, std::vector<std::string> dom, VarKind kind = VarKind::Chance) {
    const VarId id = d.num_vars();
    d.variables.push_back(make_var(id, std::move(name), std::move(dom), kind));
    return id;
  };
  auto add_modes = [&](int stage, std::vector<VarId>& out) {
    for (const auto& g : c.gates) out.push_back(add(g.name + "_" + std::to_string(stage), mode_dom));
  };
  auto add_lines = [&](int stage, std::vector<VarId>& out) {
    for (const auto& l : c.lines) out.push_back(add(l + "_" + std::to_string(stage), bit));
  };
  add_modes(0, b.mode0);
  add_lines(0, b.line0);
  b.d0 = add("D0", acts, VarKind::Decision);
  add_modes(1, b.mode1);
  add_lines(1, b.line1);
  b.probe1 = add("Probe_1", {"none", "0", "1"});
  b.d1 = add("D1", acts, VarKind::Decision);
  add_modes(2, b.mode2);

  for (int g = 0; g < ng; ++g) {
    const GateBelief prior = normalized(beliefs[g]);
    d.cpts.emplace_back(std::vector<VarId>{b.mode0[g]}, std::vector<int>{kModes},
                        std::vector<double>(prior.begin(), prior.end()), FactorRole::Cpt, b.mode0[g]);
  }
  auto line_cpts = [&](const std::vector<VarId>& modes, const std::vector<VarId>& lines) {
    for (int i = 0; i < c.num_inputs; ++i)
      d.cpts.emplace_back(std::vector<VarId>{lines[i]}, std::vector<int>{2}, std::vector<double>{0.5, 0.5},
                          FactorRole::Cpt, lines[i]);
    for (int g = 0; g < ng; ++g) {
      const Gate& gate = c.gates[g];
      std::vector<double> table;
      for (int m = 0; m < kModes; ++m)
        for (int x = 0; x < 2; ++x)
          for (int y = 0; y < 2; ++y) {
            double p1 = 0.5;
            switch (static_cast<GateMode>(m)) {
              case GateMode::Ok: p1 = gate_logic(gate.fn, x, y); break;
              case GateMode::Stuck0: p1 = 0.0; break;
              case GateMode::Stuck1: p1 = 1.0; break;
              case GateMode::Unknown: p1 = 0.5; break;
            }
            table.push_back(1.0 - p1);
            table.push_back(p1);
          }
      d.cpts.emplace_back(std::vector<VarId>{modes[g], lines[gate.in0], lines[gate.in1], lines[gate.out]},
                          std::vector<int>{kModes, 2, 2, 2}, std::move(table), FactorRole::Cpt, lines[gate.out]);
    }
  };
  auto transition_cpts = [&](const std::vector<VarId>& from, VarId decision, const std::vector<VarId>& to) {
    const int na = c.num_actions();
    for (int g = 0; g < ng; ++g) {
      std::vector<double> table;
      for (int m = 0; m < kModes; ++m)
        for (int a = 0; a < na; ++a) {
          GateBelief one{};
          one[m] = 1.0;
          const GateBelief next = transition(one, replaces(c, a, g), cost.p, stage_ticks);
          table.insert(table.end(), next.begin(), next.end());
        }
      d.cpts.emplace_back(std::vector<VarId>{from[g], decision, to[g]}, std::vector<int>{kModes, na, kModes},
                          std::move(table), FactorRole::Cpt, to[g]);
    }
  };
  line_cpts(b.mode0, b.line0);
  transition_cpts(b.mode0, b.d0, b.mode1);
  line_cpts(b.mode1, b.line1);
  {
    // Probe reading: none unless D0 probed; then the probed line's value.
    std::vector<VarId> scope{b.d0};
    std::vector<int> card{c.num_actions()};
    for (int pl : c.probes) {
      scope.push_back(b.line1[pl]);
      card.push_back(2);
    }
    scope.push_back(b.probe1);
    card.push_back(3);
    std::size_t rows = 1;
    for (std::size_t i = 0; i + 1 < card.size(); ++i) rows *= card[i];
    std::vector<double> table(rows * 3, 0.0);
    std::vector<int> idx(card.size() - 1, 0);
    for (std::size_t r = 0; r < rows; ++r) {
      const Action act = decode_action(c, idx[0]);
      const int reading = act.kind == Action::Kind::Probe ? 1 + idx[1 + act.target] : 0;
      table[r * 3 + reading] = 1.0;
      for (int i = static_cast<int>(idx.size()) - 1; i >= 0; --i) {
        if (++idx[i] < card[i]) break;
        idx[i] = 0;
      }
    }
    d.cpts.emplace_back(scope, card, std::move(table), FactorRole::Cpt, b.probe1);
  }
  transition_cpts(b.mode1, b.d1, b.mode2);

  DecisionStage s0{b.d0, {}};
  for (int s : c.sensors) s0.observes.push_back(b.line0[s]);
  DecisionStage s1{b.d1, {}};
  for (int s : c.sensors) s1.observes.push_back(b.line1[s]);
  s1.observes.push_back(b.probe1);
  d.decisions = {s0, s1};

  std::vector<double> act_cost;
  for (int a = 0; a < c.num_actions(); ++a) act_cost.push_back(action_cost(c, a, cost));
  d.utilities.emplace_back(std::vector<VarId>{b.d0}, std::vector<int>{c.num_actions()}, act_cost,
                           FactorRole::Utility);
  d.utilities.emplace_back(std::vector<VarId>{b.d1}, std::vector<int>{c.num_actions()}, act_cost,
                           FactorRole::Utility);
  d.utilities.push_back(any_fault_cost(b.mode1, cost.f * std::max(stage_ticks, 1)));
  d.utilities.push_back(any_fault_cost(b.mode2, cost.t * cost.f));
  return b;
}

Evidence report_evidence(const Circuit& c, const DecisionBasis& basis, const SenseReport& report) {
  Evidence e;
  for (std::size_t i = 0; i < c.sensors.size(); ++i) e[basis.line0[c.sensors[i]]] = report.sensors.at(i);
  if (report.probe) e[basis.line0[c.probes[report.probe->first]]] = report.probe->second;
  return e;
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "random") return Algorithm::Random;
  if (name == "exact") return Algorithm::Exact;
  if (name == "dipi") return Algorithm::Dipi;
  if (name == "k") return Algorithm::K;
  if (name == "pk") return Algorithm::PK;
  throw ConfigError("unknown algorithm '" + name + "'");
}

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::Random: return "random";
    case Algorithm::Exact: return "exact";
    case Algorithm::Dipi: return "dipi";
    case Algorithm::K: return "k";
    case Algorithm::PK: return "pk";
  }
  return {};
}

StagePosterior stage_posteriors(const DecisionBasis& basis, const Evidence& evidence, const AgentSpec& spec) {
  StagePosterior out;
  const InfluenceDiagram& d = basis.diagram;
  try {
    if (spec.algorithm == Algorithm::Exact) {
      for (VarId g : basis.mode0) {
        const auto post = posterior(d, evidence, g, &out.units);
        GateBelief b{};
        std::copy(post.begin(), post.end(), b.begin());
        out.modes.push_back(b);
      }
      return out;
    }
    const PartialMarginals pm = partial_marginals(d, evidence, basis.mode0, std::max(spec.steps, 1));
    out.units = pm.units;
    if (!(pm.covered > 0.0)) {
      out.zero_mass = true;
      return out;
    }
    for (std::size_t i = 0; i < basis.mode0.size(); ++i) {
      const Factor* prior = d.cpt_of(basis.mode0[i]);
      GateBelief b{};
      for (int m = 0; m < kModes; ++m)
        b[m] = (1.0 - kSupportMix) * pm.marginals[i][m] + kSupportMix * prior->table[m];
      out.modes.push_back(b);
    }
  } catch (const ZeroMassError&) {
    out.zero_mass = true;
  }
  return out;
}

BeliefState roll_forward(const BeliefState& posterior, const Circuit& c, int action, const CostModel& cost, int ticks) {
  BeliefState next;
  for (std::size_t g = 0; g < posterior.size(); ++g)
    next.push_back(normalized(transition(posterior[g], replaces(c, action, static_cast<int>(g)), cost.p, ticks)));
  return next;
}

int run_tick_clock(std::uint64_t units, double units_per_tick) {
  if (!(units_per_tick > 0.0)) throw ConfigError("units per tick must be positive");
  const double t = std::ceil(static_cast<double>(units) / units_per_tick);
  return std::max(1, static_cast<int>(std::min(t, 1e9)));
}

CycleResult agent_cycle(AgentState& state, const SenseReport& report, const AgentSpec& spec, const Circuit& c,
                        const CostModel& cost, double units_per_tick) {
  CycleResult r;
  if (spec.algorithm == Algorithm::Random) {
    r.action = state.rng.below(c.num_actions());
    r.units = 1;
    r.ticks = run_tick_clock(r.units, units_per_tick);
    return r;
  }
  if (state.beliefs.empty()) state.beliefs = all_ok_beliefs(c);
  const DecisionBasis basis = build_decision_basis(c, state.beliefs, cost, state.stage_ticks);
  const Evidence ev = report_evidence(c, basis, report);
  std::uint64_t units = 0;
  try {
    switch (spec.algorithm) {
      case Algorithm::Exact: {
        const DecisionResult dr = evaluate_decision(basis.diagram, ev);
        r.action = dr.action;
        units += dr.compute_units;
        break;
      }
      case Algorithm::Dipi: {
        EvaluationTree tree(basis.diagram, ev);
        const DecideResult dr = decide(tree, std::max(spec.steps, 1));
        r.action = dr.action;
        units += dr.units;
        // Nothing absorbed means the report is impossible under the beliefs.
        if (tree.exhausted() && dr.bounds.covered[dr.action] <= 0.0) throw ZeroMassError("report has zero mass");
        break;
      }
      case Algorithm::K:
      case Algorithm::PK: {
        const ReducedResult rr = reduced_decide(basis.diagram, ev, std::max(spec.steps, 1),
                                                spec.algorithm == Algorithm::K ? ReductionMode::K : ReductionMode::PK);
        r.action = rr.action;
        units += rr.units;
        if (!rr.have_score) r.failed = true;
        break;
      }
      case Algorithm::Random: break;
    }
  } catch (const ZeroMassError&) {
    r.action = 0;
    r.failed = true;
  }

  const StagePosterior sp = stage_posteriors(basis, ev, spec);
  units += sp.units;
  r.units = std::max<std::uint64_t>(units, 1);
  r.ticks = run_tick_clock(r.units, units_per_tick);
  if (sp.zero_mass) {
    r.beliefs_kept = true;
    state.beliefs = roll_forward(state.beliefs, c, r.action, cost, r.ticks);
  } else {
    state.beliefs = roll_forward(sp.modes, c, r.action, cost, r.ticks);
  }
  state.stage_ticks = r.ticks;
  return r;
}

ActionOutcome apply_action(const Circuit& c, std::vector<GateMode>& modes, int action, const CostModel& cost) {
  ActionOutcome o;
  const Action a = decode_action(c, action);
  switch (a.kind) {
    case Action::Kind::Wait: break;
    case Action::Kind::Probe:
      o.cost = cost.c_probe;
      o.probed = true;
      o.pending_probe = a.target;
      break;
    case Action::Kind::Replace:
      o.cost = cost.r;
      o.replaced = true;
      modes[a.target] = GateMode::Ok;
      break;
  }
  return o;
}

const char* mode_name(GateMode m) { return kModeNames[static_cast<int>(m)]; }

void Transcript::write(std::ostream& os, const Circuit& c) const {
  os << "# kind\ttick\tfields\n";
  std::size_t di = 0;
  auto join_modes = [&](const std::vector<GateMode>& ms) {
    std::string s;
    for (std::size_t i = 0; i < ms.size(); ++i) s += (i ? "," : "") + std::string(mode_name(ms[i]));
    return s;
  };
  for (const auto& t : ticks) {
    os << "T\t" << t.tick << '\t' << join_modes(t.modes) << '\t';
    for (std::size_t i = 0; i < t.lines.size(); ++i) os << (i ? "," : "") << t.lines[i];
    os << '\t';
    for (std::size_t i = 0; i < t.injected.size(); ++i) os << (i ? "," : "") << c.gates[t.injected[i]].name;
    os << '\t' << (t.faulted ? 1 : 0) << '\n';
    while (di < decisions.size() && decisions[di].tick == t.tick) {
      const auto& d = decisions[di++];
      os << "D\t" << d.tick << '\t' << action_name(c, d.action) << '\t' << d.units << '\t' << d.ticks << '\t'
         << (d.failed ? 1 : 0) << '\t' << (d.beliefs_kept ? 1 : 0) << '\t' << (d.applied ? 1 : 0) << '\n';
    }
  }
  os << "S\treplacements=" << replacements << "\tprobes=" << probes << "\tfaulted_ticks=" << faulted_ticks
     << "\tfailures=" << failures << "\ttotal_cost=" << total_cost << '\n';
}

std::string Transcript::str(const Circuit& c) const {
  std::ostringstream os;
  write(os, c);
  return os.str();
}

}  // namespace rtd::olma
