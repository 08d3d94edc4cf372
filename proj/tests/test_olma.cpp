#include <gtest/gtest.h>

#include <map>

#include "rtd/dipi.hpp"
#include "rtd/errors.hpp"
#include "rtd/exact.hpp"
#include "rtd/olma.hpp"

using namespace rtd;
using namespace rtd::olma;

namespace {

constexpr int kWait = 0;
constexpr int kReplaceG2 = 4;
constexpr int kReplaceG4 = 6;

std::vector<GateMode> all_ok() { return std::vector<GateMode>(4, GateMode::Ok); }

BeliefState g4_faulted(const Circuit& c) {
  BeliefState b = all_ok_beliefs(c);
  b[3] = {0.0, 1.0 / 3, 1.0 / 3, 1.0 / 3};
  return b;
}

}  // namespace

TEST(Circuit, HalfAdderShape) {
  const Circuit c = build_half_adder();
  EXPECT_EQ(validate_circuit(c), "");
  EXPECT_EQ(c.num_actions(), 7);
  EXPECT_EQ(action_name(c, kReplaceG4), action_name(c, kReplaceG4));
  EXPECT_EQ(decode_action(c, kReplaceG4).kind, Action::Kind::Replace);
  EXPECT_EQ(decode_action(c, kReplaceG4).target, 3);
  EXPECT_EQ(decode_action(c, 1).kind, Action::Kind::Probe);
}

TEST(Circuit, TruthTable) {
  const Circuit c = build_half_adder();
  Rng rng(1);
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b) {
      const auto l = evaluate_lines(c, all_ok(), {a, b}, rng);
      EXPECT_EQ(l[4], a ^ b);
      EXPECT_EQ(l[5], a & b);
    }
}

TEST(Circuit, StuckZeroVisibleAtCarry) {
  const Circuit c = build_half_adder();
  Rng rng(1);
  auto modes = all_ok();
  modes[3] = GateMode::Stuck0;
  EXPECT_EQ(evaluate_lines(c, modes, {1, 1}, rng)[5], 0);
  modes[3] = GateMode::Stuck1;
  EXPECT_EQ(evaluate_lines(c, modes, {0, 0}, rng)[5], 1);
}

TEST(Circuit, UnknownIsFairCoin) {
  const Circuit c = build_half_adder();
  Rng rng(99);
  auto modes = all_ok();
  modes[0] = GateMode::Unknown;
  int ones = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) ones += evaluate_lines(c, modes, {1, 1}, rng)[2];
  EXPECT_NEAR(static_cast<double>(ones) / n, 0.5, 0.02);
}

TEST(Equipment, ZeroFaultRateIsIdentity) {
  const Circuit c = build_half_adder();
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const auto s = step_equipment(c, all_ok(), 0.0, rng);
    EXPECT_EQ(s.modes, all_ok());
    EXPECT_TRUE(s.injected.empty());
    EXPECT_EQ(s.lines[4], s.lines[0] ^ s.lines[1]);
  }
}

TEST(Equipment, CertainFaultHitsEveryOkGate) {
  const Circuit c = build_half_adder();
  Rng rng(5);
  auto modes = all_ok();
  modes[1] = GateMode::Stuck1;
  const auto s = step_equipment(c, modes, 1.0, rng);
  EXPECT_EQ(s.injected.size(), 3u);
  EXPECT_EQ(s.modes[1], GateMode::Stuck1);
  for (auto m : s.modes) EXPECT_NE(m, GateMode::Ok);
}

TEST(Cost, BandIsChecked) {
  CostModel m;
  EXPECT_NO_THROW(m.check());
  m.t = 5;
  EXPECT_THROW(m.check(), ConfigError);
  m.t = 1000;
  EXPECT_THROW(m.check(), ConfigError);
}

TEST(Basis, AllOkWithoutFaultsWaitsForFree) {
  const Circuit c = build_half_adder();
  CostModel cost;
  cost.p = 0.0;
  const auto b = build_decision_basis(c, all_ok_beliefs(c), cost);
  EXPECT_EQ(b.diagram.sign, Sign::Minimize);
  EXPECT_TRUE(validate(b.diagram).empty());
  const auto ev = report_evidence(c, b, SenseReport{{1, 0, 1, 0}, std::nullopt});
  const auto r = evaluate_decision(b.diagram, ev);
  EXPECT_EQ(r.action, kWait);
  EXPECT_NEAR(r.score, 0.0, 1e-12);
}

TEST(Basis, CertainFaultIsReplaced) {
  const Circuit c = build_half_adder();
  const CostModel cost;
  const auto b = build_decision_basis(c, g4_faulted(c), cost);
  const auto ev = report_evidence(c, b, SenseReport{{0, 0, 0, 0}, std::nullopt});
  const auto r = evaluate_decision(b.diagram, ev);
  EXPECT_EQ(r.action, kReplaceG4);
  // Stuck-at-1 is ruled out by the report; the rest still fail on some inputs.
  EXPECT_GT(r.score, cost.r);
  EXPECT_LT(r.score, r.action_values[kWait]);
}

TEST(Agent, RandomIsUniformAndCheap) {
  const Circuit c = build_half_adder();
  AgentState st;
  st.beliefs = all_ok_beliefs(c);
  st.rng = Rng(17);
  std::map<int, int> seen;
  const int n = 7000;
  for (int i = 0; i < n; ++i) {
    const auto r = agent_cycle(st, SenseReport{{0, 0, 0, 0}, std::nullopt}, AgentSpec{Algorithm::Random, 1}, c,
                               CostModel{}, 1.0);
    EXPECT_EQ(r.units, 1u);
    EXPECT_EQ(r.ticks, 1);
    ++seen[r.action];
  }
  ASSERT_EQ(seen.size(), 7u);
  for (const auto& [a, k] : seen) EXPECT_NEAR(static_cast<double>(k) / n, 1.0 / 7, 0.02);
}

TEST(Agent, ExactReplacesCertainFault) {
  const Circuit c = build_half_adder();
  AgentState st;
  st.beliefs = g4_faulted(c);
  const auto r = agent_cycle(st, SenseReport{{0, 0, 0, 0}, std::nullopt}, AgentSpec{Algorithm::Exact, 1}, c,
                             CostModel{}, 1e9);
  EXPECT_EQ(r.action, kReplaceG4);
  EXPECT_FALSE(r.failed);
  EXPECT_GT(r.units, 1u);
}

TEST(Agent, ExhaustiveDipiMatchesExact) {
  const Circuit c = build_half_adder();
  const CostModel cost;
  for (const SenseReport& rep : {SenseReport{{1, 1, 0, 0}, std::nullopt}, SenseReport{{0, 1, 1, 0}, std::nullopt}}) {
    AgentState a, b;
    a.beliefs = b.beliefs = all_ok_beliefs(c);
    a.beliefs[3] = b.beliefs[3] = {0.9, 0.05, 0.03, 0.02};
    const auto ra = agent_cycle(a, rep, AgentSpec{Algorithm::Exact, 1}, c, cost, 1e12);
    const auto rb = agent_cycle(b, rep, AgentSpec{Algorithm::Dipi, 1 << 20}, c, cost, 1e12);
    EXPECT_EQ(ra.action, rb.action);
  }
}

TEST(Agent, BudgetMustBePositive) {
  EXPECT_THROW(parse_algorithm("simulated-annealing"), ConfigError);
  EXPECT_EQ(parse_algorithm("pk"), Algorithm::PK);
}

TEST(RollForward, IdleIdentity) {
  const Circuit c = build_half_adder();
  CostModel cost;
  cost.p = 0.0;
  const BeliefState b = g4_faulted(c);
  EXPECT_EQ(roll_forward(b, c, kWait, cost, 5), b);
}

TEST(RollForward, ReplacedGateIsFresh) {
  const Circuit c = build_half_adder();
  const CostModel cost;
  const BeliefState next = roll_forward(g4_faulted(c), c, kReplaceG4, cost, 1);
  EXPECT_NEAR(next[3][0], 1 - cost.p, 1e-15);
  for (int m = 1; m < kModes; ++m) EXPECT_NEAR(next[3][m], cost.p / 3, 1e-15);
}

TEST(RollForward, WrongCarryBlamesG4) {
  const Circuit c = build_half_adder();
  const CostModel cost;
  const auto b = build_decision_basis(c, roll_forward(all_ok_beliefs(c), c, kWait, cost, 10), cost);
  // A=B=1 must give Carry=1.
  const auto ev = report_evidence(c, b, SenseReport{{1, 1, 0, 0}, std::nullopt});
  const auto post = stage_posteriors(b, ev, AgentSpec{Algorithm::Exact, 1});
  ASSERT_FALSE(post.zero_mass);
  const auto g4 = posterior(b.diagram, ev, b.mode0[3]);
  for (int m = 0; m < kModes; ++m) EXPECT_NEAR(post.modes[3][m], g4[m], 1e-12);
  EXPECT_LT(post.modes[3][0], 0.5);
  EXPECT_GT(post.modes[3][0], -1e-12);
  EXPECT_GT(post.modes[3][1] + post.modes[3][3], 0.5);
}

TEST(TickClock, Ceiling) {
  EXPECT_EQ(run_tick_clock(5, 10.0), 1);
  EXPECT_EQ(run_tick_clock(10, 4.0), 3);
  EXPECT_EQ(run_tick_clock(1, 0.5), 2);
}

TEST(ApplyAction, Costs) {
  const Circuit c = build_half_adder();
  const CostModel cost;
  auto modes = all_ok();
  EXPECT_EQ(apply_action(c, modes, kWait, cost).cost, 0.0);
  modes[1] = GateMode::Stuck1;
  const auto r = apply_action(c, modes, kReplaceG2, cost);
  EXPECT_EQ(r.cost, 3.0);
  EXPECT_EQ(modes[1], GateMode::Ok);
  const auto p = apply_action(c, modes, 1, cost);
  EXPECT_EQ(p.cost, 1.0);
  ASSERT_TRUE(p.pending_probe);
  EXPECT_EQ(c.probes[*p.pending_probe], 2);
  const auto rep = sense(c, {1, 1, 0, 1, 0, 1}, p.pending_probe);
  ASSERT_TRUE(rep.probe);
  EXPECT_EQ(rep.probe->second, 0);
}
