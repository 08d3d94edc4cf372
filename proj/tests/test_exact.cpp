#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "random_diagram.hpp"
#include "rtd/errors.hpp"
#include "rtd/exact.hpp"
#include "rtd/olma.hpp"

using namespace rtd;

TEST(Combine, Elementwise) {
  Factor f({0}, {2}, {0.8, 0.2}), g({0}, {2}, {0.5, 0.5});
  EXPECT_EQ(combine(f, g).table, (std::vector<double>{0.4, 0.1}));
}

TEST(Combine, OuterProduct) {
  Factor f({0}, {2}, {1, 2}), g({1}, {2}, {3, 5});
  const Factor h = combine(f, g);
  EXPECT_EQ(h.scope, (std::vector<VarId>{0, 1}));
  EXPECT_EQ(h.table, (std::vector<double>{3, 5, 6, 10}));
}

TEST(Combine, ChainMarginal) {
  const auto d = rtd::testing::chain_ab();
  const Factor b = eliminate(combine(d.cpts[0], d.cpts[1]), 0, ElimMode::Sum).result;
  ASSERT_EQ(b.scope, std::vector<VarId>{1});
  EXPECT_NEAR(b.table[0], 0.58, 1e-12);
  EXPECT_NEAR(b.table[1], 0.42, 1e-12);
}

TEST(Combine, CommutativeUpToReorder) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto d = rtd::testing::random_diagram(rng);
    if (d.cpts.size() < 2) continue;
    const Factor a = combine(d.cpts[0], d.cpts.back());
    const Factor b = reorder(combine(d.cpts.back(), d.cpts[0]), a.scope);
    ASSERT_EQ(a.table.size(), b.table.size());
    for (std::size_t k = 0; k < a.table.size(); ++k) EXPECT_NEAR(a.table[k], b.table[k], 1e-12);
  }
}

TEST(Eliminate, SumOverJoint) {
  const Factor j({0, 1}, {2, 2}, {0.4, 0.1, 0.3, 0.2});
  const Factor b = eliminate(j, 0, ElimMode::Sum).result;
  EXPECT_NEAR(b.table[0], 0.7, 1e-12);
  EXPECT_NEAR(b.table[1], 0.3, 1e-12);
}

TEST(Eliminate, MaxGivesArgmax) {
  const auto e = eliminate(Factor({1}, {2}, {7, 3}), 1, ElimMode::Max);
  EXPECT_EQ(e.result.table, std::vector<double>{7});
  ASSERT_TRUE(e.argbest);
  EXPECT_EQ((*e.argbest)[0], 0);
}

TEST(Eliminate, SingletonDimension) {
  const Factor f({0, 1}, {1, 3}, {1, 2, 3});
  const Factor g = eliminate(f, 0, ElimMode::Sum).result;
  EXPECT_EQ(g.scope, std::vector<VarId>{1});
  EXPECT_EQ(g.table, (std::vector<double>{1, 2, 3}));
}

TEST(Plan, ChainPeak) {
  InfluenceDiagram d = rtd::testing::chain_ab();
  d.variables.push_back({2, "C", {"c0", "c1"}, VarKind::Chance});
  d.cpts.emplace_back(std::vector<VarId>{1, 2}, std::vector<int>{2, 2}, std::vector<double>{0.5, 0.5, 0.2, 0.8},
                      FactorRole::Cpt, 2);
  const auto p = plan(d, {}, {2});
  EXPECT_EQ(p.order(), (std::vector<VarId>{0, 1}));
  EXPECT_LE(p.peak_cells, 4u);
}

TEST(Plan, SingleNodeIsEmpty) {
  InfluenceDiagram d;
  d.variables = {{0, "A", {"a0", "a1"}, VarKind::Chance}};
  d.cpts.emplace_back(std::vector<VarId>{0}, std::vector<int>{2}, std::vector<double>{0.5, 0.5}, FactorRole::Cpt, 0);
  EXPECT_TRUE(plan(d, {}, {0}).order().empty());
}

TEST(Plan, DecisionsMaxedOutInReverse) {
  const auto c = olma::build_half_adder();
  const auto b = olma::build_decision_basis(c, olma::all_ok_beliefs(c), olma::CostModel{});
  Evidence ev;
  for (const auto& dec : b.diagram.decisions)
    if (dec.var == b.d0)
      for (VarId v : dec.observes) ev[v] = 0;
  std::vector<VarId> maxed;
  for (const auto& s : plan(b.diagram, ev, {}).steps)
    if (s.kind == PlanStep::Kind::MaxOut) maxed.push_back(s.var);
  EXPECT_EQ(maxed, (std::vector<VarId>{b.d1, b.d0}));
}

TEST(Posterior, RootPrior) {
  const auto p = posterior(rtd::testing::chain_ab(), {}, 0);
  EXPECT_NEAR(p[0], 0.8, 1e-12);
  EXPECT_NEAR(p[1], 0.2, 1e-12);
}

TEST(Posterior, ChainEvidence) {
  const auto p = posterior(rtd::testing::chain_ab(), {{1, 0}}, 0);
  EXPECT_NEAR(p[0], 0.56 / 0.58, 1e-12);
  EXPECT_NEAR(p[1], 0.02 / 0.58, 1e-12);
}

TEST(Posterior, ContradictedDeterministicCpt) {
  auto d = rtd::testing::chain_ab();
  d.cpts[1].table = {1, 0, 1, 0};
  EXPECT_THROW(posterior(d, {{1, 1}}, 0), ZeroMassError);
}

TEST(EvaluateDecision, TwoNode) {
  const auto r = evaluate_decision(rtd::testing::two_node(), {});
  EXPECT_EQ(r.action, 0);
  EXPECT_NEAR(r.score, 7.0, 1e-12);
  EXPECT_NEAR(r.action_values[1], 3.0, 1e-12);
}

TEST(EvaluateDecision, TwoNodeMinimize) {
  const auto r = evaluate_decision(rtd::testing::two_node(Sign::Minimize), {});
  EXPECT_EQ(r.action, 1);
  EXPECT_NEAR(r.score, 3.0, 1e-12);
}

TEST(EvaluateDecision, IndifferentUtilityTiesLow) {
  auto d = rtd::testing::two_node();
  d.utilities[0] = Factor({0}, {2}, {4, 1}, FactorRole::Utility);
  const auto r = evaluate_decision(d, {});
  EXPECT_EQ(r.action, 0);
  EXPECT_NEAR(r.score, 0.7 * 4 + 0.3 * 1, 1e-12);
}

TEST(BruteForce, TwoNode) {
  const auto r = brute_force_decision(rtd::testing::two_node(), {});
  EXPECT_EQ(r.action, 0);
  EXPECT_NEAR(r.score, 7.0, 1e-12);
}

TEST(BruteForce, ConstantUtility) {
  InfluenceDiagram d;
  d.variables = {{0, "D", {"d0", "d1"}, VarKind::Decision}};
  d.decisions = {{0, {}}};
  d.utilities.push_back(Factor::constant(5.0, FactorRole::Utility));
  const auto r = brute_force_decision(d, {});
  EXPECT_EQ(r.action, 0);
  EXPECT_DOUBLE_EQ(r.score, 5.0);
}

TEST(BruteForce, SmallRandomAgrees) {
  std::mt19937_64 rng(5);
  rtd::testing::RandomSpec spec;
  spec.min_chance = spec.max_chance = 3;
  for (int i = 0; i < 40; ++i) {
    const auto d = rtd::testing::random_diagram(rng, spec);
    const auto a = evaluate_decision(d, {});
    const auto b = brute_force_decision(d, {});
    EXPECT_EQ(a.action, b.action);
    EXPECT_NEAR(a.score, b.score, 1e-9);
  }
}

// Masking can leave a decision-dependent probability mass; alternatives with
// no mass must not win on an empty sum.
TEST(EvaluateDecision, MaskedNetSkipsMasslessAlternatives) {
  InfluenceDiagram d;
  d.variables = {{0, "D", {"d0", "d1"}, VarKind::Decision}, {1, "X", {"x0", "x1"}, VarKind::Chance}};
  d.decisions = {{0, {}}};
  d.cpts.emplace_back(std::vector<VarId>{0, 1}, std::vector<int>{2, 2}, std::vector<double>{0, 1, 0.5, 0.5},
                      FactorRole::Cpt, 1);
  d.utilities.emplace_back(std::vector<VarId>{0}, std::vector<int>{2}, std::vector<double>{0, 2},
                           FactorRole::Utility);
  d.sign = Sign::Minimize;
  DomainMask m = DomainMask::full(d);
  m.keep[1] = {0};
  const auto r = evaluate_decision(apply_mask(d, m), {});
  EXPECT_EQ(r.action, 1);
  EXPECT_NEAR(r.evidence_mass, 0.5, 1e-12);

  m.keep[0] = {0};
  EXPECT_THROW(evaluate_decision(apply_mask(d, m), {}), ZeroMassError);
}
