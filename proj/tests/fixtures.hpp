#pragma once

#include "rtd/model.hpp"

namespace rtd::testing {

// C=(0.7,0.3), D in {d0,d1}, U(c0,d0)=10, U(c1,d1)=10, else 0.
inline InfluenceDiagram two_node(Sign sign = Sign::Maximize) {
  InfluenceDiagram d;
  d.variables = {{0, "C", {"c0", "c1"}, VarKind::Chance}, {1, "D", {"d0", "d1"}, VarKind::Decision}};
  d.cpts.emplace_back(std::vector<VarId>{0}, std::vector<int>{2}, std::vector<double>{0.7, 0.3}, FactorRole::Cpt, 0);
  d.decisions.push_back({1, {}});
  d.utilities.emplace_back(std::vector<VarId>{0, 1}, std::vector<int>{2, 2}, std::vector<double>{10, 0, 0, 10},
                           FactorRole::Utility);
  d.sign = sign;
  return d;
}

// A=(0.8,0.2), P(B|A)=((0.7,0.3),(0.1,0.9)).
inline InfluenceDiagram chain_ab() {
  InfluenceDiagram d;
  d.variables = {{0, "A", {"a0", "a1"}, VarKind::Chance}, {1, "B", {"b0", "b1"}, VarKind::Chance}};
  d.cpts.emplace_back(std::vector<VarId>{0}, std::vector<int>{2}, std::vector<double>{0.8, 0.2}, FactorRole::Cpt, 0);
  d.cpts.emplace_back(std::vector<VarId>{0, 1}, std::vector<int>{2, 2}, std::vector<double>{0.7, 0.3, 0.1, 0.9},
                      FactorRole::Cpt, 1);
  return d;
}

}  // namespace rtd::testing
