#include <benchmark/benchmark.h>

#include "rtd/dipi.hpp"
#include "rtd/exact.hpp"
#include "rtd/harness.hpp"
#include "rtd/kappa.hpp"
#include "rtd/olma.hpp"

namespace {

using namespace rtd;

// Basis after a Carry fault showed up: A=B=1, Sum=0, Carry=0.
struct Fixture {
  olma::Circuit circuit = olma::build_half_adder();
  olma::DecisionBasis basis;
  Evidence evidence;

  Fixture() {
    olma::BeliefState beliefs = olma::all_ok_beliefs(circuit);
    for (auto& b : beliefs) b = olma::transition(b, false, 0.003, 4);
    basis = olma::build_decision_basis(circuit, beliefs, olma::CostModel{}, 4);
    olma::SenseReport report;
    report.sensors = {1, 1, 0, 0};
    evidence = olma::report_evidence(circuit, basis, report);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_ExactDecision(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_decision(f.basis.diagram, f.evidence));
}
BENCHMARK(BM_ExactDecision)->Unit(benchmark::kMillisecond);

void BM_DipiDecide(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state) {
    EvaluationTree tree(f.basis.diagram, f.evidence);
    benchmark::DoNotOptimize(decide(tree, static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_DipiDecide)->RangeMultiplier(4)->Range(1, 256)->Unit(benchmark::kMillisecond);

void BM_ReducedDecide(benchmark::State& state) {
  const auto& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(reduced_decide(f.basis.diagram, f.evidence, static_cast<int>(state.range(0)),
                                            ReductionMode::PK));
}
BENCHMARK(BM_ReducedDecide)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Scenario(benchmark::State& state) {
  harness::ScenarioConfig cfg;
  cfg.horizon = 200;
  cfg.agent = {olma::Algorithm::Dipi, 4};
  cfg.units_per_tick = 2000;
  for (auto _ : state) benchmark::DoNotOptimize(harness::run_scenario(cfg, 1));
}
BENCHMARK(BM_Scenario)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
