// rtd: solve a diagram, run one maintenance scenario, or sweep a grid.

#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "rtd/diagram_io.hpp"
#include "rtd/dipi.hpp"
#include "rtd/errors.hpp"
#include "rtd/exact.hpp"
#include "rtd/harness.hpp"
#include "rtd/kappa.hpp"

namespace {

struct SolveArgs {
  std::string diagram;
  std::string algorithm = "exact";
  int steps = 1;
  std::vector<std::string> evidence;
  bool trace = false;
};

struct RunArgs {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<double> units_per_tick;
  std::optional<std::string> algorithm;
  std::optional<int> steps;
  bool trace = false;
};

struct SweepArgs {
  std::string grid;
  std::string out = "results";
  std::optional<std::uint64_t> seed;
  std::optional<double> units_per_tick;
  int threads = 0;
};

std::string num(double x) {
  std::ostringstream os;
  os << std::setprecision(12) << x;
  return os.str();
}

int solve(const SolveArgs& a) {
  const rtd::InfluenceDiagram d = rtd::load_diagram(a.diagram);
  const rtd::Evidence ev = rtd::parse_evidence(d, a.evidence);
  if (a.steps < 1) throw rtd::ConfigError("--steps: must be at least 1");
  const rtd::TemporalBlocks tb = rtd::temporal_blocks(d, ev);
  const rtd::Variable& dv = d.variables[tb.free_decisions.front()];
  std::ostream* trace = a.trace ? &std::cerr : nullptr;

  if (a.algorithm == "exact" || a.algorithm == "brute") {
    const rtd::DecisionResult r =
        a.algorithm == "exact" ? rtd::evaluate_decision(d, ev) : rtd::brute_force_decision(d, ev);
    std::cout << "action=" << dv.domain[r.action] << " score=" << num(r.score) << '\n';
    for (std::size_t i = 0; i < r.action_values.size(); ++i)
      std::cout << "value " << dv.domain[i] << '=' << num(r.action_values[i]) << '\n';
    std::cout << "units=" << r.compute_units << '\n';
    return 0;
  }
  if (a.algorithm == "dipi") {
    rtd::EvaluationTree tree(d, ev);
    const rtd::DecideResult r = rtd::decide(tree, a.steps, trace);
    std::cout << "action=" << dv.domain[r.action] << " score=" << num(r.score) << '\n';
    for (std::size_t i = 0; i < r.bounds.lower.size(); ++i)
      std::cout << "bounds " << dv.domain[i] << " [" << num(r.bounds.lower[i]) << ", " << num(r.bounds.upper[i])
                << "] covered=" << num(r.bounds.covered[i]) << '\n';
    std::cout << "steps=" << r.steps_used << " converged=" << (r.converged ? "true" : "false")
              << " exhausted=" << (r.exhausted ? "true" : "false") << " units=" << r.units << '\n';
    return 0;
  }
  if (a.algorithm == "k" || a.algorithm == "pk") {
    const rtd::ReducedResult r =
        rtd::reduced_decide(d, ev, a.steps, a.algorithm == "k" ? rtd::ReductionMode::K : rtd::ReductionMode::PK);
    if (trace) {
      rtd::write_iteration_header(*trace);
      rtd::write_iteration_log(*trace, r);
    }
    std::cout << "action=" << dv.domain[r.action] << " score=" << (r.have_score ? num(r.score) : "NA") << '\n';
    std::cout << "iterations=" << r.log.size() << " schedule_exhausted=" << (r.schedule_exhausted ? "true" : "false")
              << " units=" << r.units << '\n';
    return 0;
  }
  throw rtd::ConfigError("--algorithm: expected exact, brute, dipi, k or pk");
}

int run(const RunArgs& a) {
  rtd::harness::ScenarioConfig cfg = rtd::harness::load_scenario(a.scenario);
  if (a.seed) cfg.seed = *a.seed;
  if (a.units_per_tick) {
    if (!(*a.units_per_tick > 0.0)) throw rtd::ConfigError("--units-per-tick: must be positive");
    cfg.units_per_tick = *a.units_per_tick;
  }
  if (a.algorithm) cfg.agent.algorithm = rtd::olma::parse_algorithm(*a.algorithm);
  if (a.steps) {
    if (*a.steps < 1) throw rtd::ConfigError("--steps: must be at least 1");
    cfg.agent.steps = *a.steps;
  }
  const rtd::olma::Transcript t = rtd::harness::run_scenario(cfg, cfg.seed);
  const std::string log = t.str(cfg.circuit);
  if (!a.out.empty()) rtd::write_file_atomic(a.out, log);
  if (a.trace) std::cerr << log;
  const auto cpf = rtd::harness::cost_per_failure(t);
  std::cout << "total_cost=" << num(t.total_cost) << " failures=" << t.failures
            << " cost_per_failure=" << (cpf ? num(*cpf) : "NA") << '\n';
  std::cout << "replacements=" << t.replacements << " probes=" << t.probes << " faulted_ticks=" << t.faulted_ticks
            << " decisions=" << t.decisions.size() << '\n';
  return 0;
}

int sweep(const SweepArgs& a) {
  rtd::harness::ExperimentGrid g = rtd::harness::load_grid(a.grid);
  if (a.seed) g.base_seed = *a.seed;
  if (a.units_per_tick) {
    if (!(*a.units_per_tick > 0.0)) throw rtd::ConfigError("--units-per-tick: must be positive");
    g.calibration = *a.units_per_tick;
  }
  const rtd::harness::SweepResult r = rtd::harness::sweep(g, a.threads, [](const rtd::harness::CellResult& c) {
    std::cerr << c.algorithm << " q=" << c.quantum << " steps=" << c.steps << " cpf=" << c.mean_cost_per_failure
              << '\n';
  });
  std::filesystem::create_directories(a.out);
  const std::filesystem::path dir(a.out);
  rtd::write_file_atomic((dir / "cells.csv").string(), rtd::harness::cells_csv(r.cells));
  rtd::write_file_atomic((dir / "best_per_quantum.csv").string(), rtd::harness::cells_csv(r.best));
  std::cout << "cells=" << r.cells.size() << " out=" << a.out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Anytime influence-diagram decisions and the on-line maintenance testbed"};
  app.require_subcommand(1);

  SolveArgs sa;
  auto* solve_cmd = app.add_subcommand("solve", "Evaluate the first free decision of a diagram");
  solve_cmd->add_option("diagram", sa.diagram, "Diagram file")->required();
  solve_cmd->add_option("--algorithm", sa.algorithm, "exact, brute, dipi, k or pk");
  solve_cmd->add_option("--steps", sa.steps, "D-IPI steps or K/PK iterations");
  solve_cmd->add_option("--evidence", sa.evidence, "name=value pairs");
  solve_cmd->add_flag("--trace", sa.trace, "Per-step log to stderr");

  RunArgs ra;
  auto* run_cmd = app.add_subcommand("run", "Run one maintenance scenario");
  run_cmd->add_option("scenario", ra.scenario, "Scenario file")->required();
  run_cmd->add_option("--seed", ra.seed, "Random seed");
  run_cmd->add_option("--out", ra.out, "Transcript output path");
  run_cmd->add_option("--units-per-tick", ra.units_per_tick, "Quantum in compute units");
  run_cmd->add_option("--algorithm", ra.algorithm, "Override the agent algorithm");
  run_cmd->add_option("--steps", ra.steps, "Override the agent budget");
  run_cmd->add_flag("--trace", ra.trace, "Transcript to stderr");

  SweepArgs wa;
  auto* sweep_cmd = app.add_subcommand("sweep", "Run an experiment grid");
  sweep_cmd->add_option("grid", wa.grid, "Grid file")->required();
  sweep_cmd->add_option("--out", wa.out, "Output directory");
  sweep_cmd->add_option("--seed", wa.seed, "Base seed");
  sweep_cmd->add_option("--units-per-tick", wa.units_per_tick, "Compute units per tick at quantum 1");
  sweep_cmd->add_option("--threads", wa.threads, "Worker threads (0: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 2;
  }

  try {
    if (*solve_cmd) return solve(sa);
    if (*run_cmd) return run(ra);
    if (*sweep_cmd) return sweep(wa);
  } catch (const rtd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const rtd::InvalidEvidence& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
