#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rtd/olma.hpp"

namespace rtd::harness {

struct ScenarioConfig {
  olma::Circuit circuit = olma::build_half_adder();
  olma::CostModel cost;
  int horizon = 1000;
  std::uint64_t seed = 1;
  olma::AgentSpec agent;
  double units_per_tick = 1.0;
};

// Scenario files are JSON:
//   { "circuit": "half_adder",
//     "cost": { "replace": 3, "probe": 1, "fail": 1, "fault_probability": 0.003, "duration": 50 },
//     "horizon": 1000, "seed": 1,
//     "agent": { "algorithm": "exact" | "dipi" | "k" | "pk" | "random", "steps": 1 },
//     "units_per_tick": 4000 }
ScenarioConfig parse_scenario(const std::string& text);
ScenarioConfig load_scenario(const std::string& path);

/// One agent: evaluator plus budget.  Copyable; holds no per-run state.
class Agent {
 public:
  explicit Agent(olma::AgentSpec spec) : spec_(spec) {}
  const olma::AgentSpec& spec() const { return spec_; }
  olma::CycleResult operator()(olma::AgentState& state, const olma::SenseReport& report, const olma::Circuit& c,
                               const olma::CostModel& cost, double units_per_tick) const {
    return olma::agent_cycle(state, report, spec_, c, cost, units_per_tick);
  }

 private:
  olma::AgentSpec spec_;
};

/// Throws ConfigError on a nonpositive budget.
Agent make_agent(const olma::AgentSpec& spec);

/// Equipment step, sense, agent cycle, blind ticks, action; until the horizon.
olma::Transcript run_scenario(const ScenarioConfig& config, std::uint64_t seed);

std::optional<double> cost_per_failure(const olma::Transcript& t);

struct ExperimentGrid {
  struct Line {
    std::string algorithm;
    std::vector<int> steps;
  };
  std::vector<Line> algorithms;
  std::vector<double> quanta;
  double calibration = 1.0;  // compute units per tick at quantum 1
  int seeds = 3;
  std::uint64_t base_seed = 1;
  int horizon = 1000;
  olma::CostModel cost;
};

// Grid files are JSON:
//   { "algorithms": { "random": [1], "exact": [1], "dipi": [1, 2, 4], "pk": [1, 2], "k": [1] },
//     "quanta": [1, 2, 4], "calibration": 2000, "seeds": 10, "base_seed": 1, "horizon": 1000,
//     "cost": { ... as in scenarios ... } }
ExperimentGrid parse_grid(const std::string& text);
ExperimentGrid load_grid(const std::string& path);

struct CellResult {
  std::string algorithm;
  double quantum = 0.0;
  int steps = 0;
  std::vector<std::optional<double>> per_seed;  // cost per failure, empty when no failures
  int seed_count = 0;                            // seeds with at least one failure
  double mean_cost_per_failure = 0.0;
  double stderr_ = 0.0;
  double mean_failures = 0.0;
  double mean_total_cost = 0.0;
};

struct SweepResult {
  std::vector<CellResult> cells;  // sorted (algorithm, quantum, steps)
  std::vector<CellResult> best;   // per algorithm and quantum, lowest mean cost per failure
};

/// Runs every cell.  `threads` <= 0 uses the hardware concurrency.  Output is
/// independent of the thread count.
SweepResult sweep(const ExperimentGrid& grid, int threads = 0,
                  const std::function<void(const CellResult&)>& progress = {});

CellResult summarize(const std::string& algorithm, double quantum, int steps,
                     const std::vector<olma::Transcript>& runs);

std::string cells_csv(const std::vector<CellResult>& cells);

}  // namespace rtd::harness
