#include "rtd/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "json_detail.hpp"
#include "rtd/errors.hpp"

namespace rtd::harness {

using nlohmann::json;

namespace {

double number(const json& j, const char* key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(where + "." + key + ": expected a number");
  return j.at(key).get<double>();
}

long long integer(const json& j, const char* key, long long fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number_integer()) throw ConfigError(where + "." + key + ": expected an integer");
  return j.at(key).get<long long>();
}

// A misspelt key would otherwise fall back to its default without a word.
void known_keys(const json& j, std::initializer_list<const char*> keys, const std::string& where) {
  for (const auto& [k, _] : j.items())
    if (std::none_of(keys.begin(), keys.end(), [&](const char* x) { return k == x; }))
      throw ConfigError(where + "." + k + ": unknown key");
}

olma::CostModel cost_from(const json& j, const std::string& where) {
  olma::CostModel c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  known_keys(j, {"replace", "probe", "fail", "fault_probability", "duration"}, where);
  c.r = number(j, "replace", c.r, where);
  c.c_probe = number(j, "probe", c.c_probe, where);
  c.f = number(j, "fail", c.f, where);
  c.p = number(j, "fault_probability", c.p, where);
  c.t = number(j, "duration", c.t, where);
  try {
    c.check();
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return c;
}

json parse_text(const std::string& text, const std::string& what) {
  try {
    return json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename F>
auto with_path(const std::string& path, F&& f) {
  try {
    return f(read_file(path));
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0) throw;
    throw ConfigError(path + ": " + msg);
  }
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

}  // namespace

ScenarioConfig parse_scenario(const std::string& text) {
  const json j = parse_text(text, "scenario");
  if (!j.is_object()) throw ConfigError("scenario: expected an object");
  known_keys(j, {"circuit", "cost", "horizon", "seed", "agent", "units_per_tick"}, "scenario");
  ScenarioConfig s;
  if (j.contains("circuit")) {
    if (!j.at("circuit").is_string() || j.at("circuit").get<std::string>() != "half_adder")
      throw ConfigError("circuit: only 'half_adder' is available");
  }
  s.cost = cost_from(j.contains("cost") ? j.at("cost") : json(), "cost");
  s.horizon = static_cast<int>(integer(j, "horizon", s.horizon, "scenario"));
  if (s.horizon < 1) throw ConfigError("horizon: must be at least 1");
  const long long seed = integer(j, "seed", 1, "scenario");
  if (seed < 0) throw ConfigError("seed: must be nonnegative");
  s.seed = static_cast<std::uint64_t>(seed);
  if (!j.contains("agent") || !j.at("agent").is_object()) throw ConfigError("agent: missing or not an object");
  const json& a = j.at("agent");
  known_keys(a, {"algorithm", "steps"}, "agent");
  if (!a.contains("algorithm") || !a.at("algorithm").is_string()) throw ConfigError("agent.algorithm: missing");
  try {
    s.agent.algorithm = olma::parse_algorithm(a.at("algorithm").get<std::string>());
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("agent.algorithm: ") + e.what());
  }
  s.agent.steps = static_cast<int>(integer(a, "steps", 1, "agent"));
  if (s.agent.steps < 1) throw ConfigError("agent.steps: must be at least 1");
  s.units_per_tick = number(j, "units_per_tick", s.units_per_tick, "scenario");
  if (!(s.units_per_tick > 0.0)) throw ConfigError("units_per_tick: must be positive");
  return s;
}

ScenarioConfig load_scenario(const std::string& path) {
  return with_path(path, [](const std::string& t) { return parse_scenario(t); });
}

Agent make_agent(const olma::AgentSpec& spec) {
  if (spec.steps < 1) throw ConfigError("agent budget must be at least 1");
  return Agent(spec);
}

olma::Transcript run_scenario(const ScenarioConfig& cfg, std::uint64_t seed) {
  const olma::Circuit& c = cfg.circuit;
  const Agent agent = make_agent(cfg.agent);
  olma::Rng equipment(seed);
  olma::AgentState state;
  state.rng = olma::Rng(seed ^ 0xa5a5a5a5deadbeefULL);
  state.beliefs = olma::all_ok_beliefs(c);

  olma::Transcript tr;
  std::vector<olma::GateMode> modes(c.gates.size(), olma::GateMode::Ok);
  std::optional<int> pending;
  int tick = 0;
  auto advance = [&]() -> const olma::TickRecord& {
    olma::EquipmentStep s = olma::step_equipment(c, modes, cfg.cost.p, equipment);
    modes = s.modes;
    olma::TickRecord rec;
    rec.tick = tick++;
    rec.modes = std::move(s.modes);
    rec.lines = std::move(s.lines);
    rec.injected = std::move(s.injected);
    rec.faulted = std::any_of(modes.begin(), modes.end(), [](olma::GateMode m) { return m != olma::GateMode::Ok; });
    tr.failures += static_cast<int>(rec.injected.size());
    if (rec.faulted) {
      ++tr.faulted_ticks;
      tr.total_cost += cfg.cost.f;
    }
    tr.ticks.push_back(std::move(rec));
    return tr.ticks.back();
  };

  while (tick < cfg.horizon) {
    const olma::TickRecord& now = advance();
    const olma::SenseReport report = olma::sense(c, now.lines, pending);
    pending.reset();
    const olma::CycleResult cyc = agent(state, report, c, cfg.cost, cfg.units_per_tick);
    olma::DecisionRecord dec;
    dec.tick = now.tick;
    dec.action = cyc.action;
    dec.units = cyc.units;
    dec.ticks = cyc.ticks;
    dec.failed = cyc.failed;
    dec.beliefs_kept = cyc.beliefs_kept;
    // The agent is blind for the remaining thinking ticks.
    for (int i = 1; i < cyc.ticks && tick < cfg.horizon; ++i) advance();
    const bool landed = tick - dec.tick >= cyc.ticks;
    if (landed && tick < cfg.horizon) {
      const olma::ActionOutcome out = olma::apply_action(c, modes, cyc.action, cfg.cost);
      tr.total_cost += out.cost;
      if (out.replaced) ++tr.replacements;
      if (out.probed) ++tr.probes;
      pending = out.pending_probe;
      dec.applied = true;
    }
    tr.decisions.push_back(dec);
  }
  return tr;
}

std::optional<double> cost_per_failure(const olma::Transcript& t) {
  if (t.failures == 0) return std::nullopt;
  return t.total_cost / t.failures;
}

ExperimentGrid parse_grid(const std::string& text) {
  const json j = parse_text(text, "grid");
  if (!j.is_object()) throw ConfigError("grid: expected an object");
  known_keys(j, {"algorithms", "quanta", "calibration", "seeds", "base_seed", "horizon", "cost"}, "grid");
  ExperimentGrid g;
  if (!j.contains("algorithms") || !j.at("algorithms").is_object() || j.at("algorithms").empty())
    throw ConfigError("algorithms: expected a nonempty object");
  for (const auto& [name, steps] : j.at("algorithms").items()) {
    try {
      olma::parse_algorithm(name);
    } catch (const ConfigError& e) {
      throw ConfigError("algorithms: " + std::string(e.what()));
    }
    ExperimentGrid::Line line{name, {}};
    if (!steps.is_array() || steps.empty()) throw ConfigError("algorithms." + name + ": expected a nonempty array");
    for (const auto& s : steps) {
      if (!s.is_number_integer() || s.get<int>() < 1)
        throw ConfigError("algorithms." + name + ": steps must be positive integers");
      line.steps.push_back(s.get<int>());
    }
    g.algorithms.push_back(std::move(line));
  }
  if (!j.contains("quanta") || !j.at("quanta").is_array() || j.at("quanta").empty())
    throw ConfigError("quanta: expected a nonempty array");
  for (const auto& q : j.at("quanta")) {
    if (!q.is_number() || !(q.get<double>() > 0.0)) throw ConfigError("quanta: values must be positive");
    g.quanta.push_back(q.get<double>());
  }
  g.calibration = number(j, "calibration", g.calibration, "grid");
  if (!(g.calibration > 0.0)) throw ConfigError("calibration: must be positive");
  g.seeds = static_cast<int>(integer(j, "seeds", g.seeds, "grid"));
  if (g.seeds < 1) throw ConfigError("seeds: must be at least 1");
  const long long base = integer(j, "base_seed", 1, "grid");
  if (base < 0) throw ConfigError("base_seed: must be nonnegative");
  g.base_seed = static_cast<std::uint64_t>(base);
  g.horizon = static_cast<int>(integer(j, "horizon", g.horizon, "grid"));
  if (g.horizon < 1) throw ConfigError("horizon: must be at least 1");
  g.cost = cost_from(j.contains("cost") ? j.at("cost") : json(), "cost");
  return g;
}

ExperimentGrid load_grid(const std::string& path) {
  return with_path(path, [](const std::string& t) { return parse_grid(t); });
}

CellResult summarize(const std::string& algorithm, double quantum, int steps,
                     const std::vector<olma::Transcript>& runs) {
  CellResult r;
  r.algorithm = algorithm;
  r.quantum = quantum;
  r.steps = steps;
  std::vector<double> vals;
  for (const auto& t : runs) {
    const auto cpf = cost_per_failure(t);
    r.per_seed.push_back(cpf);
    if (cpf) vals.push_back(*cpf);
    r.mean_failures += t.failures;
    r.mean_total_cost += t.total_cost;
  }
  if (!runs.empty()) {
    r.mean_failures /= static_cast<double>(runs.size());
    r.mean_total_cost /= static_cast<double>(runs.size());
  }
  r.seed_count = static_cast<int>(vals.size());
  if (!vals.empty()) {
    double s = 0.0;
    for (double v : vals) s += v;
    r.mean_cost_per_failure = s / static_cast<double>(vals.size());
  }
  if (vals.size() > 1) {
    double ss = 0.0;
    for (double v : vals) ss += (v - r.mean_cost_per_failure) * (v - r.mean_cost_per_failure);
    r.stderr_ = std::sqrt(ss / static_cast<double>(vals.size() - 1)) / std::sqrt(static_cast<double>(vals.size()));
  }
  return r;
}

SweepResult sweep(const ExperimentGrid& grid, int threads, const std::function<void(const CellResult&)>& progress) {
  struct Job {
    std::string algorithm;
    double quantum;
    int steps;
  };
  std::vector<Job> jobs;
  for (const auto& line : grid.algorithms)
    for (double q : grid.quanta)
      for (int s : line.steps) jobs.push_back({line.algorithm, q, s});
  std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) {
    if (a.algorithm != b.algorithm) return a.algorithm < b.algorithm;
    if (a.quantum != b.quantum) return a.quantum < b.quantum;
    return a.steps < b.steps;
  });
  jobs.erase(std::unique(jobs.begin(), jobs.end(),
                         [](const Job& a, const Job& b) {
                           return a.algorithm == b.algorithm && a.quantum == b.quantum && a.steps == b.steps;
                         }),
             jobs.end());

  // Seed-level tasks keep workers busy when cells differ widely in cost.
  const std::size_t ns = static_cast<std::size_t>(grid.seeds);
  std::vector<olma::Transcript> runs(jobs.size() * ns);
  std::vector<int> remaining(jobs.size(), grid.seeds);
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::vector<CellResult> cells(jobs.size());
  std::exception_ptr failure;

  auto worker = [&]() {
    for (;;) {
      const std::size_t k = next.fetch_add(1);
      if (k >= runs.size()) return;
      const Job& job = jobs[k / ns];
      try {
        ScenarioConfig cfg;
        cfg.cost = grid.cost;
        cfg.horizon = grid.horizon;
        cfg.agent = {olma::parse_algorithm(job.algorithm), job.steps};
        cfg.units_per_tick = job.quantum * grid.calibration;
        runs[k] = run_scenario(cfg, grid.base_seed + k % ns);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
      std::lock_guard<std::mutex> lock(mu);
      if (--remaining[k / ns] == 0) {
        const std::size_t j = k / ns;
        std::vector<olma::Transcript> mine(std::make_move_iterator(runs.begin() + static_cast<long>(j * ns)),
                                           std::make_move_iterator(runs.begin() + static_cast<long>((j + 1) * ns)));
        cells[j] = summarize(jobs[j].algorithm, jobs[j].quantum, jobs[j].steps, mine);
        for (std::size_t i = j * ns; i < (j + 1) * ns; ++i) runs[i] = olma::Transcript{};
        if (progress) progress(cells[j]);
      }
    }
  };
  int n = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  n = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(n), std::max<std::size_t>(runs.size(), 1)));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  SweepResult out;
  out.cells = std::move(cells);
  for (const auto& c : out.cells) {
    if (!out.best.empty() && out.best.back().algorithm == c.algorithm && out.best.back().quantum == c.quantum) {
      CellResult& b = out.best.back();
      const bool better = c.seed_count > 0 && (b.seed_count == 0 || c.mean_cost_per_failure < b.mean_cost_per_failure);
      if (better) b = c;
    } else {
      out.best.push_back(c);
    }
  }
  return out;
}

std::string cells_csv(const std::vector<CellResult>& cells) {
  std::ostringstream os;
  os << "algorithm,quantum,steps,seed_count,mean_cost_per_failure,stderr,mean_failures,mean_total_cost\n";
  for (const auto& c : cells)
    os << c.algorithm << ',' << fmt(c.quantum) << ',' << c.steps << ',' << c.seed_count << ','
       << (c.seed_count > 0 ? fmt(c.mean_cost_per_failure) : std::string("NA")) << ',' << fmt(c.stderr_) << ','
       << fmt(c.mean_failures) << ',' << fmt(c.mean_total_cost) << '\n';
  return os.str();
}

}  // namespace rtd::harness
