// Acceptance suite: one PASS/FAIL line per criterion.  Exits 0 once every
// criterion has been evaluated, whatever the verdicts; 1 if the suite itself
// could not run.
//
//   rtd_acceptance [--grid FILE] [--scenario FILE] [--out DIR] [--threads N]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "random_diagram.hpp"
#include "rtd/diagram_io.hpp"
#include "rtd/dipi.hpp"
#include "rtd/errors.hpp"
#include "rtd/exact.hpp"
#include "rtd/harness.hpp"
#include "rtd/kappa.hpp"

using namespace rtd;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kTol = 1e-9;

struct Verdict {
  bool pass = true;
  std::ostringstream detail;

  void fail(const std::string& why) {
    if (pass) detail << why;
    pass = false;
  }
};

int passed = 0;
std::ostringstream transcript;  // the verdict lines, copied to --out

void report(int n, const std::string& name, const Verdict& v) {
  std::ostringstream line;
  line << "criterion " << n << " " << name << ": " << (v.pass ? "PASS" : "FAIL");
  const std::string d = v.detail.str();
  if (!d.empty()) line << " (" << d << ")";
  std::cout << line.str() << std::endl;
  transcript << line.str() << "\n";
  passed += v.pass;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// 200 diagrams of up to 8 binary chance nodes and 1-2 decisions; every other
// one has near-deterministic cpts.
std::vector<InfluenceDiagram> corpus() {
  std::mt19937_64 rng(2024);
  std::vector<InfluenceDiagram> out;
  for (int i = 0; i < 200; ++i) {
    rtd::testing::RandomSpec spec;
    spec.sharp = i % 2 == 1;
    out.push_back(rtd::testing::random_diagram(rng, spec));
  }
  return out;
}

Verdict oracle(const std::vector<InfluenceDiagram>& diagrams, std::vector<DecisionResult>& exact) {
  Verdict v;
  const auto t0 = Clock::now();
  int agree = 0;
  for (std::size_t i = 0; i < diagrams.size(); ++i) {
    const auto e = evaluate_decision(diagrams[i], {});
    const auto b = brute_force_decision(diagrams[i], {});
    exact.push_back(e);
    if (e.action == b.action && std::abs(e.score - b.score) <= kTol)
      ++agree;
    else
      v.fail("diagram " + std::to_string(i) + " disagrees; ");
  }
  const double sec = seconds_since(t0);
  if (sec > 60.0) v.fail("too slow; ");
  v.detail << agree << "/" << diagrams.size() << " agree, " << std::fixed << std::setprecision(2) << sec << " s";
  return v;
}

Verdict sandwich(const std::vector<InfluenceDiagram>& diagrams, const std::vector<DecisionResult>& exact) {
  Verdict v;
  long steps = 0;
  for (std::size_t i = 0; i < diagrams.size(); ++i) {
    const auto& ex = exact[i];
    EvaluationTree tree(diagrams[i], {});
    ActionBounds prev = tree.bounds();
    while (!tree.exhausted()) {
      tree.step();
      ++steps;
      const ActionBounds b = tree.bounds();
      for (std::size_t a = 0; a < b.lower.size(); ++a) {
        const double eu = ex.action_values[a] * ex.evidence_mass;
        if (b.lower[a] > eu + kTol || b.upper[a] < eu - kTol) v.fail("bounds miss exact on " + std::to_string(i) + "; ");
        if (b.lower[a] < prev.lower[a] - kTol || b.upper[a] > prev.upper[a] + kTol)
          v.fail("bounds widen on " + std::to_string(i) + "; ");
      }
      prev = b;
    }
    const auto r = decide(tree, 1);
    if (!r.exhausted || r.action != ex.action || std::abs(r.score - ex.score) > kTol)
      v.fail("exhaustion differs on " + std::to_string(i) + "; ");
  }

  // Worked example: C ~ (0.7, 0.3), U(c0,d0) = U(c1,d1) = 10.
  InfluenceDiagram d;
  d.variables = {{0, "C", {"c0", "c1"}, VarKind::Chance}, {1, "D", {"d0", "d1"}, VarKind::Decision}};
  d.cpts.emplace_back(std::vector<VarId>{0}, std::vector<int>{2}, std::vector<double>{0.7, 0.3}, FactorRole::Cpt, 0);
  d.decisions = {{1, {}}};
  d.utilities.emplace_back(std::vector<VarId>{0, 1}, std::vector<int>{2, 2}, std::vector<double>{10, 0, 0, 10},
                           FactorRole::Utility);
  EvaluationTree tree(d, {});
  tree.step();
  const auto b = tree.bounds();
  const bool bounds_ok = std::abs(b.lower[0] - 7) < kTol && std::abs(b.upper[0] - 10) < kTol &&
                         std::abs(b.lower[1]) < kTol && std::abs(b.upper[1] - 3) < kTol;
  EvaluationTree fresh(d, {});
  const auto r = decide(fresh, 1);
  if (!bounds_ok) v.fail("worked example bounds; ");
  if (!r.converged || r.action != 0 || r.steps_used != 1) v.fail("worked example not decided in one step; ");
  v.detail << diagrams.size() << " diagrams, " << steps << " steps checked; example d0 [" << b.lower[0] << ", "
           << b.upper[0] << "] d1 [" << b.lower[1] << ", " << b.upper[1] << "]";
  return v;
}

// Roots plus observed leaves whose parents come from distinct components, so
// the whole net stays singly connected.
std::pair<InfluenceDiagram, Evidence> two_level(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> nroots(1, 4), nleaves(1, 5), card(2, 3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  InfluenceDiagram d;
  const int r = nroots(rng), l = nleaves(rng);
  std::vector<int> comp;
  for (int i = 0; i < r; ++i) {
    Variable v{i, "R" + std::to_string(i), {}, VarKind::Chance};
    for (int x = 0; x < card(rng); ++x) v.domain.push_back("r" + std::to_string(x));
    d.variables.push_back(v);
    d.cpts.push_back(rtd::testing::random_cpt(rng, d, {}, i, false));
    comp.push_back(i);
  }
  auto find = [&](int x) {
    while (comp[x] != x) x = comp[x];
    return x;
  };
  Evidence ev;
  for (int j = 0; j < l; ++j) {
    const VarId id = r + j;
    Variable v{id, "L" + std::to_string(j), {}, VarKind::Chance};
    for (int x = 0; x < card(rng); ++x) v.domain.push_back("l" + std::to_string(x));
    d.variables.push_back(v);
    std::vector<VarId> parents;
    std::vector<int> order(r);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int p : order) {
      if (!parents.empty() && (parents.size() >= 3 || u(rng) < 0.5)) continue;
      if (std::any_of(parents.begin(), parents.end(), [&](VarId q) { return find(q) == find(p); })) continue;
      parents.push_back(p);
    }
    for (VarId p : parents) comp[find(p)] = find(parents.front());
    std::sort(parents.begin(), parents.end());
    d.cpts.push_back(rtd::testing::random_cpt(rng, d, parents, id, false));
    ev[id] = std::uniform_int_distribution<int>(0, v.size() - 1)(rng);
  }
  return {d, ev};
}

Verdict kappa_limits(const std::vector<InfluenceDiagram>& diagrams, const std::vector<DecisionResult>& exact) {
  Verdict v;
  int agree = 0;
  for (std::size_t i = 0; i < diagrams.size(); ++i)
    for (auto mode : {ReductionMode::K, ReductionMode::PK}) {
      const auto est = mode == ReductionMode::K ? estimate_priors(diagrams[i]) : estimate_posteriors(diagrams[i], {});
      const int len = static_cast<int>(std::max<std::size_t>(schedule(est).values.size(), 1));
      const auto r = reduced_decide(diagrams[i], {}, len, mode);
      if (r.action == exact[i].action && std::abs(r.score - exact[i].score) <= kTol)
        ++agree;
      else
        v.fail("reduced decision differs on " + std::to_string(i) + "; ");
    }

  std::mt19937_64 rng(7);
  int trees = 0;
  rtd::testing::RandomSpec spec;
  spec.polytree = true;
  spec.min_chance = 2;
  for (; trees < 100; ++trees) {
    const auto d = rtd::testing::random_diagram(rng, spec);
    const auto e = estimate_priors(d);
    for (const auto& var : d.variables) {
      const auto p = posterior(d, {}, var.id);
      for (int x = 0; x < var.size(); ++x)
        if (std::abs(e.values[var.id][x] - p[x]) > kTol) v.fail("prior estimate off on polytree " + std::to_string(trees) + "; ");
    }
  }

  int nets = 0;
  for (; nets < 100; ++nets) {
    auto [d, ev] = two_level(rng);
    if (evidence_probability(d, ev) <= 0.0) continue;
    const auto e = estimate_posteriors(d, ev);
    for (const auto& var : d.variables) {
      if (ev.count(var.id)) continue;
      const auto p = posterior(d, ev, var.id);
      const double z = std::accumulate(e.values[var.id].begin(), e.values[var.id].end(), 0.0);
      for (int x = 0; x < var.size(); ++x)
        if (!(z > 0.0) || std::abs(e.values[var.id][x] / z - p[x]) > kTol)
          v.fail("posterior estimate off on two-level net " + std::to_string(nets) + "; ");
    }
  }
  v.detail << agree << "/" << 2 * diagrams.size() << " reduced decisions exact, " << trees << " polytrees, " << nets
           << " two-level nets";
  return v;
}

Verdict cost_identity() {
  Verdict v;
  harness::ScenarioConfig cfg;
  cfg.units_per_tick = 1000;
  std::vector<std::pair<olma::AgentSpec, std::uint64_t>> runs;
  for (auto alg : {olma::Algorithm::Random, olma::Algorithm::Exact, olma::Algorithm::Dipi, olma::Algorithm::K,
                   olma::Algorithm::PK})
    for (std::uint64_t seed : {1, 2, 3}) runs.push_back({{alg, alg == olma::Algorithm::Dipi ? 4 : 2}, seed});

  auto run = [&](std::size_t i) {
    harness::ScenarioConfig c = cfg;
    c.agent = runs[i].first;
    return harness::run_scenario(c, runs[i].second);
  };
  std::vector<std::string> serial;
  int checked = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto t = run(i);
    const double expect = cfg.cost.r * t.replacements + cfg.cost.c_probe * t.probes + cfg.cost.f * t.faulted_ticks;
    if (t.total_cost != expect) v.fail("cost identity broken on run " + std::to_string(i) + "; ");
    serial.push_back(t.str(cfg.circuit));
    if (run(i).str(cfg.circuit) != serial.back()) v.fail("rerun differs on run " + std::to_string(i) + "; ");
    ++checked;
  }
  // Same runs from concurrent threads.
  std::vector<std::string> parallel(runs.size());
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < 4; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t i = w; i < runs.size(); i += 4) parallel[i] = run(i).str(cfg.circuit);
      });
  }
  if (parallel != serial) v.fail("threaded transcripts differ; ");

  harness::ExperimentGrid g;
  g.algorithms = {{"random", {1}}, {"dipi", {1, 2}}, {"pk", {1}}};
  g.quanta = {1, 4};
  g.calibration = 1000;
  g.seeds = 2;
  g.horizon = 200;
  const auto one = harness::sweep(g, 1);
  const auto four = harness::sweep(g, 4);
  if (harness::cells_csv(one.cells) != harness::cells_csv(four.cells) ||
      harness::cells_csv(one.best) != harness::cells_csv(four.best))
    v.fail("sweep output depends on thread count; ");
  v.detail << checked << " transcripts, 4-thread replay, sweep at 1 and 4 threads";
  return v;
}

Verdict failure_rate(const std::string& scenario) {
  Verdict v;
  const auto cfg = harness::load_scenario(scenario);
  double sum = 0.0;
  const int n = 30;
  for (int s = 1; s <= n; ++s) sum += harness::run_scenario(cfg, s).failures;
  const double mean = sum / n;
  if (!(mean >= 6.0 && mean <= 13.0)) v.fail("mean outside [6, 13]; ");
  v.detail << olma::algorithm_name(cfg.agent.algorithm) << " agent, " << n << " seeds x " << cfg.horizon
           << " ticks, mean failures " << std::setprecision(4) << mean;
  return v;
}

using Key = std::pair<std::string, double>;

// Pooled standard error of the difference of two cell means.
double diff_se(const harness::CellResult& a, const harness::CellResult& b) {
  return std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_);
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(4) << x;
  return os.str();
}

struct GridVerdicts {
  Verdict six, seven;
};

GridVerdicts grid_trends(const std::string& grid_path, int threads, const std::string& out_dir) {
  GridVerdicts out;
  Verdict& v = out.six;
  const auto grid = harness::load_grid(grid_path);
  int done = 0;
  std::size_t total = 0;
  for (const auto& line : grid.algorithms) total += line.steps.size() * grid.quanta.size();
  const auto t0 = Clock::now();
  const auto res = harness::sweep(grid, threads, [&](const harness::CellResult& c) {
    std::cerr << "[" << ++done << "/" << total << "] " << c.algorithm << " q=" << c.quantum << " steps=" << c.steps
              << " cpf=" << c.mean_cost_per_failure << " t=" << std::fixed << std::setprecision(0) << seconds_since(t0)
              << "s" << std::defaultfloat << std::endl;
  });
  const double sec = seconds_since(t0);
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_file_atomic(out_dir + "/cells.csv", harness::cells_csv(res.cells));
    write_file_atomic(out_dir + "/best_per_quantum.csv", harness::cells_csv(res.best));
  }

  std::map<Key, harness::CellResult> best;
  for (const auto& c : res.best) best[{c.algorithm, c.quantum}] = c;
  std::vector<double> quanta = grid.quanta;
  std::sort(quanta.begin(), quanta.end());
  const double qmax = quanta.back();
  auto cell = [&](const std::string& alg, double q) -> const harness::CellResult* {
    auto it = best.find({alg, q});
    return it == best.end() ? nullptr : &it->second;
  };
  std::ostringstream notes;
  const bool enough_seeds = grid.seeds >= 10;
  if (!enough_seeds) v.fail("fewer than 10 seeds; ");

  // a: random flat.
  bool a = true;
  {
    double sum = 0.0;
    int n = 0;
    for (const auto& c : res.cells)
      if (c.algorithm == "random")
        for (const auto& x : c.per_seed)
          if (x) sum += *x, ++n;
    const double pooled = n ? sum / n : 0.0;
    for (double q : quanta) {
      const auto* c = cell("random", q);
      if (!c || std::abs(c->mean_cost_per_failure - pooled) > 2 * c->stderr_) a = false;
    }
    notes << "a " << (a ? "pass" : "fail") << " (random pooled " << fmt(pooled) << ")";
  }
  // b: best PK and D-IPI at least 2 standard errors under random everywhere.
  bool b = true;
  {
    std::ostringstream misses;
    for (double q : quanta) {
      const auto* r = cell("random", q);
      for (const char* alg : {"pk", "dipi"}) {
        const auto* c = cell(alg, q);
        if (!r || !c || !(c->mean_cost_per_failure <= r->mean_cost_per_failure - 2 * r->stderr_)) {
          b = false;
          misses << " " << alg << "@" << q << "=" << (c ? fmt(c->mean_cost_per_failure) : "-");
        }
      }
    }
    notes << "; b " << (b ? "pass" : "fail");
    if (!b) notes << " (limit at q=" << quanta.front() << " is "
                  << fmt(cell("random", quanta.front())->mean_cost_per_failure -
                         2 * cell("random", quanta.front())->stderr_)
                  << ";" << misses.str() << ")";
  }
  // c: exact non-increasing in quantum.
  bool c = true;
  {
    std::ostringstream seq;
    for (std::size_t i = 0; i < quanta.size(); ++i) {
      const auto* x = cell("exact", quanta[i]);
      if (!x) {
        c = false;
        continue;
      }
      seq << (i ? " " : "") << fmt(x->mean_cost_per_failure);
      if (i == 0) continue;
      const auto* prev = cell("exact", quanta[i - 1]);
      if (prev && x->mean_cost_per_failure > prev->mean_cost_per_failure + 1.5 * diff_se(*x, *prev)) c = false;
    }
    notes << "; c " << (c ? "pass" : "fail") << " (exact " << seq.str() << ")";
  }
  // d: at the smallest quantum, best PK and D-IPI beat exact.
  bool d = true;
  {
    const auto* ex = cell("exact", quanta.front());
    const auto* pk = cell("pk", quanta.front());
    const auto* dp = cell("dipi", quanta.front());
    d = ex && pk && dp && pk->mean_cost_per_failure < ex->mean_cost_per_failure &&
        dp->mean_cost_per_failure < ex->mean_cost_per_failure;
    notes << "; d " << (d ? "pass" : "fail");
    if (ex && pk && dp)
      notes << " (exact " << fmt(ex->mean_cost_per_failure) << ", pk " << fmt(pk->mean_cost_per_failure) << ", dipi "
            << fmt(dp->mean_cost_per_failure) << ")";
  }
  // e: D-IPI's best step count grows from the smallest to the largest quantum.
  bool e = true;
  {
    const auto* lo = cell("dipi", quanta.front());
    const auto* hi = cell("dipi", qmax);
    e = lo && hi && hi->steps > lo->steps;
    notes << "; e " << (e ? "pass" : "fail");
    if (lo && hi) notes << " (steps " << lo->steps << " -> " << hi->steps << ")";
  }
  const bool fast = sec <= 1800.0;
  notes << "; runtime " << std::fixed << std::setprecision(0) << sec << " s on " << std::max(1u, std::thread::hardware_concurrency())
        << " core(s), budget 1800 s";
  if (!(a && b && c && d && e && fast)) v.pass = false;
  v.detail << notes.str();

  // 7: K-1 versus PK-1 at the smallest quantum.
  Verdict& w = out.seven;
  const harness::CellResult* k1 = nullptr;
  const harness::CellResult* pk1 = nullptr;
  for (const auto& x : res.cells)
    if (x.quantum == quanta.front() && x.steps == 1) {
      if (x.algorithm == "k") k1 = &x;
      if (x.algorithm == "pk") pk1 = &x;
    }
  if (!k1 || !pk1) {
    w.fail("grid lacks k or pk at one iteration");
  } else {
    const double margin = k1->mean_cost_per_failure - pk1->mean_cost_per_failure;
    const double se = diff_se(*k1, *pk1);
    if (!(margin >= 2 * se)) w.fail("margin below 2 standard errors; ");
    w.detail << "k " << fmt(k1->mean_cost_per_failure) << " +- " << fmt(k1->stderr_) << ", pk "
             << fmt(pk1->mean_cost_per_failure) << " +- " << fmt(pk1->stderr_) << ", margin " << fmt(margin)
             << " vs 2se " << fmt(2 * se);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  std::string grid = std::string(RTD_CONFIGS) + "/default_grid.cfg";
  std::string scenario = std::string(RTD_CONFIGS) + "/olma_default.scn";
  std::string out_dir;
  int threads = 0;
  app.add_option("--grid", grid, "Grid for criteria 6 and 7");
  app.add_option("--scenario", scenario, "Scenario for criterion 5");
  app.add_option("--out", out_dir, "Directory for the sweep CSVs");
  app.add_option("--threads", threads, "Sweep worker threads (0: all cores)");
  CLI11_PARSE(app, argc, argv);

  try {
    const auto diagrams = corpus();
    std::vector<DecisionResult> exact;
    report(1, "oracle equivalence", oracle(diagrams, exact));
    report(2, "dipi sandwich and convergence", sandwich(diagrams, exact));
    report(3, "k/pk exactness limits", kappa_limits(diagrams, exact));
    report(4, "cost identity and determinism", cost_identity());
    report(5, "failure-rate calibration", failure_rate(scenario));
    const auto g = grid_trends(grid, threads, out_dir);
    report(6, "trend reproduction", g.six);
    report(7, "k-reduced weakness", g.seven);
  } catch (const std::exception& e) {
    std::cerr << "acceptance: " << e.what() << "\n";
    return 1;
  }
  std::cout << passed << "/7 criteria pass" << std::endl;
  transcript << passed << "/7 criteria pass\n";
  if (!out_dir.empty()) write_file_atomic(out_dir + "/report.txt", transcript.str());
  return 0;
}
