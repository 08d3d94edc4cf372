#include "rtd/exact.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <set>

#include "rtd/errors.hpp"

namespace rtd {
namespace {

struct UnionScope {
  std::vector<VarId> scope;
  std::vector<int> card;
};

UnionScope union_scope(const Factor& f, const Factor& g) {
  UnionScope u{f.scope, f.card};
  for (std::size_t i = 0; i < g.scope.size(); ++i)
    if (!f.contains(g.scope[i])) {
      u.scope.push_back(g.scope[i]);
      u.card.push_back(g.card[i]);
    }
  return u;
}

std::size_t cell_count(const std::vector<int>& card, std::size_t limit) {
  std::size_t cells = 1;
  for (int c : card) {
    if (c != 0 && cells > limit / static_cast<std::size_t>(c))
      throw CapacityError("intermediate table exceeds cell limit");
    cells *= c;
  }
  if (cells > limit) throw CapacityError("intermediate table exceeds cell limit");
  return cells;
}

// Strides of `f` expressed over the positions of `target` (0 where absent).
std::vector<std::size_t> projected_strides(const Factor& f, const std::vector<VarId>& target) {
  const auto st = f.strides();
  std::vector<std::size_t> out(target.size(), 0);
  for (std::size_t i = 0; i < target.size(); ++i) {
    int p = f.position(target[i]);
    if (p >= 0) out[i] = st[p];
  }
  return out;
}

template <typename Op>
Factor binary(const Factor& f, const Factor& g, std::size_t max_cells, Op op) {
  UnionScope u = union_scope(f, g);
  const std::size_t cells = cell_count(u.card, max_cells);
  Factor out(u.scope, u.card, std::vector<double>(cells), FactorRole::Generic);
  const auto sf = projected_strides(f, u.scope);
  const auto sg = projected_strides(g, u.scope);
  std::vector<int> idx(u.scope.size(), 0);
  std::size_t of = 0, og = 0;
  for (std::size_t k = 0; k < cells; ++k) {
    out.table[k] = op(f.table[of], g.table[og]);
    for (int i = static_cast<int>(idx.size()) - 1; i >= 0; --i) {
      if (++idx[i] < u.card[i]) {
        of += sf[i];
        og += sg[i];
        break;
      }
      of -= sf[i] * (u.card[i] - 1);
      og -= sg[i] * (u.card[i] - 1);
      idx[i] = 0;
    }
  }
  return out;
}

}  // namespace

Factor combine(const Factor& f, const Factor& g, std::size_t max_cells) {
  return binary(f, g, max_cells, [](double a, double b) { return a * b; });
}

Factor add(const Factor& f, const Factor& g, std::size_t max_cells) {
  return binary(f, g, max_cells, [](double a, double b) { return a + b; });
}

Elimination eliminate(const Factor& f, VarId var, ElimMode mode) {
  const int p = f.position(var);
  if (p < 0) throw ScopeError("eliminated variable not in factor scope");
  const auto st = f.strides();
  const std::size_t stride = st[p];
  const int k = f.card[p];
  Factor out;
  for (std::size_t i = 0; i < f.scope.size(); ++i)
    if (static_cast<int>(i) != p) {
      out.scope.push_back(f.scope[i]);
      out.card.push_back(f.card[i]);
    }
  const std::size_t cells = f.table.size() / k;
  out.table.assign(cells, 0.0);
  Elimination e;
  if (mode != ElimMode::Sum) e.argbest.emplace(cells, 0);
  // Offsets of the outer (above var) and inner (below var) blocks.
  const std::size_t inner = stride;
  const std::size_t outer = cells / inner;
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) {
      const std::size_t base = o * inner * k + i;
      const std::size_t dst = o * inner + i;
      if (mode == ElimMode::Sum) {
        double s = 0.0;
        for (int j = 0; j < k; ++j) s += f.table[base + j * stride];
        out.table[dst] = s;
      } else {
        double best = f.table[base];
        int arg = 0;
        for (int j = 1; j < k; ++j) {
          const double x = f.table[base + j * stride];
          if (mode == ElimMode::Max ? x > best : x < best) {
            best = x;
            arg = j;
          }
        }
        out.table[dst] = best;
        (*e.argbest)[dst] = arg;
      }
    }
  }
  e.result = std::move(out);
  return e;
}

Factor reorder(const Factor& f, const std::vector<VarId>& scope) {
  if (scope == f.scope) return f;
  Factor target;
  target.scope = scope;
  for (VarId v : scope) {
    int p = f.position(v);
    if (p < 0) throw ScopeError("reorder: variable not in scope");
    target.card.push_back(f.card[p]);
  }
  Factor one(scope, target.card, std::vector<double>(f.table.size(), 1.0));
  Factor out = binary(one, f, std::numeric_limits<std::size_t>::max(),
                      [](double, double b) { return b; });
  out.role = f.role;
  out.child = f.child;
  return out;
}

std::vector<VarId> EliminationPlan::order() const {
  std::vector<VarId> out;
  for (const auto& s : steps)
    if (s.kind != PlanStep::Kind::Combine) out.push_back(s.var);
  return out;
}

void EliminationPlan::print(std::ostream& os, const InfluenceDiagram& d) const {
  for (const auto& s : steps) {
    switch (s.kind) {
      case PlanStep::Kind::Combine:
        os << "combine";
        for (int o : s.operands) os << ' ' << '#' << o;
        os << " -> #" << s.result << " cells=" << s.cells << '\n';
        break;
      case PlanStep::Kind::SumOut:
        os << "sum-out " << d.variables[s.var].name << " #" << s.operands.front() << " -> #" << s.result
           << '\n';
        break;
      case PlanStep::Kind::MaxOut:
        os << "max-out " << d.variables[s.var].name << " #" << s.operands.front() << " -> #" << s.result
           << '\n';
        break;
    }
  }
  os << "peak-cells " << peak_cells << '\n';
}

TemporalBlocks temporal_blocks(const InfluenceDiagram& d, const Evidence& evidence) {
  TemporalBlocks b;
  for (const auto& st : d.decisions)
    if (!evidence.count(st.var)) b.free_decisions.push_back(st.var);
  if (b.free_decisions.empty()) throw ScopeError("diagram has no free decision");

  std::vector<bool> assigned(d.variables.size(), false);
  for (const auto& [v, _] : evidence) assigned[v] = true;
  for (VarId dv : b.free_decisions) {
    const auto& st = *std::find_if(d.decisions.begin(), d.decisions.end(),
                                   [&](const DecisionStage& s) { return s.var == dv; });
    std::vector<VarId> block;
    for (VarId o : st.observes)
      if (!assigned[o] && !d.is_decision(o)) {
        assigned[o] = true;
        block.push_back(o);
      }
    std::sort(block.begin(), block.end());
    b.observed.push_back(std::move(block));
  }
  if (!b.observed.front().empty())
    throw ScopeError("first decision " + d.variables[b.free_decisions.front()].name +
                     " observes a variable that is not in the evidence");
  for (const auto& v : d.variables)
    if (!assigned[v.id] && v.kind == VarKind::Chance) b.unobserved.push_back(v.id);

  // Evidence must not descend from a free decision.
  std::vector<std::vector<VarId>> children(d.variables.size());
  for (const auto& f : d.cpts)
    for (VarId p : f.scope)
      if (p != f.child) children[p].push_back(f.child);
  std::vector<bool> desc(d.variables.size(), false);
  std::vector<VarId> stack(b.free_decisions.begin(), b.free_decisions.end());
  while (!stack.empty()) {
    VarId v = stack.back();
    stack.pop_back();
    for (VarId c : children[v])
      if (!desc[c]) {
        desc[c] = true;
        stack.push_back(c);
      }
  }
  for (const auto& [v, _] : evidence)
    if (desc[v]) throw InvalidEvidence("evidence on " + d.variables[v].name + " depends on a free decision");
  return b;
}

namespace {

bool rows_normalized(const Factor& f) {
  const auto cp = static_cast<std::size_t>(std::find(f.scope.begin(), f.scope.end(), f.child) - f.scope.begin());
  if (cp == f.scope.size()) return true;
  const std::size_t stride = f.strides()[cp];
  const int k = f.card[cp];
  for (std::size_t off = 0; off < f.table.size(); ++off) {
    if ((off / stride) % k != 0) continue;
    double sum = 0.0;
    for (int j = 0; j < k; ++j) sum += f.table[off + j * stride];
    if (std::abs(sum - 1.0) > 1e-9) return false;
  }
  return true;
}

}  // namespace

std::vector<bool> relevant_variables(const InfluenceDiagram& d, const Evidence& evidence,
                                     const std::vector<VarId>& keep, bool with_utilities) {
  const auto preds = d.predecessors();
  std::vector<bool> rel(d.variables.size(), false);
  std::vector<VarId> stack;
  auto mark = [&](VarId v) {
    if (!rel[v]) {
      rel[v] = true;
      stack.push_back(v);
    }
  };
  for (VarId v : keep) mark(v);
  for (const auto& [v, _] : evidence) mark(v);
  // Barren pruning assumes rows sum to one; a masked cpt still carries mass.
  for (const auto& f : d.cpts)
    if (f.child >= 0 && !rows_normalized(f)) mark(f.child);
  if (with_utilities)
    for (const auto& u : d.utilities)
      for (VarId v : u.scope) mark(v);
  while (!stack.empty()) {
    VarId v = stack.back();
    stack.pop_back();
    // A posted decision is a constant; a free one depends on what it observes.
    if (d.is_decision(v) && evidence.count(v)) continue;
    for (VarId p : preds[v]) mark(p);
  }
  return rel;
}

namespace {

struct Pool {
  std::vector<Factor> probs;
  std::vector<Factor> utils;
};

Pool initial_pool(const InfluenceDiagram& d, const Evidence& evidence, const std::vector<bool>& rel,
                  bool with_utilities) {
  Pool pool;
  for (const auto& f : d.cpts)
    if (rel[f.child]) pool.probs.push_back(apply_evidence(f, evidence));
  if (with_utilities)
    for (const auto& u : d.utilities) pool.utils.push_back(apply_evidence(u, evidence));
  return pool;
}

// Greedy min-size choice among `candidates` given current factor scopes.
VarId pick_min_size(const std::vector<std::vector<VarId>>& scopes, const std::vector<int>& card,
                    const std::vector<VarId>& candidates, std::size_t* size_out) {
  VarId best = -1;
  double best_size = std::numeric_limits<double>::infinity();
  for (VarId v : candidates) {
    std::set<VarId> uni;
    for (const auto& s : scopes)
      if (std::find(s.begin(), s.end(), v) != s.end()) uni.insert(s.begin(), s.end());
    double size = 1.0;
    for (VarId u : uni) size *= card[u];
    if (size < best_size) {
      best_size = size;
      best = v;
    }
  }
  if (size_out) *size_out = static_cast<std::size_t>(std::min(best_size, 1e18));
  return best;
}

struct OrderedStep {
  VarId var;
  ElimMode mode;  // Sum, or Max/Min for decisions
};

// Builds the plan by symbolic simulation over scopes.
EliminationPlan simulate_plan(const InfluenceDiagram& d, const std::vector<std::vector<VarId>>& initial,
                              const std::vector<std::vector<VarId>>& sum_blocks,
                              const std::vector<VarId>& max_after_block, Sign sign,
                              std::vector<OrderedStep>* order_out) {
  const auto card = d.cardinalities();
  EliminationPlan plan;
  std::vector<std::vector<VarId>> scopes = initial;
  std::vector<int> ids(scopes.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  int next_id = static_cast<int>(scopes.size());

  auto eliminate_var = [&](VarId v, bool is_max) {
    std::vector<std::vector<VarId>> rest;
    std::vector<int> rest_ids;
    std::set<VarId> uni;
    PlanStep comb;
    comb.kind = PlanStep::Kind::Combine;
    for (std::size_t i = 0; i < scopes.size(); ++i) {
      if (std::find(scopes[i].begin(), scopes[i].end(), v) != scopes[i].end()) {
        uni.insert(scopes[i].begin(), scopes[i].end());
        comb.operands.push_back(ids[i]);
      } else {
        rest.push_back(scopes[i]);
        rest_ids.push_back(ids[i]);
      }
    }
    std::size_t cells = 1;
    for (VarId u : uni) cells *= card[u];
    plan.peak_cells = std::max(plan.peak_cells, cells);
    int operand = -1;
    if (comb.operands.size() > 1) {
      comb.result = next_id++;
      comb.cells = cells;
      plan.steps.push_back(comb);
      operand = comb.result;
    } else if (!comb.operands.empty()) {
      operand = comb.operands.front();
    }
    PlanStep out;
    out.kind = is_max ? PlanStep::Kind::MaxOut : PlanStep::Kind::SumOut;
    out.var = v;
    out.operands = {operand};
    out.cells = cells;
    out.result = next_id++;
    plan.steps.push_back(out);
    uni.erase(v);
    if (operand >= 0) {
      rest.emplace_back(uni.begin(), uni.end());
      rest_ids.push_back(out.result);
    }
    scopes = std::move(rest);
    ids = std::move(rest_ids);
    if (order_out)
      order_out->push_back({v, is_max ? (sign == Sign::Maximize ? ElimMode::Max : ElimMode::Min)
                                      : ElimMode::Sum});
  };

  for (std::size_t b = 0; b < sum_blocks.size(); ++b) {
    std::vector<VarId> remaining = sum_blocks[b];
    while (!remaining.empty()) {
      VarId v = pick_min_size(scopes, card, remaining, nullptr);
      remaining.erase(std::find(remaining.begin(), remaining.end(), v));
      eliminate_var(v, false);
    }
    if (b < max_after_block.size() && max_after_block[b] >= 0) eliminate_var(max_after_block[b], true);
  }
  return plan;
}

std::vector<std::vector<VarId>> scopes_of(const Pool& pool) {
  std::vector<std::vector<VarId>> s;
  for (const auto& f : pool.probs) s.push_back(f.scope);
  for (const auto& f : pool.utils) s.push_back(f.scope);
  return s;
}

struct Executor {
  Pool pool;
  std::size_t max_cells = kDefaultMaxCells;
  std::uint64_t units = 0;
  Policy policy{};

  Factor product(std::vector<Factor>& fs) {
    Factor acc = Factor::constant(1.0);
    for (auto& f : fs) {
      acc = combine(acc, f, max_cells);
      units += acc.size();
    }
    return acc;
  }

  Factor total(std::vector<Factor>& fs) {
    Factor acc = Factor::constant(0.0);
    for (auto& f : fs) {
      acc = add(acc, f, max_cells);
      units += acc.size();
    }
    return acc;
  }

  static std::vector<Factor> take(std::vector<Factor>& from, VarId v) {
    std::vector<Factor> taken;
    std::vector<Factor> kept;
    for (auto& f : from) (f.contains(v) ? taken : kept).push_back(std::move(f));
    from = std::move(kept);
    return taken;
  }

  void sum_out(VarId v) {
    auto ps = take(pool.probs, v);
    auto us = take(pool.utils, v);
    Factor phi = product(ps);
    if (!phi.contains(v)) throw ScopeError("summed variable has no probability factor");
    units += phi.size();
    if (us.empty()) {
      pool.probs.push_back(eliminate(phi, v, ElimMode::Sum).result);
      return;
    }
    Factor psi = total(us);
    Factor mu = combine(phi, psi, max_cells);
    units += mu.size();
    Factor phi_out = eliminate(phi, v, ElimMode::Sum).result;
    Factor mu_out = eliminate(mu, v, ElimMode::Sum).result;
    Factor inv = phi_out;
    for (double& x : inv.table) x = x > 0.0 ? 1.0 / x : 0.0;
    Factor psi_out = combine(mu_out, inv, max_cells);
    units += psi_out.size();
    pool.probs.push_back(std::move(phi_out));
    pool.utils.push_back(std::move(psi_out));
  }

  void max_out(VarId v, ElimMode mode) {
    auto ps = take(pool.probs, v);
    Factor phi = ps.empty() ? Factor::constant(1.0) : product(ps);
    // Masked networks are not renormalized, so the mass can depend on the
    // decision; alternatives without mass are not eligible.
    if (phi.contains(v)) {
      units += phi.size();
      max_out_masked(v, mode, phi);
      return;
    }
    if (!ps.empty()) pool.probs.push_back(std::move(phi));
    auto us = take(pool.utils, v);
    DecisionRule rule;
    rule.decision = v;
    if (us.empty()) {
      rule.choice = {0};
      policy.rules.push_back(std::move(rule));
      return;
    }
    Factor psi = total(us);
    units += psi.size();
    auto e = eliminate(psi, v, mode);
    rule.scope = e.result.scope;
    rule.card = e.result.card;
    rule.choice = std::move(*e.argbest);
    policy.rules.push_back(std::move(rule));
    pool.utils.push_back(std::move(e.result));
  }

  void max_out_masked(VarId v, ElimMode mode, const Factor& phi) {
    auto us = take(pool.utils, v);
    Factor psi = us.empty() ? Factor::constant(0.0) : total(us);
    const double bar = mode == ElimMode::Max ? -std::numeric_limits<double>::infinity()
                                             : std::numeric_limits<double>::infinity();
    Factor pen = phi;
    for (double& x : pen.table) x = x > 0.0 ? 0.0 : bar;
    Factor f = add(psi, pen, max_cells);
    units += f.size();
    auto e = eliminate(f, v, mode);
    for (double& x : e.result.table)
      if (!std::isfinite(x)) x = 0.0;
    // Mass at the chosen alternative.
    Factor mass(e.result.scope, e.result.card, std::vector<double>(e.result.size(), 0.0));
    VarId top = v;
    for (VarId u : e.result.scope) top = std::max(top, u);
    std::vector<int> a(static_cast<std::size_t>(top) + 1, 0), idx(e.result.scope.size(), 0);
    for (std::size_t cell = 0; cell < mass.table.size(); ++cell) {
      for (std::size_t i = 0; i < idx.size(); ++i) a[e.result.scope[i]] = idx[i];
      a[v] = (*e.argbest)[cell];
      mass.table[cell] = phi.at(a);
      for (int i = static_cast<int>(idx.size()) - 1; i >= 0; --i) {
        if (++idx[i] < e.result.card[i]) break;
        idx[i] = 0;
      }
    }
    units += mass.size();
    DecisionRule rule;
    rule.decision = v;
    rule.scope = e.result.scope;
    rule.card = e.result.card;
    rule.choice = std::move(*e.argbest);
    policy.rules.push_back(std::move(rule));
    pool.probs.push_back(std::move(mass));
    pool.utils.push_back(std::move(e.result));
  }
};

}  // namespace

EliminationPlan plan(const InfluenceDiagram& d, const Evidence& evidence, const std::vector<VarId>& targets) {
  const bool decision_query = targets.empty() && !d.decisions.empty();
  if (!decision_query) {
    const auto rel = relevant_variables(d, evidence, targets, false);
    Pool pool = initial_pool(d, evidence, rel, false);
    std::vector<VarId> block;
    for (const auto& v : d.variables)
      if (rel[v.id] && v.kind == VarKind::Chance && !evidence.count(v.id) &&
          std::find(targets.begin(), targets.end(), v.id) == targets.end())
        block.push_back(v.id);
    return simulate_plan(d, scopes_of(pool), {block}, {}, d.sign, nullptr);
  }
  const TemporalBlocks tb = temporal_blocks(d, evidence);
  const auto rel = relevant_variables(d, evidence, tb.free_decisions, true);
  Pool pool = initial_pool(d, evidence, rel, true);
  std::vector<std::vector<VarId>> blocks;
  std::vector<VarId> maxes;
  auto filtered = [&](const std::vector<VarId>& vs) {
    std::vector<VarId> out;
    for (VarId v : vs)
      if (rel[v]) out.push_back(v);
    return out;
  };
  blocks.push_back(filtered(tb.unobserved));
  for (int k = static_cast<int>(tb.free_decisions.size()) - 1; k >= 0; --k) {
    maxes.push_back(tb.free_decisions[k]);
    blocks.push_back(k > 0 ? filtered(tb.observed[k]) : std::vector<VarId>{});
  }
  return simulate_plan(d, scopes_of(pool), blocks, maxes, d.sign, nullptr);
}

std::vector<double> posterior(const InfluenceDiagram& d, const Evidence& evidence, VarId target,
                              std::uint64_t* compute_units, const ExactOptions& opts) {
  check_evidence(d, evidence);
  if (d.is_decision(target)) throw ScopeError("posterior target must be a chance variable");
  const int k = d.variables[target].size();
  if (auto it = evidence.find(target); it != evidence.end()) {
    // Still verify the evidence has positive mass.
    Evidence rest = evidence;
    if (evidence_probability(d, rest) <= 0.0) throw ZeroMassError("evidence has zero probability");
    std::vector<double> out(k, 0.0);
    out[it->second] = 1.0;
    return out;
  }
  const auto rel = relevant_variables(d, evidence, {target}, false);
  for (const auto& v : d.variables)
    if (rel[v.id] && v.kind == VarKind::Decision && !evidence.count(v.id))
      throw ScopeError("posterior depends on free decision " + v.name);
  Executor ex{initial_pool(d, evidence, rel, false), opts.max_cells, 0, {}};
  std::vector<VarId> block;
  for (const auto& v : d.variables)
    if (rel[v.id] && v.kind == VarKind::Chance && !evidence.count(v.id) && v.id != target)
      block.push_back(v.id);
  std::vector<OrderedStep> order;
  simulate_plan(d, scopes_of(ex.pool), {block}, {}, d.sign, &order);
  for (const auto& s : order) ex.sum_out(s.var);
  Factor joint = ex.product(ex.pool.probs);
  joint = reorder(joint, {target});
  double z = 0.0;
  for (double x : joint.table) z += x;
  if (compute_units) *compute_units += ex.units;
  if (!(z > 0.0)) throw ZeroMassError("evidence has zero probability");
  std::vector<double> out(joint.table);
  for (double& x : out) x /= z;
  return out;
}

double evidence_probability(const InfluenceDiagram& d, const Evidence& evidence) {
  check_evidence(d, evidence);
  Evidence fixed = evidence;
  for (const auto& v : d.variables)
    if (v.kind == VarKind::Decision && !fixed.count(v.id)) fixed[v.id] = 0;
  const auto relv = relevant_variables(d, fixed, {}, false);
  Executor ex{initial_pool(d, fixed, relv, false), kDefaultMaxCells, 0, {}};
  std::vector<VarId> block;
  for (const auto& v : d.variables)
    if (relv[v.id] && v.kind == VarKind::Chance && !fixed.count(v.id)) block.push_back(v.id);
  std::vector<OrderedStep> order;
  simulate_plan(d, scopes_of(ex.pool), {block}, {}, d.sign, &order);
  for (const auto& s : order) ex.sum_out(s.var);
  Factor z = ex.product(ex.pool.probs);
  return z.table.front();
}

DecisionResult evaluate_decision(const InfluenceDiagram& d, const Evidence& evidence, const ExactOptions& opts) {
  check_evidence(d, evidence);
  const TemporalBlocks tb = temporal_blocks(d, evidence);
  const auto rel = relevant_variables(d, evidence, tb.free_decisions, true);
  Executor ex{initial_pool(d, evidence, rel, true), opts.max_cells, 0, {}};

  std::vector<std::vector<VarId>> blocks;
  std::vector<VarId> maxes;
  auto filtered = [&](const std::vector<VarId>& vs) {
    std::vector<VarId> out;
    for (VarId v : vs)
      if (rel[v]) out.push_back(v);
    return out;
  };
  blocks.push_back(filtered(tb.unobserved));
  for (int k = static_cast<int>(tb.free_decisions.size()) - 1; k >= 1; --k) {
    maxes.push_back(tb.free_decisions[k]);
    blocks.push_back(filtered(tb.observed[k]));
  }
  std::vector<OrderedStep> order;
  simulate_plan(d, scopes_of(ex.pool), blocks, maxes, d.sign, &order);
  const ElimMode best_mode = d.sign == Sign::Maximize ? ElimMode::Max : ElimMode::Min;
  for (const auto& s : order) {
    if (s.mode == ElimMode::Sum)
      ex.sum_out(s.var);
    else
      ex.max_out(s.var, best_mode);
  }

  const VarId first = tb.free_decisions.front();
  const int k = d.variables[first].size();
  // Remaining probability factors are scalars or over the first decision
  // alone; the latter only in masked networks.
  std::vector<double> mass(k, 1.0);
  for (auto& f : ex.pool.probs)
    for (int a = 0; a < k; ++a) {
      const Factor g = f.contains(first) ? apply_evidence(f, Evidence{{first, a}}) : f;
      mass[a] *= g.table.front();
    }
  Factor psi = ex.total(ex.pool.utils);
  std::vector<double> values(k, 0.0);
  if (psi.contains(first)) {
    psi = reorder(psi, {first});
    values = psi.table;
  } else {
    std::fill(values.begin(), values.end(), psi.table.front());
  }

  DecisionResult r;
  r.decision = first;
  r.action = -1;
  for (int a = 0; a < k; ++a) {
    if (!(mass[a] > 0.0)) continue;
    if (r.action < 0 || (d.sign == Sign::Maximize ? values[a] > values[r.action] : values[a] < values[r.action]))
      r.action = a;
  }
  if (r.action < 0) throw ZeroMassError("evidence has zero probability");
  r.score = values[r.action];
  r.action_values = std::move(values);
  r.evidence_mass = mass[r.action];
  DecisionRule root;
  root.decision = first;
  root.choice = {r.action};
  ex.policy.rules.push_back(root);
  std::reverse(ex.policy.rules.begin(), ex.policy.rules.end());
  r.policy = std::move(ex.policy);
  r.compute_units = ex.units + k;
  return r;
}

DecisionResult brute_force_decision(const InfluenceDiagram& d, const Evidence& evidence,
                                    std::size_t max_assignments) {
  check_evidence(d, evidence);
  const TemporalBlocks tb = temporal_blocks(d, evidence);
  std::vector<VarId> order;
  std::vector<bool> is_max;
  for (std::size_t k = 0; k < tb.free_decisions.size(); ++k) {
    if (k > 0)
      for (VarId v : tb.observed[k]) {
        order.push_back(v);
        is_max.push_back(false);
      }
    order.push_back(tb.free_decisions[k]);
    is_max.push_back(true);
  }
  for (VarId v : tb.unobserved) {
    order.push_back(v);
    is_max.push_back(false);
  }
  double leaves = 1.0;
  for (VarId v : order) leaves *= d.variables[v].size();
  if (leaves > static_cast<double>(max_assignments))
    throw CapacityError("brute force enumeration exceeds assignment limit");

  std::vector<int> assignment(d.variables.size(), 0);
  for (const auto& [v, x] : evidence) assignment[v] = x;
  const bool maximize = d.sign == Sign::Maximize;

  std::function<double(std::size_t)> value = [&](std::size_t level) -> double {
    if (level == order.size()) {
      double p = 1.0;
      for (const auto& f : d.cpts) {
        p *= f.at(assignment);
        if (p == 0.0) return 0.0;
      }
      double u = 0.0;
      for (const auto& f : d.utilities) u += f.at(assignment);
      return p * u;
    }
    const VarId v = order[level];
    const int k = d.variables[v].size();
    if (!is_max[level]) {
      double s = 0.0;
      for (int x = 0; x < k; ++x) {
        assignment[v] = x;
        s += value(level + 1);
      }
      return s;
    }
    double best = 0.0;
    for (int x = 0; x < k; ++x) {
      assignment[v] = x;
      double val = value(level + 1);
      if (x == 0 || (maximize ? val > best : val < best)) best = val;
    }
    return best;
  };

  const double mass = evidence_probability(d, evidence);
  if (!(mass > 0.0)) throw ZeroMassError("evidence has zero probability");
  const VarId first = tb.free_decisions.front();
  const int k = d.variables[first].size();
  DecisionResult r;
  r.decision = first;
  r.evidence_mass = mass;
  r.action_values.resize(k);
  for (int a = 0; a < k; ++a) {
    assignment[first] = a;
    r.action_values[a] = value(1) / mass;
    if (a > 0 && (maximize ? r.action_values[a] > r.action_values[r.action]
                           : r.action_values[a] < r.action_values[r.action]))
      r.action = a;
  }
  r.score = r.action_values[r.action];
  DecisionRule root;
  root.decision = first;
  root.choice = {r.action};
  r.policy.rules.push_back(root);
  r.compute_units = static_cast<std::uint64_t>(leaves);
  return r;
}

}  // namespace rtd
