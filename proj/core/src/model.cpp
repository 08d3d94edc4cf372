#include "rtd/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include "rtd/errors.hpp"

namespace rtd {

Factor::Factor(std::vector<VarId> scope_, std::vector<int> card_, std::vector<double> table_,
               FactorRole role_, VarId child_)
    : scope(std::move(scope_)),
      card(std::move(card_)),
      table(std::move(table_)),
      role(role_),
      child(child_) {}

Factor Factor::constant(double value, FactorRole role) { return Factor({}, {}, {value}, role); }

bool Factor::contains(VarId v) const { return position(v) >= 0; }

int Factor::position(VarId v) const {
  for (std::size_t i = 0; i < scope.size(); ++i)
    if (scope[i] == v) return static_cast<int>(i);
  return -1;
}

std::vector<std::size_t> Factor::strides() const {
  std::vector<std::size_t> s(scope.size(), 1);
  for (int i = static_cast<int>(scope.size()) - 2; i >= 0; --i) s[i] = s[i + 1] * card[i + 1];
  return s;
}

std::size_t Factor::offset(const std::vector<int>& assignment) const {
  std::size_t off = 0;
  for (std::size_t i = 0; i < scope.size(); ++i) off = off * card[i] + assignment[scope[i]];
  return off;
}

double Factor::at(const std::vector<int>& assignment) const { return table[offset(assignment)]; }

std::vector<int> InfluenceDiagram::cardinalities() const {
  std::vector<int> c;
  c.reserve(variables.size());
  for (const auto& v : variables) c.push_back(v.size());
  return c;
}

const Factor* InfluenceDiagram::cpt_of(VarId child) const {
  for (const auto& f : cpts)
    if (f.child == child) return &f;
  return nullptr;
}

std::optional<VarId> InfluenceDiagram::find(const std::string& name) const {
  for (const auto& v : variables)
    if (v.name == name) return v.id;
  return std::nullopt;
}

std::vector<std::vector<VarId>> InfluenceDiagram::predecessors() const {
  std::vector<std::set<VarId>> preds(variables.size());
  auto valid = [&](VarId v) { return v >= 0 && v < num_vars(); };
  for (const auto& f : cpts) {
    if (!valid(f.child)) continue;
    for (VarId p : f.scope)
      if (p != f.child && valid(p)) preds[f.child].insert(p);
  }
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const auto& d = decisions[i];
    if (!valid(d.var)) continue;
    for (VarId o : d.observes)
      if (valid(o) && o != d.var) preds[d.var].insert(o);
    if (i > 0 && valid(decisions[i - 1].var)) preds[d.var].insert(decisions[i - 1].var);
  }
  std::vector<std::vector<VarId>> out;
  out.reserve(preds.size());
  for (auto& s : preds) out.emplace_back(s.begin(), s.end());
  return out;
}

std::vector<VarId> InfluenceDiagram::topological_order() const {
  const auto preds = predecessors();
  const int n = num_vars();
  std::vector<int> indeg(n, 0);
  std::vector<std::vector<VarId>> succ(n);
  for (int v = 0; v < n; ++v)
    for (VarId p : preds[v]) {
      ++indeg[v];
      succ[p].push_back(v);
    }
  std::priority_queue<VarId, std::vector<VarId>, std::greater<>> ready;
  for (int v = 0; v < n; ++v)
    if (indeg[v] == 0) ready.push(v);
  std::vector<VarId> order;
  while (!ready.empty()) {
    VarId v = ready.top();
    ready.pop();
    order.push_back(v);
    for (VarId s : succ[v])
      if (--indeg[s] == 0) ready.push(s);
  }
  if (static_cast<int>(order.size()) != n) return {};
  return order;
}

double InfluenceDiagram::utility_min() const {
  double total = 0.0;
  for (const auto& u : utilities)
    if (!u.table.empty()) total += *std::min_element(u.table.begin(), u.table.end());
  return total;
}

double InfluenceDiagram::utility_max() const {
  double total = 0.0;
  for (const auto& u : utilities)
    if (!u.table.empty()) total += *std::max_element(u.table.begin(), u.table.end());
  return total;
}

DomainMask DomainMask::full(const InfluenceDiagram& diagram) {
  DomainMask m;
  for (const auto& v : diagram.variables) {
    std::vector<int> all(v.size());
    std::iota(all.begin(), all.end(), 0);
    m.keep.push_back(std::move(all));
  }
  return m;
}

namespace {

void check_factor_shape(const InfluenceDiagram& d, const Factor& f, const std::string& what,
                        std::vector<std::string>& out) {
  if (f.scope.size() != f.card.size()) {
    out.push_back(what + ": scope and cardinality lengths differ");
    return;
  }
  std::size_t cells = 1;
  std::set<VarId> seen;
  for (std::size_t i = 0; i < f.scope.size(); ++i) {
    VarId v = f.scope[i];
    if (v < 0 || v >= d.num_vars()) {
      out.push_back(what + ": scope references unknown variable " + std::to_string(v));
      return;
    }
    if (!seen.insert(v).second) out.push_back(what + ": duplicate scope variable " + d.variables[v].name);
    if (f.card[i] != d.variables[v].size())
      out.push_back(what + ": cardinality mismatch for " + d.variables[v].name);
    cells *= static_cast<std::size_t>(std::max(f.card[i], 0));
  }
  if (f.table.size() != cells)
    out.push_back(what + ": table length " + std::to_string(f.table.size()) + " != " +
                  std::to_string(cells));
}

}  // namespace

std::vector<std::string> validate(const InfluenceDiagram& d) {
  std::vector<std::string> out;
  std::set<std::string> names;
  for (std::size_t i = 0; i < d.variables.size(); ++i) {
    const auto& v = d.variables[i];
    if (v.id != static_cast<VarId>(i)) out.push_back("variable " + v.name + ": id not dense");
    if (!names.insert(v.name).second) out.push_back("variable " + v.name + ": duplicate name");
    if (v.domain.empty()) out.push_back("variable " + v.name + ": empty domain");
  }
  if (!out.empty()) return out;

  std::vector<int> cpt_count(d.variables.size(), 0);
  for (const auto& f : d.cpts) {
    if (f.role != FactorRole::Cpt || f.child < 0 || f.child >= d.num_vars()) {
      out.push_back("cpt with invalid child");
      continue;
    }
    const std::string what = "cpt(" + d.variables[f.child].name + ")";
    ++cpt_count[f.child];
    if (d.is_decision(f.child)) out.push_back(what + ": child is a decision");
    std::size_t before = out.size();
    check_factor_shape(d, f, what, out);
    if (out.size() != before) continue;
    const int cp = f.position(f.child);
    if (cp < 0) {
      out.push_back(what + ": child not in scope");
      continue;
    }
    for (double x : f.table)
      if (!(x >= 0.0) || !std::isfinite(x)) {
        out.push_back(what + ": negative or non-finite entry");
        break;
      }
    const auto st = f.strides();
    const std::size_t stride = st[cp];
    const int k = f.card[cp];
    for (std::size_t off = 0; off < f.table.size(); ++off) {
      if ((off / stride) % k != 0) continue;
      double sum = 0.0;
      for (int j = 0; j < k; ++j) sum += f.table[off + j * stride];
      if (std::abs(sum - 1.0) > 1e-9) {
        std::ostringstream msg;
        msg << what << ": cpt not normalized at row " << off << " (sum " << sum << ")";
        out.push_back(msg.str());
        break;
      }
    }
  }
  for (const auto& v : d.variables) {
    if (v.kind == VarKind::Chance && cpt_count[v.id] != 1)
      out.push_back("variable " + v.name + ": expected exactly one cpt, found " +
                    std::to_string(cpt_count[v.id]));
  }

  std::vector<int> decision_count(d.variables.size(), 0);
  for (const auto& st : d.decisions) {
    if (st.var < 0 || st.var >= d.num_vars() || !d.is_decision(st.var)) {
      out.push_back("decision stage references a non-decision variable");
      continue;
    }
    ++decision_count[st.var];
    for (VarId o : st.observes)
      if (o < 0 || o >= d.num_vars())
        out.push_back("decision " + d.variables[st.var].name + ": observes unknown variable");
  }
  for (const auto& v : d.variables)
    if (v.kind == VarKind::Decision && decision_count[v.id] != 1)
      out.push_back("decision " + v.name + ": must appear exactly once in decision order");

  for (std::size_t i = 0; i < d.utilities.size(); ++i) {
    const std::string what = "utility[" + std::to_string(i) + "]";
    check_factor_shape(d, d.utilities[i], what, out);
    for (double x : d.utilities[i].table)
      if (!std::isfinite(x)) {
        out.push_back(what + ": non-finite entry");
        break;
      }
  }
  if (out.empty() && d.topological_order().empty()) out.push_back("cycle in chance and information arcs");
  return out;
}

void check_evidence(const InfluenceDiagram& d, const Evidence& evidence) {
  for (const auto& [var, value] : evidence) {
    if (var < 0 || var >= d.num_vars()) throw InvalidEvidence("evidence on unknown variable");
    if (value < 0 || value >= d.variables[var].size())
      throw InvalidEvidence("evidence value out of range for " + d.variables[var].name);
  }
}

Factor apply_evidence(const Factor& f, const Evidence& evidence) {
  std::vector<int> fixed(f.scope.size(), -1);
  bool any = false;
  for (std::size_t i = 0; i < f.scope.size(); ++i) {
    auto it = evidence.find(f.scope[i]);
    if (it == evidence.end()) continue;
    if (it->second < 0 || it->second >= f.card[i])
      throw InvalidEvidence("evidence value out of range for variable " + std::to_string(f.scope[i]));
    fixed[i] = it->second;
    any = true;
  }
  if (!any) return f;

  Factor out;
  out.role = f.role;
  out.child = f.child;
  std::vector<std::size_t> src_stride;
  const auto st = f.strides();
  std::size_t base = 0;
  for (std::size_t i = 0; i < f.scope.size(); ++i) {
    if (fixed[i] >= 0) {
      base += fixed[i] * st[i];
    } else {
      out.scope.push_back(f.scope[i]);
      out.card.push_back(f.card[i]);
      src_stride.push_back(st[i]);
    }
  }
  if (out.role == FactorRole::Cpt && evidence.count(out.child)) out.role = FactorRole::Generic;
  std::size_t cells = 1;
  for (int c : out.card) cells *= c;
  out.table.resize(cells);
  std::vector<int> idx(out.scope.size(), 0);
  for (std::size_t k = 0; k < cells; ++k) {
    std::size_t off = base;
    for (std::size_t i = 0; i < idx.size(); ++i) off += idx[i] * src_stride[i];
    out.table[k] = f.table[off];
    for (int i = static_cast<int>(idx.size()) - 1; i >= 0; --i) {
      if (++idx[i] < out.card[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

namespace {

Factor slice(const Factor& f, const DomainMask& mask) {
  Factor out = f;
  bool trivial = true;
  for (std::size_t i = 0; i < f.scope.size(); ++i) {
    out.card[i] = static_cast<int>(mask.keep[f.scope[i]].size());
    if (out.card[i] != f.card[i]) trivial = false;
  }
  if (trivial) return out;
  const auto st = f.strides();
  std::size_t cells = 1;
  for (int c : out.card) cells *= c;
  out.table.assign(cells, 0.0);
  std::vector<int> idx(f.scope.size(), 0);
  for (std::size_t k = 0; k < cells; ++k) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) off += mask.keep[f.scope[i]][idx[i]] * st[i];
    out.table[k] = f.table[off];
    for (int i = static_cast<int>(idx.size()) - 1; i >= 0; --i) {
      if (++idx[i] < out.card[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

}  // namespace

InfluenceDiagram apply_mask(const InfluenceDiagram& d, const DomainMask& mask) {
  if (mask.keep.size() != d.variables.size()) throw InvalidMask("mask size does not match diagram");
  for (std::size_t v = 0; v < mask.keep.size(); ++v) {
    if (mask.keep[v].empty()) throw InvalidMask("empty keep-set for " + d.variables[v].name);
    for (int x : mask.keep[v])
      if (x < 0 || x >= d.variables[v].size())
        throw InvalidMask("keep index out of range for " + d.variables[v].name);
  }
  InfluenceDiagram out = d;
  for (std::size_t v = 0; v < mask.keep.size(); ++v) {
    std::vector<std::string> dom;
    for (int x : mask.keep[v]) dom.push_back(d.variables[v].domain[x]);
    out.variables[v].domain = std::move(dom);
  }
  for (auto& f : out.cpts) f = slice(f, mask);
  for (auto& f : out.utilities) f = slice(f, mask);
  return out;
}

std::optional<Evidence> remap_evidence(const DomainMask& mask, const Evidence& evidence) {
  Evidence out;
  for (const auto& [var, value] : evidence) {
    const auto& keep = mask.keep.at(var);
    auto it = std::find(keep.begin(), keep.end(), value);
    if (it == keep.end()) return std::nullopt;
    out[var] = static_cast<int>(it - keep.begin());
  }
  return out;
}

}  // namespace rtd
