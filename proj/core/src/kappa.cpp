#include "rtd/kappa.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <iomanip>
#include <ostream>

#include "rtd/errors.hpp"

namespace rtd {
namespace {

// Visits every cell of f with the decoded per-scope value indices.
template <typename Fn>
void for_each_cell(const Factor& f, Fn&& fn) {
  std::vector<int> idx(f.scope.size(), 0);
  for (std::size_t cell = 0; cell < f.table.size(); ++cell) {
    fn(cell, idx);
    for (int i = static_cast<int>(idx.size()) - 1; i >= 0; --i) {
      if (++idx[i] < f.card[i]) break;
      idx[i] = 0;
    }
  }
}

std::vector<double> indicator(int size, int value) {
  std::vector<double> v(size, 0.0);
  v[value] = 1.0;
  return v;
}

struct Forward {
  std::vector<std::vector<double>> pi;
  std::uint64_t cells = 0;
};

Forward forward_pass(const InfluenceDiagram& d, const Evidence& evidence) {
  const auto order = d.topological_order();
  if (order.empty() && d.num_vars() > 0) throw ScopeError("diagram is cyclic");
  Forward out;
  out.pi.resize(d.variables.size());
  for (VarId v : order) {
    const int k = d.variables[v].size();
    if (auto it = evidence.find(v); it != evidence.end()) {
      out.pi[v] = indicator(k, it->second);
      continue;
    }
    if (d.is_decision(v)) {
      out.pi[v].assign(k, 1.0 / k);
      continue;
    }
    const Factor& f = *d.cpt_of(v);
    const int cpos = f.position(v);
    std::vector<double> est(k, 0.0);
    for_each_cell(f, [&](std::size_t cell, const std::vector<int>& idx) {
      double w = f.table[cell];
      for (std::size_t i = 0; i < f.scope.size() && w != 0.0; ++i)
        if (static_cast<int>(i) != cpos) w *= out.pi[f.scope[i]][idx[i]];
      est[idx[cpos]] += w;
    });
    out.cells += f.table.size();
    out.pi[v] = std::move(est);
  }
  return out;
}

}  // namespace

MagnitudeEstimate estimate_priors(const InfluenceDiagram& d) {
  MagnitudeEstimate m;
  m.kind = MagnitudeEstimate::Kind::Prior;
  m.values = forward_pass(d, {}).pi;
  m.chance.resize(d.variables.size());
  for (const auto& v : d.variables) m.chance[v.id] = v.kind == VarKind::Chance;
  return m;
}

MagnitudeEstimate estimate_posteriors(const InfluenceDiagram& d, const Evidence& evidence) {
  check_evidence(d, evidence);
  MagnitudeEstimate m;
  m.kind = MagnitudeEstimate::Kind::Posterior;
  m.chance.resize(d.variables.size());
  for (const auto& v : d.variables) m.chance[v.id] = v.kind == VarKind::Chance;
  const Forward fw = forward_pass(d, evidence);
  if (evidence.empty()) {
    m.values = fw.pi;
    return m;
  }
  const int n = d.num_vars();
  auto order = d.topological_order();
  std::reverse(order.begin(), order.end());

  // msg[c][i]: likelihood message from chance child c to its i-th scope
  // variable (empty for the child itself and for non-chance parents).
  std::vector<std::vector<std::vector<double>>> msg(n);
  std::vector<bool> below(n, false);  // evidence at or below
  for (const auto& [v, _] : evidence) below[v] = true;
  for (VarId c : order) {
    if (d.is_decision(c)) continue;
    const Factor& f = *d.cpt_of(c);
    msg[c].resize(f.scope.size());
    for (VarId p : f.scope)
      if (p != c && below[c]) below[p] = true;
  }

  auto lambda = [&](VarId v, int skip_child) {
    std::vector<double> l(d.variables[v].size(), 1.0);
    if (auto it = evidence.find(v); it != evidence.end()) return indicator(d.variables[v].size(), it->second);
    for (const auto& f : d.cpts) {
      if (f.child == v || f.child == skip_child) continue;
      const int pos = f.position(v);
      if (pos < 0 || msg[f.child][pos].empty()) continue;
      for (std::size_t x = 0; x < l.size(); ++x) l[x] *= msg[f.child][pos][x];
    }
    return l;
  };

  // Repeated sweeps let sibling-parent estimates absorb their other children's
  // evidence; a polytree settles after as many sweeps as its depth.
  bool changed = true;
  for (int pass = 0; pass < n && changed; ++pass) {
    changed = false;
    for (VarId c : order) {
      if (d.is_decision(c) || !below[c]) continue;
      const Factor& f = *d.cpt_of(c);
      const int cpos = f.position(c);
      const std::vector<double> lc = lambda(c, -1);
      std::vector<std::vector<double>> sib(f.scope.size());
      for (std::size_t i = 0; i < f.scope.size(); ++i) {
        const VarId q = f.scope[i];
        if (static_cast<int>(i) == cpos) continue;
        sib[i] = fw.pi[q];
        if (!d.is_decision(q) && !evidence.count(q)) {
          const auto lq = lambda(q, c);
          for (std::size_t x = 0; x < sib[i].size(); ++x) sib[i][x] *= lq[x];
        }
      }
      for (std::size_t i = 0; i < f.scope.size(); ++i) {
        const VarId x = f.scope[i];
        if (static_cast<int>(i) == cpos || d.is_decision(x) || evidence.count(x)) continue;
        std::vector<double> out(d.variables[x].size(), 0.0);
        for_each_cell(f, [&](std::size_t cell, const std::vector<int>& idx) {
          double w = f.table[cell] * lc[idx[cpos]];
          for (std::size_t j = 0; j < f.scope.size() && w != 0.0; ++j)
            if (j != i && static_cast<int>(j) != cpos) w *= sib[j][idx[j]];
          out[idx[i]] += w;
        });
        if (out != msg[c][i]) {
          msg[c][i] = std::move(out);
          changed = true;
        }
      }
    }
  }

  m.values.resize(n);
  for (VarId v = 0; v < n; ++v) {
    if (d.is_decision(v) || evidence.count(v)) {
      m.values[v] = fw.pi[v];
      continue;
    }
    const auto l = lambda(v, -1);
    std::vector<double> est(fw.pi[v]);
    double z = 0.0;
    for (std::size_t x = 0; x < est.size(); ++x) z += (est[x] *= l[x]);
    m.values[v] = z > 0.0 ? std::move(est) : fw.pi[v];
  }
  return m;
}

ThresholdSchedule schedule(const MagnitudeEstimate& est) {
  ThresholdSchedule s;
  double least_greatest = std::numeric_limits<double>::infinity();
  for (std::size_t v = 0; v < est.values.size(); ++v) {
    if (!est.chance[v]) continue;
    const auto& vals = est.values[v];
    s.values.insert(s.values.end(), vals.begin(), vals.end());
    least_greatest = std::min(least_greatest, *std::max_element(vals.begin(), vals.end()));
  }
  std::sort(s.values.begin(), s.values.end(), std::greater<>());
  s.values.erase(std::unique(s.values.begin(), s.values.end()), s.values.end());
  if (s.values.empty()) return s;
  s.start = static_cast<std::size_t>(std::find(s.values.begin(), s.values.end(), least_greatest) - s.values.begin());
  return s;
}

DomainMask reduce(const MagnitudeEstimate& est, double threshold) {
  DomainMask m;
  m.keep.resize(est.values.size());
  for (std::size_t v = 0; v < est.values.size(); ++v) {
    const auto& vals = est.values[v];
    for (std::size_t x = 0; x < vals.size(); ++x)
      if (!est.chance[v] || vals[x] >= threshold) m.keep[v].push_back(static_cast<int>(x));
    if (m.keep[v].empty()) throw InvalidThreshold("threshold exceeds the least-greatest estimate");
  }
  return m;
}

ReducedResult reduced_decide(const InfluenceDiagram& d, const Evidence& evidence, int iterations,
                             ReductionMode mode, const ExactOptions& opts) {
  if (iterations < 1) throw ConfigError("iterations must be at least 1");
  check_evidence(d, evidence);
  ReducedResult out;
  const MagnitudeEstimate est = mode == ReductionMode::K ? estimate_priors(d) : estimate_posteriors(d, evidence);
  for (const auto& f : d.cpts) out.units += f.table.size();
  ThresholdSchedule sch = schedule(est);
  if (sch.values.empty()) sch.values.push_back(0.0);  // no chance variables: one full evaluation
  std::size_t idx = sch.start;
  for (int it = 1; it <= iterations; ++it) {
    if (idx >= sch.values.size()) break;
    IterationRecord rec;
    rec.iteration = it;
    rec.threshold = sch.values[idx];
    const DomainMask mask = reduce(est, rec.threshold);
    for (const auto& k : mask.keep) rec.kept.push_back(static_cast<int>(k.size()));
    const InfluenceDiagram rd = apply_mask(d, mask);
    for (const auto& f : rd.cpts) rec.reduced_cells += f.table.size();
    for (const auto& f : rd.utilities) rec.reduced_cells += f.table.size();
    const auto re = remap_evidence(mask, evidence);
    rec.failed = !re.has_value();
    if (re) {
      try {
        const DecisionResult r = evaluate_decision(rd, *re, opts);
        rec.units = r.compute_units;
        out.action = r.action;
        out.score = r.score;
        out.have_score = true;
      } catch (const ZeroMassError&) {
        rec.failed = true;
      }
    }
    if (rec.failed) rec.units = rec.reduced_cells;
    rec.action = out.action;
    rec.score = out.score;
    out.units += rec.units;
    out.log.push_back(std::move(rec));
    ++idx;
  }
  out.schedule_exhausted = idx >= sch.values.size();
  return out;
}

void write_iteration_header(std::ostream& os) {
  os << "iteration\tthreshold\tkept\treduced_cells\tfailed\taction\tscore\tunits\n";
}

void write_iteration_log(std::ostream& os, const ReducedResult& r) {
  for (const auto& rec : r.log) {
    os << rec.iteration << '\t' << std::setprecision(17) << rec.threshold << '\t';
    for (std::size_t i = 0; i < rec.kept.size(); ++i) os << (i ? "," : "") << rec.kept[i];
    os << '\t' << rec.reduced_cells << '\t' << (rec.failed ? 1 : 0) << '\t' << rec.action << '\t' << rec.score
       << '\t' << rec.units << '\n';
  }
}

}  // namespace rtd
