#include "rtd/dipi.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <queue>

#include "rtd/errors.hpp"
#include "rtd/exact.hpp"

namespace rtd {
namespace {

// Max entry over mean entry; a 0/1 table counts as deterministic.
double factor_skew(const Factor& f) {
  if (f.table.empty()) return 1.0;
  if (std::all_of(f.table.begin(), f.table.end(), [](double x) { return x == 0.0 || x == 1.0; }))
    return std::numeric_limits<double>::infinity();
  double mx = 0.0, sum = 0.0;
  for (double x : f.table) {
    mx = std::max(mx, x);
    sum += x;
  }
  if (sum <= 0.0) return std::numeric_limits<double>::infinity();
  return mx / (sum / static_cast<double>(f.table.size()));
}

// Orders a block greedily so contradictions surface early: next is the
// variable completing the most factors that contain zeros, then the one left
// in the most incomplete such factors, then the most skewed, then the lowest
// id.  `placed` marks variables above the block and is updated.
void order_block(std::vector<VarId>& block, std::vector<bool>& placed, const std::vector<Factor>& probs,
                 const std::vector<double>& score) {
  std::vector<const Factor*> zeroed;
  for (const auto& f : probs)
    if (std::find(f.table.begin(), f.table.end(), 0.0) != f.table.end()) zeroed.push_back(&f);
  std::vector<VarId> out;
  std::vector<VarId> rest = block;
  while (!rest.empty()) {
    std::size_t pick = 0;
    std::pair<int, int> pick_n{-1, -1};
    for (std::size_t i = 0; i < rest.size(); ++i) {
      const VarId v = rest[i];
      std::pair<int, int> n{0, 0};
      for (const Factor* f : zeroed) {
        if (!f->contains(v)) continue;
        bool done = true;
        for (VarId u : f->scope)
          if (u != v && !placed[u]) done = false;
        (done ? n.first : n.second) += 1;
      }
      const VarId b = rest[pick];
      if (n > pick_n || (n == pick_n && (score[v] > score[b] || (score[v] == score[b] && v < b)))) {
        pick = i;
        pick_n = n;
      }
    }
    placed[rest[pick]] = true;
    out.push_back(rest[pick]);
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  block = std::move(out);
}

// A variable's score is the skew of its own evidence-conditioned CPT.
std::vector<double> variable_skews(const InfluenceDiagram& d, const std::vector<Factor>& probs) {
  std::vector<double> score(d.variables.size(), 0.0);
  for (const auto& f : probs)
    if (f.child >= 0) score[f.child] = factor_skew(f);
  return score;
}

// Max of `f` over the scope variables placed after level `k`; indexed like `f`
// restricted to the rest.  Zero entries mark partial assignments with no
// positive completion.
Factor max_completion(const Factor& f, const std::vector<int>& level_of, int k) {
  std::vector<VarId> keep;
  std::vector<int> card;
  for (std::size_t i = 0; i < f.scope.size(); ++i)
    if (level_of[f.scope[i]] <= k) {
      keep.push_back(f.scope[i]);
      card.push_back(f.card[i]);
    }
  std::size_t size = 1;
  for (int c : card) size *= static_cast<std::size_t>(c);
  Factor g(keep, card, std::vector<double>(size, 0.0));
  std::vector<int> idx(f.scope.size(), 0);
  for (std::size_t e = 0; e < f.table.size(); ++e) {
    std::size_t off = 0;
    for (std::size_t i = 0, j = 0; i < f.scope.size(); ++i)
      if (level_of[f.scope[i]] <= k) {
        off = off * static_cast<std::size_t>(card[j]) + static_cast<std::size_t>(idx[i]);
        ++j;
      }
    g.table[off] = std::max(g.table[off], f.table[e]);
    for (int i = static_cast<int>(f.scope.size()) - 1; i >= 0; --i) {
      if (++idx[i] < f.card[i]) break;
      idx[i] = 0;
    }
  }
  return g;
}

// Per level: completion maxima of the factors that mention the level's
// variable but are completed further down.
std::vector<std::vector<Factor>> support_guards(const std::vector<Factor>& probs, const std::vector<VarId>& order,
                                                const std::vector<int>& level_of) {
  std::vector<std::vector<Factor>> guards(order.size());
  for (const auto& f : probs) {
    int top = -1;
    for (VarId v : f.scope) top = std::max(top, level_of[v]);
    for (VarId v : f.scope) {
      const int k = level_of[v];
      if (k < 0 || k >= top) continue;
      Factor g = max_completion(f, level_of, k);
      if (std::find(g.table.begin(), g.table.end(), 0.0) != g.table.end()) guards[k].push_back(std::move(g));
    }
  }
  return guards;
}

// Open-addressing map from context keys to node ids.
class NodeCache {
 public:
  int find(std::uint64_t key) const {
    if (slots_.empty()) return -1;
    for (std::size_t i = hash(key);; i = (i + 1) & mask_) {
      if (slots_[i].second < 0) return -1;
      if (slots_[i].first == key) return slots_[i].second;
    }
  }
  void insert(std::uint64_t key, int id) {
    if (2 * (used_ + 1) > slots_.size()) grow();
    std::size_t i = hash(key);
    while (slots_[i].second >= 0) i = (i + 1) & mask_;
    slots_[i] = {key, id};
    ++used_;
  }

 private:
  std::size_t hash(std::uint64_t k) const {
    k ^= k >> 33;
    k *= 0xff51afd7ed558ccdULL;
    k ^= k >> 33;
    return static_cast<std::size_t>(k) & mask_;
  }
  void grow() {
    std::vector<std::pair<std::uint64_t, int>> old(std::max<std::size_t>(16, 2 * slots_.size()), {0, -1});
    old.swap(slots_);
    mask_ = slots_.size() - 1;
    used_ = 0;
    for (const auto& [k, id] : old)
      if (id >= 0) insert(k, id);
  }
  std::vector<std::pair<std::uint64_t, int>> slots_;
  std::size_t mask_ = 0;
  std::size_t used_ = 0;
};

bool supported(const std::vector<Factor>& guards, const std::vector<int>& assignment) {
  for (const auto& g : guards)
    if (g.at(assignment) <= 0.0) return false;
  return true;
}

}  // namespace

struct EvaluationTree::Impl {
  struct Level {
    VarId var = -1;
    bool decision = false;
    int card = 1;
    std::vector<int> probs_here;
    std::vector<int> utils_here;
    std::vector<Factor> guards;
    std::vector<VarId> ctx;
    std::vector<int> ctx_card;
    double lo = 0.0, hi = 0.0;  // value range of an unexplored subtree at this level
    bool cacheable = true;
  };

  struct Node {
    int level = 0;
    bool visited = false;
    bool expanded = false;
    bool dirty = false;
    std::uint32_t stamp = 0;
    bool result = false;
    int edges = -1;    // offset into child_pool / w_pool / u_pool once expanded
    int parents = -1;  // head of the parent link list
    double mlo = 0.0, mhi = 1.0, vlo = 0.0, vhi = 0.0, best = 1.0, cov = 0.0;
  };

  InfluenceDiagram diagram;
  Sign sign;
  TreeOptions options;
  std::vector<Factor> probs, utils;
  std::vector<Level> levels;
  std::vector<double> skews;
  std::vector<VarId> order;
  std::vector<Node> nodes;
  std::vector<int> child_pool;
  std::vector<double> w_pool, u_pool;
  std::vector<std::pair<int, int>> links;  // (parent, next)
  std::vector<NodeCache> cache;
  std::vector<std::vector<int>> dirty;
  std::vector<int> scratch;  // values along the current descent
  std::uint32_t stamp = 0;
  int steps = 0;
  std::uint64_t units = 0;
  int root = 0;
  int actions = 0;

  // Per-step bookkeeping.
  std::vector<std::pair<VarId, int>> path;
  std::vector<std::pair<VarId, int>> first_leaf;
  double path_mass = 1.0;
  double first_mass = 0.0;
  bool have_leaf = false;
  std::uint64_t step_units = 0;

  Impl(const InfluenceDiagram& d, const Evidence& evidence, TreeOptions opts)
      : diagram(d), sign(d.sign), options(opts) {
    check_evidence(d, evidence);
    const TemporalBlocks tb = temporal_blocks(d, evidence);
    const auto rel = relevant_variables(d, evidence, tb.free_decisions, true);
    for (const auto& f : d.cpts)
      if (rel[f.child]) probs.push_back(apply_evidence(f, evidence));
    for (const auto& u : d.utilities) utils.push_back(apply_evidence(u, evidence));
    skews = variable_skews(d, probs);

    std::vector<bool> placed(d.variables.size(), false);
    for (const auto& [v, x] : evidence) placed[v] = true;
    auto filtered = [&](const std::vector<VarId>& vs) {
      std::vector<VarId> out;
      for (VarId v : vs)
        if (rel[v]) out.push_back(v);
      order_block(out, placed, probs, skews);
      return out;
    };
    for (std::size_t k = 0; k < tb.free_decisions.size(); ++k) {
      const VarId dv = tb.free_decisions[k];
      if (k > 0) {
        for (VarId v : filtered(tb.observed[k])) order.push_back(v);
        if (!rel[dv]) continue;
      }
      order.push_back(dv);
      placed[dv] = true;
    }
    for (VarId v : filtered(tb.unobserved)) order.push_back(v);
    actions = d.variables[tb.free_decisions.front()].size();
    build_levels();
    scratch.assign(d.variables.size(), 0);
    nodes.reserve(1024);
    nodes.push_back(Node{});
    root = 0;
    reset_defaults(root);
  }

  void build_levels() {
    const int L = static_cast<int>(order.size());
    std::vector<int> level_of(diagram.variables.size(), -1);
    for (int k = 0; k < L; ++k) level_of[order[k]] = k;
    levels.resize(L);
    for (int k = 0; k < L; ++k) {
      levels[k].var = order[k];
      levels[k].decision = diagram.is_decision(order[k]);
      levels[k].card = diagram.variables[order[k]].size();
    }
    std::vector<std::vector<bool>> in_ctx(L, std::vector<bool>(diagram.variables.size(), false));
    std::vector<double> ulo(L + 1, 0.0), uhi(L + 1, 0.0);
    auto place = [&](const Factor& f, bool is_util, int index) {
      int top = 0;
      for (VarId v : f.scope) top = std::max(top, level_of[v]);
      (is_util ? levels[top].utils_here : levels[top].probs_here).push_back(index);
      for (VarId v : f.scope)
        for (int k = level_of[v] + 1; k <= top; ++k) in_ctx[k][v] = true;
      if (is_util) {
        ulo[top] += *std::min_element(f.table.begin(), f.table.end());
        uhi[top] += *std::max_element(f.table.begin(), f.table.end());
      }
    };
    for (std::size_t i = 0; i < probs.size(); ++i) place(probs[i], false, static_cast<int>(i));
    for (std::size_t i = 0; i < utils.size(); ++i) place(utils[i], true, static_cast<int>(i));
    auto guards = support_guards(probs, order, level_of);
    for (int k = 0; k < L; ++k) levels[k].guards = std::move(guards[k]);
    for (int k = L - 1; k >= 0; --k) {
      ulo[k] += ulo[k + 1];
      uhi[k] += uhi[k + 1];
    }
    cache.resize(L + 1);
    dirty.resize(L + 1);
    for (int k = 0; k < L; ++k) {
      auto& lv = levels[k];
      lv.lo = std::min(0.0, ulo[k]);
      lv.hi = std::max(0.0, uhi[k]);
      double radix = 1.0;
      for (int j = 0; j < k; ++j)
        if (in_ctx[k][order[j]]) {
          lv.ctx.push_back(order[j]);
          lv.ctx_card.push_back(diagram.variables[order[j]].size());
          radix *= lv.ctx_card.back();
        }
      lv.cacheable = options.use_cache && radix < 9.0e18;
    }
  }

  int L() const { return static_cast<int>(levels.size()); }

  void reset_defaults(int n) {
    Node& node = nodes[n];
    if (node.level >= L()) {
      node.mlo = node.mhi = 1.0;
      node.vlo = node.vhi = 0.0;
      node.best = 1.0;
      node.cov = 0.0;
      return;
    }
    node.mlo = 0.0;
    node.mhi = 1.0;
    node.vlo = levels[node.level].lo;
    node.vhi = levels[node.level].hi;
    node.best = 1.0;
    node.cov = 0.0;
  }

  int new_node(int level) {
    if (nodes.size() >= options.max_nodes) throw CapacityError("evaluation tree node limit exceeded");
    Node n;
    n.level = level;
    nodes.push_back(n);
    const int id = static_cast<int>(nodes.size()) - 1;
    reset_defaults(id);
    return id;
  }

  void expand(int n) {
    const int k = nodes[n].level;
    const Level& lv = levels[k];
    const int edges = static_cast<int>(child_pool.size());
    child_pool.resize(child_pool.size() + lv.card, -1);
    w_pool.resize(w_pool.size() + lv.card, 0.0);
    u_pool.resize(u_pool.size() + lv.card, 0.0);
    const bool last = k + 1 == L();
    for (int x = 0; x < lv.card; ++x) {
      scratch[lv.var] = x;
      double wx = 1.0;
      for (int f : lv.probs_here) wx *= probs[f].at(scratch);
      if (wx > 0.0 && !supported(lv.guards, scratch)) wx = 0.0;
      double ux = 0.0;
      for (int f : lv.utils_here) ux += utils[f].at(scratch);
      w_pool[edges + x] = wx;
      u_pool[edges + x] = ux;
      if (wx <= 0.0) continue;
      int c;
      if (last) {
        c = new_node(k + 1);
      } else {
        const Level& next = levels[k + 1];
        std::uint64_t key = 0;
        for (std::size_t i = 0; i < next.ctx.size(); ++i)
          key = key * static_cast<std::uint64_t>(next.ctx_card[i]) + static_cast<std::uint64_t>(scratch[next.ctx[i]]);
        c = next.cacheable ? cache[k + 1].find(key) : -1;
        if (c < 0) {
          c = new_node(k + 1);
          if (next.cacheable) cache[k + 1].insert(key, c);
        }
      }
      child_pool[edges + x] = c;
      links.emplace_back(n, nodes[c].parents);
      nodes[c].parents = static_cast<int>(links.size()) - 1;
    }
    nodes[n].edges = edges;
    nodes[n].expanded = true;
    ++step_units;
  }

  int child(int n, int x) const { return child_pool[nodes[n].edges + x]; }
  double weight(int n, int x) const { return w_pool[nodes[n].edges + x]; }

  // Interval of one child's contribution w * (V + u * M).
  void contribution(const Node& parent, int x, double& lo, double& hi, double& mlo, double& mhi,
                    double& best, double& cov) const {
    const Level& lv = levels[parent.level];
    const double w = w_pool[parent.edges + x];
    const int c = child_pool[parent.edges + x];
    if (c < 0) {
      lo = hi = mlo = mhi = best = cov = 0.0;
      return;
    }
    const Node& ch = nodes[c];
    if (!ch.visited) {
      lo = w * lv.lo;
      hi = w * lv.hi;
      mlo = 0.0;
      mhi = w;
      best = w;
      cov = 0.0;
      return;
    }
    const double ux = u_pool[parent.edges + x];
    double a = ch.vlo + (ux >= 0.0 ? ux * ch.mlo : ux * ch.mhi);
    double b = ch.vhi + (ux >= 0.0 ? ux * ch.mhi : ux * ch.mlo);
    a = std::max(a, lv.lo);
    b = std::min(b, lv.hi);
    lo = w * a;
    hi = w * b;
    mlo = w * ch.mlo;
    mhi = w * ch.mhi;
    best = w * ch.best;
    cov = w * ch.cov;
  }

  // Returns true when any statistic changed.
  bool recompute(int n) {
    Node& node = nodes[n];
    if (node.level >= L() || !node.expanded) return false;
    const Level& lv = levels[node.level];
    double vlo, vhi, mlo, mhi, best = 0.0, cov;
    if (!lv.decision) {
      vlo = vhi = mlo = mhi = cov = 0.0;
      for (int x = 0; x < lv.card; ++x) {
        double a, b, c, d, e, f;
        contribution(node, x, a, b, c, d, e, f);
        vlo += a;
        vhi += b;
        mlo += c;
        mhi += d;
        best = std::max(best, e);
        cov += f;
      }
    } else {
      const bool maximize = sign == Sign::Maximize;
      vlo = vhi = 0.0;
      mlo = 0.0;
      mhi = std::numeric_limits<double>::infinity();
      cov = std::numeric_limits<double>::infinity();
      for (int x = 0; x < lv.card; ++x) {
        double a, b, c, d, e, f;
        contribution(node, x, a, b, c, d, e, f);
        if (x == 0) {
          vlo = a;
          vhi = b;
        } else if (maximize) {
          vlo = std::max(vlo, a);
          vhi = std::max(vhi, b);
        } else {
          vlo = std::min(vlo, a);
          vhi = std::min(vhi, b);
        }
        mlo = std::max(mlo, c);
        mhi = std::min(mhi, d);
        best = std::max(best, e);
        cov = std::min(cov, f);
      }
      mhi = std::max(mhi, mlo);
    }
    mhi = std::min(mhi, 1.0);
    vlo = std::max(vlo, lv.lo);
    vhi = std::min(vhi, lv.hi);
    // Bounds only tighten.
    vlo = std::max(vlo, node.vlo);
    vhi = std::min(vhi, node.vhi);
    if (vlo > vhi) vlo = vhi = 0.5 * (vlo + vhi);
    mlo = std::max(mlo, node.mlo);
    mhi = std::min(mhi, node.mhi);
    if (mlo > mhi) mlo = mhi = 0.5 * (mlo + mhi);
    cov = std::max(cov, node.cov);
    const bool changed = vlo != node.vlo || vhi != node.vhi || mlo != node.mlo || mhi != node.mhi ||
                         best != node.best || cov != node.cov;
    node.vlo = vlo;
    node.vhi = vhi;
    node.mlo = mlo;
    node.mhi = mhi;
    node.best = best;
    node.cov = cov;
    return changed;
  }

  // Parents already finished this step are skipped: their bounds stay sound,
  // only looser, and catch up the next time a child of theirs changes.
  void mark_parents(int n) {
    for (int l = nodes[n].parents; l >= 0; l = links[l].second) {
      Node& pn = nodes[links[l].first];
      const int p = links[l].first;
      if (!pn.dirty && pn.stamp != stamp) {
        pn.dirty = true;
        dirty[pn.level].push_back(p);
      }
    }
  }

  bool absorb(int n) {
    if (nodes[n].stamp == stamp) return nodes[n].result;
    nodes[n].stamp = stamp;
    if (nodes[n].level >= L()) {
      Node& leaf = nodes[n];
      leaf.visited = true;
      leaf.best = 0.0;
      leaf.cov = 1.0;
      leaf.result = true;
      if (!have_leaf) {
        have_leaf = true;
        first_leaf = path;
        first_mass = path_mass;
      }
      mark_parents(n);
      return true;
    }
    if (!nodes[n].expanded) expand(n);
    nodes[n].visited = true;
    const Level& lv = levels[nodes[n].level];
    bool got = false;
    if (lv.decision) {
      for (int x = 0; x < lv.card; ++x) {
        const int c = child(n, x);
        if (c < 0 || (nodes[c].visited && nodes[c].best <= 0.0)) continue;
        scratch[lv.var] = x;
        path.emplace_back(lv.var, x);
        const double saved = path_mass;
        path_mass *= weight(n, x);
        got = absorb(c) || got;
        path_mass = saved;
        path.pop_back();
      }
    } else {
      for (;;) {
        int pick = -1;
        double pick_val = 0.0;
        for (int x = 0; x < lv.card; ++x) {
          const int c = child(n, x);
          if (c < 0) continue;
          const double val = weight(n, x) * (nodes[c].visited ? nodes[c].best : 1.0);
          if (val > pick_val) {
            pick_val = val;
            pick = x;
          }
        }
        if (pick < 0) break;
        const int c = child(n, pick);
        scratch[lv.var] = pick;
        path.emplace_back(lv.var, pick);
        const double saved = path_mass;
        path_mass *= weight(n, pick);
        const bool r = absorb(c);
        path_mass = saved;
        path.pop_back();
        if (r) {
          got = true;
          break;
        }
        recompute(n);
      }
    }
    recompute(n);
    nodes[n].result = got;
    mark_parents(n);
    return got;
  }

  void propagate() {
    for (int k = L() - 1; k >= 0; --k) {
      auto& bucket = dirty[k];
      for (std::size_t i = 0; i < bucket.size(); ++i) {
        const int n = bucket[i];
        nodes[n].dirty = false;
        if (recompute(n)) {
          for (int l = nodes[n].parents; l >= 0; l = links[l].second) {
            const int p = links[l].first;
            Node& pn = nodes[p];
            if (!pn.dirty) {
              pn.dirty = true;
              dirty[pn.level].push_back(p);
            }
          }
        }
      }
      bucket.clear();
    }
  }

  bool is_exhausted() const { return nodes[root].visited && nodes[root].best <= 0.0; }

  ActionBounds action_bounds() const {
    ActionBounds b;
    b.lower.assign(actions, levels[0].lo);
    b.upper.assign(actions, levels[0].hi);
    b.covered.assign(actions, 0.0);
    const Node& r = nodes[root];
    if (!r.expanded) return b;
    for (int a = 0; a < actions; ++a) {
      double lo, hi, mlo, mhi, best, cov;
      contribution(r, a, lo, hi, mlo, mhi, best, cov);
      b.lower[a] = lo;
      b.upper[a] = hi;
      b.covered[a] = cov;
    }
    return b;
  }

  StepReport step() {
    StepReport rep;
    if (is_exhausted()) {
      rep.exhausted = true;
      rep.step = steps;
      rep.bounds = action_bounds();
      rep.mass_added.assign(actions, 0.0);
      return rep;
    }
    const ActionBounds before = action_bounds();
    ++stamp;
    path.clear();
    path_mass = 1.0;
    have_leaf = false;
    first_leaf.clear();
    first_mass = 0.0;
    step_units = 1;
    absorb(root);
    propagate();
    ++steps;
    units += step_units;
    rep.step = steps;
    rep.units = step_units;
    rep.instantiation = first_leaf;
    rep.mass = first_mass;
    rep.bounds = action_bounds();
    rep.mass_added.resize(actions);
    for (int a = 0; a < actions; ++a) rep.mass_added[a] = rep.bounds.covered[a] - before.covered[a];
    return rep;
  }
};

EvaluationTree::EvaluationTree(const InfluenceDiagram& diagram, const Evidence& evidence, TreeOptions options)
    : impl_(std::make_unique<Impl>(diagram, evidence, options)) {}
EvaluationTree::~EvaluationTree() = default;
EvaluationTree::EvaluationTree(EvaluationTree&&) noexcept = default;
EvaluationTree& EvaluationTree::operator=(EvaluationTree&&) noexcept = default;

StepReport EvaluationTree::step() { return impl_->step(); }
bool EvaluationTree::exhausted() const { return impl_->is_exhausted(); }
ActionBounds EvaluationTree::bounds() const { return impl_->action_bounds(); }
int EvaluationTree::steps_taken() const { return impl_->steps; }
std::uint64_t EvaluationTree::units() const { return impl_->units; }
std::size_t EvaluationTree::node_count() const { return impl_->nodes.size(); }
Sign EvaluationTree::sign() const { return impl_->sign; }
VarId EvaluationTree::first_decision() const { return impl_->order.front(); }
const std::vector<VarId>& EvaluationTree::level_order() const { return impl_->order; }
double EvaluationTree::skew(VarId var) const { return impl_->skews.at(var); }
const InfluenceDiagram& EvaluationTree::diagram() const { return impl_->diagram; }

int select_action(const ActionBounds& b, Sign sign) {
  int best = 0;
  for (int a = 1; a < static_cast<int>(b.lower.size()); ++a) {
    if (sign == Sign::Maximize ? b.lower[a] > b.lower[best] : b.lower[a] < b.lower[best]) best = a;
  }
  return best;
}

bool provably_best(const ActionBounds& b, Sign sign, int leader) {
  for (int a = 0; a < static_cast<int>(b.lower.size()); ++a) {
    if (a == leader) continue;
    if (sign == Sign::Maximize ? !(b.upper[a] < b.lower[leader]) : !(b.lower[a] > b.upper[leader]))
      return false;
  }
  return true;
}

DecideResult decide(EvaluationTree& tree, int budget, std::ostream* trace) {
  if (budget < 1) throw ConfigError("step budget must be at least 1");
  DecideResult r;
  const Sign sign = tree.sign();
  if (trace) write_trace_header(*trace, tree.bounds().lower.size());
  for (int i = 0; i < budget; ++i) {
    StepReport rep = tree.step();
    if (rep.exhausted) break;
    ++r.steps_used;
    r.units += rep.units;
    if (trace) write_trace_line(*trace, rep, tree.diagram());
    if (tree.exhausted()) break;
    const ActionBounds b = tree.bounds();
    if (provably_best(b, sign, select_action(b, sign))) break;
  }
  r.bounds = tree.bounds();
  r.action = select_action(r.bounds, sign);
  r.exhausted = tree.exhausted();
  r.converged = r.exhausted || provably_best(r.bounds, sign, r.action);
  r.score = r.bounds.lower[r.action];
  if (r.exhausted && r.bounds.covered[r.action] > 0.0) r.score /= r.bounds.covered[r.action];
  if (r.units == 0) r.units = 1;
  return r;
}

void write_trace_header(std::ostream& os, std::size_t actions) {
  os << "step\tunits\tinstantiation\tmass";
  for (std::size_t a = 0; a < actions; ++a) os << "\tlower" << a << "\tupper" << a;
  os << '\n';
}

void write_trace_line(std::ostream& os, const StepReport& rep, const InfluenceDiagram& d) {
  os << rep.step << '\t' << rep.units << '\t';
  for (std::size_t i = 0; i < rep.instantiation.size(); ++i) {
    if (i) os << ',';
    const auto& [v, x] = rep.instantiation[i];
    os << d.variables[v].name << '=' << d.variables[v].domain[x];
  }
  os << '\t' << std::setprecision(17) << rep.mass;
  for (std::size_t a = 0; a < rep.bounds.lower.size(); ++a)
    os << '\t' << rep.bounds.lower[a] << '\t' << rep.bounds.upper[a];
  os << '\n';
}

PartialMarginals partial_marginals(const InfluenceDiagram& d, const Evidence& evidence,
                                   const std::vector<VarId>& targets, int budget) {
  check_evidence(d, evidence);
  PartialMarginals out;
  out.marginals.resize(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t)
    out.marginals[t].assign(d.variables[targets[t]].size(), 0.0);

  const auto rel = relevant_variables(d, evidence, targets, false);
  std::vector<Factor> probs;
  for (const auto& f : d.cpts)
    if (rel[f.child]) probs.push_back(apply_evidence(f, evidence));
  const auto skews = variable_skews(d, probs);
  std::vector<VarId> order;
  for (const auto& v : d.variables)
    if (rel[v.id] && !evidence.count(v.id)) {
      if (v.kind == VarKind::Decision) throw ScopeError("marginals depend on free decision " + v.name);
      order.push_back(v.id);
    }
  std::vector<bool> placed(d.variables.size(), false);
  for (const auto& [v, x] : evidence) placed[v] = true;
  order_block(order, placed, probs, skews);
  const int L = static_cast<int>(order.size());
  std::vector<int> level_of(d.variables.size(), -1);
  for (int k = 0; k < L; ++k) level_of[order[k]] = k;
  std::vector<std::vector<int>> here(std::max(L, 1));
  const auto guards = support_guards(probs, order, level_of);
  double constant = 1.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i].scope.empty()) {
      constant *= probs[i].table.front();
      continue;
    }
    int top = 0;
    for (VarId v : probs[i].scope) top = std::max(top, level_of[v]);
    here[top].push_back(static_cast<int>(i));
  }

  struct Entry {
    double mass;
    std::uint64_t seq;
    std::vector<int> values;  // prefix over `order`
  };
  auto cmp = [](const Entry& a, const Entry& b) {
    if (a.mass != b.mass) return a.mass < b.mass;
    return a.seq > b.seq;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(cmp)> frontier(cmp);
  std::uint64_t seq = 0;
  std::vector<int> assignment(d.variables.size(), 0);
  for (const auto& [v, x] : evidence) assignment[v] = x;
  if (constant > 0.0) frontier.push({constant, seq++, {}});
  std::vector<double> target_mass(targets.size(), 0.0);

  while (out.steps < budget && !frontier.empty()) {
    Entry e = frontier.top();
    frontier.pop();
    if (static_cast<int>(e.values.size()) == L) {
      for (int k = 0; k < L; ++k) assignment[order[k]] = e.values[k];
      for (std::size_t t = 0; t < targets.size(); ++t) out.marginals[t][assignment[targets[t]]] += e.mass;
      out.covered += e.mass;
      ++out.steps;
      ++out.units;
      continue;
    }
    ++out.units;
    const int k = static_cast<int>(e.values.size());
    for (int j = 0; j < k; ++j) assignment[order[j]] = e.values[j];
    const VarId v = order[k];
    for (int x = 0; x < d.variables[v].size(); ++x) {
      assignment[v] = x;
      double w = e.mass;
      for (int f : here[k]) w *= probs[f].at(assignment);
      if (w <= 0.0 || !supported(guards[k], assignment)) continue;
      Entry child{w, seq++, e.values};
      child.values.push_back(x);
      frontier.push(std::move(child));
    }
  }
  out.exhausted = frontier.empty();
  for (auto& m : out.marginals) {
    double z = 0.0;
    for (double x : m) z += x;
    if (z > 0.0)
      for (double& x : m) x /= z;
    else
      std::fill(m.begin(), m.end(), 1.0 / static_cast<double>(m.size()));
  }
  // Evidenced targets are certain.
  for (std::size_t t = 0; t < targets.size(); ++t)
    if (auto it = evidence.find(targets[t]); it != evidence.end()) {
      std::fill(out.marginals[t].begin(), out.marginals[t].end(), 0.0);
      out.marginals[t][it->second] = 1.0;
    }
  return out;
}

}  // namespace rtd
