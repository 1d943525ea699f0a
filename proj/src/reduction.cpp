// Fully dynamic MSF from decremental pieces: per-level instance pairs with
// periodic merges (in place, or deamortized against a frozen forest mirror
// with log replay), a delta rotation lifting budgeted structures, and the
// degree-3 bridge feeding ladder instances to a bounded backend.

#include "dynmsf/reduction.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>

#include <nlohmann/json.hpp>

namespace dynmsf {

std::pair<uint64_t, uint64_t> k_interval_of(uint64_t j, uint64_t k) {
  if (k == 0) throw ConfigError("k_interval_of: k must be positive");
  uint64_t lo = j / k * k;
  return {lo, lo + k};
}

bool instance_edge_lt(const InstanceEdge& a, size_t ia, const InstanceEdge& b, size_t ib) {
  int c = key_cmp(a.key, b.key);
  if (c != 0) return c < 0;
  if (a.is_super() != b.is_super()) return a.is_super();
  return ia < ib;
}

namespace {

using Adj = std::vector<std::vector<std::pair<VertexId, EdgeId>>>;

// Resumable instance extraction. Sources (an explicit edge list and up to two
// instances scanned slot by slot) are compressed against the forest adjacency
// `fadj`: endpoints of collected edges are marked, each tree's minimal
// subtree spanning its marks survives, and unmarked degree-2 chains collapse
// into contraction edges. Every step() is one unit task; per-task internal
// work is bounded by one tree, which desk-scale callers accept.
struct Extract {
  const Graph* g = nullptr;
  const Adj* fadj = nullptr;
  std::vector<EdgeId> explicit_s;
  const DecrementalMsf* lazy[2] = {nullptr, nullptr};

  InstanceGraph out;
  bool done = false;

  size_t explicit_pos = 0;
  size_t lazy_which = 0, lazy_pos = 0;
  std::set<EdgeId> seen;
  std::vector<EdgeId> singles;
  std::vector<VertexId> marked_list;
  std::set<VertexId> marked;
  size_t mark_pos = 0;
  std::map<VertexId, uint32_t> comp_of;
  std::vector<std::vector<VertexId>> comps;
  size_t comp_pos = 0;
  std::set<VertexId> kept;
  std::map<VertexId, size_t> deg;
  std::vector<std::tuple<VertexId, VertexId, EdgeId>> starts;
  size_t start_pos = 0;
  std::set<EdgeId> consumed;
  size_t single_pos = 0;

  size_t remaining() const {
    size_t r = 2;
    r += explicit_s.size() - explicit_pos;
    for (size_t w = lazy_which; w < 2; ++w) {
      if (!lazy[w]) continue;
      size_t sc = lazy[w]->slot_count();
      size_t at = w == lazy_which ? lazy_pos : 0;
      r += sc > at ? sc - at : 0;
    }
    r += marked_list.size() - mark_pos;
    r += comps.size() - comp_pos;
    r += starts.size() - start_pos;
    r += singles.size() - single_pos;
    return r;
  }

  void take(EdgeId ge) {
    if (ge >= g->edge_slots()) throw ContractError("instance source produced an unknown edge id");
    if (!seen.insert(ge).second) return;
    singles.push_back(ge);
    const Edge& e = g->edge(ge);
    for (VertexId x : {e.u, e.v})
      if (marked.insert(x).second) marked_list.push_back(x);
  }

  bool node(VertexId v) const { return marked.count(v) != 0 || deg.at(v) >= 3; }

  void locate(VertexId v) {
    if (comp_of.count(v)) return;
    uint32_t ci = static_cast<uint32_t>(comps.size());
    comps.emplace_back();
    std::vector<VertexId> stack{v};
    comp_of[v] = ci;
    while (!stack.empty()) {
      VertexId x = stack.back();
      stack.pop_back();
      comps[ci].push_back(x);
      for (const auto& [nb, id] : (*fadj)[x]) {
        (void)id;
        if (!comp_of.count(nb)) {
          comp_of[nb] = ci;
          stack.push_back(nb);
        }
      }
    }
  }

  void prune(const std::vector<VertexId>& comp) {
    for (VertexId v : comp) {
      kept.insert(v);
      deg[v] = (*fadj)[v].size();
    }
    std::vector<VertexId> strip;
    for (VertexId v : comp)
      if (deg[v] <= 1 && !marked.count(v)) strip.push_back(v);
    while (!strip.empty()) {
      VertexId v = strip.back();
      strip.pop_back();
      if (!kept.count(v)) continue;
      kept.erase(v);
      for (const auto& [nb, id] : (*fadj)[v]) {
        (void)id;
        if (kept.count(nb) && --deg[nb] <= 1 && !marked.count(nb)) strip.push_back(nb);
      }
    }
    for (VertexId v : comp) {
      if (!kept.count(v) || !node(v)) continue;
      for (const auto& [nb, id] : (*fadj)[v])
        if (kept.count(nb)) starts.emplace_back(v, nb, id);
    }
  }

  void walk(const std::tuple<VertexId, VertexId, EdgeId>& st) {
    auto [v0, n0, e0] = st;
    if (!consumed.insert(e0).second) return;
    std::vector<EdgeId> members{e0};
    VertexId cur = n0;
    EdgeId in = e0;
    while (!node(cur)) {
      EdgeId nxt = kNoEdge;
      VertexId nv = 0;
      for (const auto& [nb, id] : (*fadj)[cur])
        if (id != in && kept.count(nb)) {
          nxt = id;
          nv = nb;
          break;
        }
      if (nxt == kNoEdge) break;
      consumed.insert(nxt);
      members.push_back(nxt);
      in = nxt;
      cur = nv;
    }
    EdgeId mx = members[0];
    for (EdgeId m : members)
      if (edge_order_lt(g->edge(mx), g->edge(m))) mx = m;
    InstanceEdge ie;
    ie.u = v0;
    ie.v = cur;
    ie.key = key_of(g->edge(mx));
    ie.gid = kNoEdge;
    ie.members = std::move(members);
    out.edges.push_back(std::move(ie));
  }

  void single(EdgeId ge) {
    const Edge& e = g->edge(ge);
    InstanceEdge ie;
    ie.u = e.u;
    ie.v = e.v;
    ie.key = key_of(e);
    ie.gid = ge;
    out.edges.push_back(std::move(ie));
  }

  void finalize() {
    std::vector<size_t> idx(out.edges.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      return instance_edge_lt(out.edges[a], a, out.edges[b], b);
    });
    std::vector<InstanceEdge> sorted;
    sorted.reserve(idx.size());
    size_t sup = 0;
    for (size_t i : idx) {
      if (out.edges[i].is_super()) ++sup;
      sorted.push_back(std::move(out.edges[i]));
    }
    out.edges = std::move(sorted);
    out.super_count = sup;
  }

  // One unit task; true once the instance is complete.
  bool step() {
    if (done) return true;
    if (explicit_pos < explicit_s.size()) {
      take(explicit_s[explicit_pos++]);
      return false;
    }
    while (lazy_which < 2) {
      const DecrementalMsf* src = lazy[lazy_which];
      if (!src || lazy_pos >= src->slot_count()) {
        ++lazy_which;
        lazy_pos = 0;
        continue;
      }
      if (auto ge = src->nontree_slot(lazy_pos++)) take(*ge);
      return false;
    }
    if (mark_pos < marked_list.size()) {
      locate(marked_list[mark_pos++]);
      return false;
    }
    if (comp_pos < comps.size()) {
      prune(comps[comp_pos++]);
      return false;
    }
    if (start_pos < starts.size()) {
      walk(starts[start_pos++]);
      return false;
    }
    if (single_pos < singles.size()) {
      single(singles[single_pos++]);
      return false;
    }
    finalize();
    done = true;
    return true;
  }
};

std::vector<uint32_t> where_hits(const std::vector<std::pair<EdgeId, uint32_t>>& where, EdgeId ge) {
  std::vector<uint32_t> out;
  auto it = std::lower_bound(where.begin(), where.end(), std::make_pair(ge, uint32_t{0}));
  for (; it != where.end() && it->first == ge; ++it) out.push_back(it->second);
  return out;
}

}  // namespace

InstanceGraph build_decremental_from(const Graph& g, const std::vector<EdgeId>& e1,
                                     const std::vector<EdgeId>& e2,
                                     const std::vector<EdgeId>& forest) {
  Adj fadj(g.vertex_count());
  for (EdgeId f : forest) {
    if (!g.has_edge(f)) throw NotPresentError("connecting forest edge not alive");
    const Edge& e = g.edge(f);
    fadj[e.u].push_back({e.v, f});
    fadj[e.v].push_back({e.u, f});
  }
  Extract ex;
  ex.g = &g;
  ex.fadj = &fadj;
  ex.explicit_s = e1;
  ex.explicit_s.insert(ex.explicit_s.end(), e2.begin(), e2.end());
  while (!ex.step()) {
  }
  return std::move(ex.out);
}

std::vector<EdgeId> DecrementalMsf::nontree_edges() const {
  std::vector<EdgeId> out;
  size_t k = slot_count();
  for (size_t s = 0; s < k; ++s)
    if (auto ge = nontree_slot(s)) out.push_back(*ge);
  return out;
}

RecomputeInstance::RecomputeInstance(InstanceGraph ig) : ig_(std::move(ig)) {
  size_t k = ig_.edges.size();
  dead_.assign(k, 0);
  in_forest_.assign(k, 0);
  order_.resize(k);
  for (size_t i = 0; i < k; ++i) order_[i] = i;
  std::sort(order_.begin(), order_.end(), [&](size_t a, size_t b) {
    return instance_edge_lt(ig_.edges[a], a, ig_.edges[b], b);
  });
  for (size_t i = 0; i < k; ++i) {
    const InstanceEdge& e = ig_.edges[i];
    if (e.is_super()) {
      for (EdgeId m : e.members) where_.emplace_back(m, static_cast<uint32_t>(i));
    } else {
      where_.emplace_back(e.gid, static_cast<uint32_t>(i));
      ++live_singles_;
    }
  }
  std::sort(where_.begin(), where_.end());
  live_ = k;
  recompute();
}

void RecomputeInstance::recompute() {
  std::fill(in_forest_.begin(), in_forest_.end(), 0);
  std::map<VertexId, VertexId> vid;
  for (size_t s = 0; s < ig_.edges.size(); ++s) {
    if (dead_[s]) continue;
    for (VertexId x : {ig_.edges[s].u, ig_.edges[s].v})
      if (!vid.count(x)) {
        VertexId nid = static_cast<VertexId>(vid.size());
        vid[x] = nid;
      }
  }
  Dsu dsu(vid.size());
  for (size_t idx : order_) {
    if (dead_[idx]) continue;
    const InstanceEdge& e = ig_.edges[idx];
    if (dsu.unite(vid[e.u], vid[e.v])) in_forest_[idx] = 1;
  }
}

std::optional<EdgeId> RecomputeInstance::erase(EdgeId ge) {
  auto hs = where_hits(where_, ge);
  std::vector<uint8_t> before = in_forest_;
  bool touched = false, tree_hit = false;
  for (uint32_t s : hs) {
    if (dead_[s]) continue;
    touched = true;
    tree_hit = tree_hit || before[s] != 0;
    dead_[s] = 1;
    in_forest_[s] = 0;
    --live_;
    if (!ig_.edges[s].is_super()) --live_singles_;
  }
  if (!touched || !tree_hit) return std::nullopt;
  recompute();
  for (size_t i = 0; i < in_forest_.size(); ++i) {
    if (!in_forest_[i] || before[i] || dead_[i]) continue;
    if (ig_.edges[i].is_super()) throw ContractError("contraction promoted into an instance forest");
    return ig_.edges[i].gid;
  }
  return std::nullopt;
}

bool RecomputeInstance::contains(EdgeId ge) const {
  for (uint32_t s : where_hits(where_, ge))
    if (!dead_[s]) return true;
  return false;
}

bool RecomputeInstance::covers(EdgeId ge) const {
  for (uint32_t s : where_hits(where_, ge))
    if (!dead_[s] && !ig_.edges[s].is_super() && !in_forest_[s]) return true;
  return false;
}

std::optional<EdgeId> RecomputeInstance::nontree_slot(size_t slot) const {
  if (slot >= ig_.edges.size()) return std::nullopt;
  const InstanceEdge& e = ig_.edges[slot];
  if (dead_[slot] || e.is_super() || in_forest_[slot]) return std::nullopt;
  return e.gid;
}

bool RecomputeInstance::contractions_in_forest() const {
  for (size_t i = 0; i < ig_.edges.size(); ++i)
    if (!dead_[i] && ig_.edges[i].is_super() && !in_forest_[i]) return false;
  return true;
}

InstanceFactory recompute_factory() {
  return [](InstanceGraph ig) -> std::unique_ptr<DecrementalMsf> {
    return std::make_unique<RecomputeInstance>(std::move(ig));
  };
}

// ---------------------------------------------------------------------------
// MsfLadder

struct MsfLadder::Holder {
  std::unique_ptr<DecrementalMsf> inst;
  uint64_t born = 0;
  size_t level = 0;
  size_t birth_singles = 0;
};

struct MsfLadder::Mirror {
  Adj adj;  // forest adjacency as of the last unfreeze point
  std::deque<std::vector<std::tuple<bool, VertexId, VertexId, EdgeId>>> pending;
};

struct MsfLadder::BuildJob {
  bool active = false;
  bool machine_done = false;
  uint64_t start = 0, half_end = 0, end = 0;
  uint64_t replay_next = 0;
  size_t built_singles = 0;  // single count when the factory ran, pre-replay
  Extract ex;
  std::unique_ptr<DecrementalMsf> inst;
};

struct MsfLadder::Level {
  std::unique_ptr<Holder> d[2];  // serving pair
  std::unique_ptr<Holder> b[2];  // pair set aside as background build source
  std::deque<std::unique_ptr<Holder>> queue;
  Mirror mirror;
  BuildJob build;
};

MsfLadder::MsfLadder(size_t n, LadderMode mode, LadderConfig cfg)
    : g_(Graph::simple(n)), mode_(mode), cfg_(std::move(cfg)), levels_(0), forest_(n), fadj_(n) {
  if (cfg_.max_edges < 2) throw ConfigError("ladder needs max_edges >= 2");
  if (!cfg_.factory) cfg_.factory = recompute_factory();
  size_t lg = 0;
  while ((size_t{1} << lg) < cfg_.max_edges) ++lg;
  levels_ = lg + 1;
  level_.resize(levels_);
  for (auto& l : level_) {
    l = std::make_unique<Level>();
    l->mirror.adj.resize(n);
  }
}

MsfLadder::~MsfLadder() = default;

void MsfLadder::emit(const char* ev, size_t level, const std::string& extra) const {
  if (!cfg_.events) return;
  nlohmann::json o;
  o["ev"] = ev;
  o["j"] = j_;
  o["level"] = level;
  if (!extra.empty()) o["x"] = nlohmann::json::parse(extra);
  (*cfg_.events) << o.dump() << "\n";
}

void MsfLadder::record_forest_change(bool add, VertexId u, VertexId v, EdgeId id) {
  if (add) {
    fadj_[u].push_back({v, id});
    fadj_[v].push_back({u, id});
    ftree_.insert(std::lower_bound(ftree_.begin(), ftree_.end(), id), id);
  } else {
    auto strip = [&](VertexId x) {
      auto& lst = fadj_[x];
      for (size_t p = 0; p < lst.size(); ++p)
        if (lst[p].second == id) {
          lst.erase(lst.begin() + p);
          return;
        }
    };
    strip(u);
    strip(v);
    auto it = std::lower_bound(ftree_.begin(), ftree_.end(), id);
    if (it != ftree_.end() && *it == id) ftree_.erase(it);
  }
  cur_deltas_.emplace_back(add, u, v, id);
}

auto MsfLadder::live_holders() const -> std::vector<Holder*> {
  std::vector<Holder*> out;
  for (const auto& lp : level_) {
    for (const auto& s : lp->d)
      if (s) out.push_back(s.get());
    for (const auto& s : lp->b)
      if (s) out.push_back(s.get());
    for (const auto& q : lp->queue) out.push_back(q.get());
  }
  return out;
}

void MsfLadder::install(std::unique_ptr<Holder> h, size_t target, const char* origin) {
  h->level = target;
  Level& t = *level_[target];
  charge(1);
  const char* where;
  if (!t.d[0]) {
    t.d[0] = std::move(h);
    where = "slot0";
  } else if (!t.d[1]) {
    t.d[1] = std::move(h);
    where = "slot1";
  } else {
    t.queue.push_back(std::move(h));
    where = "queue";
  }
  emit("install", target, nlohmann::json{{"origin", origin}, {"where", where}}.dump());
}

void MsfLadder::drain_queues() {
  for (size_t i = 0; i < levels_; ++i) {
    Level& l = *level_[i];
    while (!l.queue.empty() && (!l.d[0] || !l.d[1])) {
      auto h = std::move(l.queue.front());
      l.queue.pop_front();
      charge(1);
      auto& slot = !l.d[0] ? l.d[0] : l.d[1];
      slot = std::move(h);
      emit("install", i, nlohmann::json{{"origin", "queue"}}.dump());
    }
  }
}

void MsfLadder::route_level0(const std::vector<EdgeId>& ids) {
  if (ids.empty()) return;
  Extract ex;
  ex.g = &g_;
  ex.fadj = &fadj_;
  ex.explicit_s = ids;
  uint64_t steps = 0;
  bool fin = false;
  while (!fin) {
    fin = ex.step();
    ++steps;
  }
  charge(steps);
  if (ex.out.edges.empty()) return;
  charge(ex.out.edges.size() + 1);
  auto h = std::make_unique<Holder>();
  h->inst = cfg_.factory(std::move(ex.out));
  h->born = j_;
  h->birth_singles = h->inst->live_single_count();
  install(std::move(h), 0, "fresh");
}

void MsfLadder::start_build(size_t i) {
  Level& l = *level_[i];
  if (!l.mirror.pending.empty()) throw ContractError("mirror backlog at interval start");
  uint64_t len = uint64_t{1} << (i + 1);
  l.build = BuildJob{};
  l.build.active = true;
  l.build.start = j_;
  l.build.half_end = j_ + len / 2;
  l.build.end = j_ + len;
  l.build.replay_next = j_;
  l.build.ex.g = &g_;
  l.build.ex.fadj = &l.mirror.adj;
  l.build.ex.lazy[0] = l.b[0] ? l.b[0]->inst.get() : nullptr;
  l.build.ex.lazy[1] = l.b[1] ? l.b[1]->inst.get() : nullptr;
  emit("background_start", i, "");
}

void MsfLadder::boundary(size_t i) {
  Level& l = *level_[i];
  if (l.build.active) {
    if (j_ != l.build.end || !l.build.machine_done || l.build.replay_next < l.build.end)
      throw ContractError("background schedule out of step");
    if (l.build.inst && l.build.inst->live_edge_count() > 0) {
      auto h = std::make_unique<Holder>();
      h->inst = std::move(l.build.inst);
      h->born = j_;
      h->birth_singles = l.build.built_singles;
      pending_installs_.emplace_back(std::move(h), std::min(i + 1, levels_ - 1));
    }
    l.build.inst.reset();
    l.build.active = false;
    for (int s = 0; s < 2; ++s)
      if (l.b[s]) {
        charge(1);
        emit("retire", i, nlohmann::json{{"born", l.b[s]->born}}.dump());
        l.b[s].reset();
      }
  }
  for (int s = 0; s < 2; ++s) {
    l.b[s] = std::move(l.d[s]);
    if (l.b[s]) {
      charge(1);
      emit("aside", i, nlohmann::json{{"born", l.b[s]->born}}.dump());
    }
  }
  start_build(i);
  charge(1);
}

void MsfLadder::advance_build(size_t i) {
  Level& l = *level_[i];
  BuildJob& b = l.build;
  if (!b.active || j_ >= b.end) return;
  if (j_ < b.half_end) {
    if (b.machine_done) return;
    uint64_t rem = b.half_end - j_;  // first-half updates left, this one included
    size_t est = b.ex.remaining();
    size_t budget = rem <= 1 ? ~size_t{0} : (est + rem - 1) / rem;
    uint64_t steps = 0;
    bool fin = false;
    while (!fin && steps < budget) {
      fin = b.ex.step();
      ++steps;
    }
    charge(steps);
    if (fin) {
      b.machine_done = true;
      if (!b.ex.out.edges.empty()) {
        charge(b.ex.out.edges.size() + 1);
        size_t edges = b.ex.out.edges.size();
        b.inst = cfg_.factory(std::move(b.ex.out));
        b.built_singles = b.inst->live_single_count();
        emit("background_built", i, nlohmann::json{{"edges", edges}}.dump());
      }
    }
  } else {
    for (int t = 0; t < 2 && b.replay_next < b.end; ++t) {
      uint64_t idx = b.replay_next++;
      const auto& entry = del_log_.at(idx);
      if (entry && b.inst && b.inst->contains(*entry)) {
        charge(1);
        if (auto r = b.inst->erase(*entry)) replay_reps_.push_back(*r);
      }
    }
  }
}

void MsfLadder::feed_mirrors() {
  for (size_t i = 0; i < levels_; ++i) {
    Level& l = *level_[i];
    Mirror& m = l.mirror;
    m.pending.push_back(cur_deltas_);
    bool frozen = l.build.active && j_ < l.build.half_end;
    if (frozen) continue;
    size_t groups = 2;
    while (groups-- > 0 && !m.pending.empty()) {
      auto grp = std::move(m.pending.front());
      m.pending.pop_front();
      for (const auto& [add, u, v, id] : grp) {
        charge(1);
        if (add) {
          m.adj[u].push_back({v, id});
          m.adj[v].push_back({u, id});
        } else {
          auto strip = [&](VertexId x) {
            auto& lst = m.adj[x];
            for (size_t p = 0; p < lst.size(); ++p)
              if (lst[p].second == id) {
                lst.erase(lst.begin() + p);
                break;
              }
          };
          strip(u);
          strip(v);
        }
      }
    }
  }
}

// Interval boundaries run before the update's own mutations: a build's aside
// pair must hold only content no newer than its frozen mirror, so anything the
// current update routes lands in the serving pair for the *next* interval.
void MsfLadder::begin_update() {
  if (mode_ != LadderMode::worst_case) return;
  pending_installs_.clear();
  for (size_t i = 0; i < levels_; ++i) {
    uint64_t len = uint64_t{1} << (i + 1);
    if (j_ % len == 0) boundary(i);
  }
  for (auto& [h, t] : pending_installs_) install(std::move(h), t, "background");
  pending_installs_.clear();
  drain_queues();
}

void MsfLadder::cleanup() {
  if (mode_ == LadderMode::worst_case) {
    for (size_t i = 0; i < levels_; ++i) advance_build(i);
    if (!replay_reps_.empty()) {
      std::sort(replay_reps_.begin(), replay_reps_.end());
      replay_reps_.erase(std::unique(replay_reps_.begin(), replay_reps_.end()),
                         replay_reps_.end());
      std::vector<EdgeId> live;
      for (EdgeId r : replay_reps_)
        if (g_.has_edge(r)) live.push_back(r);
      replay_reps_.clear();
      route_level0(live);
    }
    feed_mirrors();
  } else {
    for (size_t i = 0; i < levels_; ++i) {
      uint64_t len = uint64_t{1} << (i + 1);
      if (j_ % len != 0) continue;
      Level& l = *level_[i];
      std::vector<EdgeId> sset;
      for (auto& slot : l.d) {
        if (!slot) continue;
        charge(slot->inst->slot_count());
        for (EdgeId ge : slot->inst->nontree_edges()) sset.push_back(ge);
        charge(1);
        emit("retire", i, nlohmann::json{{"born", slot->born}}.dump());
        slot.reset();
      }
      if (sset.empty()) continue;
      Extract ex;
      ex.g = &g_;
      ex.fadj = &fadj_;
      ex.explicit_s = std::move(sset);
      uint64_t steps = 0;
      bool fin = false;
      while (!fin) {
        fin = ex.step();
        ++steps;
      }
      charge(steps);
      if (ex.out.edges.empty()) continue;
      charge(ex.out.edges.size() + 1);
      auto h = std::make_unique<Holder>();
      h->inst = cfg_.factory(std::move(ex.out));
      h->born = j_;
      h->birth_singles = h->inst->live_single_count();
      install(std::move(h), std::min(i + 1, levels_ - 1), "merge");
    }
    drain_queues();
  }
}

void MsfLadder::finish_update(uint64_t forest_ops_before) {
  charge(forest_.ops() - forest_ops_before);
  ++j_;
  ++stats_.updates;
  stats_.last_work = work_;
  stats_.max_work = std::max(stats_.max_work, work_);
  stats_.total_work += work_;
  stats_.work_log.push_back(work_);
}

EdgeId MsfLadder::insert(VertexId u, VertexId v, double w) {
  if (g_.edge_count() >= cfg_.max_edges)
    throw CapacityError("ladder is at its declared edge bound");
  uint64_t ops0 = forest_.ops();
  work_ = 0;
  cur_deltas_.clear();
  replay_reps_.clear();
  begin_update();
  EdgeId id = g_.add_edge(u, v, w);
  const Edge& e = g_.edge(id);
  if (!forest_.same_tree(u, v)) {
    forest_.link(u, v, key_of(e), id);
    record_forest_change(true, u, v, id);
  } else {
    EdgeId f = *forest_.path_max_edge(u, v);
    if (edge_order_lt(e, g_.edge(f))) {
      auto [fu, fv] = forest_.forest_edge_ends(f);
      forest_.cut(f);
      record_forest_change(false, fu, fv, f);
      forest_.link(u, v, key_of(e), id);
      record_forest_change(true, u, v, id);
      route_level0({f});
    } else {
      route_level0({id});
    }
  }
  del_log_.push_back(std::nullopt);
  cleanup();
  finish_update(ops0);
  return id;
}

std::optional<EdgeId> MsfLadder::erase(EdgeId e) {
  if (!g_.has_edge(e)) throw NotPresentError("erase: edge not present");
  uint64_t ops0 = forest_.ops();
  work_ = 0;
  cur_deltas_.clear();
  replay_reps_.clear();
  begin_update();
  Edge ed = g_.edge(e);
  std::vector<EdgeId> reps;
  for (Holder* h : live_holders()) {
    if (!h->inst->contains(e)) continue;
    charge(1);
    if (auto r = h->inst->erase(e)) reps.push_back(*r);
  }
  std::sort(reps.begin(), reps.end());
  reps.erase(std::unique(reps.begin(), reps.end()), reps.end());
  if (reps.size() > 2 * levels_) {
    ++stats_.r_overflows;
    emit("candidate_overflow", 0, nlohmann::json{{"count", reps.size()}}.dump());
  }
  g_.delete_edge(e);
  std::optional<EdgeId> linked;
  if (forest_.has_forest_edge(e)) {
    forest_.cut(e);
    record_forest_change(false, ed.u, ed.v, e);
    EdgeId best = kNoEdge;
    for (EdgeId r : reps) {
      if (!g_.has_edge(r)) continue;
      const Edge& re = g_.edge(r);
      if (forest_.same_tree(re.u, re.v)) continue;
      if (best == kNoEdge || edge_order_lt(re, g_.edge(best))) best = r;
    }
    if (best != kNoEdge) {
      const Edge& be = g_.edge(best);
      forest_.link(be.u, be.v, key_of(be), best);
      record_forest_change(true, be.u, be.v, best);
      linked = best;
    }
  }
  std::vector<EdgeId> park;
  for (EdgeId r : reps)
    if (g_.has_edge(r)) park.push_back(r);
  route_level0(park);
  del_log_.push_back(e);
  cleanup();
  finish_update(ops0);
  return linked;
}

bool MsfLadder::in_forest(EdgeId e) const {
  return std::binary_search(ftree_.begin(), ftree_.end(), e);
}

std::vector<EdgeId> MsfLadder::forest_edges() const { return ftree_; }

size_t MsfLadder::structure_count() const { return live_holders().size(); }

std::optional<std::string> MsfLadder::audit() const {
  auto holders = live_holders();
  for (EdgeId e : g_.edge_ids()) {
    if (std::binary_search(ftree_.begin(), ftree_.end(), e)) continue;
    bool cov = false;
    for (Holder* h : holders)
      if (h->inst->covers(e)) {
        cov = true;
        break;
      }
    if (!cov) {
      std::ostringstream os;
      os << "uncovered non-tree edge " << e;
      return os.str();
    }
  }
  for (Holder* h : holders) {
    if (!h->inst->contractions_in_forest()) {
      std::ostringstream os;
      os << "contraction outside its instance forest at level " << h->level;
      return os.str();
    }
    size_t bound = 5 * std::max<size_t>(1, h->birth_singles);
    if (h->inst->slot_count() > bound) {
      std::ostringstream os;
      os << "instance built with " << h->inst->slot_count() << " edges from "
         << h->birth_singles << " singles";
      return os.str();
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// RecomputeBounded

RecomputeBounded::RecomputeBounded(const Graph& g) : g_(g), tree_(g.edge_slots(), 0) {
  for (EdgeId e : kruskal_msf(g_)) tree_[e] = 1;
}

std::optional<EdgeId> RecomputeBounded::erase(EdgeId e) {
  if (!g_.has_edge(e)) throw NotPresentError("bounded erase: edge not present");
  bool was = tree_[e] != 0;
  g_.delete_edge(e);
  tree_[e] = 0;
  if (!was) return std::nullopt;
  std::vector<uint8_t> nt(g_.edge_slots(), 0);
  for (EdgeId f : kruskal_msf(g_)) nt[f] = 1;
  std::optional<EdgeId> rep;
  for (size_t i = 0; i < nt.size(); ++i)
    if (nt[i] && !tree_[i]) {
      rep = static_cast<EdgeId>(i);
      break;
    }
  tree_ = std::move(nt);
  return rep;
}

bool RecomputeBounded::in_forest(EdgeId e) const { return e < tree_.size() && tree_[e] != 0; }

std::vector<EdgeId> RecomputeBounded::forest_edges() const {
  std::vector<EdgeId> out;
  for (size_t i = 0; i < tree_.size(); ++i)
    if (tree_[i]) out.push_back(static_cast<EdgeId>(i));
  return out;
}

BoundedFactory recompute_bounded_factory() {
  return [](const Graph& g, size_t) -> std::unique_ptr<BoundedDecMsf> {
    return std::make_unique<RecomputeBounded>(g);
  };
}

// ---------------------------------------------------------------------------
// DeltaBoundedMsf

struct DeltaBoundedMsf::Slot {
  std::unique_ptr<BoundedDecMsf> inst;
  Graph snap = Graph::simple(0);
  std::vector<EdgeId> to_inner;  // outer id -> snapshot id, kNoEdge if absent
  std::vector<EdgeId> to_outer;  // snapshot id -> outer id
  uint64_t born = 0;
  uint64_t log_start = 0;
  size_t scan_pos = 0;
  bool built = false;
  uint64_t replay_pos = 0;

  // Copies one outer edge slot into the snapshot; skips tombstones.
  void scan_one(const Graph& g) {
    EdgeId id = scan_pos++;
    if (!g.has_edge(id)) return;
    const Edge& e = g.edge(id);
    EdgeId inner = snap.add_edge(e.u, e.v, e.weight);
    to_inner[id] = inner;
    to_outer.push_back(id);
    if (to_outer.size() != inner + 1) throw ContractError("snapshot ids must be dense");
  }
};

DeltaBoundedMsf::DeltaBoundedMsf(const Graph& g0, BoundedFactory factory, size_t delta,
                                 std::ostream* events)
    : g_(g0), factory_(std::move(factory)), events_(events) {
  if (!factory_) throw ConfigError("delta rotation needs a factory");
  if (delta == 0) throw ConfigError("delta must be positive");
  delta_ = (delta + 2) / 3 * 3;
  third_ = delta_ / 3;
  active_ = std::make_unique<Slot>();
  active_->snap = Graph::simple(g_.vertex_count());
  active_->to_inner.assign(g_.edge_slots(), kNoEdge);
  while (active_->scan_pos < g_.edge_slots()) active_->scan_one(g_);
  active_->inst = factory_(active_->snap, delta_);
  active_->built = true;
  emit("active", nlohmann::json{{"boot", true}}.dump());
}

DeltaBoundedMsf::~DeltaBoundedMsf() = default;

void DeltaBoundedMsf::emit(const char* ev, const std::string& extra) const {
  if (!events_) return;
  nlohmann::json o;
  o["ev"] = ev;
  o["at"] = done_;
  if (!extra.empty()) o["x"] = nlohmann::json::parse(extra);
  (*events_) << o.dump() << "\n";
}

void DeltaBoundedMsf::rotate() {
  if (replayer_) {
    if (replayer_->replay_pos != log_.size()) throw ContractError("replay incomplete at activation");
    emit("retired", nlohmann::json{{"born", active_->born}}.dump());
    active_ = std::move(replayer_);
    emit("active", nlohmann::json{{"born", active_->born}}.dump());
  }
  if (builder_) {
    if (!builder_->built) throw ContractError("builder incomplete at rotation");
    builder_->replay_pos = builder_->log_start;
    replayer_ = std::move(builder_);
    emit("replaying", nlohmann::json{{"born", replayer_->born}}.dump());
  }
  builder_ = std::make_unique<Slot>();
  builder_->born = done_;
  builder_->log_start = log_.size();
  builder_->snap = Graph::simple(g_.vertex_count());
  builder_->to_inner.assign(g_.edge_slots(), kNoEdge);
  emit("born", "");
}

void DeltaBoundedMsf::advance_builder() {
  if (!builder_ || builder_->built) return;
  size_t used = static_cast<size_t>(done_ % third_);
  size_t rem = third_ - used;  // window updates left, this one included
  size_t slots = g_.edge_slots();
  size_t tasks = (slots - builder_->scan_pos) + 1;
  size_t budget = rem <= 1 ? tasks : (tasks + rem - 1) / rem;
  while (budget-- > 0 && !builder_->built) {
    if (builder_->scan_pos < slots) {
      builder_->scan_one(g_);
    } else {
      builder_->inst = factory_(builder_->snap, delta_);
      builder_->built = true;
    }
  }
}

void DeltaBoundedMsf::advance_replayer() {
  if (!replayer_) return;
  for (int t = 0; t < 2 && replayer_->replay_pos < log_.size(); ++t) {
    EdgeId oe = log_[replayer_->replay_pos++];
    EdgeId ie = replayer_->to_inner[oe];
    if (ie != kNoEdge) replayer_->inst->erase(ie);
  }
}

std::optional<EdgeId> DeltaBoundedMsf::erase(EdgeId e) {
  if (!g_.has_edge(e)) throw NotPresentError("delta erase: edge not present");
  if (done_ % third_ == 0) rotate();
  log_.push_back(e);
  g_.delete_edge(e);
  advance_builder();
  advance_replayer();
  EdgeId inner = active_->to_inner[e];
  if (inner == kNoEdge) throw ContractError("active instance lost an edge");
  auto rin = active_->inst->erase(inner);
  ++done_;
  if (!rin) return std::nullopt;
  return active_->to_outer[*rin];
}

bool DeltaBoundedMsf::in_forest(EdgeId e) const {
  if (!g_.has_edge(e)) return false;
  EdgeId ie = active_->to_inner[e];
  return ie != kNoEdge && active_->inst->in_forest(ie);
}

std::vector<EdgeId> DeltaBoundedMsf::forest_edges() const {
  std::vector<EdgeId> out;
  for (EdgeId ie : active_->inst->forest_edges()) out.push_back(active_->to_outer[ie]);
  std::sort(out.begin(), out.end());
  return out;
}

size_t DeltaBoundedMsf::active_deletions_left() const { return active_->inst->deletions_left(); }

// ---------------------------------------------------------------------------
// Degree-3 bridge and DynamicMsf

namespace {

// Ladder instance served through the degree-3 split: materialize the sorted
// instance as a rank-weighted multigraph (dense ranks kill ties, preserving
// the instance order downstream), split it to degree three, then answer from
// either the recompute fallback or a delta rotation over the bounded
// structure. Slot indices equal materialized edge ids.
class SplitBridge : public DecrementalMsf {
 public:
  SplitBridge(InstanceGraph ig, BoundedFactory bf, size_t small_threshold,
              const std::function<size_t(size_t)>& delta_of, std::ostream* events)
      : ig_(std::move(ig)), t_(split_of(ig_)) {
    if (t_.out.vertex_count() < small_threshold) {
      small_ = std::make_unique<RecomputeBounded>(t_.out);
    } else {
      wrap_ = std::make_unique<DeltaBoundedMsf>(t_.out, std::move(bf),
                                                delta_of(t_.out.vertex_count()), events);
    }
    dead_.assign(ig_.edges.size(), 0);
    for (size_t i = 0; i < ig_.edges.size(); ++i) {
      const InstanceEdge& e = ig_.edges[i];
      if (e.is_super()) {
        for (EdgeId m : e.members) where_.emplace_back(m, static_cast<uint32_t>(i));
      } else {
        where_.emplace_back(e.gid, static_cast<uint32_t>(i));
        ++live_singles_;
      }
    }
    std::sort(where_.begin(), where_.end());
    live_ = ig_.edges.size();
  }

  std::optional<EdgeId> erase(EdgeId ge) override {
    std::vector<EdgeId> got;
    bool touched = false;
    for (uint32_t slot : where_hits(where_, ge)) {
      if (dead_[slot]) continue;
      touched = true;
      dead_[slot] = 1;
      --live_;
      if (!ig_.edges[slot].is_super()) --live_singles_;
      auto rin = under_erase(t_.image_edge[slot]);
      if (!rin) continue;
      EdgeId rmat = t_.orig_edge[*rin];
      if (rmat == kNoEdge) throw ContractError("chain edge promoted into an instance forest");
      const InstanceEdge& re = ig_.edges[rmat];
      if (re.is_super()) throw ContractError("contraction promoted into an instance forest");
      if (re.gid != ge) got.push_back(re.gid);
    }
    if (!touched || got.empty()) return std::nullopt;
    if (got.size() > 1) throw ContractError("multiple promotions from one removal");
    return got[0];
  }

  bool contains(EdgeId ge) const override {
    for (uint32_t slot : where_hits(where_, ge))
      if (!dead_[slot]) return true;
    return false;
  }

  bool covers(EdgeId ge) const override {
    for (uint32_t slot : where_hits(where_, ge))
      if (!dead_[slot] && !ig_.edges[slot].is_super() && !slot_in_forest(slot)) return true;
    return false;
  }

  size_t slot_count() const override { return ig_.edges.size(); }

  std::optional<EdgeId> nontree_slot(size_t slot) const override {
    if (slot >= ig_.edges.size()) return std::nullopt;
    const InstanceEdge& e = ig_.edges[slot];
    if (dead_[slot] || e.is_super() || slot_in_forest(slot)) return std::nullopt;
    return e.gid;
  }

  size_t live_edge_count() const override { return live_; }
  size_t live_single_count() const override { return live_singles_; }

  bool contractions_in_forest() const override {
    for (size_t i = 0; i < ig_.edges.size(); ++i)
      if (!dead_[i] && ig_.edges[i].is_super() && !slot_in_forest(i)) return false;
    return true;
  }

 private:
  static Degree3Result split_of(const InstanceGraph& ig) {
    VertexId maxv = 0;
    for (const auto& e : ig.edges) maxv = std::max({maxv, e.u, e.v});
    Graph m = Graph::multi(ig.edges.empty() ? 1 : static_cast<size_t>(maxv) + 1);
    for (size_t i = 0; i < ig.edges.size(); ++i) {
      EdgeId mid = m.add_edge(ig.edges[i].u, ig.edges[i].v, static_cast<double>(i));
      if (mid != i) throw ContractError("materialized instance ids must be dense");
    }
    return degree3_transform(m);
  }

  std::optional<EdgeId> under_erase(EdgeId tid) {
    return small_ ? small_->erase(tid) : wrap_->erase(tid);
  }

  bool slot_in_forest(size_t slot) const {
    EdgeId tid = t_.image_edge[slot];
    return small_ ? small_->in_forest(tid) : wrap_->in_forest(tid);
  }

  InstanceGraph ig_;
  Degree3Result t_;
  std::unique_ptr<RecomputeBounded> small_;
  std::unique_ptr<DeltaBoundedMsf> wrap_;
  std::vector<uint8_t> dead_;
  std::vector<std::pair<EdgeId, uint32_t>> where_;
  size_t live_ = 0, live_singles_ = 0;
};

LadderConfig bridge_config(BoundedFactory bf, DynamicMsfConfig cfg) {
  if (!bf) throw ConfigError("dynamic msf needs a bounded factory");
  if (!cfg.delta_of) cfg.delta_of = [](size_t n) { return n / 2 + 3; };
  LadderConfig lc;
  lc.max_edges = cfg.max_edges;
  lc.events = cfg.events;
  auto shared_bf = std::make_shared<BoundedFactory>(std::move(bf));
  auto shared_delta = std::make_shared<std::function<size_t(size_t)>>(std::move(cfg.delta_of));
  size_t thr = cfg.small_threshold;
  lc.factory = [shared_bf, shared_delta, thr](InstanceGraph ig) -> std::unique_ptr<DecrementalMsf> {
    return std::make_unique<SplitBridge>(std::move(ig), *shared_bf, thr, *shared_delta, nullptr);
  };
  return lc;
}

}  // namespace

DynamicMsf::DynamicMsf(size_t n, BoundedFactory factory, DynamicMsfConfig cfg)
    : ladder_(n, cfg.mode, bridge_config(std::move(factory), cfg)) {}

}  // namespace dynmsf
