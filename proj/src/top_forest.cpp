#include "dynmsf/top_forest.hpp"

#include <algorithm>
#include <cassert>

namespace dynmsf {

int key_cmp(const EdgeKey& a, const EdgeKey& b) {
  if (a.weight != b.weight) return a.weight < b.weight ? -1 : 1;
  if (a.lo != b.lo) return a.lo < b.lo ? -1 : 1;
  if (a.hi != b.hi) return a.hi < b.hi ? -1 : 1;
  if (a.serial != b.serial) return a.serial < b.serial ? -1 : 1;
  return 0;
}

TopForestCore::TopForestCore(size_t n)
    : tree_of_(n, -1),
      adj_(n),
      mark_count_(n, 0),
      parent_(n, 0),
      pedge_(n, kNoEdge),
      depth_(n, 0),
      leaf_of_(n) {
  for (VertexId v = 0; v < n; ++v) {
    int32_t t = new_tree();
    trees_[t].verts = {v};
    trees_[t].root = -1;
    tree_of_[v] = t;
  }
}

int32_t TopForestCore::new_tree() {
  if (!free_trees_.empty()) {
    int32_t t = free_trees_.back();
    free_trees_.pop_back();
    trees_[t].live = true;
    return t;
  }
  trees_.push_back(Tree{});
  trees_.back().live = true;
  return static_cast<int32_t>(trees_.size() - 1);
}

void TopForestCore::release_tree(int32_t t) {
  trees_[t].verts.clear();
  trees_[t].clusters.clear();
  trees_[t].root = -1;
  trees_[t].live = false;
  free_trees_.push_back(t);
}

int64_t TopForestCore::slot_of(EdgeId id) const {
  if (id < fe_slot_.size() && fe_slot_[id] >= 0) return fe_slot_[id];
  return -1;
}

int64_t TopForestCore::slot_of_checked(EdgeId id) const {
  int64_t s = slot_of(id);
  if (s < 0 || !fe_[s].present) throw NotPresentError("top forest: edge not linked");
  return s;
}

int64_t TopForestCore::ensure_slot(EdgeId id) {
  if (id >= fe_slot_.size()) fe_slot_.resize(id + 1, -1);
  if (fe_slot_[id] < 0) {
    fe_slot_[id] = static_cast<int64_t>(fe_.size());
    fe_.push_back(FEdge{});
  }
  return fe_slot_[id];
}

bool TopForestCore::has_forest_edge(EdgeId id) const {
  int64_t s = slot_of(id);
  return s >= 0 && fe_[s].present;
}

std::pair<VertexId, VertexId> TopForestCore::forest_edge_ends(EdgeId id) const {
  const FEdge& e = fe_[slot_of_checked(id)];
  return {e.u, e.v};
}

std::vector<VertexId> TopForestCore::component_of(VertexId seed) const {
  std::vector<VertexId> order;
  static thread_local std::vector<uint8_t> vis;
  if (vis.size() < tree_of_.size()) vis.assign(tree_of_.size(), 0);
  order.push_back(seed);
  vis[seed] = 1;
  for (size_t h = 0; h < order.size(); ++h) {
    VertexId x = order[h];
    for (EdgeId eid : adj_[x]) {
      const FEdge& fe = fe_[slot_of(eid)];
      VertexId y = fe.u == x ? fe.v : fe.u;
      if (!vis[y]) {
        vis[y] = 1;
        order.push_back(y);
      }
    }
  }
  for (VertexId x : order) vis[x] = 0;
  return order;
}

void TopForestCore::build_tree(int32_t t, const std::vector<VertexId>& verts_in) {
  Tree& tr = trees_[t];
  tr.verts = verts_in;
  tr.clusters.clear();
  tr.root = -1;
  for (VertexId v : tr.verts) {
    tree_of_[v] = t;
    leaf_of_[v].clear();
  }
  // rooted arrays via BFS from verts[0]
  VertexId r = tr.verts[0];
  parent_[r] = r;
  pedge_[r] = kNoEdge;
  depth_[r] = 0;
  std::vector<VertexId> order{r};
  std::vector<EdgeId> edge_order;
  for (size_t h = 0; h < order.size(); ++h) {
    VertexId x = order[h];
    for (EdgeId eid : adj_[x]) {
      FEdge& fe = fe_[slot_of(eid)];
      VertexId y = fe.u == x ? fe.v : fe.u;
      if (y == parent_[x] && pedge_[x] == eid) continue;
      parent_[y] = x;
      pedge_[y] = eid;
      depth_[y] = depth_[x] + 1;
      order.push_back(y);
      edge_order.push_back(eid);
    }
  }

  if (edge_order.empty()) return;  // singleton

  auto& cl = tr.clusters;
  cl.reserve(2 * edge_order.size());
  std::vector<std::vector<int32_t>> inc(tr.verts.size());
  // local vertex index for frontier bookkeeping
  static thread_local std::vector<int32_t> loc;
  if (loc.size() < tree_of_.size()) loc.assign(tree_of_.size(), -1);
  for (size_t i = 0; i < tr.verts.size(); ++i) loc[tr.verts[i]] = static_cast<int32_t>(i);

  for (EdgeId eid : edge_order) {
    FEdge& fe = fe_[slot_of(eid)];
    int32_t ci = static_cast<int32_t>(cl.size());
    Cluster c;
    c.kind = kLeaf;
    c.b0 = fe.u;
    c.b1 = fe.v;
    c.edge = eid;
    cl.push_back(c);
    fe.tree = t;
    fe.leaf = ci;
    inc[loc[fe.u]].push_back(ci);
    inc[loc[fe.v]].push_back(ci);
    leaf_of_[fe.u].push_back(ci);
    leaf_of_[fe.v].push_back(ci);
    leaf_aggregates(t, ci);
  }

  size_t frontier = edge_order.size();
  std::vector<uint8_t> used(cl.size(), 0);
  while (frontier > 1) {
    size_t before = frontier;
    used.assign(cl.size(), 0);
    struct Merge {
      Kind kind;
      int32_t a, b;
      VertexId shared;
    };
    std::vector<Merge> merges;
    // compress pass: interior vertices joining exactly two unused clusters
    for (size_t i = 0; i < tr.verts.size(); ++i) {
      VertexId v = tr.verts[i];
      auto& lst = inc[i];
      if (lst.size() != 2) continue;
      int32_t a = lst[0], b = lst[1];
      if (used[a] || used[b]) continue;
      used[a] = used[b] = 1;
      merges.push_back(Merge{kCompress, a, b, v});
    }
    // rake pass: leaf clusters fold onto an unused neighbor
    for (size_t i = 0; i < tr.verts.size(); ++i) {
      auto& lst = inc[i];
      if (lst.size() != 1) continue;
      int32_t a = lst[0];
      if (used[a]) continue;
      const Cluster& ca = cl[a];
      VertexId v = tr.verts[i];
      VertexId y = ca.b0 == v ? ca.b1 : ca.b0;
      int32_t b = -1;
      for (int32_t cand : inc[loc[y]])
        if (cand != a && !used[cand]) {
          b = cand;
          break;
        }
      if (b < 0) continue;
      used[a] = used[b] = 1;
      merges.push_back(Merge{kRake, a, b, y});
    }
    for (const Merge& m : merges) {
      int32_t ci = static_cast<int32_t>(cl.size());
      Cluster c;
      c.kind = m.kind;
      c.child0 = m.a;
      c.child1 = m.b;
      c.shared = m.shared;
      if (m.kind == kCompress) {
        const Cluster& A = cl[m.a];
        const Cluster& B = cl[m.b];
        c.b0 = A.b0 == m.shared ? A.b1 : A.b0;
        c.b1 = B.b0 == m.shared ? B.b1 : B.b0;
      } else {
        c.b0 = cl[m.b].b0;
        c.b1 = cl[m.b].b1;
      }
      cl.push_back(c);
      cl[m.a].parent = ci;
      cl[m.b].parent = ci;
      used.push_back(0);
      join_aggregates(t, ci);
      // frontier bookkeeping: replace a and b with ci
      auto replace = [&](VertexId v, int32_t oldc, int32_t newc) {
        auto& lst = inc[loc[v]];
        auto it = std::find(lst.begin(), lst.end(), oldc);
        if (it != lst.end()) {
          if (newc >= 0)
            *it = newc;
          else
            lst.erase(it);
        }
      };
      const Cluster& A = cl[m.a];
      const Cluster& B = cl[m.b];
      if (m.kind == kCompress) {
        replace(A.b0 == m.shared ? A.b1 : A.b0, m.a, ci);
        replace(B.b0 == m.shared ? B.b1 : B.b0, m.b, ci);
        replace(m.shared, m.a, -1);
        replace(m.shared, m.b, -1);
      } else {
        // rake: drop A entirely, B becomes ci at both its boundaries
        replace(A.b0, m.a, -1);
        replace(A.b1, m.a, -1);
        replace(B.b0, m.b, ci);
        replace(B.b1, m.b, ci);
      }
      --frontier;
    }
    if (frontier == before) throw std::logic_error("top forest: contraction stalled");
  }
  for (size_t i = 0; i < tr.verts.size(); ++i) loc[tr.verts[i]] = -1;
  tr.root = static_cast<int32_t>(cl.size() - 1);

  // Euler intervals over the cluster tree for containment tests
  int32_t timer = 0;
  std::vector<int32_t> stack{tr.root};
  std::vector<uint8_t> state(cl.size(), 0);
  while (!stack.empty()) {
    int32_t ci = stack.back();
    if (state[ci] == 0) {
      state[ci] = 1;
      cl[ci].tin = timer++;
      if (cl[ci].kind != kLeaf) {
        stack.push_back(cl[ci].child1);
        stack.push_back(cl[ci].child0);
      }
    } else {
      cl[ci].tout = timer;
      stack.pop_back();
      continue;
    }
    // leaves close immediately
    if (cl[ci].kind == kLeaf) {
      cl[ci].tout = timer;
      stack.pop_back();
    }
  }
}

void TopForestCore::leaf_aggregates(int32_t t, int32_t ci) {
  Cluster& c = trees_[t].clusters[ci];
  const FEdge& fe = fe_[slot_of(c.edge)];
  c.plen = 1;
  c.edges = 1;
  c.has_tag = fe.tagged;
  VertexId ends[2] = {c.b0, c.b1};
  for (int i = 0; i < 2; ++i) {
    VertexId near = ends[i], far = ends[1 - i];
    if (mark_count_[near] > 0) {
      c.nmd[i] = 0;
      c.nmw[i] = near;
    } else if (mark_count_[far] > 0) {
      c.nmd[i] = 1;
      c.nmw[i] = far;
    } else {
      c.nmd[i] = kInf;
      c.nmw[i] = 0;
    }
  }
}

namespace {
inline int side_of(const TopForestCore::Cluster& c, VertexId v) {
  return c.b0 == v ? 0 : 1;
}
}  // namespace

void TopForestCore::join_aggregates(int32_t t, int32_t ci) {
  auto& cl = trees_[t].clusters;
  Cluster& c = cl[ci];
  const Cluster& A = cl[c.child0];
  const Cluster& B = cl[c.child1];
  c.edges = A.edges + B.edges;
  c.has_tag = A.has_tag || B.has_tag;
  VertexId s = c.shared;
  auto pick = [](uint32_t d1, VertexId w1, uint32_t d2, VertexId w2, uint32_t& d, VertexId& w) {
    if (d1 < d2 || (d1 == d2 && (d1 == kInf || w1 < w2))) {
      d = d1;
      w = w1;
    } else {
      d = d2;
      w = w2;
    }
  };
  auto add = [](uint32_t base, uint32_t extra) -> uint32_t {
    return base == kInf ? kInf : base + extra;
  };
  if (c.kind == kCompress) {
    c.plen = A.plen + B.plen;
    // b0 lives in A, b1 in B
    pick(A.nmd[side_of(A, c.b0)], A.nmw[side_of(A, c.b0)],
         add(B.nmd[side_of(B, s)], A.plen), B.nmw[side_of(B, s)], c.nmd[0], c.nmw[0]);
    pick(B.nmd[side_of(B, c.b1)], B.nmw[side_of(B, c.b1)],
         add(A.nmd[side_of(A, s)], B.plen), A.nmw[side_of(A, s)], c.nmd[1], c.nmw[1]);
  } else {
    c.plen = B.plen;
    for (int i = 0; i < 2; ++i) {
      VertexId bv = i == 0 ? c.b0 : c.b1;
      uint32_t through = bv == s ? 0 : B.plen;  // distance from bv to s inside B
      pick(B.nmd[side_of(B, bv)], B.nmw[side_of(B, bv)],
           add(A.nmd[side_of(A, s)], through), A.nmw[side_of(A, s)], c.nmd[i], c.nmw[i]);
    }
  }
}

void TopForestCore::bubble_up(int32_t t, std::vector<int32_t> dirty) {
  std::sort(dirty.begin(), dirty.end());
  dirty.erase(std::unique(dirty.begin(), dirty.end()), dirty.end());
  auto& cl = trees_[t].clusters;
  // parents always have larger indices, so ascending processing is bottom-up
  for (size_t i = 0; i < dirty.size(); ++i) {
    int32_t ci = dirty[i];
    if (cl[ci].kind == kLeaf)
      leaf_aggregates(t, ci);
    else
      join_aggregates(t, ci);
    int32_t p = cl[ci].parent;
    if (p >= 0) {
      auto pos = std::lower_bound(dirty.begin() + i + 1, dirty.end(), p);
      if (pos == dirty.end() || *pos != p) dirty.insert(pos, p);
    }
  }
}

void TopForestCore::touch_vertex_aggregates(VertexId v) {
  int32_t t = tree_of_[v];
  if (trees_[t].clusters.empty()) return;
  bubble_up(t, leaf_of_[v]);
}

void TopForestCore::rebuild_from(VertexId seed) {
  int32_t t = tree_of_[seed];
  std::vector<VertexId> comp = component_of(seed);
  build_tree(t, comp);
}

void TopForestCore::link(VertexId u, VertexId v, const EdgeKey& k, EdgeId id, bool tagged) {
  ++ops_;
  if (u >= tree_of_.size() || v >= tree_of_.size())
    throw ContractError("link: vertex out of range");
  if (u == v) throw ContractError("link: self loop");
  if (has_forest_edge(id)) throw ContractError("link: edge id already present");
  if (same_tree(u, v)) throw CycleError("link: endpoints already connected");

  int32_t a = tree_of_[u], b = tree_of_[v];
  if (observer_) {
    observer_->pre_dismantle(a);
    observer_->pre_dismantle(b);
  }
  int64_t s = ensure_slot(id);
  fe_[s] = FEdge{u, v, k, tagged, true, -1, -1};
  adj_[u].push_back(id);
  adj_[v].push_back(id);
  release_tree(b);
  std::vector<VertexId> comp = component_of(u);
  build_tree(a, comp);
  if (observer_) observer_->post_build(a);
}

void TopForestCore::cut(EdgeId id) {
  ++ops_;
  int64_t s = slot_of_checked(id);
  FEdge fe = fe_[s];
  int32_t t = tree_of_[fe.u];
  if (observer_) observer_->pre_dismantle(t);
  fe_[s].present = false;
  auto drop = [&](VertexId x) {
    auto& lst = adj_[x];
    lst.erase(std::find(lst.begin(), lst.end(), id));
  };
  drop(fe.u);
  drop(fe.v);
  std::vector<VertexId> ca = component_of(fe.u);
  std::vector<VertexId> cb = component_of(fe.v);
  build_tree(t, ca);
  int32_t tb = new_tree();
  build_tree(tb, cb);
  if (observer_) {
    observer_->post_build(t);
    observer_->post_build(tb);
  }
}

void TopForestCore::refresh_tree(VertexId v) {
  ++ops_;
  int32_t t = tree_of_[v];
  if (observer_) observer_->pre_dismantle(t);
  std::vector<VertexId> verts = trees_[t].verts;
  build_tree(t, verts);
  if (observer_) observer_->post_build(t);
}

bool TopForestCore::same_tree(VertexId u, VertexId v) const {
  return tree_of_.at(u) == tree_of_.at(v);
}

size_t TopForestCore::tree_size(VertexId v) const { return trees_[tree_of_.at(v)].verts.size(); }

uint64_t TopForestCore::dist(VertexId u, VertexId v) const {
  if (!same_tree(u, v)) throw ContractError("dist: different trees");
  uint64_t d = 0;
  VertexId a = u, b = v;
  while (depth_[a] > depth_[b]) {
    a = parent_[a];
    ++d;
  }
  while (depth_[b] > depth_[a]) {
    b = parent_[b];
    ++d;
  }
  while (a != b) {
    a = parent_[a];
    b = parent_[b];
    d += 2;
  }
  return d;
}

VertexId TopForestCore::walk_lca(VertexId u, VertexId v) const {
  VertexId a = u, b = v;
  while (depth_[a] > depth_[b]) a = parent_[a];
  while (depth_[b] > depth_[a]) b = parent_[b];
  while (a != b) {
    a = parent_[a];
    b = parent_[b];
  }
  return a;
}

std::optional<EdgeId> TopForestCore::path_max_edge(VertexId u, VertexId v) const {
  ++ops_;
  if (u == v || !same_tree(u, v)) return std::nullopt;
  VertexId lca = walk_lca(u, v);
  EdgeId best = kNoEdge;
  auto consider = [&](EdgeId eid) {
    if (best == kNoEdge ||
        key_cmp(fe_[slot_of(eid)].key, fe_[slot_of(best)].key) > 0)
      best = eid;
  };
  for (VertexId a = u; a != lca; a = parent_[a]) consider(pedge_[a]);
  for (VertexId b = v; b != lca; b = parent_[b]) consider(pedge_[b]);
  if (best == kNoEdge) return std::nullopt;
  return best;
}

std::optional<EdgeId> TopForestCore::first_special_edge_on_path(VertexId u, VertexId v) const {
  ++ops_;
  if (u == v || !same_tree(u, v)) return std::nullopt;
  int32_t t = tree_of_[u];
  int32_t r = trees_[t].root;
  if (r >= 0 && !trees_[t].clusters[r].has_tag) return std::nullopt;
  VertexId lca = walk_lca(u, v);
  for (VertexId a = u; a != lca; a = parent_[a])
    if (fe_[slot_of(pedge_[a])].tagged) return pedge_[a];
  EdgeId last = kNoEdge;
  for (VertexId b = v; b != lca; b = parent_[b])
    if (fe_[slot_of(pedge_[b])].tagged) last = pedge_[b];
  if (last == kNoEdge) return std::nullopt;
  return last;
}

void TopForestCore::mark(VertexId v) {
  ++ops_;
  if (++mark_count_.at(v) == 1) touch_vertex_aggregates(v);
}

void TopForestCore::unmark(VertexId v) {
  ++ops_;
  if (mark_count_.at(v) == 0) throw ContractError("unmark: count already zero");
  if (--mark_count_[v] == 0) touch_vertex_aggregates(v);
}

void TopForestCore::set_tag(EdgeId id, bool tg) {
  ++ops_;
  int64_t s = slot_of_checked(id);
  if (fe_[s].tagged == tg) return;
  fe_[s].tagged = tg;
  bubble_up(fe_[s].tree, {fe_[s].leaf});
}

bool TopForestCore::tag(EdgeId id) const { return fe_[slot_of_checked(id)].tagged; }

bool TopForestCore::cluster_contains(int32_t t, int32_t ci, VertexId v) const {
  const auto& cl = trees_[t].clusters;
  const Cluster& c = cl[ci];
  for (int32_t leaf : leaf_of_[v])
    if (cl[leaf].tin >= c.tin && cl[leaf].tin < c.tout) return true;
  return false;
}

std::optional<VertexId> TopForestCore::nearest_marked(VertexId v) const {
  ++ops_;
  if (mark_count_.at(v) > 0) return v;
  int32_t t = tree_of_[v];
  const auto& cl = trees_[t].clusters;
  if (cl.empty()) return std::nullopt;
  int32_t r = trees_[t].root;
  uint32_t best_d = kInf;
  VertexId best_w = 0;
  auto cand = [&](uint32_t d, VertexId w) {
    if (d < best_d || (d == best_d && d != kInf && w < best_w)) {
      best_d = d;
      best_w = w;
    }
  };
  int32_t ci = r;
  for (;;) {
    const Cluster& c = cl[ci];
    if (c.kind == kLeaf) {
      for (VertexId x : {c.b0, c.b1})
        if (mark_count_[x] > 0) cand(static_cast<uint32_t>(dist(v, x)), x);
      break;
    }
    bool in_a = cluster_contains(t, c.child0, v);
    bool in_b = cluster_contains(t, c.child1, v);
    const Cluster& A = cl[c.child0];
    const Cluster& B = cl[c.child1];
    if (in_a && in_b) {
      // v is the junction vertex
      cand(A.nmd[side_of(A, v)], A.nmw[side_of(A, v)]);
      cand(B.nmd[side_of(B, v)], B.nmw[side_of(B, v)]);
      break;
    }
    if (in_a) {
      if (B.nmd[side_of(B, c.shared)] != kInf)
        cand(B.nmd[side_of(B, c.shared)] + static_cast<uint32_t>(dist(v, c.shared)),
             B.nmw[side_of(B, c.shared)]);
      ci = c.child0;
    } else if (in_b) {
      if (A.nmd[side_of(A, c.shared)] != kInf)
        cand(A.nmd[side_of(A, c.shared)] + static_cast<uint32_t>(dist(v, c.shared)),
             A.nmw[side_of(A, c.shared)]);
      ci = c.child1;
    } else {
      throw std::logic_error("nearest_marked: vertex lost during descent");
    }
  }
  if (best_d == kInf) return std::nullopt;
  return best_w;
}

size_t TopForestCore::cluster_height(int32_t tree) const {
  const auto& cl = trees_[tree].clusters;
  if (cl.empty()) return 0;
  std::vector<uint32_t> h(cl.size(), 1);
  size_t best = 1;
  for (size_t i = 0; i < cl.size(); ++i) {
    const Cluster& c = cl[i];
    if (c.kind != kLeaf) h[i] = 1 + std::max(h[c.child0], h[c.child1]);
    best = std::max(best, static_cast<size_t>(h[i]));
  }
  return best;
}

}  // namespace dynmsf
