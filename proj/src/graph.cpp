#include "dynmsf/graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace dynmsf {

int edge_order_cmp(const Edge& a, const Edge& b) {
  if (a.weight != b.weight) return a.weight < b.weight ? -1 : 1;
  if (a.lo() != b.lo()) return a.lo() < b.lo() ? -1 : 1;
  if (a.hi() != b.hi()) return a.hi() < b.hi() ? -1 : 1;
  if (a.serial != b.serial) return a.serial < b.serial ? -1 : 1;
  return 0;
}

VertexId Graph::add_vertex() {
  inc_.emplace_back();
  return static_cast<VertexId>(inc_.size() - 1);
}

EdgeId Graph::add_edge(VertexId u, VertexId v, double w) {
  if (u >= inc_.size() || v >= inc_.size())
    throw ContractError("add_edge: vertex out of range");
  if (u == v) throw ContractError("add_edge: self loop");
  if (!std::isfinite(w)) throw ContractError("add_edge: non-finite weight");
  if (simple_) {
    for (EdgeId eid : inc_[u]) {
      const Edge& e = edges_[eid];
      if (e.u == v || e.v == v) throw ContractError("add_edge: parallel edge in simple graph");
    }
  }
  EdgeId id = edges_.size();
  edges_.push_back(Edge{id, u, v, w, next_serial_++, true});
  inc_[u].push_back(id);
  inc_[v].push_back(id);
  ++alive_;
  return id;
}

void Graph::delete_edge(EdgeId e) {
  if (!has_edge(e)) throw NotPresentError("delete_edge: no such edge");
  Edge& ed = edges_[e];
  ed.alive = false;
  --alive_;
  auto drop = [&](VertexId x) {
    auto& list = inc_[x];
    list.erase(std::find(list.begin(), list.end(), e));
  };
  drop(ed.u);
  drop(ed.v);
}

const Edge& Graph::edge(EdgeId e) const {
  if (e >= edges_.size()) throw NotPresentError("edge: id out of range");
  return edges_[e];
}

void Graph::set_weight(EdgeId e, double w) {
  if (!has_edge(e)) throw NotPresentError("set_weight: no such edge");
  if (!std::isfinite(w)) throw ContractError("set_weight: non-finite weight");
  edges_[e].weight = w;
}

VertexId Graph::other(EdgeId e, VertexId x) const {
  const Edge& ed = edge(e);
  if (ed.u == x) return ed.v;
  if (ed.v == x) return ed.u;
  throw ContractError("other: vertex not an endpoint");
}

std::vector<EdgeId> Graph::edge_ids() const {
  std::vector<EdgeId> out;
  out.reserve(alive_);
  for (const Edge& e : edges_)
    if (e.alive) out.push_back(e.id);
  return out;
}

namespace {

std::vector<uint8_t> side_bitmap(const Graph& g, const std::vector<VertexId>& s) {
  std::vector<uint8_t> in(g.vertex_count(), 0);
  for (VertexId v : s) {
    if (v >= g.vertex_count()) throw ContractError("cut: vertex out of range");
    if (in[v]) throw ContractError("cut: duplicate vertex");
    in[v] = 1;
  }
  return in;
}

}  // namespace

uint64_t volume(const Graph& g, const std::vector<VertexId>& s) {
  std::vector<uint8_t> in = side_bitmap(g, s);
  uint64_t vol = 0;
  for (VertexId v : s)
    if (in[v]) vol += g.degree(v);
  return vol;
}

std::pair<uint64_t, uint64_t> conductance_parts(const Graph& g, const std::vector<VertexId>& s) {
  std::vector<uint8_t> in = side_bitmap(g, s);
  uint64_t vol_s = 0, vol_all = 0, crossing = 0;
  for (VertexId v = 0; v < g.vertex_count(); ++v) {
    vol_all += g.degree(v);
    if (in[v]) vol_s += g.degree(v);
  }
  for (EdgeId eid : g.edge_ids()) {
    const Edge& e = g.edge(eid);
    if (in[e.u] != in[e.v]) ++crossing;
  }
  uint64_t minv = std::min(vol_s, vol_all - vol_s);
  if (minv == 0) throw ContractError("conductance: zero volume side");
  return {crossing, minv};
}

double conductance(const Graph& g, const std::vector<VertexId>& s) {
  auto [crossing, minv] = conductance_parts(g, s);
  return static_cast<double>(crossing) / static_cast<double>(minv);
}

bool is_gamma_expander(const Graph& g, double gamma) {
  size_t n = g.vertex_count();
  if (n > 24) throw SizeError("is_gamma_expander: exhaustive check capped at 24 vertices");
  if (n <= 1) return true;

  // Gray-code walk over subsets of {1..n-1} (vertex 0 pinned outside the
  // cut) so each step flips one vertex and updates the crossing count
  // locally. Expansion compares crossings against the smaller side's vertex
  // count, not its volume.
  std::vector<uint8_t> in(n, 0);
  uint64_t cnt_s = 0;
  int64_t crossing = 0;
  uint64_t total = uint64_t{1} << (n - 1);
  for (uint64_t k = 1; k < total; ++k) {
    VertexId w = static_cast<VertexId>(__builtin_ctzll(k) + 1);
    if (!in[w]) {
      in[w] = 1;
      ++cnt_s;
      int64_t to_s = 0;
      for (EdgeId eid : g.incident(w))
        if (in[g.other(eid, w)]) ++to_s;
      crossing += static_cast<int64_t>(g.degree(w)) - 2 * to_s;
    } else {
      in[w] = 0;
      --cnt_s;
      int64_t to_s = 0;
      for (EdgeId eid : g.incident(w))
        if (in[g.other(eid, w)]) ++to_s;
      crossing += 2 * to_s - static_cast<int64_t>(g.degree(w));
    }
    uint64_t minc = std::min(cnt_s, n - cnt_s);
    if (static_cast<double>(crossing) < gamma * static_cast<double>(minc)) return false;
  }
  return true;
}

std::vector<EdgeId> kruskal_msf(const Graph& g) {
  std::vector<EdgeId> ids = g.edge_ids();
  std::sort(ids.begin(), ids.end(),
            [&](EdgeId a, EdgeId b) { return edge_order_lt(g.edge(a), g.edge(b)); });
  Dsu dsu(g.vertex_count());
  std::vector<EdgeId> out;
  for (EdgeId eid : ids) {
    const Edge& e = g.edge(eid);
    if (dsu.unite(e.u, e.v)) out.push_back(eid);
  }
  std::sort(out.begin(), out.end());
  return out;
}

Graph rank_reweight(const Graph& g) {
  Graph out = g;
  std::vector<EdgeId> ids = g.edge_ids();
  std::sort(ids.begin(), ids.end(),
            [&](EdgeId a, EdgeId b) { return edge_order_lt(g.edge(a), g.edge(b)); });
  for (size_t r = 0; r < ids.size(); ++r) out.set_weight(ids[r], static_cast<double>(r));
  return out;
}

Degree3Result degree3_transform(const Graph& g) {
  Degree3Result res;
  res.out = Graph::simple(0);
  res.first_copy.resize(g.vertex_count());
  res.image_edge.assign(g.edge_slots(), kNoEdge);

  // Image edges carry the input edge's rank as weight: raw weights would let
  // the copied endpoints re-break ties and change the MSF. Chain edges sit
  // below every rank.
  std::vector<EdgeId> ids = g.edge_ids();
  std::sort(ids.begin(), ids.end(),
            [&](EdgeId a, EdgeId b) { return edge_order_lt(g.edge(a), g.edge(b)); });
  std::vector<double> rank_of(g.edge_slots(), 0.0);
  for (size_t r = 0; r < ids.size(); ++r) rank_of[ids[r]] = static_cast<double>(r);
  const double chain_w = -1.0;

  for (VertexId u = 0; u < g.vertex_count(); ++u) {
    size_t k = std::max<size_t>(1, g.degree(u));
    res.first_copy[u] = static_cast<VertexId>(res.orig_vertex.size());
    for (size_t i = 0; i < k; ++i) {
      VertexId c = res.out.add_vertex();
      res.orig_vertex.push_back(u);
      if (i > 0) {
        EdgeId ce = res.out.add_edge(c - 1, c, chain_w);
        res.orig_edge.push_back(kNoEdge);
        (void)ce;
      }
    }
  }
  for (EdgeId eid : g.edge_ids()) {
    const Edge& e = g.edge(eid);
    auto slot = [&](VertexId x) {
      const auto& list = g.incident(x);
      size_t i = std::find(list.begin(), list.end(), eid) - list.begin();
      return res.first_copy[x] + static_cast<VertexId>(i);
    };
    EdgeId oe = res.out.add_edge(slot(e.u), slot(e.v), rank_of[eid]);
    res.orig_edge.push_back(eid);
    res.image_edge[eid] = oe;
  }
  return res;
}

bool bfs_connected(const Graph& g, const std::vector<VertexId>& restrict_to) {
  if (restrict_to.empty()) return true;
  std::vector<uint8_t> in(g.vertex_count(), 0);
  size_t distinct = 0;
  for (VertexId v : restrict_to) {
    if (v >= g.vertex_count()) throw ContractError("bfs_connected: vertex out of range");
    if (!in[v]) {
      in[v] = 1;
      ++distinct;
    }
  }
  std::vector<VertexId> queue{restrict_to[0]};
  std::vector<uint8_t> seen(g.vertex_count(), 0);
  seen[restrict_to[0]] = 1;
  size_t reached = 1;
  for (size_t head = 0; head < queue.size(); ++head) {
    VertexId v = queue[head];
    for (EdgeId eid : g.incident(v)) {
      VertexId w = g.other(eid, v);
      if (in[w] && !seen[w]) {
        seen[w] = 1;
        ++reached;
        queue.push_back(w);
      }
    }
  }
  return reached == distinct;
}

bool bfs_connected(const Graph& g) {
  std::vector<VertexId> all(g.vertex_count());
  for (VertexId v = 0; v < g.vertex_count(); ++v) all[v] = v;
  return bfs_connected(g, all);
}

void write_graph(std::ostream& os, const Graph& g) {
  os << g.vertex_count() << ' ' << g.edge_count() << '\n';
  char buf[64];
  for (EdgeId eid : g.edge_ids()) {
    const Edge& e = g.edge(eid);
    std::snprintf(buf, sizeof buf, "%u %u %.17g\n", e.u, e.v, e.weight);
    os << buf;
  }
}

Graph read_graph(std::istream& is, bool simple) {
  size_t n = 0, m = 0;
  if (!(is >> n >> m)) throw ContractError("read_graph: bad header");
  Graph g = simple ? Graph::simple(n) : Graph::multi(n);
  for (size_t i = 0; i < m; ++i) {
    VertexId u, v;
    double w;
    if (!(is >> u >> v >> w)) throw ContractError("read_graph: bad edge line");
    g.add_edge(u, v, w);
  }
  return g;
}

}  // namespace dynmsf
