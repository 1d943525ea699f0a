#pragma once

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "dynmsf/errors.hpp"

namespace dynmsf {

using VertexId = uint32_t;
using EdgeId = uint64_t;
inline constexpr EdgeId kNoEdge = ~0ull;

struct Edge {
  EdgeId id = kNoEdge;
  VertexId u = 0, v = 0;
  double weight = 0.0;
  uint64_t serial = 0;  // insertion counter; breaks ties among parallels
  bool alive = false;

  VertexId lo() const { return u < v ? u : v; }
  VertexId hi() const { return u < v ? v : u; }
};

// Strict total order on edges: weight, then (lo, hi), then insertion serial.
// Returns <0, 0, >0; 0 only for the same edge record.
int edge_order_cmp(const Edge& a, const Edge& b);
inline bool edge_order_lt(const Edge& a, const Edge& b) { return edge_order_cmp(a, b) < 0; }

// Weighted graph with stable 64-bit edge handles. Vertices are dense ids.
// Parallel edges are allowed only in multi mode; self loops never.
// Deleting an edge tombstones its slot; ids are never reused.
class Graph {
 public:
  static Graph simple(size_t n) { return Graph(n, true); }
  static Graph multi(size_t n) { return Graph(n, false); }
  Graph() : Graph(0, true) {}

  bool is_simple() const { return simple_; }
  VertexId add_vertex();
  EdgeId add_edge(VertexId u, VertexId v, double w);
  void delete_edge(EdgeId e);

  bool has_edge(EdgeId e) const { return e < edges_.size() && edges_[e].alive; }
  const Edge& edge(EdgeId e) const;
  void set_weight(EdgeId e, double w);
  VertexId other(EdgeId e, VertexId x) const;

  size_t vertex_count() const { return inc_.size(); }
  size_t edge_count() const { return alive_; }
  size_t edge_slots() const { return edges_.size(); }  // ids are < this bound
  size_t degree(VertexId v) const { return inc_.at(v).size(); }
  const std::vector<EdgeId>& incident(VertexId v) const { return inc_.at(v); }
  std::vector<EdgeId> edge_ids() const;  // alive ids, ascending

 private:
  Graph(size_t n, bool simple) : simple_(simple), inc_(n) {}

  bool simple_;
  size_t alive_ = 0;
  uint64_t next_serial_ = 0;
  std::vector<Edge> edges_;
  std::vector<std::vector<EdgeId>> inc_;
};

struct Cut {
  std::vector<VertexId> side;
};

struct VertexPartition {
  std::vector<std::vector<VertexId>> parts;
};

// Number of edge endpoints inside s (each parallel edge counts separately).
uint64_t volume(const Graph& g, const std::vector<VertexId>& s);

// (crossing edge count, min(vol(s), vol(complement))). Throws ContractError
// when the smaller volume is zero: conductance is undefined there and
// callers must not silently read 0 or infinity.
std::pair<uint64_t, uint64_t> conductance_parts(const Graph& g, const std::vector<VertexId>& s);
double conductance(const Graph& g, const std::vector<VertexId>& s);

// Exhaustive check over all 2^(n-1) cuts; SizeError when n > 24.
bool is_gamma_expander(const Graph& g, double gamma);

// Deterministic minimum spanning forest under edge_order_cmp; ids ascending.
std::vector<EdgeId> kruskal_msf(const Graph& g);

// Copy of g with each weight replaced by its rank 0..m-1 in edge_order_cmp
// order. The MSF is unchanged (order-preserving reweighting).
Graph rank_reweight(const Graph& g);

struct Degree3Result {
  Graph out;                          // simple, max degree <= 3
  std::vector<VertexId> orig_vertex;  // out vertex -> input vertex
  std::vector<EdgeId> orig_edge;      // out edge -> input edge; kNoEdge for chain edges
  std::vector<EdgeId> image_edge;     // input edge id -> out edge id
  std::vector<VertexId> first_copy;   // input vertex -> first of its copies
};

// Splits every vertex into one copy per incident edge, joined by a chain of
// edges cheaper than every input weight. Contracting the chain edges of the
// output MSF yields the input MSF.
Degree3Result degree3_transform(const Graph& g);

// Connectivity of the subgraph induced by restrict_to (empty set: true).
bool bfs_connected(const Graph& g, const std::vector<VertexId>& restrict_to);
bool bfs_connected(const Graph& g);

// Text format: "n m" header line, then one "u v w" line per edge in id
// order. Weights render with enough digits to round-trip binary64 exactly.
void write_graph(std::ostream& os, const Graph& g);
Graph read_graph(std::istream& is, bool simple);

// Union-find with path halving; used by the Kruskal oracle and callers
// needing throwaway connectivity.
class Dsu {
 public:
  explicit Dsu(size_t n) : p_(n) {
    for (size_t i = 0; i < n; ++i) p_[i] = static_cast<VertexId>(i);
  }
  VertexId find(VertexId x) {
    while (p_[x] != x) {
      p_[x] = p_[p_[x]];
      x = p_[x];
    }
    return x;
  }
  bool unite(VertexId a, VertexId b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    p_[a] = b;
    return true;
  }

 private:
  std::vector<VertexId> p_;
};

}  // namespace dynmsf
