#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "dynmsf/errors.hpp"
#include "dynmsf/graph.hpp"
#include "dynmsf/top_forest.hpp"

namespace dynmsf {

class RegionMsf;

// Connect-index payload kept at every cluster C of the forest decomposition:
//   edge_by_label: pairs (region label, edge), sorted by label, where the edge
//     is the edge_order-minimum non-tree edge with at least one endpoint in C
//     and at least one endpoint in the labeled region;
//   region_labels: sorted labels of the regions intersecting C's vertex set.
// Joining two children is a pair of sorted merges, keeping the smaller edge
// when a label appears on both sides.
struct ConnectPayload {
  std::vector<std::pair<uint32_t, EdgeId>> edge_by_label;
  std::vector<uint32_t> region_labels;
};

struct ConnectAux {
  using Payload = ConnectPayload;
  RegionMsf* owner = nullptr;
  Payload create(const ClusterView& v);
  Payload join(const ClusterView& v, Payload& a, Payload& b);
  void split(const ClusterView&, Payload&) {}
};

struct RegionConfig {
  // Upper invariant: N(R) <= upper_c * r * log2(n) for every region R.
  double upper_c = 8.0;
  // Optional JSON-lines event log; one object per completed update.
  std::ostream* event_sink = nullptr;
};

// Compressed connecting tree of a region's marked vertices. Marked vertices
// and branch vertices are nodes; maximal unmarked degree-2 chains between
// nodes are collapsed into super edges that remember their vertex path.
struct RegionTree {
  struct SuperEdge {
    VertexId a = 0, b = 0;
    std::vector<VertexId> path;  // a .. b inclusive
  };
  std::vector<VertexId> marked;  // sorted
  std::vector<VertexId> nodes;   // marked plus branch vertices, sorted
  std::vector<SuperEdge> edges;
  std::vector<VertexId> region;  // every vertex of the region, sorted
  size_t edge_count() const { return edges.size(); }
};

struct ForestDelta {
  std::vector<EdgeId> added, removed;
};

struct RegionStats {
  uint64_t updates = 0;
  uint64_t last_update_ops = 0;  // forest ops spent by the last update
  uint64_t max_update_ops = 0;
  uint64_t total_ops = 0;
  uint64_t splits = 0, merges = 0;
};

// Dynamic forest F inside a graph H with at most h_budget non-tree edges.
// Maintains a partition of each tree of F into regions balanced by
// N(R) = number of region vertices incident to non-tree edges, plus a
// per-cluster connect index answering "cheapest non-tree edge between the
// trees of u and v". Region labels live in 1..n; a region equal to a whole
// component of H with N(R) = 0 stays unlabeled. Per edge the structure keeps
// f(e) = 1 iff e is in F, h(e) = 1 iff e is a non-tree edge or an
// inter-region forest edge, and for h(e) = 1 the pair of endpoint region
// labels. A vertex is marked while it has an incident h(e) = 1 edge.
class RegionMsf {
 public:
  struct RegionInfo {
    uint32_t label = 0;
    VertexId rep = 0;
    uint64_t weight = 0;  // N(R)
  };

  // Takes a snapshot of h; forest lists the edge ids forming the initial
  // forest. Throws CapacityError when h has more than h_budget non-tree
  // edges, CycleError when forest is not a forest.
  RegionMsf(const Graph& h, const std::vector<EdgeId>& forest,
            uint64_t h_budget, RegionConfig cfg = RegionConfig{});
  // Convenience: start from the unique minimum spanning forest of h.
  static RegionMsf from_msf(const Graph& h, uint64_t h_budget,
                            RegionConfig cfg = RegionConfig{});

  RegionMsf(const RegionMsf&) = delete;
  RegionMsf& operator=(const RegionMsf&) = delete;

  // Plain updates. insert_tree links two distinct trees (CycleError
  // otherwise); insert_nontree counts against h_budget (CapacityError).
  // erase removes any live edge; deleting a forest edge splits its tree and
  // performs no replacement search. promote turns a non-tree edge joining two
  // trees into a forest edge; demote does the reverse, keeping the edge.
  EdgeId insert_nontree(VertexId u, VertexId v, double w);
  EdgeId insert_tree(VertexId u, VertexId v, double w);
  void erase(EdgeId id);
  void promote(EdgeId id);
  void demote(EdgeId id);

  // Batched insertion of non-tree edges. At most batch_cap() edges per call
  // (ConfigError); every edge must keep the forest unchanged, i.e. its
  // endpoints must already be connected (ContractError), and the budget must
  // hold for the whole batch (CapacityError). One rebalancing pass total.
  std::vector<EdgeId> batched_insert(
      const std::vector<std::tuple<VertexId, VertexId, double>>& edges);
  uint64_t batch_cap() const;

  // Cheapest non-tree edge with one endpoint in u's tree and one in v's tree;
  // the trees must be distinct (ContractError). nullopt when none exists.
  std::optional<EdgeId> connect(VertexId u, VertexId v) const;

  // Wrapper keeping the forest equal to the unique minimum spanning forest
  // of the current graph. Returns the id of the inserted edge and the forest
  // delta; msf_delete reconnects via connect when a forest edge dies.
  std::pair<EdgeId, ForestDelta> msf_insert(VertexId u, VertexId v, double w);
  ForestDelta msf_delete(EdgeId id);

  // Region procedures. find_region_tree temporarily cuts the boundary of
  // v's region and restores it before returning. merge_region merges v's
  // region with a neighboring region (false when the region is a whole
  // component). split_region needs 3 <= t <= N(R_v) and carves the region
  // into subregions aiming for t/3 <= N <= t; every subregion gets a fresh
  // label and the old label is recycled. rebalance_step runs the greedy
  // one-split-per-update discipline (split a heaviest region when it
  // outgrows the split target).
  RegionTree find_region_tree(VertexId v);
  bool merge_region(VertexId v);
  std::vector<RegionInfo> split_region(VertexId v, uint64_t t);
  void rebalance_step();

  // Introspection.
  const Graph& graph() const { return h_; }
  std::vector<EdgeId> forest_edges() const;  // sorted ids
  bool in_forest(EdgeId id) const;
  bool same_tree(VertexId u, VertexId v) const;
  std::optional<EdgeId> path_max_edge(VertexId u, VertexId v) const;
  uint64_t nontree_count() const { return nontree_count_; }
  uint64_t h_budget() const { return h_budget_; }
  double r() const { return r_; }
  double rho() const { return rho_; }
  uint64_t split_target() const { return t_split_; }
  uint32_t label_of(VertexId v) const { return vlabel_.at(v); }
  std::vector<RegionInfo> regions() const;  // sorted by label
  const RegionStats& stats() const { return stats_; }
  const TopForest<ConnectAux>& forest() const { return fhat_; }

  // Full consistency audit against from-scratch recomputation: bitmaps,
  // label pairs, marks, region partition and bounds, label hygiene, and the
  // per-cluster connect index. Returns human-readable violations; empty
  // means consistent.
  std::vector<std::string> audit() const;

 private:
  friend struct ConnectAux;
  struct UpdateScope;

  struct Tup {
    VertexId rep = 0;
    uint64_t s = 0;
  };

  void ensure_edge_slot(EdgeId id);
  const Edge& live_edge(EdgeId id) const;
  uint32_t alloc_label();
  void free_label(uint32_t l);
  void tup_add(uint32_t l, VertexId rep, uint64_t s);
  void tup_erase(uint32_t l);
  void tup_set_s(uint32_t l, uint64_t s);
  void region_weight_bump(uint32_t l, int64_t d);

  // Label the (currently unlabeled) region of v, i.e. v's whole tree.
  uint32_t ensure_region_label(VertexId v);
  // Recycle the label of v's region when the region lost its last marked
  // vertex; the region is a whole component then.
  void drop_label_if_markless(VertexId v);
  // Lower-bound repair: merge v's region when N < r/3 and it is not a
  // whole component.
  void repair_lower(VertexId v);

  EdgeId do_insert_nontree(VertexId u, VertexId v, double w);
  EdgeId do_insert_tree(VertexId u, VertexId v, double w);
  void do_erase(EdgeId id);
  void do_promote(EdgeId id);
  void do_demote(EdgeId id);
  // Shared forest-edge removal: handles inter- and intra-region cases,
  // splits region bookkeeping, repairs the lower bound. When removing, the
  // edge leaves the graph; otherwise it stays (demote re-adds it non-tree).
  void detach_forest_edge(EdgeId id, bool removing);

  void add_h_incidence(VertexId v);
  void remove_h_incidence(VertexId v);
  void bump_nontree_deg(VertexId v, int dir);
  void refresh_payload_at(VertexId v);
  // After relabeling the given vertices, rebuild the connect index of every
  // other tree reached by one of their non-tree edges (its entries cite the
  // labels just rewritten).
  void refresh_far_trees(const std::vector<VertexId>& relabeled);
  void emit_event(const char* op, const std::string& extra_json,
                  uint64_t ops_before);

  std::vector<VertexId> region_vertices_of(VertexId v) const;  // BFS by label

  Graph h_;
  uint64_t h_budget_ = 0;
  RegionConfig cfg_;
  double r_ = 0.0, rho_ = 0.0;
  uint64_t t_split_ = 3;
  uint64_t nontree_count_ = 0;

  TopForest<ConnectAux> fhat_;

  std::vector<uint8_t> f_, hbit_;            // per edge id
  std::vector<std::pair<uint32_t, uint32_t>> rlabel_;  // (u side, v side)
  std::vector<uint32_t> nontree_deg_;        // per vertex: live non-tree edges
  std::vector<uint32_t> h_inc_;              // per vertex: live h(e)=1 edges
  std::vector<uint32_t> vlabel_;             // per vertex region label, 0 = none

  std::set<uint32_t> lfree_;                 // unused labels, ascending
  std::map<uint32_t, Tup> regions_;          // label -> (rep, N)
  std::set<std::pair<uint64_t, uint32_t>> by_weight_;  // (N, label)

  RegionStats stats_;
  int update_depth_ = 0;
};

}  // namespace dynmsf
