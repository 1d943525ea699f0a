#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dynmsf/errors.hpp"
#include "dynmsf/graph.hpp"

namespace dynmsf {

// Order key for forest edges: same strict total order as edge_order_cmp, so
// path maxima are unique and match the graph-side order.
struct EdgeKey {
  double weight = 0.0;
  VertexId lo = 0, hi = 0;
  uint64_t serial = 0;
};

int key_cmp(const EdgeKey& a, const EdgeKey& b);
inline EdgeKey key_of(const Edge& e) { return EdgeKey{e.weight, e.lo(), e.hi(), e.serial}; }

// Dynamic forest over a fixed vertex universe. Each tree carries a binary
// rake/compress cluster decomposition (every cluster has at most two
// boundary vertices; height stays logarithmic) plus rooted parent arrays.
// Structural changes rebuild the decomposition of the affected trees; an
// observer is told before clusters die and after they are rebuilt, which is
// how payload hosts keep the create/join/split discipline intact.
class TopForestCore {
 public:
  enum Kind : int8_t { kLeaf = 0, kCompress = 1, kRake = 2 };

  struct Cluster {
    Kind kind = kLeaf;
    int32_t child0 = -1, child1 = -1, parent = -1;
    VertexId b0 = 0, b1 = 0;    // boundary vertices
    VertexId shared = 0;        // compress/rake: vertex joining the children
    EdgeId edge = kNoEdge;      // leaf only
    // aggregates
    uint32_t plen = 0;          // edges on the b0..b1 path inside the cluster
    uint32_t nmd[2] = {0, 0};   // min dist from b0/b1 to a marked vertex inside
    VertexId nmw[2] = {0, 0};   // witnesses for nmd
    uint32_t edges = 0;         // edge count (tree_size = edges + 1)
    bool has_tag = false;
    int32_t tin = 0, tout = 0;  // cluster-tree Euler interval
  };

  struct Observer {
    virtual ~Observer() = default;
    virtual void pre_dismantle(int32_t tree) = 0;
    virtual void post_build(int32_t tree) = 0;
  };

  static constexpr uint32_t kInf = 0xffffffffu;

  explicit TopForestCore(size_t n);

  void set_observer(Observer* ob) { observer_ = ob; }

  // Structure. link throws CycleError when u and v are already connected;
  // cut throws NotPresentError for edges not in the forest.
  void link(VertexId u, VertexId v, const EdgeKey& k, EdgeId id, bool tagged = false);
  void cut(EdgeId id);
  bool has_forest_edge(EdgeId id) const;

  // Queries.
  bool same_tree(VertexId u, VertexId v) const;
  size_t tree_size(VertexId v) const;
  std::optional<EdgeId> path_max_edge(VertexId u, VertexId v) const;
  std::optional<VertexId> nearest_marked(VertexId v) const;
  std::optional<EdgeId> first_special_edge_on_path(VertexId u, VertexId v) const;
  uint64_t dist(VertexId u, VertexId v) const;

  // Reference-counted marks: a vertex is marked while its count is positive.
  void mark(VertexId v);
  void unmark(VertexId v);
  bool is_marked(VertexId v) const { return mark_count_.at(v) > 0; }

  void set_tag(EdgeId id, bool t);
  bool tag(EdgeId id) const;

  size_t vertex_count() const { return tree_of_.size(); }
  uint64_t ops() const { return ops_; }

  // Shape access for payload hosts and audits.
  int32_t tree_of(VertexId v) const { return tree_of_.at(v); }
  int32_t root_cluster(int32_t tree) const { return trees_[tree].root; }
  const std::vector<Cluster>& clusters(int32_t tree) const { return trees_[tree].clusters; }
  const std::vector<VertexId>& tree_vertices(int32_t tree) const { return trees_[tree].verts; }
  const std::vector<EdgeId>& forest_edges_at(VertexId v) const { return adj_.at(v); }
  std::pair<VertexId, VertexId> forest_edge_ends(EdgeId id) const;
  size_t cluster_height(int32_t tree) const;
  // Rebuild a tree's decomposition in place (shape may change); observer
  // callbacks fire as usual. Used after bulk payload-relevant changes.
  void refresh_tree(VertexId v);

 private:
  struct FEdge {
    VertexId u, v;
    EdgeKey key;
    bool tagged = false;
    bool present = false;
    int32_t tree = -1;
    int32_t leaf = -1;  // leaf cluster index within tree
  };

  struct Tree {
    std::vector<VertexId> verts;
    std::vector<Cluster> clusters;
    int32_t root = -1;
    bool live = false;
  };

  int32_t new_tree();
  void release_tree(int32_t t);
  void build_tree(int32_t t, const std::vector<VertexId>& verts);
  void rebuild_from(VertexId seed);
  std::vector<VertexId> component_of(VertexId seed) const;
  void leaf_aggregates(int32_t t, int32_t ci);
  void join_aggregates(int32_t t, int32_t ci);
  void bubble_up(int32_t t, std::vector<int32_t> dirty);
  void touch_vertex_aggregates(VertexId v);
  bool cluster_contains(int32_t t, int32_t ci, VertexId v) const;
  VertexId walk_lca(VertexId u, VertexId v) const;

  Observer* observer_ = nullptr;
  mutable uint64_t ops_ = 0;  // query ops count too

  std::vector<Tree> trees_;
  std::vector<int32_t> free_trees_;
  std::vector<int32_t> tree_of_;
  std::vector<std::vector<EdgeId>> adj_;
  std::vector<uint32_t> mark_count_;

  // rooted arrays, valid per current tree assignment
  std::vector<VertexId> parent_;
  std::vector<EdgeId> pedge_;
  std::vector<uint32_t> depth_;
  std::vector<std::vector<int32_t>> leaf_of_;  // vertex -> leaf cluster ids in its tree

  std::vector<FEdge> fe_;  // registry indexed by dense slot
  std::vector<int64_t> fe_slot_;  // EdgeId -> slot (grown on demand)
  int64_t slot_of(EdgeId id) const;
  int64_t slot_of_checked(EdgeId id) const;
  int64_t ensure_slot(EdgeId id);
};

// Payload metadata handed to the callbacks.
struct ClusterView {
  TopForestCore::Kind kind;
  EdgeId edge;         // leaf only
  VertexId b0, b1;     // boundary of the cluster
  VertexId shared;     // compress/rake: junction vertex
};

// Aux concept:
//   struct Aux {
//     using Payload = ...;
//     Payload create(const ClusterView&);                       // leaf
//     Payload join(const ClusterView&, Payload&, Payload&);     // children
//     void split(const ClusterView&, Payload&);                 // teardown
//   };
// join must be associative up to the decomposition: any rake/compress order
// over the same tree yields an equivalent payload.
template <class Aux>
class TopForest : public TopForestCore::Observer {
 public:
  TopForest(size_t n, Aux aux) : core_(n), aux_(std::move(aux)) {
    core_.set_observer(this);
    payload_.resize(16);
  }

  TopForestCore& core() { return core_; }
  const TopForestCore& core() const { return core_; }
  Aux& aux() { return aux_; }

  void link(VertexId u, VertexId v, const EdgeKey& k, EdgeId id, bool tagged = false) {
    core_.link(u, v, k, id, tagged);
  }
  void cut(EdgeId id) { core_.cut(id); }
  // Re-run create/join after external payload inputs changed for v's tree.
  void invalidate_tree(VertexId v) { core_.refresh_tree(v); }

  // While paused, payload create/join/split callbacks are skipped and the
  // affected payload arrays are dropped. Callers that pause must call
  // refresh_payload for every live tree they touched before reading payloads
  // again; split callbacks for dropped arrays are never replayed.
  void set_payload_paused(bool p) { payload_paused_ = p; }
  bool payload_paused() const { return payload_paused_; }
  // Rebuild the payload array of v's tree from the current cluster shape.
  void refresh_payload(VertexId v) { post_build_payload(core_.tree_of(v)); }
  size_t payload_size(int32_t tree) const {
    return payload_.size() > static_cast<size_t>(tree) ? payload_[tree].size() : 0;
  }

  bool has_root_payload(VertexId v) const {
    int32_t t = core_.tree_of(v);
    return core_.root_cluster(t) >= 0;
  }
  // Payload at the root cluster of v's tree. Singleton trees have none.
  const typename Aux::Payload& root_payload(VertexId v) const {
    int32_t t = core_.tree_of(v);
    int32_t r = core_.root_cluster(t);
    if (r < 0) throw NotPresentError("root_payload: singleton tree");
    return payload_[t][r];
  }
  const typename Aux::Payload& payload(int32_t tree, int32_t cluster) const {
    return payload_.at(tree).at(cluster);
  }

  void pre_dismantle(int32_t tree) override {
    const auto& cl = core_.clusters(tree);
    if (payload_.size() <= static_cast<size_t>(tree)) return;
    auto& ps = payload_[tree];
    if (payload_paused_) {
      ps.clear();
      return;
    }
    if (ps.size() != cl.size()) return;  // never built
    // top-down: parents are split before their children
    for (size_t i = cl.size(); i-- > 0;) {
      aux_.split(view_of(cl[i]), ps[i]);
    }
    ps.clear();
  }

  void post_build(int32_t tree) override {
    if (payload_.size() <= static_cast<size_t>(tree)) payload_.resize(tree + 1);
    if (payload_paused_) {
      payload_[tree].clear();
      return;
    }
    post_build_payload(tree);
  }

 private:
  static ClusterView view_of(const TopForestCore::Cluster& c) {
    return ClusterView{c.kind, c.edge, c.b0, c.b1, c.shared};
  }

  void post_build_payload(int32_t tree) {
    const auto& cl = core_.clusters(tree);
    if (payload_.size() <= static_cast<size_t>(tree)) payload_.resize(tree + 1);
    auto& ps = payload_[tree];
    ps.clear();
    ps.reserve(cl.size());
    // cluster arrays are built children-before-parents
    for (size_t i = 0; i < cl.size(); ++i) {
      const auto& c = cl[i];
      if (c.kind == TopForestCore::kLeaf) {
        ps.push_back(aux_.create(view_of(c)));
      } else {
        ps.push_back(aux_.join(view_of(c), ps[c.child0], ps[c.child1]));
      }
    }
  }

  TopForestCore core_;
  Aux aux_;
  bool payload_paused_ = false;
  std::vector<std::vector<typename Aux::Payload>> payload_;
};

}  // namespace dynmsf
