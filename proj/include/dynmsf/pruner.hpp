#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "dynmsf/graph.hpp"
#include "dynmsf/spectral.hpp"

namespace dynmsf {

inline constexpr uint32_t kNoCluster = ~0u;

// Graph indexes (ascending, 0-based) of the replicas that include one edge,
// drawn so that membership in each of the h replicas is an independent
// Bernoulli(p). Works by repeatedly picking the next including replica via a
// binary descent over precomputed geometric prefix masses, skipping the
// replicas in between without touching them.
std::vector<size_t> sample_graph_picks(size_t h, double p, std::mt19937_64& rng);

// An edge of the host graph joining two distinct clusters. The host edge id
// is the stable key; cluster endpoints follow the current vertex->cluster map.
struct CrossEdge {
  EdgeId id = kNoEdge;
  VertexId u = 0, v = 0;
};

// O(1)-sized reclustering step: `destroyed` disappear, `created` take over
// exactly the union of their members. X is unchanged by the delta itself.
struct ClusterDelta {
  std::vector<uint32_t> destroyed;
  std::vector<std::pair<uint32_t, std::vector<VertexId>>> created;
};

// Derived pruning constants. `derive` computes the exact cascade from
// (host n, gamma, kappa, delta); tests and integrations may also fill the
// fields directly, since the realistic cascade makes the walk step counts
// astronomically large at any bench-scale n.
struct PrunerParams {
  double gamma = 0.0;        // expansion target of the host region
  double theta = 0.0;        // sweep-cut conductance bound (gamma / 96)
  double theta_plus = 0.0;   // damped cube of theta; scales the degree floor
  double gamma_prime = 0.0;  // post-prune expansion guarantee (theta_plus^3 / 3^8)
  double rho = 0.0;          // sampling min-degree scale (theta_plus / 3)
  double sample_p = 0.0;     // per-edge replica inclusion probability
  double d_max = 0.0;        // w.h.p. replica degree bound (6 p kappa)
  double kappa = 0.0;        // cluster size floor
  int b_max = 1;             // largest sweep scale probed (companion cap)
  int b_max_plain = 1;       // same cap before the companion-degree adjustment
  size_t h_max = 1;          // replicas drawn: ceil(64 delta / (gamma kappa))

  // A cluster is low-degree in a replica below this many incident edges.
  double low_degree_floor() const { return kappa * theta_plus * sample_p; }

  // Exact parameter cascade for a host with n vertices, expansion gamma,
  // cluster scale kappa, and deletion budget delta. c scales the sampling
  // failure exponent; companion_degree bounds companion vertex degrees for
  // the b cap (expander out-degree + host degree).
  static PrunerParams derive(size_t n, double gamma, double kappa, uint64_t delta,
                             double c = 1.0, double companion_degree = 15.0);
};

struct PrunerConfig {
  std::ostream* events = nullptr;  // JSON lines: init, prune, cluster deltas
  int expander_d = 12;             // out-degree of per-cluster mixing graphs
};

struct PruneOutcome {
  std::vector<uint32_t> removed;  // clusters taken out of X, in removal order
  bool exhausted = false;         // replica list ran out before line-of-sight ended
  size_t graphs_consumed = 0;     // replicas popped by this call
};

// Watches a clustered decremental host region through a front-first list of
// sampled cluster-level replicas. Each replica carries a simple companion
// (original endpoints of its sampled edges plus a per-cluster mixing graph)
// on which truncated-walk sweeps are cached per (start, scale) and kept
// exact under deletions by rerunning only the starts whose walks crossed a
// changed edge. On each host deletion, `prune` removes cluster sets that
// certify a low-conductance or low-degree cut, consuming one replica per
// removal so that later decisions never reuse randomness already exposed.
class ClusterPruner {
 public:
  // `clusters` maps ids to disjoint member lists covering their vertices;
  // `edges` are the current inter-cluster host edges (distinct endpoints
  // pairs). All clusters start active.
  ClusterPruner(size_t host_n,
                const std::vector<std::pair<uint32_t, std::vector<VertexId>>>& clusters,
                const std::vector<CrossEdge>& edges, const PrunerParams& params,
                uint64_t seed, const PrunerConfig& cfg = {});
  ~ClusterPruner();
  ClusterPruner(const ClusterPruner&) = delete;
  ClusterPruner& operator=(const ClusterPruner&) = delete;

  // One host deletion: drops the edge from every replica (rerunning the
  // affected cached walks), retires `undersized_created` (fresh clusters too
  // small to stand alone, already cut off from the region: no replica may
  // still hold an edge into them), then repeatedly removes low-degree or
  // swept-out cluster sets from the front replica, popping it per removal.
  PruneOutcome prune(EdgeId deleted_edge,
                     const std::vector<uint32_t>& undersized_created = {});

  // Reclustering from the owner. Replica edges incident to destroyed
  // clusters are lifted, re-attached where still inter-cluster, and dropped
  // for good where both endpoints merged; companions rebuild the affected
  // endpoint sets and mixing graphs, and every cached walk that crossed a
  // lifted edge is rerun.
  void apply_cluster_delta(const ClusterDelta& delta);

  // --- structure queries -------------------------------------------------
  const PrunerParams& params() const { return params_; }
  size_t replica_count() const;                  // replicas still unconsumed
  std::optional<size_t> front_replica() const;   // index of the front replica
  std::vector<size_t> alive_replicas() const;    // ascending indexes
  bool replica_has(size_t g, EdgeId host_e) const;
  std::vector<EdgeId> replica_edges(size_t g) const;  // host ids, ascending
  const Graph& companion(size_t g) const;
  size_t replica_degree(size_t g, uint32_t cluster) const;
  std::vector<uint32_t> low_degree(size_t g) const;  // ascending cluster ids
  // Companion endpoint set of a cluster in one replica, as last built.
  std::vector<VertexId> endpoint_set(size_t g, uint32_t cluster) const;

  // --- cached walk index -------------------------------------------------
  std::vector<EdgeId> edges_visited(size_t g, int b, VertexId s) const;
  std::vector<VertexId> starts_visiting(size_t g, int b, EdgeId host_e) const;
  bool start_active(size_t g, int b, VertexId s) const;
  std::vector<VertexId> active_starts(size_t g, int b) const;
  // (replica, b, start) triples rerun by the last prune/apply_cluster_delta.
  const std::vector<std::tuple<size_t, int, VertexId>>& last_reruns() const {
    return last_reruns_;
  }

  // --- cluster state -----------------------------------------------------
  bool cluster_active(uint32_t cluster) const;
  std::vector<uint32_t> active_clusters() const;  // ascending ids
  uint32_t cluster_of(VertexId v) const;
  const std::vector<VertexId>& members(uint32_t cluster) const;
  size_t cumulative_removed_vertices() const { return removed_vertices_; }

  // --- audit hooks -------------------------------------------------------
  // Number of certificate-driven removal events so far, and the span of
  // such counts observed when a replica answered front-of-list queries.
  uint64_t removal_version() const { return tainted_version_; }
  std::optional<std::pair<uint64_t, uint64_t>> consult_span(size_t g) const;
  // Full recomputation check of every cached structure on every unconsumed
  // replica: walk results, duals, active bits, degrees, low-degree lists,
  // companion wiring. Returns a description of the first mismatch.
  std::optional<std::string> audit() const;

 private:
  struct Replica;

  const Replica& rep(size_t g) const;
  Replica& rep(size_t g);
  void build_replicas(const std::vector<CrossEdge>& edges);
  void attach_endpoints(size_t g, uint32_t cluster, std::vector<VertexId> bar);
  void prime_index(size_t g);
  NibbleResult run_start(size_t g, int b, VertexId s) const;
  void store_run(size_t g, int b, VertexId s);
  void erase_entry(size_t g, int b, VertexId s);
  void erase_start(size_t g, VertexId s);
  bool eligible_start(size_t g, VertexId s) const;
  std::set<std::pair<int, VertexId>> collect_jobs(size_t g,
                                                  const std::vector<EdgeId>& eids) const;
  void rerun(size_t g, const std::set<std::pair<int, VertexId>>& jobs);
  void refresh_low(size_t g, uint32_t cluster);
  void retire_clusters(const std::vector<uint32_t>& clusters, std::optional<size_t> skip,
                       bool require_isolated);
  void note_consult(size_t g);
  std::vector<uint32_t> round_to_clusters(size_t g,
                                          const std::vector<VertexId>& cut) const;
  std::mt19937_64 expander_rng();

  size_t n_ = 0;
  PrunerParams params_;
  PrunerConfig cfg_;
  uint64_t seed_ = 0;
  uint64_t expander_serial_ = 0;

  std::map<uint32_t, std::vector<VertexId>> members_;
  std::vector<uint32_t> cluster_of_;
  std::set<uint32_t> active_;

  std::vector<Replica> replicas_;
  std::deque<size_t> order_;  // unconsumed replica indexes, front first

  uint64_t x_version_ = 0;        // every removal event
  uint64_t tainted_version_ = 0;  // removal events decided by a replica
  size_t removed_vertices_ = 0;
  std::vector<std::tuple<size_t, int, VertexId>> last_reruns_;
};

}  // namespace dynmsf
