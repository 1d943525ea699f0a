#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "dynmsf/errors.hpp"
#include "dynmsf/graph.hpp"
#include "dynmsf/top_forest.hpp"

namespace dynmsf {

// Half-open update-index window [lk, (l+1)k) containing j. ConfigError when
// k is zero.
std::pair<uint64_t, uint64_t> k_interval_of(uint64_t j, uint64_t k);

// Edge of a compressed decremental instance: either one graph edge or the
// contraction of a maximal forest path whose interior vertices are unmarked
// and have degree two in the connecting subforest. A contraction is keyed by
// its order-max member so it behaves exactly like that member in the
// instance order.
struct InstanceEdge {
  VertexId u = 0, v = 0;
  EdgeKey key;
  EdgeId gid = kNoEdge;         // single edge id; kNoEdge for contractions
  std::vector<EdgeId> members;  // contraction: forest edge ids in path order
  bool is_super() const { return gid == kNoEdge; }
};

// Instance edge order: key, then contractions before singles (a single that
// parallels its own forest copy must lose the tie), then build position.
bool instance_edge_lt(const InstanceEdge& a, size_t ia, const InstanceEdge& b, size_t ib);

struct InstanceGraph {
  std::vector<InstanceEdge> edges;  // sorted by instance_edge_lt
  size_t super_count = 0;
};

// Compressed multigraph over e1 and e2 plus the forest paths connecting
// their endpoints: within each tree the minimal subtree spanning the marked
// endpoint vertices is kept and its unmarked degree-2 chains collapse into
// contraction edges. Edges may be dead in g (stored endpoints and weights
// are still used); forest must list live forest edges.
InstanceGraph build_decremental_from(const Graph& g, const std::vector<EdgeId>& e1,
                                     const std::vector<EdgeId>& e2,
                                     const std::vector<EdgeId>& forest);

// Black-box decremental MSF over an InstanceGraph. Edges are addressed by
// graph edge id; erase removes every instance edge containing the id (a
// single and a parallel one-member contraction can both match) and reports
// the single edge promoted into the instance forest when the removal
// disconnected it.
class DecrementalMsf {
 public:
  virtual ~DecrementalMsf() = default;
  virtual std::optional<EdgeId> erase(EdgeId ge) = 0;
  virtual bool contains(EdgeId ge) const = 0;
  // True when ge is a live single edge currently outside the instance forest.
  virtual bool covers(EdgeId ge) const = 0;
  // Stable slot enumeration of live non-tree singles, for incremental scans.
  virtual size_t slot_count() const = 0;
  virtual std::optional<EdgeId> nontree_slot(size_t slot) const = 0;
  virtual size_t live_edge_count() const = 0;
  virtual size_t live_single_count() const = 0;
  // Every live contraction must sit inside the instance forest.
  virtual bool contractions_in_forest() const = 0;

  std::vector<EdgeId> nontree_edges() const;
};

using InstanceFactory = std::function<std::unique_ptr<DecrementalMsf>(InstanceGraph)>;

// Reference instance: re-derives the forest after every removal.
class RecomputeInstance : public DecrementalMsf {
 public:
  explicit RecomputeInstance(InstanceGraph ig);
  std::optional<EdgeId> erase(EdgeId ge) override;
  bool contains(EdgeId ge) const override;
  bool covers(EdgeId ge) const override;
  size_t slot_count() const override { return ig_.edges.size(); }
  std::optional<EdgeId> nontree_slot(size_t slot) const override;
  size_t live_edge_count() const override { return live_; }
  size_t live_single_count() const override { return live_singles_; }
  bool contractions_in_forest() const override;

 private:
  void recompute();

  InstanceGraph ig_;
  std::vector<uint8_t> dead_, in_forest_;
  std::vector<size_t> order_;  // slots by instance_edge_lt
  std::vector<std::pair<EdgeId, uint32_t>> where_;  // sorted (graph edge, slot)
  size_t live_ = 0, live_singles_ = 0;
};

InstanceFactory recompute_factory();

enum class LadderMode { amortized, worst_case };

struct LadderConfig {
  // Declared bound on live edges; inserts beyond it raise CapacityError and
  // the level count is fixed at ceil(log2(max_edges)) + 1.
  size_t max_edges = 0;
  InstanceFactory factory;          // defaults to recompute_factory()
  std::ostream* events = nullptr;   // JSON lines: builds, installs, retirements
};

struct LadderStats {
  uint64_t updates = 0;
  uint64_t last_work = 0, max_work = 0, total_work = 0;
  uint64_t r_overflows = 0;  // candidate sets larger than 2 * level count
  std::vector<uint64_t> work_log;  // per-update forest ops plus unit tasks
};

// Fully dynamic MSF built from decremental instances. Non-tree edges are
// parked in per-level instance pairs; deletions collect each touched
// instance's promoted edge, reconnect the forest with the cheapest candidate
// and re-park the whole candidate set at level 0. Level i merges its pair
// into level i+1 every 2^(i+1) updates. The amortized mode performs merges
// in place; the worst-case mode snapshots the pair aside, builds the merged
// instance under a per-update task budget over the first half of the
// interval against a frozen forest mirror, then replays the interval's
// deletion log at double speed and installs at the interval end.
class MsfLadder {
 public:
  MsfLadder(size_t n, LadderMode mode, LadderConfig cfg);
  ~MsfLadder();
  MsfLadder(const MsfLadder&) = delete;
  MsfLadder& operator=(const MsfLadder&) = delete;

  EdgeId insert(VertexId u, VertexId v, double w);
  // Returns the edge linked in place of e, if the deletion split its tree
  // and a replacement existed.
  std::optional<EdgeId> erase(EdgeId e);

  const Graph& graph() const { return g_; }
  bool in_forest(EdgeId e) const;
  std::vector<EdgeId> forest_edges() const;  // ascending ids
  size_t level_count() const { return levels_; }
  size_t structure_count() const;
  const LadderStats& stats() const { return stats_; }

  // Exact checks, test scale: every live non-tree edge is covered by some
  // installed instance, contractions sit in their instance forests, and
  // instance sizes stay linear in their single-edge counts. Returns a
  // description of the first violation.
  std::optional<std::string> audit() const;

 private:
  struct Holder;
  struct Mirror;
  struct BuildJob;
  struct Level;

  void charge(uint64_t units) { work_ += units; }
  void route_level0(const std::vector<EdgeId>& ids);
  void install(std::unique_ptr<Holder> h, size_t target_level, const char* origin);
  void begin_update();
  void cleanup();
  void drain_queues();
  void advance_build(size_t level);
  void boundary(size_t level);
  void start_build(size_t level);
  void record_forest_change(bool add, VertexId u, VertexId v, EdgeId id);
  void feed_mirrors();
  void finish_update(uint64_t forest_ops_before);
  std::vector<Holder*> live_holders() const;
  void emit(const char* ev, size_t level, const std::string& extra) const;

  Graph g_;
  LadderMode mode_;
  LadderConfig cfg_;
  size_t levels_;
  TopForestCore forest_;
  std::vector<std::vector<std::pair<VertexId, EdgeId>>> fadj_;
  std::vector<EdgeId> ftree_;  // sorted live forest edge ids
  uint64_t j_ = 0;
  uint64_t work_ = 0;
  std::vector<std::optional<EdgeId>> del_log_;  // per-update deletion
  std::vector<std::tuple<bool, VertexId, VertexId, EdgeId>> cur_deltas_;
  std::vector<std::unique_ptr<Level>> level_;
  std::vector<std::pair<std::unique_ptr<Holder>, size_t>> pending_installs_;
  std::vector<EdgeId> replay_reps_;
  LadderStats stats_;
};

// Decremental MSF over a fixed simple graph with a deletion budget; ids are
// the init graph's edge ids.
class BoundedDecMsf {
 public:
  virtual ~BoundedDecMsf() = default;
  virtual std::optional<EdgeId> erase(EdgeId e) = 0;
  virtual bool in_forest(EdgeId e) const = 0;
  virtual std::vector<EdgeId> forest_edges() const = 0;  // ascending
  virtual size_t deletions_left() const = 0;
};

// (graph, deletion budget) -> instance
using BoundedFactory = std::function<std::unique_ptr<BoundedDecMsf>(const Graph&, size_t)>;

// Reference bounded structure: per-deletion recompute, unlimited budget.
class RecomputeBounded : public BoundedDecMsf {
 public:
  explicit RecomputeBounded(const Graph& g);
  std::optional<EdgeId> erase(EdgeId e) override;
  bool in_forest(EdgeId e) const override;
  std::vector<EdgeId> forest_edges() const override;
  size_t deletions_left() const override { return ~size_t{0}; }

 private:
  Graph g_;
  std::vector<uint8_t> tree_;
};

BoundedFactory recompute_bounded_factory();

// Lifts a budgeted decremental structure to an unbudgeted one by rotating
// three instances over delta/3-deletion windows: one initializing from a
// snapshot under a spread task budget, one replaying the deletion log at
// double speed, one active and answering. An instance therefore replays
// 2*delta/3 deletions before activating and serves delta/3 while active.
// delta rounds up to a positive multiple of 3.
class DeltaBoundedMsf {
 public:
  DeltaBoundedMsf(const Graph& g0, BoundedFactory factory, size_t delta,
                  std::ostream* events = nullptr);
  ~DeltaBoundedMsf();
  DeltaBoundedMsf(const DeltaBoundedMsf&) = delete;
  DeltaBoundedMsf& operator=(const DeltaBoundedMsf&) = delete;

  std::optional<EdgeId> erase(EdgeId e);
  bool in_forest(EdgeId e) const;
  std::vector<EdgeId> forest_edges() const;  // ascending outer ids
  const Graph& graph() const { return g_; }
  size_t delta() const { return delta_; }
  size_t active_deletions_left() const;

 private:
  struct Slot;

  void rotate();
  void advance_builder();
  void advance_replayer();
  void emit(const char* ev, const std::string& extra) const;

  Graph g_;
  BoundedFactory factory_;
  size_t delta_, third_;
  std::ostream* events_;
  uint64_t done_ = 0;
  std::vector<EdgeId> log_;
  std::unique_ptr<Slot> active_, replayer_, builder_;
};

struct DynamicMsfConfig {
  size_t max_edges = 0;
  LadderMode mode = LadderMode::worst_case;
  // Instances whose degree-3 split has fewer vertices than this use the
  // recompute fallback instead of the budgeted structure.
  size_t small_threshold = 0;
  // Split vertex count -> deletion budget handed to the budgeted structure.
  std::function<size_t(size_t)> delta_of;
  std::ostream* events = nullptr;
};

// Fully dynamic MSF over a budgeted degree-3 decremental structure: ladder
// instances are materialized as rank-weighted multigraphs, split to degree
// three, and served either by the recompute fallback (small splits) or by a
// delta rotation over the budgeted structure.
class DynamicMsf {
 public:
  DynamicMsf(size_t n, BoundedFactory factory, DynamicMsfConfig cfg);

  EdgeId insert(VertexId u, VertexId v, double w) { return ladder_.insert(u, v, w); }
  std::optional<EdgeId> erase(EdgeId e) { return ladder_.erase(e); }
  const Graph& graph() const { return ladder_.graph(); }
  std::vector<EdgeId> forest_edges() const { return ladder_.forest_edges(); }
  const MsfLadder& ladder() const { return ladder_; }

 private:
  MsfLadder ladder_;
};

}  // namespace dynmsf
