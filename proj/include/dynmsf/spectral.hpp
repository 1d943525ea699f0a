#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <vector>

#include "dynmsf/graph.hpp"

namespace dynmsf {

// Sparse probability mass over vertices; absent entries are zero.
using SparseMass = std::map<VertexId, double>;

// Walk and sweep parameters derived from the conductance target theta and
// the scale exponent b for a graph with the given live edge count.
struct NibbleParams {
  double theta = 0.0;
  int b = 1;
  double t0 = 0.0;     // real-valued step count; iterations run ceil(t0)
  int steps = 0;       // ceil(t0)
  double eps_b = 0.0;  // truncation coefficient (uses the unrounded t0)
  double logm = 0.0;   // ln(edge_count * e^4); scales the sweep mass floor
  uint64_t total_vol = 0;  // 2 * edge_count; volume ceiling for the sweep

  // theta in (0,1], b >= 1, edge_count >= 1; ConfigError otherwise.
  static NibbleParams make(size_t edge_count, double theta, int b);
};

// Cube maps between conductance scales plus the invertible step pair used
// by the recursive partitioner. The damped variants fold in the ambient
// vertex count n.
struct ThetaMaps {
  size_t n = 1;
  double logc = 1.0;  // coefficient inside f_plus's polylog divisor

  double plus(double theta) const { return theta * theta * theta; }
  double minus(double value) const;  // cube root
  double plus_damped(double theta) const;  // theta^3 / (14^4 ln^2(3 n e^4))
  double f_plus(double theta) const;       // theta^3 / (logc ln^2(3 n e^4))
  double f_minus(double value) const;      // exact inverse of f_plus
};

// One lazy-walk step: half of each vertex's mass stays put, the other half
// leaves in equal shares along its incident edges.
SparseMass walk_step(const Graph& h, const SparseMass& mass);

// Zero every entry below 2 * eps * degree(v); others pass unchanged.
SparseMass truncate_mass(const Graph& h, const SparseMass& mass, double eps);

struct NibbleResult {
  std::optional<std::vector<VertexId>> cut;  // sorted; empty optional = no cut
  std::vector<EdgeId> visited;  // edges touched by any walk step, ascending
  int steps_run = 0;            // walk steps actually executed
  SparseMass last_mass;         // distribution after the final step run
};

// Truncated-walk sweep from s. Runs ceil(t0) steps; after each, vertices are
// ordered by mass (ties by id) and the first prefix passing the conductance,
// mass, and volume-window predicates is returned. theta in (0,1].
NibbleResult nibble_run(const Graph& h, VertexId s, double theta, int b);
// Same walk with caller-frozen parameters: scale terms (steps, truncation,
// mass floor, volume ceiling) come from prm instead of h's live edge count,
// so cached results stay reproducible while h shrinks under deletions.
NibbleResult nibble_run(const Graph& h, VertexId s, const NibbleParams& prm);
std::optional<std::vector<VertexId>> nibble(const Graph& h, VertexId s, double theta,
                                            int b);
std::vector<EdgeId> visited_edges(const Graph& h, VertexId s, double theta, int b);

struct PartitionResult {
  std::vector<std::vector<VertexId>> cuts;  // peeled sets in peel order
  std::vector<VertexId> d_union;            // sorted union of the peeled sets
};

// Repeated sweep-cut peeling from randomly ordered starts; the union's
// volume never exceeds 65/72 of the graph's. When every component holds at
// most half the volume, a deterministic greedy component packing with
// volume fraction in [1/3, 2/3] is returned instead. max_starts limits the
// start vertices probed per peel round (0 = all remaining).
PartitionResult partition(const Graph& h, double theta, uint64_t seed,
                          size_t max_starts = 0);

// Random d-out-degree graph on s vertices (distinct targets per vertex),
// deduplicated to a simple graph. For s <= d the result is complete.
Graph simple_expander(size_t s, std::mt19937_64& rng, int d = 12);

// Copy of h with each part's internal edges replaced by a fresh sparse
// expander (weight 1); edges between parts are preserved. Vertices outside
// every part act as singletons. Parts must be disjoint and induce connected
// subgraphs of h.
Graph expander_replace(const Graph& h, const std::vector<std::vector<VertexId>>& parts,
                       uint64_t seed, int d = 12);

// Snap a low-conductance cut onto part boundaries: every straddling part
// joins the side holding its majority, ties joining the cut side. The cut's
// conductance must not exceed max_conductance (ContractError).
std::vector<VertexId> round_cut_to_clusters(const Graph& hp,
                                            const std::vector<std::vector<VertexId>>& parts,
                                            const std::vector<VertexId>& s_cut,
                                            double max_conductance = 1.0 / 64);

struct SpectralConfig {
  int citer = 4;                      // outer iterations per log2 n
  double dfrac = 1.0 / 16;            // headroom: Vol(D) <= (1 - dfrac) Vol(W)
  double round_threshold = 1.0 / 64;  // rounding gate on candidate cuts
  double kappa_log = 1.0;             // slack in the polylog conductance gate
  double logc = 1.0;                  // ThetaMaps::logc
  int expander_d = 12;                // out-degree of generated expanders
  size_t starts_per_round = 16;       // peel-round start budget (0 = all)
};

// Best part-respecting low-conductance cut found over ceil(citer*c)*ceil(lg n)
// peeling rounds; empty when none qualifies (for example on an expander).
// The returned side never holds more than half the volume.
std::vector<VertexId> cpartition(const Graph& hp,
                                 const std::vector<std::vector<VertexId>>& parts,
                                 double theta, double c, uint64_t seed,
                                 const SpectralConfig& cfg = {});

struct RcConfig {
  double tau = 0.25;  // leaf threshold: Vol(D) < n^(2 tau)
  double xi = 0.5;    // branch threshold: Vol(D) > n^(1 - d xi)
  double c = 1.0;     // iteration-count knob passed down to the cut search
  SpectralConfig spectral;
};

struct RcResult {
  std::vector<std::vector<VertexId>> sets;  // partition of V(h), each sorted
  double theta_init = 0.0;
  uint64_t crossing_edges = 0;  // edges of h between distinct sets
};

// Recursive respecting partition into expander-like pieces: replaces part
// interiors by sparse expanders once, recurses on low-conductance cuts, and
// finally refines each piece into connected components of h.
RcResult rcpartition(const Graph& h, const std::vector<std::vector<VertexId>>& parts,
                     const RcConfig& cfg, uint64_t seed);

struct SampleResult {
  Graph graph;     // same vertex set, surviving edges only
  double p = 0.0;  // per-edge keep probability used
};

// Independent per-edge sampling at p = min(1, (12c+24) ln(ambient_n) / (rho^2 kappa)).
// Requires min degree at least kappa*rho unless skip_degree_check.
SampleResult conductance_sample(const Graph& gc, double c, double kappa, double rho,
                                size_t ambient_n, std::mt19937_64& rng,
                                bool skip_degree_check = false);

// Induced subgraph with dense renumbering and maps back to the parent.
struct Subgraph {
  Graph graph;
  std::vector<VertexId> to_parent;      // sub vertex -> parent vertex
  std::map<VertexId, VertexId> to_sub;  // parent vertex -> sub vertex
  std::vector<EdgeId> edge_to_parent;   // sub edge -> parent edge
};
Subgraph induced_subgraph(const Graph& g, std::vector<VertexId> vertices);

// Connected components over live edges; each sorted, ordered by least vertex.
std::vector<std::vector<VertexId>> connected_components(const Graph& g);

// Exhaustive minimum over all cuts of crossing / min(|S|, |V-S|); +inf when
// no cut exists (n <= 1). SizeError above 24 vertices.
double expansion_constant(const Graph& g);

}  // namespace dynmsf
