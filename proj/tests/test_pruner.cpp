#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "dynmsf/errors.hpp"
#include "dynmsf/graph.hpp"
#include "dynmsf/pruner.hpp"

using namespace dynmsf;

namespace {

// Hand-tuned parameter block: the derived cascade makes walk step counts
// astronomical at bench scale, so structural tests pick workable scales
// directly. theta_plus is back-solved so low_degree_floor() == floor.
PrunerParams lab_params(double theta, double floor_target, double p, int b_max,
                        size_t h_max, double kappa) {
  PrunerParams prm;
  prm.gamma = theta * 96.0;
  prm.theta = theta;
  prm.kappa = kappa;
  prm.sample_p = p;
  prm.theta_plus = floor_target / (kappa * p);
  prm.rho = prm.theta_plus / 3.0;
  prm.gamma_prime = 1e-9;
  prm.d_max = 6.0 * p * kappa;
  prm.b_max = b_max;
  prm.b_max_plain = b_max;
  prm.h_max = h_max;
  return prm;
}

struct Fixture {
  size_t n = 0;
  std::vector<std::pair<uint32_t, std::vector<VertexId>>> clusters;
  std::vector<CrossEdge> edges;

  EdgeId add(VertexId u, VertexId v) {
    EdgeId id = edges.size();
    edges.push_back({id, u, v});
    return id;
  }
  std::pair<VertexId, VertexId> ends(EdgeId e) const {
    return {edges[e].u, edges[e].v};
  }
};

// Six clusters of two vertices wired as a complete cluster graph; every
// cluster pair gets one cross edge with spread endpoints.
Fixture complete6() {
  Fixture f;
  f.n = 12;
  for (uint32_t c = 1; c <= 6; ++c)
    f.clusters.push_back({c, {VertexId(2 * c - 2), VertexId(2 * c - 1)}});
  for (uint32_t i = 1; i <= 6; ++i)
    for (uint32_t j = i + 1; j <= 6; ++j)
      f.add(VertexId(2 * i - 2 + (j & 1)), VertexId(2 * j - 2 + (i & 1)));
  return f;
}

// Two cluster groups, dense inside, joined by a single bridge edge.
Fixture dumbbell() {
  Fixture f;
  f.n = 10;
  f.clusters = {{1, {0, 1}}, {2, {2, 3}}, {3, {4, 5}}, {4, {6, 7}}, {5, {8, 9}}};
  f.add(0, 2);  // group A: clusters 1, 2
  f.add(1, 3);
  f.add(4, 6);  // group B: clusters 3, 4, 5
  f.add(5, 7);
  f.add(6, 8);
  f.add(7, 9);
  f.add(4, 8);
  f.add(5, 9);
  f.add(3, 4);  // the bridge, edge id 8
  return f;
}

size_t count_crossing(const Graph& g, const std::vector<char>& in_side) {
  size_t crossing = 0;
  for (EdgeId e : g.edge_ids())
    if (in_side[g.edge(e).u] != in_side[g.edge(e).v]) ++crossing;
  return crossing;
}

// Connectivity of the active cluster graph under the live cross edges.
bool cluster_graph_connected(const ClusterPruner& cp, const Fixture& f,
                             const std::set<EdgeId>& live) {
  auto act = cp.active_clusters();
  if (act.size() <= 1) return true;
  std::map<uint32_t, uint32_t> parent;
  for (uint32_t c : act) parent[c] = c;
  std::function<uint32_t(uint32_t)> find = [&](uint32_t c) {
    while (parent[c] != c) c = parent[c] = parent[parent[c]];
    return c;
  };
  for (EdgeId e : live) {
    uint32_t cu = cp.cluster_of(f.edges[e].u), cv = cp.cluster_of(f.edges[e].v);
    if (!cp.cluster_active(cu) || !cp.cluster_active(cv)) continue;
    parent[find(cu)] = find(cv);
  }
  uint32_t root = find(act.front());
  for (uint32_t c : act)
    if (find(c) != root) return false;
  return true;
}

using StartKey = std::tuple<size_t, int, VertexId>;

// Every cached sweep of every unconsumed replica, keyed for diffing.
std::map<StartKey, std::vector<EdgeId>> snapshot_index(const ClusterPruner& cp) {
  std::map<StartKey, std::vector<EdgeId>> snap;
  for (size_t g : cp.alive_replicas())
    for (uint32_t c : cp.active_clusters())
      for (VertexId s : cp.endpoint_set(g, c))
        for (int b = 1; b <= cp.params().b_max; ++b)
          snap[{g, b, s}] = cp.edges_visited(g, b, s);
  return snap;
}

}  // namespace

TEST_CASE("geometric skip sampling matches per-replica Bernoulli inclusion") {
  std::mt19937_64 rng(99);
  SUBCASE("degenerate probabilities") {
    CHECK(sample_graph_picks(5, 0.0, rng).empty());
    CHECK(sample_graph_picks(0, 0.7, rng).empty());
    std::vector<size_t> all{0, 1, 2, 3, 4};
    CHECK(sample_graph_picks(5, 1.0, rng) == all);
    CHECK_THROWS_AS(sample_graph_picks(5, -0.1, rng), ConfigError);
    CHECK_THROWS_AS(sample_graph_picks(5, 1.5, rng), ConfigError);
  }
  SUBCASE("frequencies within four sigma of the target") {
    for (double p : {0.35, 0.85}) {
      const size_t h = 6, trials = 20000;
      std::vector<size_t> hits(h, 0);
      size_t joint = 0;  // replicas 0 and 3 together, for pair independence
      for (size_t t = 0; t < trials; ++t) {
        auto picks = sample_graph_picks(h, p, rng);
        CHECK(std::is_sorted(picks.begin(), picks.end()));
        CHECK(std::adjacent_find(picks.begin(), picks.end()) == picks.end());
        for (size_t k : picks) {
          REQUIRE(k < h);
          ++hits[k];
        }
        bool h0 = std::binary_search(picks.begin(), picks.end(), size_t(0));
        bool h3 = std::binary_search(picks.begin(), picks.end(), size_t(3));
        if (h0 && h3) ++joint;
      }
      double sigma = std::sqrt(p * (1.0 - p) / trials);
      for (size_t k = 0; k < h; ++k) {
        double freq = double(hits[k]) / trials;
        CHECK(std::abs(freq - p) <= 4.0 * sigma);
      }
      double pp = p * p;
      double sigma2 = std::sqrt(pp * (1.0 - pp) / trials);
      CHECK(std::abs(double(joint) / trials - pp) <= 4.0 * sigma2);
    }
  }
  SUBCASE("deterministic under a fixed stream") {
    std::mt19937_64 a(5), b(5);
    for (int i = 0; i < 50; ++i)
      CHECK(sample_graph_picks(9, 0.4, a) == sample_graph_picks(9, 0.4, b));
  }
}

TEST_CASE("derived pruning constants follow the parameter cascade") {
  // Expected values computed independently with arbitrary-precision floats.
  PrunerParams a = PrunerParams::derive(1024, 0.48, 32.0, 1000);
  CHECK(a.theta == doctest::Approx(0.005).epsilon(1e-12));
  CHECK(a.theta_plus == doctest::Approx(2.248332528736398e-14).epsilon(1e-12));
  CHECK(a.gamma_prime == doctest::Approx(1.7322540837761783e-45).epsilon(1e-12));
  CHECK(a.rho == doctest::Approx(7.494441762454659e-15).epsilon(1e-12));
  CHECK(a.sample_p == 1.0);  // the min clamp engages at any bench-scale kappa
  CHECK(a.d_max == doctest::Approx(192.0).epsilon(1e-12));
  CHECK(a.h_max == 4167);
  CHECK(a.b_max_plain == 21);
  CHECK(a.b_max == 25);
  CHECK(a.low_degree_floor() ==
        doctest::Approx(32.0 * 2.248332528736398e-14).epsilon(1e-12));

  PrunerParams b = PrunerParams::derive(1048576, 0.9, 1e31, 1000000);
  CHECK(b.theta == doctest::Approx(0.009375).epsilon(1e-12));
  CHECK(b.theta_plus == doctest::Approx(5.965594711215849e-14).epsilon(1e-12));
  CHECK(b.gamma_prime == doctest::Approx(3.235870981787577e-44).epsilon(1e-12));
  CHECK(b.sample_p == doctest::Approx(0.12620977043605663).epsilon(1e-12));
  CHECK(b.d_max == doctest::Approx(7.572586226163398e30).epsilon(1e-12));
  CHECK(b.h_max == 1);
  CHECK(b.b_max_plain == 27);
  CHECK(b.b_max == 31);

  CHECK_THROWS_AS(PrunerParams::derive(1, 0.5, 8.0, 10), ConfigError);
  CHECK_THROWS_AS(PrunerParams::derive(64, 0.0, 8.0, 10), ConfigError);
  CHECK_THROWS_AS(PrunerParams::derive(64, 0.5, 8.0, 0), ConfigError);
}

TEST_CASE("companions wire sampled cross edges plus per-cluster mixing graphs") {
  Fixture f;
  f.n = 8;
  f.clusters = {{10, {0, 1, 2}}, {20, {3, 4, 5}}, {30, {6, 7}}};
  f.add(0, 3);
  f.add(1, 4);
  f.add(2, 6);
  f.add(5, 7);
  auto prm = lab_params(0.5, 1.5, 1.0, 2, 2, 3.0);
  ClusterPruner cp(f.n, f.clusters, f.edges, prm, 71);

  CHECK(cp.replica_count() == 2);
  CHECK(cp.front_replica() == size_t(0));
  for (size_t g : cp.alive_replicas()) {
    for (const auto& ce : f.edges) CHECK(cp.replica_has(g, ce.id));  // p = 1
    CHECK(cp.replica_degree(g, 10) == 3);
    CHECK(cp.replica_degree(g, 20) == 3);
    CHECK(cp.replica_degree(g, 30) == 2);
    CHECK(cp.low_degree(g).empty());
    // Endpoint sets hold the endpoints of incident cross edges at build time.
    CHECK(cp.endpoint_set(g, 10) == std::vector<VertexId>{0, 1, 2});
    CHECK(cp.endpoint_set(g, 20) == std::vector<VertexId>{3, 4, 5});
    CHECK(cp.endpoint_set(g, 30) == std::vector<VertexId>{6, 7});
    // Mixing graphs are complete below the out-degree cap: one edge on a
    // two-vertex set, triangles on the three-vertex sets.
    const Graph& comp = cp.companion(g);
    CHECK(comp.edge_count() == 4 + 3 + 3 + 1);
    CHECK(comp.degree(6) == 2);  // cross (2,6) + mixing (6,7)
    CHECK(comp.degree(7) == 2);
    // Forward/dual index views agree through the public API.
    for (int b = 1; b <= prm.b_max; ++b) {
      for (uint32_t c : cp.active_clusters())
        for (VertexId s : cp.endpoint_set(g, c))
          for (EdgeId e : cp.edges_visited(g, b, s)) {
            auto starts = cp.starts_visiting(g, b, e);
            CHECK(std::binary_search(starts.begin(), starts.end(), s));
          }
      for (const auto& ce : f.edges)
        for (VertexId s : cp.starts_visiting(g, b, ce.id)) {
          auto es = cp.edges_visited(g, b, s);
          CHECK(std::binary_search(es.begin(), es.end(), ce.id));
        }
    }
  }
  CHECK(cp.audit() == std::nullopt);
  CHECK_THROWS_AS(cp.replica_degree(0, 99), NotPresentError);
  CHECK_THROWS_AS(cp.endpoint_set(0, 99), NotPresentError);
  CHECK_THROWS_AS(cp.companion(7), NotPresentError);
}

TEST_CASE("companion crossing counts match the host on cluster-respecting cuts") {
  std::mt19937_64 rng(2024);
  Fixture f;
  f.n = 0;
  for (uint32_t c = 1; c <= 8; ++c) {
    size_t sz = 2 + rng() % 2;
    std::vector<VertexId> mem;
    for (size_t i = 0; i < sz; ++i) mem.push_back(VertexId(f.n++));
    f.clusters.push_back({c, mem});
  }
  std::set<std::pair<VertexId, VertexId>> used;
  while (f.edges.size() < 18) {
    uint32_t i = 1 + rng() % 8, j = 1 + rng() % 8;
    if (i == j) continue;
    const auto& mi = f.clusters[i - 1].second;
    const auto& mj = f.clusters[j - 1].second;
    VertexId u = mi[rng() % mi.size()], v = mj[rng() % mj.size()];
    if (!used.insert({std::min(u, v), std::max(u, v)}).second) continue;
    f.add(u, v);
  }
  auto prm = lab_params(0.5, 0.25, 1.0, 1, 2, 2.0);
  ClusterPruner cp(f.n, f.clusters, f.edges, prm, 3);
  for (uint32_t mask = 1; mask + 1 < (1u << 8); ++mask) {
    // Host-side count over the fixture's own records.
    size_t host_crossing = 0;
    auto in_cut = [&](uint32_t cluster) { return (mask >> (cluster - 1)) & 1u; };
    for (const auto& ce : f.edges) {
      uint32_t cu = 0, cv = 0;
      for (const auto& [id, mem] : f.clusters) {
        if (std::find(mem.begin(), mem.end(), ce.u) != mem.end()) cu = id;
        if (std::find(mem.begin(), mem.end(), ce.v) != mem.end()) cv = id;
      }
      if (in_cut(cu) != in_cut(cv)) ++host_crossing;
    }
    for (size_t g : cp.alive_replicas()) {
      std::vector<char> side(f.n, 0);
      for (const auto& [id, mem] : f.clusters)
        if (in_cut(id))
          for (VertexId s : cp.endpoint_set(g, id)) side[s] = 1;
      CHECK(count_crossing(cp.companion(g), side) == host_crossing);
    }
  }
}

TEST_CASE("deleting a cross edge reruns exactly the sweeps that crossed it") {
  Fixture f = complete6();
  // Vertex-disjoint deletions on the full sample keep every sweep above
  // theta, so nothing is removed and the rerun accounting is isolated.
  auto prm = lab_params(0.15, 0.5, 1.0, 2, 3, 2.0);
  ClusterPruner cp(f.n, f.clusters, f.edges, prm, 17);
  REQUIRE(cp.audit() == std::nullopt);
  for (EdgeId target : {EdgeId(0), EdgeId(9), EdgeId(14), EdgeId(6)}) {
    std::set<StartKey> stale;
    for (size_t g : cp.alive_replicas())
      for (uint32_t c : cp.active_clusters())
        for (VertexId s : cp.endpoint_set(g, c))
          for (int b = 1; b <= prm.b_max; ++b) {
            auto es = cp.edges_visited(g, b, s);
            if (std::binary_search(es.begin(), es.end(), target))
              stale.insert({g, b, s});
          }
    PruneOutcome out = cp.prune(target);
    // The complete cluster graph stays well connected: nothing is removed,
    // so the rerun set must be exactly the stale set.
    REQUIRE(out.removed.empty());
    CHECK(out.graphs_consumed == 0);
    CHECK_FALSE(out.exhausted);
    std::set<StartKey> reran(cp.last_reruns().begin(), cp.last_reruns().end());
    CHECK(reran == stale);
    for (size_t g : cp.alive_replicas()) CHECK_FALSE(cp.replica_has(g, target));
  }
  CHECK(cp.audit() == std::nullopt);
  CHECK(cp.removal_version() == 0);
}

TEST_CASE("clusters under the degree floor pop replicas smallest id first") {
  Fixture f;
  f.n = 6;
  f.clusters = {{4, {0, 1}}, {7, {2, 3}}, {2, {4, 5}}};
  EdgeId ab = f.add(0, 2);  // 4 -- 7
  f.add(1, 4);              // 4 -- 2
  f.add(3, 5);              // 7 -- 2
  auto prm = lab_params(0.5, 1.5, 1.0, 1, 4, 2.0);
  ClusterPruner cp(f.n, f.clusters, f.edges, prm, 11);
  REQUIRE(cp.low_degree(0).empty());  // all degrees are 2 at the start

  // Deleting the 4--7 edge drops both to degree 1. Retiring cluster 4 takes
  // its edge to cluster 2 along, so 2 joins the low set and, having the
  // smaller id, leaves before 7; the whole region unravels in three pops.
  PruneOutcome out = cp.prune(ab);
  CHECK(out.removed == std::vector<uint32_t>{4, 2, 7});
  CHECK(out.graphs_consumed == 3);
  CHECK_FALSE(out.exhausted);
  CHECK(cp.replica_count() == 1);
  CHECK(cp.active_clusters().empty());
  CHECK(cp.removal_version() == 3);
  CHECK(cp.cumulative_removed_vertices() == 6);
  // Retired clusters keep their member record but lose all replica state.
  CHECK(cp.members(4) == std::vector<VertexId>{0, 1});
  CHECK_FALSE(cp.cluster_active(4));
  CHECK_THROWS_AS(cp.replica_degree(3, 4), NotPresentError);
  // Each consumed replica answered queries at a single removal version.
  CHECK(cp.consult_span(0) == std::make_pair(uint64_t(0), uint64_t(0)));
  CHECK(cp.consult_span(1) == std::make_pair(uint64_t(1), uint64_t(1)));
  CHECK(cp.consult_span(2) == std::make_pair(uint64_t(2), uint64_t(2)));
  CHECK(cp.consult_span(3) == std::make_pair(uint64_t(3), uint64_t(3)));
  CHECK(cp.audit() == std::nullopt);

  // A later deletion finds nothing left to certify.
  PruneOutcome again = cp.prune(1);
  CHECK(again.removed.empty());
  CHECK(again.graphs_consumed == 0);
  CHECK(cp.audit() == std::nullopt);
}

TEST_CASE("sweep cuts peel the disconnected cluster group off the region") {
  Fixture f = dumbbell();
  auto prm = lab_params(0.3, 1.5, 1.0, 2, 4, 2.0);
  ClusterPruner cp(f.n, f.clusters, f.edges, prm, 29);
  REQUIRE(cp.audit() == std::nullopt);

  PruneOutcome out = cp.prune(8);  // the bridge
  std::sort(out.removed.begin(), out.removed.end());
  CHECK(out.removed == std::vector<uint32_t>{1, 2});  // group A, both clusters
  CHECK(out.graphs_consumed == 1);
  CHECK_FALSE(out.exhausted);
  CHECK(cp.active_clusters() == std::vector<uint32_t>{3, 4, 5});
  CHECK(cp.replica_count() == 3);
  CHECK(cp.removal_version() == 1);
  CHECK(cp.cumulative_removed_vertices() == 4);
  CHECK(cp.consult_span(0) == std::make_pair(uint64_t(0), uint64_t(0)));
  CHECK(cp.consult_span(1) == std::make_pair(uint64_t(1), uint64_t(1)));
  CHECK_FALSE(cp.consult_span(2).has_value());
  CHECK(cp.audit() == std::nullopt);
  // Group A's edges and state are gone from the surviving replicas.
  for (size_t g : cp.alive_replicas()) {
    for (EdgeId e : {EdgeId(0), EdgeId(1), EdgeId(8)}) CHECK_FALSE(cp.replica_has(g, e));
    CHECK_THROWS_AS(cp.endpoint_set(g, 1), NotPresentError);
    CHECK(cp.replica_degree(g, 3) == 4);  // lost only the bridge
  }
  // The survivors' cluster graph is connected: no certificate remains.
  std::set<EdgeId> live{2, 3, 4, 5, 6, 7};
  CHECK(cluster_graph_connected(cp, f, live));
}

TEST_CASE("freshly cut-off undersized clusters leave without spending replicas") {
  auto build = [] {
    Fixture f;
    f.n = 6;
    f.clusters = {{1, {0, 1}}, {2, {2, 3}}, {3, {4, 5}}};
    f.add(1, 2);  // 1 -- 2, edge 0
    f.add(3, 4);  // 2 -- 3, edge 1
    f.add(0, 5);  // 1 -- 3, edge 2
    return f;
  };
  // After the deletion the survivors form a path; at this theta only the
  // whole connected component passes the sweep, and a side equal to every
  // active cluster rounds to nothing, so no certificate removal can fire.
  auto prm = lab_params(0.1, 0.5, 1.0, 1, 2, 2.0);

  SUBCASE("isolated newcomer retires silently") {
    Fixture f = build();
    ClusterPruner cp(f.n, f.clusters, f.edges, prm, 41);
    // The host deletion of edge 0 split cluster 2; vertex 2 ends up alone
    // and cut off once the edge is gone.
    ClusterDelta d;
    d.destroyed = {2};
    d.created = {{10, {2}}, {11, {3}}};
    cp.apply_cluster_delta(d);
    CHECK(cp.audit() == std::nullopt);
    CHECK(cp.cluster_active(10));
    PruneOutcome out = cp.prune(0, {10});
    CHECK(out.removed == std::vector<uint32_t>{10});
    CHECK(out.graphs_consumed == 0);
    CHECK(cp.replica_count() == 2);       // no replica was spent
    CHECK(cp.removal_version() == 0);     // and no certificate was consumed
    CHECK_FALSE(cp.cluster_active(10));
    CHECK(cp.cluster_active(11));
    CHECK(cp.cumulative_removed_vertices() == 1);
    CHECK(cp.audit() == std::nullopt);
  }
  SUBCASE("a newcomer that still carries cross edges is rejected") {
    Fixture f = build();
    ClusterPruner cp(f.n, f.clusters, f.edges, prm, 41);
    ClusterDelta d;
    d.destroyed = {2};
    d.created = {{10, {2}}, {11, {3}}};
    cp.apply_cluster_delta(d);
    // Cluster 11 keeps edge 1: retiring it as undersized is a contract breach.
    CHECK_THROWS_AS(cp.prune(0, {11}), ContractError);
  }
}

TEST_CASE("cluster deltas rebuild companions and rerun the touched sweeps") {
  Fixture f = complete6();
  auto prm = lab_params(0.3, 0.5, 0.75, 2, 3, 2.0);
  ClusterPruner cp(f.n, f.clusters, f.edges, prm, 53);
  REQUIRE(cp.audit() == std::nullopt);

  SUBCASE("split: stale and newborn sweeps all get rerun") {
    auto before = snapshot_index(cp);
    ClusterDelta d;
    d.destroyed = {3};  // members {4, 5}
    d.created = {{30, {4}}, {31, {5}}};
    cp.apply_cluster_delta(d);
    CHECK(cp.audit() == std::nullopt);
    std::set<StartKey> reran(cp.last_reruns().begin(), cp.last_reruns().end());
    auto after = snapshot_index(cp);
    for (const auto& [key, visited] : after) {
      auto it = before.find(key);
      bool newborn = it == before.end();
      if (newborn || it->second != visited)
        CHECK(reran.count(key) == 1);  // every real change was rerun
    }
    CHECK(cp.cluster_active(30));
    CHECK(cp.cluster_active(31));
    CHECK_FALSE(cp.cluster_active(3));
    CHECK_THROWS_AS(cp.members(3), NotPresentError);
  }
  SUBCASE("merge: edges inside the union disappear for good") {
    ClusterDelta d;
    d.destroyed = {1, 2};
    d.created = {{40, {0, 1, 2, 3}}};
    cp.apply_cluster_delta(d);
    CHECK(cp.audit() == std::nullopt);
    // Edge 0 joined clusters 1 and 2; it is intra-cluster now.
    for (size_t g : cp.alive_replicas()) CHECK_FALSE(cp.replica_has(g, 0));
    CHECK(cp.members(40) == std::vector<VertexId>{0, 1, 2, 3});
    for (size_t g : cp.alive_replicas())
      CHECK(cp.replica_degree(g, 40) ==
            [&] {
              size_t d40 = 0;
              for (const auto& ce : f.edges)
                if (ce.id != 0 && (ce.u <= 3 || ce.v <= 3) && cp.replica_has(g, ce.id))
                  ++d40;
              return d40;
            }());
  }
  SUBCASE("no-op delta reruns nothing") {
    cp.apply_cluster_delta({});
    CHECK(cp.last_reruns().empty());
    CHECK(cp.audit() == std::nullopt);
  }
  SUBCASE("malformed deltas are rejected before any state changes") {
    ClusterDelta bad;
    bad.destroyed = {99};
    CHECK_THROWS_AS(cp.apply_cluster_delta(bad), ContractError);
    bad.destroyed = {3};
    bad.created = {{30, {4}}};  // loses vertex 5
    CHECK_THROWS_AS(cp.apply_cluster_delta(bad), ContractError);
    bad.created = {{30, {4}}, {4, {5}}};  // id 4 is taken
    CHECK_THROWS_AS(cp.apply_cluster_delta(bad), ContractError);
    bad.created = {{30, {4}}, {30, {5}}};  // duplicate id
    CHECK_THROWS_AS(cp.apply_cluster_delta(bad), ContractError);
    CHECK(cp.audit() == std::nullopt);  // validation precedes mutation
  }
}

TEST_CASE("long delta churn plus a deletion tail keeps every structure exact") {
  std::mt19937_64 rng(4242);
  Fixture f;
  f.n = 20;
  for (uint32_t c = 1; c <= 5; ++c)
    f.clusters.push_back({c, {VertexId(4 * c - 4), VertexId(4 * c - 3),
                              VertexId(4 * c - 2), VertexId(4 * c - 1)}});
  for (uint32_t i = 1; i <= 5; ++i)
    for (uint32_t j = i + 1; j <= 5; ++j) {
      f.add(VertexId(4 * i - 4 + (j & 1)), VertexId(4 * j - 4 + (i & 1)));
      f.add(VertexId(4 * i - 2 + (j & 1)), VertexId(4 * j - 2 + (i & 1)));
    }
  // Theta is irrelevant during churn (no prune calls evaluate removals), so
  // a coarse value keeps the rerun walks short.
  auto prm = lab_params(0.3, 1.5, 1.0, 1, 4, 2.0);
  ClusterPruner cp(f.n, f.clusters, f.edges, prm, 1234);
  REQUIRE(cp.audit() == std::nullopt);

  std::set<EdgeId> live;
  for (const auto& ce : f.edges) live.insert(ce.id);
  uint32_t next_id = 100;

  // Degree-floor bookkeeping recomputed from the test's own live-edge model.
  auto check_degrees = [&] {
    for (size_t g : cp.alive_replicas()) {
      std::vector<uint32_t> expect_low;
      for (uint32_t c : cp.active_clusters()) {
        size_t deg = 0;
        for (EdgeId e : live)
          if (cp.replica_has(g, e) && (cp.cluster_of(f.edges[e].u) == c ||
                                       cp.cluster_of(f.edges[e].v) == c))
            ++deg;
        CHECK(cp.replica_degree(g, c) == deg);
        if (double(deg) < cp.params().low_degree_floor()) expect_low.push_back(c);
      }
      CHECK(cp.low_degree(g) == expect_low);
    }
  };

  // Phase one: compounding splits and merges with no deletions. Each delta
  // rebuilds companions in place; the audit proves the cached sweeps match a
  // fresh recomputation after every few rounds.
  size_t splits = 0, merges = 0;
  for (int op = 0; op < 18; ++op) {
    auto act = cp.active_clusters();
    std::vector<uint32_t> big;
    for (uint32_t c : act)
      if (cp.members(c).size() >= 2) big.push_back(c);
    bool do_split = (rng() % 100 < 60 && !big.empty()) || act.size() < 2;
    if (do_split && big.empty()) break;
    if (do_split) {
      uint32_t c = big[rng() % big.size()];
      auto mem = cp.members(c);
      size_t cutpos = 1 + rng() % (mem.size() - 1);
      ClusterDelta d;
      d.destroyed = {c};
      d.created = {{next_id++, {mem.begin(), mem.begin() + cutpos}},
                   {next_id++, {mem.begin() + cutpos, mem.end()}}};
      cp.apply_cluster_delta(d);
      ++splits;
    } else {
      uint32_t a = act[rng() % act.size()], b = act[rng() % act.size()];
      if (a == b) continue;
      std::vector<VertexId> uni = cp.members(a);
      const auto& mb = cp.members(b);
      uni.insert(uni.end(), mb.begin(), mb.end());
      std::sort(uni.begin(), uni.end());
      ClusterDelta d;
      d.destroyed = {std::min(a, b), std::max(a, b)};
      d.created = {{next_id++, uni}};
      cp.apply_cluster_delta(d);
      ++merges;
      // Edges swallowed by the union are gone from every replica.
      for (auto it = live.begin(); it != live.end();) {
        uint32_t cu = cp.cluster_of(f.edges[*it].u), cv = cp.cluster_of(f.edges[*it].v);
        if (cu == cv) {
          for (size_t g : cp.alive_replicas()) CHECK_FALSE(cp.replica_has(g, *it));
          it = live.erase(it);
        } else {
          ++it;
        }
      }
    }
    // The vertex set covered by active clusters never changes under deltas.
    size_t covered = 0;
    for (uint32_t c : cp.active_clusters()) covered += cp.members(c).size();
    CHECK(covered == f.n);
    check_degrees();
    if (op % 8 == 7) {
      auto verdict = cp.audit();
      if (verdict) FAIL("audit failed at op ", op, ": ", *verdict);
    }
  }
  CHECK(cp.replica_count() == prm.h_max);  // deltas never consume replicas
  CHECK(cp.removal_version() == 0);

  // Phase two: a short deletion tail on the churned structure. Removals are
  // acceptable here -- heavy restructuring shrinks companion volume, so the
  // frozen window may now certify sweeps; only the bookkeeping is asserted.
  size_t deletions = 0;
  std::vector<uint32_t> removed_log;
  while (deletions < 4 && cp.replica_count() > 0 &&
         cp.active_clusters().size() >= 2) {
    std::vector<EdgeId> candidates(live.begin(), live.end());
    if (candidates.empty()) break;
    EdgeId e = candidates[rng() % candidates.size()];
    live.erase(e);
    ++deletions;
    size_t before_replicas = cp.replica_count();
    PruneOutcome out = cp.prune(e);
    CHECK(out.graphs_consumed == before_replicas - cp.replica_count());
    for (uint32_t c : out.removed) {
      removed_log.push_back(c);
      CHECK_FALSE(cp.cluster_active(c));
      for (auto it = live.begin(); it != live.end();) {
        if (cp.cluster_of(f.edges[*it].u) == c || cp.cluster_of(f.edges[*it].v) == c)
          it = live.erase(it);
        else
          ++it;
      }
    }
    check_degrees();
  }
  auto verdict = cp.audit();
  if (verdict) FAIL("final audit failed: ", *verdict);
  for (uint32_t c : removed_log) CHECK_FALSE(cp.cluster_active(c));
  // Consulted replicas each answered at one removal version only.
  for (size_t g = 0; g < prm.h_max; ++g) {
    auto span = cp.consult_span(g);
    if (span) CHECK(span->first == span->second);
  }
  MESSAGE("workload: ", splits, " splits, ", merges, " merges, ", deletions,
          " deletions, ", removed_log.size(), " clusters removed, ",
          cp.replica_count(), " replicas left");
}

TEST_CASE("every deletion leaves the surviving cluster graph connected") {
  std::mt19937_64 rng(777);
  Fixture f;
  f.n = 12;
  for (uint32_t c = 1; c <= 6; ++c)
    f.clusters.push_back({c, {VertexId(2 * c - 2), VertexId(2 * c - 1)}});
  // A ring of clusters with doubled links plus two diagonals.
  auto link = [&](uint32_t i, uint32_t j, int variant) {
    f.add(VertexId(2 * i - 2 + (variant & 1)), VertexId(2 * j - 2 + ((variant >> 1) & 1)));
  };
  for (uint32_t c = 1; c <= 6; ++c) {
    uint32_t d = c % 6 + 1;
    link(c, d, 0);
    link(c, d, 3);
  }
  link(1, 4, 1);
  link(2, 5, 1);
  auto prm = lab_params(0.5, 1.5, 0.9, 2, 20, 2.0);
  ClusterPruner cp(f.n, f.clusters, f.edges, prm, 61);
  REQUIRE(cp.audit() == std::nullopt);

  std::vector<EdgeId> schedule;
  for (const auto& ce : f.edges) schedule.push_back(ce.id);
  std::shuffle(schedule.begin(), schedule.end(), rng);
  std::set<EdgeId> live(schedule.begin(), schedule.end());
  for (EdgeId e : schedule) {
    if (!live.count(e)) continue;  // already gone with a pruned cluster
    if (cp.active_clusters().empty()) break;
    live.erase(e);
    PruneOutcome out = cp.prune(e);
    REQUIRE_FALSE(out.exhausted);
    for (uint32_t c : out.removed)
      for (auto it = live.begin(); it != live.end();) {
        if (cp.cluster_of(f.edges[*it].u) == c || cp.cluster_of(f.edges[*it].v) == c)
          it = live.erase(it);
        else
          ++it;
      }
    CHECK(cluster_graph_connected(cp, f, live));
  }
  CHECK(cp.audit() == std::nullopt);
}

TEST_CASE("event log records construction and pruning activity") {
  Fixture f;
  f.n = 6;
  f.clusters = {{4, {0, 1}}, {7, {2, 3}}, {2, {4, 5}}};
  f.add(0, 2);
  f.add(1, 4);
  f.add(3, 5);
  auto prm = lab_params(0.5, 1.5, 1.0, 1, 4, 2.0);
  std::ostringstream sink;
  PrunerConfig cfg;
  cfg.events = &sink;
  ClusterPruner cp(f.n, f.clusters, f.edges, prm, 11, cfg);
  cp.prune(0);
  ClusterDelta d;
  d.destroyed = {};
  d.created = {};
  // All clusters are gone after the cascade; an empty delta still logs.
  cp.apply_cluster_delta(d);

  std::vector<nlohmann::json> lines;
  std::string line;
  std::istringstream in(sink.str());
  while (std::getline(in, line))
    if (!line.empty()) lines.push_back(nlohmann::json::parse(line));
  REQUIRE(lines.size() == 3);
  CHECK(lines[0]["op"] == "init");
  CHECK(lines[0]["replicas"] == 4);
  CHECK(lines[0]["clusters"] == 3);
  CHECK(lines[0].contains("degree_floor"));
  CHECK(lines[0].contains("degree_cap_violations"));
  CHECK(lines[0]["index"].is_array());
  CHECK(lines[1]["op"] == "prune");
  CHECK(lines[1]["edge"] == 0);
  CHECK(lines[1]["removed"].size() == 3);
  CHECK(lines[1]["graphs_consumed"] == 3);
  CHECK(lines[1]["exhausted"] == false);
  CHECK(lines[2]["op"] == "cluster_delta");
  CHECK(lines[2]["reruns"] == 0);
}

TEST_CASE("construction rejects malformed instances") {
  auto prm = lab_params(0.5, 1.5, 1.0, 1, 2, 2.0);
  std::vector<std::pair<uint32_t, std::vector<VertexId>>> cl{{1, {0, 1}}, {2, {2, 3}}};
  std::vector<CrossEdge> edges{{0, 1, 2}};
  CHECK_NOTHROW(ClusterPruner(4, cl, edges, prm, 1));
  // Overlapping clusters.
  CHECK_THROWS_AS(ClusterPruner(4, {{1, {0, 1}}, {2, {1, 2}}}, edges, prm, 1),
                  ConfigError);
  // Edge failing to cross clusters.
  CHECK_THROWS_AS(ClusterPruner(4, cl, {{0, 0, 1}}, prm, 1), ConfigError);
  // Unclustered endpoint.
  CHECK_THROWS_AS(ClusterPruner(5, cl, {{0, 1, 4}}, prm, 1), ConfigError);
  // Duplicate edge ids and duplicate endpoint pairs.
  CHECK_THROWS_AS(ClusterPruner(4, cl, {{0, 1, 2}, {0, 0, 3}}, prm, 1), ConfigError);
  CHECK_THROWS_AS(ClusterPruner(4, cl, {{0, 1, 2}, {1, 2, 1}}, prm, 1), ConfigError);
  // Degenerate parameters.
  auto bad = prm;
  bad.h_max = 0;
  CHECK_THROWS_AS(ClusterPruner(4, cl, edges, bad, 1), ConfigError);
  bad = prm;
  bad.theta = 0.0;
  CHECK_THROWS_AS(ClusterPruner(4, cl, edges, bad, 1), ConfigError);
  bad = prm;
  bad.b_max = 0;
  CHECK_THROWS_AS(ClusterPruner(4, cl, edges, bad, 1), ConfigError);
}
