#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "dynmsf/errors.hpp"
#include "dynmsf/graph.hpp"
#include "dynmsf/rng.hpp"
#include "dynmsf/spectral.hpp"
#include "test_util.hpp"

using namespace dynmsf;
using testutil::random_graph;

namespace {

// Two 5-cliques joined by a single bridge (4,5). Clique edges come first in
// (i,j) order, so edges 0..3 are exactly those incident to vertex 0.
Graph clique_pair5() {
  Graph g = Graph::simple(10);
  for (VertexId i = 0; i < 5; ++i)
    for (VertexId j = i + 1; j < 5; ++j) g.add_edge(i, j, 1.0);
  for (VertexId i = 5; i < 10; ++i)
    for (VertexId j = i + 1; j < 10; ++j) g.add_edge(i, j, 1.0);
  g.add_edge(4, 5, 1.0);
  return g;
}

// Two 10-cliques joined by the bridge (0,10).
Graph clique_pair10() {
  Graph g = Graph::simple(20);
  for (VertexId i = 0; i < 10; ++i)
    for (VertexId j = i + 1; j < 10; ++j) g.add_edge(i, j, 1.0);
  for (VertexId i = 10; i < 20; ++i)
    for (VertexId j = i + 1; j < 20; ++j) g.add_edge(i, j, 1.0);
  g.add_edge(0, 10, 1.0);
  return g;
}

Graph complete(size_t n) {
  Graph g = Graph::simple(n);
  for (VertexId i = 0; i < n; ++i)
    for (VertexId j = i + 1; j < n; ++j) g.add_edge(i, j, 1.0);
  return g;
}

Graph two_triangles() {
  Graph g = Graph::simple(6);
  g.add_edge(0, 1, 1.0);
  g.add_edge(1, 2, 1.0);
  g.add_edge(0, 2, 1.0);
  g.add_edge(3, 4, 1.0);
  g.add_edge(4, 5, 1.0);
  g.add_edge(3, 5, 1.0);
  return g;
}

Graph path_graph(size_t n) {
  Graph g = Graph::simple(n);
  for (VertexId v = 0; v + 1 < n; ++v) g.add_edge(v, v + 1, 1.0);
  return g;
}

std::vector<VertexId> iota_vec(VertexId lo, VertexId hi) {
  std::vector<VertexId> out;
  for (VertexId v = lo; v < hi; ++v) out.push_back(v);
  return out;
}

double mass_sum(const SparseMass& m) {
  double s = 0.0;
  for (const auto& [v, p] : m) s += p;
  return s;
}

// Re-evaluates the three sweep predicates on a returned cut, independently of
// the sweep loop: conductance from scratch, the mass floor at the cut's
// minimum-mass vertex, and the integer volume window.
void check_cut_predicates(const Graph& h, const NibbleResult& res, double theta, int b) {
  REQUIRE(res.cut.has_value());
  const auto& c = *res.cut;
  double logm = std::log(static_cast<double>(h.edge_count())) + 4.0;
  CHECK(conductance(h, c) <= theta * (1.0 + 1e-9));
  uint64_t vol = volume(h, c);
  uint64_t total = 2 * static_cast<uint64_t>(h.edge_count());
  double minmass = std::numeric_limits<double>::infinity();
  for (VertexId v : c) {
    auto it = res.last_mass.find(v);
    REQUIRE(it != res.last_mass.end());
    minmass = std::min(minmass, it->second);
  }
  CHECK(minmass >= 5.0 * theta / (392.0 * logm * static_cast<double>(vol)) * (1.0 - 1e-9));
  CHECK(6 * vol <= 5 * total);
  CHECK(7 * vol >= (uint64_t{5} << (b - 1)));
}

bool is_partition_of(const std::vector<std::vector<VertexId>>& sets, size_t n) {
  std::vector<int> seen(n, 0);
  for (const auto& s : sets)
    for (VertexId v : s) {
      if (v >= n || seen[v]) return false;
      seen[v] = 1;
    }
  for (size_t v = 0; v < n; ++v)
    if (!seen[v]) return false;
  return true;
}

bool respects(const std::vector<std::vector<VertexId>>& sets,
              const std::vector<std::vector<VertexId>>& parts) {
  for (const auto& part : parts) {
    bool placed = false;
    for (const auto& s : sets) {
      size_t cin = 0;
      for (VertexId v : part)
        if (std::find(s.begin(), s.end(), v) != s.end()) ++cin;
      if (cin == part.size()) placed = true;
      else if (cin != 0) return false;
    }
    if (!placed) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("walk parameters follow the step-count and truncation formulas") {
  NibbleParams p = NibbleParams::make(3, 1.0, 1);
  CHECK(p.t0 == doctest::Approx(249.83200214473738).epsilon(1e-14));
  CHECK(p.steps == 250);
  double l = std::log(3.0) + 4.0;
  CHECK(p.eps_b == doctest::Approx(1.0 / (56.0 * l * p.t0 * 2.0)).epsilon(1e-14));

  NibbleParams q = NibbleParams::make(21, 0.1, 3);
  CHECK(q.steps == static_cast<int>(std::ceil(q.t0)));
  double lq = std::log(21.0) + 4.0;
  CHECK(q.t0 == doctest::Approx(49.0 * lq / 0.01).epsilon(1e-14));
  CHECK(q.eps_b == doctest::Approx(0.1 / (56.0 * lq * q.t0 * 8.0)).epsilon(1e-14));

  CHECK_THROWS_AS(NibbleParams::make(3, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(NibbleParams::make(3, 1.5, 1), ConfigError);
  CHECK_THROWS_AS(NibbleParams::make(3, 0.5, 0), ConfigError);
  CHECK_THROWS_AS(NibbleParams::make(0, 0.5, 1), ConfigError);
}

TEST_CASE("theta maps invert and the damped cube map matches its formula") {
  ThetaMaps tm{100, 1.0};
  std::mt19937_64 rng(41);
  for (int i = 0; i < 1000; ++i) {
    double theta = (static_cast<double>(rng() >> 11) * 0x1.0p-53) * 0.999 + 0.001;
    CHECK(tm.minus(tm.plus(theta)) == doctest::Approx(theta).epsilon(1e-9));
    CHECK(tm.f_minus(tm.f_plus(theta)) == doctest::Approx(theta).epsilon(1e-9));
  }
  double l = std::log(300.0) + 4.0;
  CHECK(tm.plus_damped(1.0) == doctest::Approx(1.0 / (38416.0 * l * l)).epsilon(1e-12));
  CHECK(tm.plus(0.5) == doctest::Approx(0.125));
  ThetaMaps tm2{100, 3.0};
  CHECK(tm2.f_plus(0.5) == doctest::Approx(0.125 / (3.0 * l * l)).epsilon(1e-12));
}

TEST_CASE("one lazy step splits mass between staying and incident edges") {
  Graph k2 = Graph::simple(2);
  k2.add_edge(0, 1, 1.0);
  SparseMass chi = {{0, 1.0}};
  SparseMass next = walk_step(k2, chi);
  CHECK(next.size() == 2);
  CHECK(next[0] == doctest::Approx(0.5));
  CHECK(next[1] == doctest::Approx(0.5));

  // Zero-degree vertices hold their mass.
  Graph g3 = Graph::simple(3);
  g3.add_edge(1, 2, 1.0);
  SparseMass still = walk_step(g3, {{0, 1.0}});
  CHECK(still.size() == 1);
  CHECK(still[0] == doctest::Approx(1.0));
}

TEST_CASE("untruncated walks conserve mass exactly") {
  std::mt19937_64 rng(4242);
  Graph g = random_graph(rng, 20, 40);
  SparseMass p = {{3, 1.0}};
  for (int t = 0; t < 50; ++t) {
    p = walk_step(g, p);
    CHECK(mass_sum(p) == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("truncation zeroes small entries and the truncated walk never overtakes") {
  Graph h = clique_pair5();
  SparseMass m = {{0, 0.4}, {1, 1e-9}, {5, 0.2}};
  SparseMass cut = truncate_mass(h, m, 1e-6);
  CHECK(cut.count(0) == 1);
  CHECK(cut.count(5) == 1);
  CHECK(cut.count(1) == 0);  // 1e-9 < 2 * 1e-6 * deg
  // Idempotent at the same threshold.
  SparseMass again = truncate_mass(h, cut, 1e-6);
  CHECK(again == cut);

  NibbleParams prm = NibbleParams::make(h.edge_count(), 0.3, 2);
  SparseMass exact = {{0, 1.0}}, trunc = {{0, 1.0}};
  for (int t = 0; t < 40; ++t) {
    exact = walk_step(h, exact);
    trunc = truncate_mass(h, walk_step(h, trunc), prm.eps_b);
    for (const auto& [v, pv] : trunc) {
      auto it = exact.find(v);
      REQUIRE(it != exact.end());
      CHECK(pv <= it->second * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("sweep cuts on the bridged clique pair at two conductance targets") {
  Graph h = clique_pair5();

  NibbleResult loose = nibble_run(h, 0, 0.3, 3);
  REQUIRE(loose.cut.has_value());
  CHECK(*loose.cut == std::vector<VertexId>{0, 1, 2, 3});
  CHECK(loose.steps_run == 1);
  CHECK(conductance(h, *loose.cut) == doctest::Approx(0.25));
  check_cut_predicates(h, loose, 0.3, 3);

  NibbleResult tight = nibble_run(h, 0, 0.1, 3);
  REQUIRE(tight.cut.has_value());
  CHECK(*tight.cut == std::vector<VertexId>{0, 1, 2, 3, 4});
  CHECK(tight.steps_run == 1);
  CHECK(conductance(h, *tight.cut) == doctest::Approx(1.0 / 21));
  check_cut_predicates(h, tight, 0.1, 3);

  // One step from vertex 0 touches exactly its own incident edges (ids 0..3).
  CHECK(tight.visited == std::vector<EdgeId>{0, 1, 2, 3});
  CHECK(visited_edges(h, 0, 0.1, 3) == tight.visited);
  CHECK(nibble(h, 0, 0.1, 3) == tight.cut);

  // Determinism: identical inputs give identical runs.
  NibbleResult rerun = nibble_run(h, 0, 0.1, 3);
  CHECK(rerun.cut == tight.cut);
  CHECK(rerun.visited == tight.visited);
  CHECK(rerun.steps_run == tight.steps_run);
  CHECK(rerun.last_mass == tight.last_mass);
}

TEST_CASE("theta controls how much of a component a sweep cut takes") {
  Graph h = two_triangles();
  auto loose = nibble(h, 0, 0.9, 1);
  REQUIRE(loose.has_value());
  CHECK(*loose == std::vector<VertexId>{0, 1});
  auto whole = nibble(h, 0, 0.4, 1);
  REQUIRE(whole.has_value());
  CHECK(*whole == std::vector<VertexId>{0, 1, 2});
  CHECK(conductance(h, *whole) == doctest::Approx(0.0));
}

TEST_CASE("an expander defeats the sweep for its full step budget") {
  Graph h = complete(6);
  // Oracle: every cut of K6 has conductance at least 0.6.
  double best = std::numeric_limits<double>::infinity();
  for (uint32_t mask = 1; mask + 1 < (1u << 6); ++mask) {
    std::vector<VertexId> s;
    for (VertexId v = 0; v < 6; ++v)
      if (mask & (1u << v)) s.push_back(v);
    best = std::min(best, conductance(h, s));
  }
  CHECK(best == doctest::Approx(0.6));

  NibbleResult res = nibble_run(h, 0, 0.01, 1);
  CHECK_FALSE(res.cut.has_value());
  CHECK(res.steps_run == 3286945);  // ceil(49 (ln 15 + 4) / 0.0001)
  CHECK(res.visited.size() == 15);  // every edge touched
  CHECK(mass_sum(res.last_mass) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("a zero-degree start fails immediately with nothing visited") {
  Graph g = Graph::simple(3);
  g.add_edge(1, 2, 1.0);
  NibbleResult res = nibble_run(g, 0, 0.5, 1);
  CHECK_FALSE(res.cut.has_value());
  CHECK(res.visited.empty());
  CHECK(res.steps_run == 0);
  CHECK(res.last_mass == SparseMass{{0, 1.0}});
  CHECK_THROWS_AS(nibble_run(g, 9, 0.5, 1), NotPresentError);
  CHECK_THROWS_AS(nibble_run(g, 1, -0.1, 1), ConfigError);
  CHECK_THROWS_AS(nibble_run(g, 1, 0.5, 0), ConfigError);
}

TEST_CASE("a replay through the exported mass ops reproduces a run") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 3; ++trial) {
    Graph g = random_graph(rng, 14, 26);
    if (g.degree(2) == 0) continue;
    double theta = 0.7;
    int b = 2;
    NibbleResult res = nibble_run(g, 2, theta, b);
    NibbleParams prm = NibbleParams::make(g.edge_count(), theta, b);

    SparseMass p = {{2, 1.0}};
    std::set<EdgeId> vis;
    for (int t = 1; t <= res.steps_run; ++t) {
      for (const auto& [v, pv] : p)
        for (EdgeId e : g.incident(v)) vis.insert(e);
      p = truncate_mass(g, walk_step(g, p), prm.eps_b);
    }
    CHECK(std::vector<EdgeId>(vis.begin(), vis.end()) == res.visited);
    CHECK(p.size() == res.last_mass.size());
    for (const auto& [v, pv] : res.last_mass) {
      auto it = p.find(v);
      REQUIRE(it != p.end());
      CHECK(it->second == doctest::Approx(pv).epsilon(1e-12));
    }
    if (res.cut) check_cut_predicates(g, res, theta, b);
  }
}

TEST_CASE("per-edge visit counts over all starts stay modest") {
  Graph g = path_graph(18);
  g.add_edge(2, 9, 1.0);
  g.add_edge(5, 14, 1.0);
  std::map<EdgeId, int> count;
  for (VertexId s = 0; s < 18; ++s)
    for (EdgeId e : visited_edges(g, s, 0.5, 2)) ++count[e];
  int worst = 0;
  for (const auto& [e, c] : count) worst = std::max(worst, c);
  CHECK(worst <= 18);
  double scale = std::ldexp(1.0, 2) * std::pow(std::log2(18.0), 3.0) / std::pow(0.5, 5.0);
  MESSAGE("visit-count fitted constant: ", static_cast<double>(worst) / scale);
}

TEST_CASE("induced subgraphs renumber densely and keep weights and multiplicity") {
  Graph g = Graph::multi(6);
  g.add_edge(0, 1, 2.0);
  g.add_edge(1, 3, 1.5);
  g.add_edge(1, 3, 1.5);
  g.add_edge(3, 5, 0.5);
  g.add_edge(2, 4, 9.0);
  Subgraph sub = induced_subgraph(g, {5, 1, 3, 1});
  CHECK(sub.to_parent == std::vector<VertexId>{1, 3, 5});
  CHECK(sub.graph.vertex_count() == 3);
  CHECK(sub.graph.edge_count() == 3);  // the parallel pair and (3,5)
  CHECK(sub.edge_to_parent.size() == 3);
  CHECK(g.edge(sub.edge_to_parent[0]).weight == 1.5);
  CHECK(sub.graph.edge(0).weight == 1.5);
  CHECK(sub.to_sub.at(5) == 2);
  CHECK_THROWS_AS(induced_subgraph(g, {99}), NotPresentError);
}

TEST_CASE("component listing orders by least vertex") {
  Graph g = Graph::simple(7);
  g.add_edge(1, 2, 1.0);
  g.add_edge(2, 3, 1.0);
  g.add_edge(4, 5, 1.0);
  auto comps = connected_components(g);
  REQUIRE(comps.size() == 4);
  CHECK(comps[0] == std::vector<VertexId>{0});
  CHECK(comps[1] == std::vector<VertexId>{1, 2, 3});
  CHECK(comps[2] == std::vector<VertexId>{4, 5});
  CHECK(comps[3] == std::vector<VertexId>{6});
}

TEST_CASE("exhaustive expansion constants on small graphs") {
  CHECK(expansion_constant(complete(4)) == doctest::Approx(2.0));
  CHECK(expansion_constant(path_graph(3)) == doctest::Approx(1.0));
  CHECK(expansion_constant(two_triangles()) == doctest::Approx(0.0));
  CHECK(std::isinf(expansion_constant(Graph::simple(1))));
  CHECK_THROWS_AS(expansion_constant(Graph::simple(25)), SizeError);
}

TEST_CASE("generated expanders are simple, connected, and expand") {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(splitmix64(seed));
    Graph g = simple_expander(16, rng, 12);
    CHECK(g.vertex_count() == 16);
    CHECK(g.edge_count() <= 12 * 16);
    CHECK(bfs_connected(g));
    CHECK(is_gamma_expander(g, 1.0));
    size_t dmax = 0;
    for (VertexId v = 0; v < 16; ++v) dmax = std::max(dmax, g.degree(v));
    CHECK(static_cast<double>(dmax) <= 12.0 + 2.0 * 12.0 * std::log(16.0));
    // Simple: no duplicate pairs.
    std::set<std::pair<VertexId, VertexId>> pairs;
    for (EdgeId e : g.edge_ids())
      CHECK(pairs.insert({g.edge(e).lo(), g.edge(e).hi()}).second);
  }
  std::mt19937_64 rng(1);
  CHECK(simple_expander(5, rng, 12).edge_count() == 10);  // complete below d+1
  CHECK(simple_expander(2, rng, 12).edge_count() == 1);
  CHECK_THROWS_AS(simple_expander(1, rng, 12), ConfigError);
  CHECK_THROWS_AS(simple_expander(8, rng, 0), ConfigError);
}

TEST_CASE("expander replacement keeps inter-part edges and swaps interiors") {
  Graph h = Graph::simple(6);
  h.add_edge(0, 1, 3.0);
  h.add_edge(2, 3, 3.0);
  h.add_edge(4, 5, 3.0);
  h.add_edge(1, 2, 7.0);
  h.add_edge(3, 4, 7.0);
  std::vector<std::vector<VertexId>> parts = {{0, 1}, {2, 3}, {4, 5}};
  Graph hp = expander_replace(h, parts, 5);
  CHECK(hp.vertex_count() == 6);
  CHECK(hp.edge_count() == 5);  // 2 preserved inter edges + 3 pair expanders
  // Inter edges keep their weights; replaced interiors carry weight 1.
  size_t heavy = 0, unit = 0;
  for (EdgeId e : hp.edge_ids()) {
    if (hp.edge(e).weight == 7.0) ++heavy;
    if (hp.edge(e).weight == 1.0) ++unit;
  }
  CHECK(heavy == 2);
  CHECK(unit == 3);

  // A cut along part boundaries crosses the same edges before and after.
  std::vector<VertexId> cut = {0, 1, 2, 3};
  CHECK(conductance_parts(h, cut).first == conductance_parts(hp, cut).first);

  CHECK_THROWS_AS(expander_replace(h, {{0, 2}}, 5), ContractError);  // no (0,2) edge
  CHECK_THROWS_AS(expander_replace(h, {{0, 1}, {1, 2}}, 5), ContractError);
  CHECK_THROWS_AS(expander_replace(h, {{}}, 5), ContractError);
  CHECK_THROWS_AS(expander_replace(h, {{0, 99}}, 5), NotPresentError);
}

TEST_CASE("respecting cuts cross expander-replaced graphs unchanged") {
  std::mt19937_64 rng(909);
  Graph h = Graph::multi(18);
  std::vector<std::vector<VertexId>> parts;
  for (VertexId base = 0; base < 18; base += 6) {
    parts.push_back(iota_vec(base, base + 6));
    for (VertexId v = base; v + 1 < base + 6; ++v) h.add_edge(v, v + 1, 1.0);
  }
  h.add_edge(2, 8, 1.0);
  h.add_edge(7, 13, 1.0);
  h.add_edge(1, 16, 1.0);
  for (int i = 0; i < 10; ++i) {
    VertexId u = static_cast<VertexId>(rng() % 18), v = static_cast<VertexId>(rng() % 18);
    if (u / 6 == v / 6 || u == v) continue;
    h.add_edge(u, v, 1.0);
  }
  Graph hp = expander_replace(h, parts, 31);
  double worst_ratio = 0.0;
  for (int mask = 1; mask < 7; ++mask) {
    std::vector<VertexId> s;
    for (int pi = 0; pi < 3; ++pi)
      if (mask & (1 << pi)) s.insert(s.end(), parts[pi].begin(), parts[pi].end());
    if (s.size() == 18) continue;
    CHECK(conductance_parts(h, s).first == conductance_parts(hp, s).first);
    worst_ratio = std::max(worst_ratio, conductance(hp, s) / conductance(h, s));
  }
  MESSAGE("respecting-cut conductance inflation across replacement: ", worst_ratio);
}

TEST_CASE("cut rounding snaps straddling parts by majority") {
  Graph hp = clique_pair10();
  std::vector<std::vector<VertexId>> parts = {iota_vec(0, 10), iota_vec(10, 20)};
  std::vector<VertexId> a = iota_vec(0, 10);

  // A respecting cut is a fixed point at the default threshold.
  CHECK(round_cut_to_clusters(hp, parts, a) == a);

  // An 8-of-10 majority absorbs the whole part.
  CHECK(round_cut_to_clusters(hp, parts, iota_vec(0, 8), 0.25) == a);

  // A 2-of-10 minority is dropped.
  std::vector<VertexId> mixed = a;
  mixed.push_back(10);
  mixed.push_back(11);
  CHECK(round_cut_to_clusters(hp, parts, mixed, 0.25) == a);

  // Ties join the cut side.
  Graph k4p = Graph::simple(8);
  for (VertexId i = 0; i < 4; ++i)
    for (VertexId j = i + 1; j < 4; ++j) {
      k4p.add_edge(i, j, 1.0);
      k4p.add_edge(i + 4, j + 4, 1.0);
    }
  k4p.add_edge(0, 4, 1.0);
  auto tied = round_cut_to_clusters(k4p, {iota_vec(0, 4), iota_vec(4, 8)},
                                    {0, 1, 4, 5, 6, 7}, 0.75);
  CHECK(tied == iota_vec(0, 8));

  // Coarse cuts are rejected.
  CHECK_THROWS_AS(round_cut_to_clusters(hp, parts, {0}, 0.5), ContractError);
  CHECK(round_cut_to_clusters(hp, parts, {}, 0.25).empty());
}

TEST_CASE("rounding near-respecting cuts never inflates conductance much") {
  std::mt19937_64 rng(5150);
  Graph h = Graph::simple(24);
  {
    Graph a = simple_expander(12, rng, 12);
    for (EdgeId e : a.edge_ids()) h.add_edge(a.edge(e).u, a.edge(e).v, 1.0);
    Graph b = simple_expander(12, rng, 12);
    for (EdgeId e : b.edge_ids()) h.add_edge(b.edge(e).u + 12, b.edge(e).v + 12, 1.0);
  }
  h.add_edge(0, 12, 1.0);
  h.add_edge(5, 17, 1.0);
  std::vector<std::vector<VertexId>> parts = {iota_vec(0, 12), iota_vec(12, 24)};
  double worst = 0.0;
  int rounded = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::set<VertexId> s(parts[trial % 2].begin(), parts[trial % 2].end());
    for (int k = 0; k < 2; ++k) {
      VertexId v = static_cast<VertexId>(rng() % 24);
      if (s.count(v)) s.erase(v);
      else s.insert(v);
    }
    std::vector<VertexId> sv(s.begin(), s.end());
    if (sv.empty() || sv.size() == 24) continue;
    double phi = conductance(h, sv);
    if (phi > 0.25) continue;
    auto snapped = round_cut_to_clusters(h, parts, sv, 0.25);
    if (snapped.empty() || snapped.size() == 24) continue;
    worst = std::max(worst, conductance(h, snapped) / phi);
    ++rounded;
  }
  CHECK(rounded > 20);
  CHECK(worst <= 8.0);
  MESSAGE("rounding conductance ratio over ", rounded, " cuts: max ", worst);
}

TEST_CASE("partition packs small components greedily") {
  Graph g = Graph::simple(12);
  for (VertexId base = 0; base < 12; base += 3) {
    g.add_edge(base, base + 1, 1.0);
    g.add_edge(base + 1, base + 2, 1.0);
    g.add_edge(base, base + 2, 1.0);
  }
  PartitionResult res = partition(g, 0.5, 99);
  CHECK(res.cuts.size() == 1);
  CHECK(res.d_union == std::vector<VertexId>{0, 1, 2, 6, 7, 8});
  uint64_t vd = volume(g, res.d_union);
  CHECK(3 * vd >= 24);  // at least a third of the volume
  CHECK(3 * vd <= 2 * 24);  // at most two thirds
}

TEST_CASE("partition peels the sparse side of the bridged clique pair") {
  Graph h = clique_pair10();
  for (uint64_t seed : {1ull, 7ull, 40ull}) {
    PartitionResult res = partition(h, 0.3, seed);
    REQUIRE(res.cuts.size() == 1);
    uint64_t vd = volume(h, res.d_union);
    // A start inside a clique peels 8 of its clique (vol 73); a start at a
    // bridge endpoint drags the far endpoint into its tie group and peels a
    // 10-vertex set of volume 92 instead. Both sweeps are exact.
    bool clique_side = res.d_union.size() == 8 && vd == 73;
    bool bridged_side = res.d_union.size() == 10 && vd == 92;
    CHECK((clique_side || bridged_side));
    CHECK(conductance(h, res.d_union) <= 0.3);
    // Enough volume was removed to hit the early-stop bound.
    CHECK(144 * vd >= 35 * 182);
    PartitionResult again = partition(h, 0.3, seed);
    CHECK(again.cuts == res.cuts);
  }
}

TEST_CASE("peeled unions respect the 65/72 volume cap on random graphs") {
  std::mt19937_64 rng(31337);
  for (int trial = 0; trial < 4; ++trial) {
    Graph g = random_graph(rng, 16, 36);
    uint64_t total = 2 * static_cast<uint64_t>(g.edge_count());
    PartitionResult res = partition(g, 0.5, 1000 + trial);
    CHECK(72 * volume(g, res.d_union) <= 65 * total);
    std::set<VertexId> seen;
    size_t across = 0;
    for (const auto& c : res.cuts) {
      across += c.size();
      seen.insert(c.begin(), c.end());
    }
    CHECK(seen.size() == across);  // cuts are disjoint
    CHECK(seen == std::set<VertexId>(res.d_union.begin(), res.d_union.end()));
  }
  CHECK_THROWS_AS(partition(Graph::simple(4), 0.0, 1), ConfigError);
  CHECK_THROWS_AS(partition(Graph::simple(4), 1.5, 1), ConfigError);
  CHECK(partition(Graph::simple(4), 0.5, 1).d_union.empty());
}

TEST_CASE("the respecting cut search finds a planted super-cluster side") {
  Graph hp = clique_pair10();
  std::vector<std::vector<VertexId>> parts = {iota_vec(0, 10), iota_vec(10, 20)};
  SpectralConfig cfg;
  cfg.round_threshold = 0.25;
  auto d = cpartition(hp, parts, 0.3, 1.0, 7, cfg);
  bool is_a = d == iota_vec(0, 10), is_b = d == iota_vec(10, 20);
  CHECK((is_a || is_b));
  CHECK(conductance(hp, d) == doctest::Approx(1.0 / 91));
  CHECK(respects({d}, {d == iota_vec(0, 10) ? parts[0] : parts[1]}));
  // Half the volume is within the required headroom.
  CHECK(volume(hp, d) * 16 <= 15 * 2 * hp.edge_count());
  CHECK(cpartition(hp, parts, 0.3, 1.0, 7, cfg) == d);

  CHECK_THROWS_AS(cpartition(hp, parts, 0.0, 1.0, 7, cfg), ConfigError);
  CHECK_THROWS_AS(cpartition(hp, parts, 0.3, 0.0, 7, cfg), ConfigError);
}

TEST_CASE("an expander admits no respecting cut") {
  Graph k8 = complete(8);
  auto d = cpartition(k8, {iota_vec(0, 8)}, 0.5, 0.25, 11);
  CHECK(d.empty());
}

TEST_CASE("recursive partitioning splits disconnected respecting pieces") {
  Graph h = two_triangles();
  std::vector<std::vector<VertexId>> parts = {{0, 1, 2}, {3, 4, 5}};
  RcConfig cfg;
  RcResult res = rcpartition(h, parts, cfg, 3);
  CHECK(res.theta_init == 1.0);  // the schedule formula saturates at this size
  REQUIRE(res.sets.size() == 2);
  CHECK(res.sets[0] == std::vector<VertexId>{0, 1, 2});
  CHECK(res.sets[1] == std::vector<VertexId>{3, 4, 5});
  CHECK(res.crossing_edges == 0);
  CHECK(is_partition_of(res.sets, 6));
  CHECK(respects(res.sets, parts));
}

TEST_CASE("one expander comes back whole") {
  std::mt19937_64 rng(2024);
  Graph h = simple_expander(20, rng, 12);
  REQUIRE(bfs_connected(h));
  RcConfig cfg;
  RcResult res = rcpartition(h, {}, cfg, 12);
  REQUIRE(res.sets.size() == 1);
  CHECK(res.sets[0] == iota_vec(0, 20));
  CHECK(res.crossing_edges == 0);
  MESSAGE("expander piece measured expansion: ", expansion_constant(h));
}

TEST_CASE("recursion carves a long path into contiguous runs") {
  Graph h = path_graph(24);
  RcConfig cfg;
  cfg.c = 0.25;
  cfg.spectral.round_threshold = 0.25;
  cfg.spectral.starts_per_round = 4;
  RcResult res = rcpartition(h, {}, cfg, 5);
  CHECK(is_partition_of(res.sets, 24));
  CHECK(res.sets.size() >= 2);
  for (const auto& s : res.sets) {
    // Contiguous runs: extremes bound exactly |s| vertices.
    CHECK(s.back() - s.front() + 1 == s.size());
  }
  CHECK(res.crossing_edges == res.sets.size() - 1);
  uint64_t recount = 0;
  std::vector<size_t> owner(24);
  for (size_t i = 0; i < res.sets.size(); ++i)
    for (VertexId v : res.sets[i]) owner[v] = i;
  for (EdgeId e : h.edge_ids())
    if (owner[h.edge(e).u] != owner[h.edge(e).v]) ++recount;
  CHECK(recount == res.crossing_edges);
}

TEST_CASE("recursive partitions always respect their parts") {
  Graph h = clique_pair10();
  std::vector<std::vector<VertexId>> parts = {iota_vec(0, 10), iota_vec(10, 20)};
  RcConfig cfg;
  cfg.c = 0.25;
  cfg.spectral.round_threshold = 0.25;
  RcResult res = rcpartition(h, parts, cfg, 21);
  CHECK(is_partition_of(res.sets, 20));
  CHECK(respects(res.sets, parts));
  for (const auto& x : res.sets) {
    if (x.size() > 20) continue;
    Subgraph sub = induced_subgraph(h, x);
    double gamma = expansion_constant(sub.graph);
    CHECK(gamma > 0.0);  // every reported piece is connected
  }
  double size_terms = 0.0;
  for (const auto& x : res.sets)
    size_terms += static_cast<double>(x.size()) *
                  std::log2(20.0 / static_cast<double>(x.size()));
  if (size_terms > 0.0)
    MESSAGE("inter-set edge coefficient: ",
            static_cast<double>(res.crossing_edges) / size_terms);
}

TEST_CASE("edge sampling follows the probability formula") {
  Graph ring = Graph::multi(8);
  for (VertexId v = 0; v < 8; ++v)
    for (int k = 0; k < 2500; ++k) ring.add_edge(v, (v + 1) % 8, 1.0);
  std::mt19937_64 rng(606);
  SampleResult res = conductance_sample(ring, 1.0, 1e4, 0.5, 1000, rng);
  CHECK(res.p == doctest::Approx(36.0 * std::log(1000.0) / 2500.0).epsilon(1e-14));
  CHECK(res.p == doctest::Approx(0.09947167601734276).epsilon(1e-12));
  double expect = res.p * 20000.0;
  CHECK(std::abs(static_cast<double>(res.graph.edge_count()) - expect) < 250.0);
  CHECK(res.graph.vertex_count() == 8);

  // Clamped probability keeps everything.
  Graph small = Graph::multi(2);
  for (int k = 0; k < 10; ++k) small.add_edge(0, 1, 1.0);
  std::mt19937_64 rng2(607);
  SampleResult all = conductance_sample(small, 1.0, 1.0, 1.0, 1000, rng2);
  CHECK(all.p == 1.0);
  CHECK(all.graph.edge_count() == 10);

  // Degree precondition: 4998 < kappa * rho unless skipped.
  Graph thin = Graph::multi(8);
  for (VertexId v = 0; v < 8; ++v)
    for (int k = 0; k < 2499; ++k) thin.add_edge(v, (v + 1) % 8, 1.0);
  std::mt19937_64 rng3(608);
  CHECK_THROWS_AS(conductance_sample(thin, 1.0, 1e4, 0.5, 1000, rng3), ConfigError);
  SampleResult forced = conductance_sample(thin, 1.0, 1e4, 0.5, 1000, rng3, true);
  CHECK(forced.graph.vertex_count() == 8);
}

TEST_CASE("sampled graphs preserve cut conductance within the stated factors") {
  Graph ring = Graph::multi(6);
  for (VertexId v = 0; v < 6; ++v)
    for (int k = 0; k < 2500; ++k) ring.add_edge(v, (v + 1) % 6, 1.0);
  double rho = 0.5;
  int violations = 0, checked = 0;
  for (uint64_t trial = 0; trial < 50; ++trial) {
    std::mt19937_64 rng(RngStream(4711).stream(1, trial)());
    SampleResult s = conductance_sample(ring, 1.0, 1e4, rho, 60000, rng);
    for (uint32_t mask = 1; mask + 1 < (1u << 6); ++mask) {
      std::vector<VertexId> cut;
      for (VertexId v = 0; v < 6; ++v)
        if (mask & (1u << v)) cut.push_back(v);
      double phi = conductance(ring, cut);
      double phi_s = conductance(s.graph, cut);
      ++checked;
      if (phi >= rho) {
        if (phi_s < phi / 4.0 || phi_s > 4.0 * phi) ++violations;
      } else {
        if (phi_s > 6.0 * rho) ++violations;
      }
    }
  }
  CHECK(checked == 50 * 62);
  CHECK(violations == 0);
}
