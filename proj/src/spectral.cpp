#include "dynmsf/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>

#include "dynmsf/errors.hpp"
#include "dynmsf/rng.hpp"

namespace dynmsf {

namespace {

constexpr double kSlack = 1e-12;  // relative slack on binary64 threshold tests

// ln(m e^4) for a live edge count m >= 1.
double log_me4(size_t m) { return std::log(static_cast<double>(m)) + 4.0; }

uint64_t mix(uint64_t seed, uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt ^ 0x9e3779b97f4a7c15ull));
}

// Fisher-Yates with raw rng() draws so the sequence depends only on the
// engine, not on distribution internals.
template <typename T>
void shuffle_inplace(std::vector<T>& v, std::mt19937_64& rng) {
  for (size_t i = v.size(); i > 1; --i) {
    size_t j = static_cast<size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<VertexId> sorted_unique(std::vector<VertexId> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

NibbleParams NibbleParams::make(size_t edge_count, double theta, int b) {
  if (!(theta > 0.0) || !(theta <= 1.0))
    throw ConfigError("nibble: theta must lie in (0, 1]");
  if (b < 1) throw ConfigError("nibble: scale exponent b must be at least 1");
  if (edge_count == 0) throw ConfigError("nibble: graph has no edges");
  NibbleParams p;
  p.theta = theta;
  p.b = b;
  double l = log_me4(edge_count);
  p.t0 = 49.0 * l / (theta * theta);
  p.steps = static_cast<int>(std::ceil(p.t0));
  p.eps_b = theta / (56.0 * l * p.t0 * std::ldexp(1.0, b));
  p.logm = l;
  p.total_vol = 2 * static_cast<uint64_t>(edge_count);
  return p;
}

double ThetaMaps::minus(double value) const { return std::cbrt(value); }

double ThetaMaps::plus_damped(double theta) const {
  double l = std::log(3.0 * static_cast<double>(n)) + 4.0;
  return theta * theta * theta / (38416.0 * l * l);
}

double ThetaMaps::f_plus(double theta) const {
  double l = std::log(3.0 * static_cast<double>(n)) + 4.0;
  return theta * theta * theta / (logc * l * l);
}

double ThetaMaps::f_minus(double value) const {
  double l = std::log(3.0 * static_cast<double>(n)) + 4.0;
  return std::cbrt(value * logc * l * l);
}

SparseMass walk_step(const Graph& h, const SparseMass& mass) {
  SparseMass out;
  for (const auto& [v, pv] : mass) {
    if (pv == 0.0) continue;
    if (v >= h.vertex_count()) throw NotPresentError("walk_step: vertex out of range");
    out[v] += pv / 2.0;
    size_t deg = h.degree(v);
    if (deg == 0) {
      out[v] += pv / 2.0;
      continue;
    }
    double share = pv / (2.0 * static_cast<double>(deg));
    for (EdgeId e : h.incident(v)) out[h.other(e, v)] += share;
  }
  return out;
}

SparseMass truncate_mass(const Graph& h, const SparseMass& mass, double eps) {
  SparseMass out;
  for (const auto& [v, pv] : mass) {
    if (v >= h.vertex_count()) throw NotPresentError("truncate_mass: vertex out of range");
    if (pv >= 2.0 * eps * static_cast<double>(h.degree(v)) && pv != 0.0) out[v] = pv;
  }
  return out;
}

NibbleResult nibble_run(const Graph& h, VertexId s, double theta, int b) {
  return nibble_run(h, s, NibbleParams::make(h.edge_count(), theta, b));
}

NibbleResult nibble_run(const Graph& h, VertexId s, const NibbleParams& prm) {
  double theta = prm.theta;
  int b = prm.b;
  if (!(theta > 0.0) || !(theta <= 1.0))
    throw ConfigError("nibble: theta must lie in (0, 1]");
  if (b < 1) throw ConfigError("nibble: scale exponent b must be at least 1");
  size_t n = h.vertex_count();
  if (s >= n) throw NotPresentError("nibble: start vertex out of range");

  NibbleResult res;
  res.last_mass[s] = 1.0;
  if (h.degree(s) == 0) return res;  // walk never leaves s; no prefix can qualify

  uint64_t total_vol = prm.total_vol;
  double logm = prm.logm;
  uint64_t floor9 = 5ull << (b - 1);  // line-9 lower window: 7 Vol >= 5 * 2^(b-1)

  std::vector<double> p(n, 0.0), q(n, 0.0);
  std::vector<uint8_t> touched(n, 0), in_prefix(n, 0);
  std::vector<uint8_t> visited(h.edge_slots(), 0);
  std::vector<VertexId> support = {s}, next, order;
  p[s] = 1.0;

  auto harvest = [&](NibbleResult& r) {
    r.steps_run = 0;
    for (EdgeId e = 0; e < visited.size(); ++e)
      if (visited[e]) r.visited.push_back(e);
    r.last_mass.clear();
    for (VertexId v = 0; v < n; ++v)
      if (p[v] != 0.0) r.last_mass[v] = p[v];
  };

  for (int t = 1; t <= prm.steps; ++t) {
    // Edges incident to the current support are visited by this step.
    for (VertexId v : support)
      for (EdgeId e : h.incident(v)) visited[e] = 1;

    // Lazy step followed by truncation below 2 eps_b d(v).
    next.clear();
    for (VertexId v : support) {
      double pv = p[v];
      size_t deg = h.degree(v);
      if (!touched[v]) {
        touched[v] = 1;
        next.push_back(v);
      }
      q[v] += pv / 2.0;
      double share = pv / (2.0 * static_cast<double>(deg));
      for (EdgeId e : h.incident(v)) {
        VertexId w = h.other(e, v);
        if (!touched[w]) {
          touched[w] = 1;
          next.push_back(w);
        }
        q[w] += share;
      }
    }
    support.clear();
    for (VertexId v : next) {
      touched[v] = 0;
      double qv = q[v];
      q[v] = 0.0;
      if (qv >= 2.0 * prm.eps_b * static_cast<double>(h.degree(v)) && qv != 0.0) {
        p[v] = qv;
        support.push_back(v);
      } else {
        p[v] = 0.0;
      }
    }

    // Sweep: order by mass (ties by id) and test each prefix. Vertices with
    // zero mass can never pass the per-vertex mass floor, so scanning the
    // support alone is exact.
    order = support;
    std::sort(order.begin(), order.end(), [&](VertexId a, VertexId c) {
      if (p[a] != p[c]) return p[a] > p[c];
      return a < c;
    });
    uint64_t vol = 0;
    int64_t crossing = 0;
    bool found = false;
    std::vector<VertexId> cut;
    for (VertexId v : order) {
      int64_t to_pref = 0;
      for (EdgeId e : h.incident(v))
        if (in_prefix[h.other(e, v)]) ++to_pref;
      crossing += static_cast<int64_t>(h.degree(v)) - 2 * to_pref;
      vol += h.degree(v);
      in_prefix[v] = 1;
      cut.push_back(v);
      uint64_t minv = std::min(vol, total_vol - vol);
      if (minv == 0) continue;
      bool phi_ok = static_cast<double>(crossing) <=
                    theta * static_cast<double>(minv) * (1.0 + kSlack);
      double floor8 = 5.0 * theta / (392.0 * logm * static_cast<double>(vol));
      bool mass_ok = p[v] >= floor8 * (1.0 - kSlack);
      bool window_ok = 6 * vol <= 5 * total_vol && 7 * vol >= floor9;
      if (phi_ok && mass_ok && window_ok) {
        found = true;
        break;
      }
    }
    for (VertexId v : cut) in_prefix[v] = 0;

    if (found) {
      harvest(res);
      res.steps_run = t;
      std::sort(cut.begin(), cut.end());
      res.cut = std::move(cut);
      return res;
    }
    if (support.empty()) {  // everything truncated away; later steps are no-ops
      harvest(res);
      res.steps_run = t;
      return res;
    }
  }
  harvest(res);
  res.steps_run = prm.steps;
  return res;
}

std::optional<std::vector<VertexId>> nibble(const Graph& h, VertexId s, double theta,
                                            int b) {
  return nibble_run(h, s, theta, b).cut;
}

std::vector<EdgeId> visited_edges(const Graph& h, VertexId s, double theta, int b) {
  return nibble_run(h, s, theta, b).visited;
}

std::vector<std::vector<VertexId>> connected_components(const Graph& g) {
  size_t n = g.vertex_count();
  std::vector<uint8_t> seen(n, 0);
  std::vector<std::vector<VertexId>> comps;
  std::deque<VertexId> queue;
  for (VertexId r = 0; r < n; ++r) {
    if (seen[r]) continue;
    seen[r] = 1;
    queue.push_back(r);
    std::vector<VertexId> comp;
    while (!queue.empty()) {
      VertexId v = queue.front();
      queue.pop_front();
      comp.push_back(v);
      for (EdgeId e : g.incident(v)) {
        VertexId w = g.other(e, v);
        if (!seen[w]) {
          seen[w] = 1;
          queue.push_back(w);
        }
      }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }
  return comps;
}

double expansion_constant(const Graph& g) {
  size_t n = g.vertex_count();
  if (n > 24) throw SizeError("expansion_constant: exhaustive check capped at 24 vertices");
  if (n <= 1) return std::numeric_limits<double>::infinity();
  std::vector<uint8_t> in(n, 0);
  uint64_t cnt_s = 0;
  int64_t crossing = 0;
  double best = std::numeric_limits<double>::infinity();
  uint64_t total = uint64_t{1} << (n - 1);
  for (uint64_t k = 1; k < total; ++k) {
    VertexId w = static_cast<VertexId>(__builtin_ctzll(k) + 1);
    int64_t to_s = 0;
    for (EdgeId e : g.incident(w))
      if (in[g.other(e, w)]) ++to_s;
    int64_t deg = static_cast<int64_t>(g.degree(w));
    if (!in[w]) {
      in[w] = 1;
      ++cnt_s;
      crossing += deg - 2 * to_s;
    } else {
      in[w] = 0;
      --cnt_s;
      crossing += 2 * to_s - deg;
    }
    uint64_t minc = std::min(cnt_s, static_cast<uint64_t>(n) - cnt_s);
    double ratio = static_cast<double>(crossing) / static_cast<double>(minc);
    best = std::min(best, ratio);
  }
  return best;
}

Subgraph induced_subgraph(const Graph& g, std::vector<VertexId> vertices) {
  Subgraph sub;
  sub.to_parent = sorted_unique(std::move(vertices));
  for (VertexId v : sub.to_parent)
    if (v >= g.vertex_count())
      throw NotPresentError("induced_subgraph: vertex out of range");
  sub.graph = Graph::multi(sub.to_parent.size());
  for (size_t i = 0; i < sub.to_parent.size(); ++i)
    sub.to_sub[sub.to_parent[i]] = static_cast<VertexId>(i);
  for (EdgeId e : g.edge_ids()) {
    const Edge& ed = g.edge(e);
    auto iu = sub.to_sub.find(ed.u);
    auto iv = sub.to_sub.find(ed.v);
    if (iu == sub.to_sub.end() || iv == sub.to_sub.end()) continue;
    sub.graph.add_edge(iu->second, iv->second, ed.weight);
    sub.edge_to_parent.push_back(e);
  }
  return sub;
}

Graph simple_expander(size_t s, std::mt19937_64& rng, int d) {
  if (s < 2) throw ConfigError("simple_expander: need at least two vertices");
  if (d < 1) throw ConfigError("simple_expander: out-degree must be positive");
  size_t d_eff = std::min(static_cast<size_t>(d), s - 1);
  std::set<std::pair<VertexId, VertexId>> pairs;
  std::vector<VertexId> cand;
  for (VertexId v = 0; v < s; ++v) {
    cand.clear();
    for (VertexId w = 0; w < s; ++w)
      if (w != v) cand.push_back(w);
    // Partial Fisher-Yates: the first d_eff entries are a uniform
    // without-replacement draw.
    for (size_t i = 0; i < d_eff; ++i) {
      size_t j = i + static_cast<size_t>(rng() % (cand.size() - i));
      std::swap(cand[i], cand[j]);
      VertexId w = cand[i];
      pairs.insert({std::min(v, w), std::max(v, w)});
    }
  }
  Graph g = Graph::simple(s);
  for (const auto& [a, b] : pairs) g.add_edge(a, b, 1.0);
  return g;
}

Graph expander_replace(const Graph& h, const std::vector<std::vector<VertexId>>& parts,
                       uint64_t seed, int d) {
  size_t n = h.vertex_count();
  std::vector<int64_t> part_of(n, -1);
  for (size_t pi = 0; pi < parts.size(); ++pi) {
    if (parts[pi].empty()) throw ContractError("expander_replace: empty part");
    for (VertexId v : parts[pi]) {
      if (v >= n) throw NotPresentError("expander_replace: vertex out of range");
      if (part_of[v] != -1) throw ContractError("expander_replace: overlapping parts");
      part_of[v] = static_cast<int64_t>(pi);
    }
    if (parts[pi].size() > 1 && !bfs_connected(h, parts[pi]))
      throw ContractError("expander_replace: part induces a disconnected subgraph");
  }
  Graph out = Graph::multi(n);
  for (EdgeId e : h.edge_ids()) {
    const Edge& ed = h.edge(e);
    if (part_of[ed.u] != -1 && part_of[ed.u] == part_of[ed.v]) continue;
    out.add_edge(ed.u, ed.v, ed.weight);
  }
  std::mt19937_64 rng(mix(seed, 0x5eedull));
  for (const auto& part : parts) {
    if (part.size() < 2) continue;
    std::vector<VertexId> verts = sorted_unique(part);
    Graph ex = simple_expander(verts.size(), rng, d);
    for (EdgeId e : ex.edge_ids()) {
      const Edge& ed = ex.edge(e);
      out.add_edge(verts[ed.u], verts[ed.v], 1.0);
    }
  }
  return out;
}

std::vector<VertexId> round_cut_to_clusters(const Graph& hp,
                                            const std::vector<std::vector<VertexId>>& parts,
                                            const std::vector<VertexId>& s_cut,
                                            double max_conductance) {
  size_t n = hp.vertex_count();
  std::vector<uint8_t> in_s(n, 0);
  for (VertexId v : s_cut) {
    if (v >= n) throw NotPresentError("round_cut_to_clusters: vertex out of range");
    in_s[v] = 1;
  }
  std::vector<VertexId> cur = sorted_unique(s_cut);
  if (cur.empty() || cur.size() == n) return cur;  // nothing to snap
  double phi = conductance(hp, cur);
  if (phi > max_conductance * (1.0 + kSlack))
    throw ContractError("round_cut_to_clusters: cut conductance above the rounding bound");
  std::vector<uint8_t> claimed(n, 0);
  for (const auto& part : parts) {
    size_t cin = 0;
    for (VertexId v : part) {
      if (v >= n) throw NotPresentError("round_cut_to_clusters: vertex out of range");
      if (claimed[v]) throw ContractError("round_cut_to_clusters: overlapping parts");
      claimed[v] = 1;
      if (in_s[v]) ++cin;
    }
    if (cin == 0 || cin == part.size()) continue;
    // Straddler: absorb when the inside piece is at least as large, else drop.
    uint8_t keep = (part.size() - cin <= cin) ? 1 : 0;
    for (VertexId v : part) in_s[v] = keep;
  }
  std::vector<VertexId> out;
  for (VertexId v = 0; v < n; ++v)
    if (in_s[v]) out.push_back(v);
  return out;
}

PartitionResult partition(const Graph& h, double theta, uint64_t seed,
                          size_t max_starts) {
  if (!(theta > 0.0) || !(theta <= 1.0))
    throw ConfigError("partition: theta must lie in (0, 1]");
  PartitionResult res;
  size_t n = h.vertex_count();
  if (n == 0) return res;
  uint64_t total = 2 * static_cast<uint64_t>(h.edge_count());
  if (total == 0) return res;

  auto comps = connected_components(h);
  bool all_small = true;
  std::vector<uint64_t> cvol(comps.size(), 0);
  for (size_t i = 0; i < comps.size(); ++i) {
    cvol[i] = volume(h, comps[i]);
    if (2 * cvol[i] > total) all_small = false;
  }

  if (all_small) {
    // Greedy two-bin packing by volume, largest first; the heavier-first rule
    // with ties to the cut side lands the cut in [1/3, 2/3] of the volume.
    std::vector<size_t> idx(comps.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      if (cvol[a] != cvol[b]) return cvol[a] > cvol[b];
      return comps[a][0] < comps[b][0];
    });
    uint64_t vd = 0, vr = 0;
    std::vector<VertexId> d;
    for (size_t i : idx) {
      if (vd <= vr) {
        vd += cvol[i];
        d.insert(d.end(), comps[i].begin(), comps[i].end());
      } else {
        vr += cvol[i];
      }
    }
    std::sort(d.begin(), d.end());
    res.cuts.push_back(d);
    res.d_union = std::move(d);
    return res;
  }

  int bmax = 1;
  while ((uint64_t{1} << bmax) < h.edge_count()) ++bmax;
  std::mt19937_64 rng(mix(seed, 0x9a27ull));
  std::vector<uint8_t> in_d(n, 0);
  uint64_t vol_d = 0;

  while (144 * vol_d < 35 * total) {
    std::vector<VertexId> remaining;
    for (VertexId v = 0; v < n; ++v)
      if (!in_d[v]) remaining.push_back(v);
    if (remaining.empty()) break;
    Subgraph sub = induced_subgraph(h, remaining);
    if (sub.graph.edge_count() == 0) break;
    shuffle_inplace(remaining, rng);
    size_t budget = max_starts == 0 ? remaining.size()
                                    : std::min(remaining.size(), max_starts);
    bool peeled = false;
    for (size_t i = 0; i < budget && !peeled; ++i) {
      VertexId start = sub.to_sub.at(remaining[i]);
      for (int b = bmax; b >= 1 && !peeled; --b) {
        auto cut = nibble(sub.graph, start, theta, b);
        if (!cut) continue;
        std::vector<VertexId> cparent;
        cparent.reserve(cut->size());
        for (VertexId v : *cut) cparent.push_back(sub.to_parent[v]);
        std::sort(cparent.begin(), cparent.end());
        uint64_t cvolp = volume(h, cparent);
        if (72 * (vol_d + cvolp) > 65 * total) continue;  // keep the union cap
        for (VertexId v : cparent) in_d[v] = 1;
        vol_d += cvolp;
        res.cuts.push_back(std::move(cparent));
        peeled = true;
      }
    }
    if (!peeled) break;
  }
  for (VertexId v = 0; v < n; ++v)
    if (in_d[v]) res.d_union.push_back(v);
  return res;
}

std::vector<VertexId> cpartition(const Graph& hp,
                                 const std::vector<std::vector<VertexId>>& parts,
                                 double theta, double c, uint64_t seed,
                                 const SpectralConfig& cfg) {
  if (!(theta > 0.0) || !(theta <= 1.0))
    throw ConfigError("cpartition: theta must lie in (0, 1]");
  if (!(c > 0.0)) throw ConfigError("cpartition: iteration knob c must be positive");
  size_t n = hp.vertex_count();
  std::vector<VertexId> best;
  if (n < 2) return best;
  uint64_t total = 2 * static_cast<uint64_t>(hp.edge_count());
  if (total == 0) return best;

  int rounds = std::max(1, static_cast<int>(std::ceil(cfg.citer * c)));
  int logn = std::max(1, static_cast<int>(std::ceil(std::log2(static_cast<double>(n)))));
  int iters = rounds * logn;
  double phi_gate = cfg.kappa_log * theta *
                    std::pow(std::log2(static_cast<double>(std::max<size_t>(2, n))), 3.0);

  uint64_t best_small = 0;
  for (int it = 0; it < iters; ++it) {
    uint64_t it_seed = mix(seed, 0xc0ffee00ull + static_cast<uint64_t>(it));
    auto dres = partition(hp, theta, it_seed, cfg.starts_per_round);
    const auto& dp = dres.d_union;
    if (dp.empty() || dp.size() == n) continue;
    uint64_t vd = volume(hp, dp);
    if (vd == 0 || vd == total) continue;
    double phi = static_cast<double>(conductance_parts(hp, dp).first) /
                 static_cast<double>(std::min(vd, total - vd));
    if (phi > phi_gate * (1.0 + kSlack)) continue;
    if (phi > cfg.round_threshold * (1.0 + kSlack)) continue;
    auto snapped = round_cut_to_clusters(hp, parts, dp, cfg.round_threshold);
    if (snapped.empty() || snapped.size() == n) continue;
    uint64_t vs = volume(hp, snapped);
    uint64_t small = std::min(vs, total - vs);
    if (small == 0 || small <= best_small) continue;
    best_small = small;
    if (2 * vs <= total) {
      best = std::move(snapped);
    } else {
      std::vector<uint8_t> in_s(n, 0);
      for (VertexId v : snapped) in_s[v] = 1;
      best.clear();
      for (VertexId v = 0; v < n; ++v)
        if (!in_s[v]) best.push_back(v);
    }
  }
  if (!best.empty()) {
    uint64_t vb = volume(hp, best);
    if (static_cast<double>(vb) > (1.0 - cfg.dfrac) * static_cast<double>(total))
      throw ContractError("cpartition: returned side exceeds the volume headroom");
  }
  return best;
}

namespace {

struct RcWorker {
  const Graph& hp;
  const std::vector<std::vector<VertexId>>& parts;
  const RcConfig& cfg;
  uint64_t seed;
  size_t n;
  ThetaMaps tm;
  uint64_t node_counter = 0;
  std::vector<std::vector<VertexId>> pieces;

  void recurse(std::vector<VertexId> w, double theta, int depth) {
    if (w.size() <= 1) {
      pieces.push_back(std::move(w));
      return;
    }
    Subgraph sub = induced_subgraph(hp, w);
    std::vector<uint8_t> in_w(hp.vertex_count(), 0);
    for (VertexId v : w) in_w[v] = 1;
    std::vector<std::vector<VertexId>> subparts;
    for (const auto& part : parts) {
      size_t cin = 0;
      for (VertexId v : part)
        if (in_w[v]) ++cin;
      if (cin == 0) continue;
      if (cin != part.size())
        throw ContractError("rcpartition: recursion set splits a part");
      std::vector<VertexId> mapped;
      mapped.reserve(part.size());
      for (VertexId v : part) mapped.push_back(sub.to_sub.at(v));
      subparts.push_back(sorted_unique(std::move(mapped)));
    }
    uint64_t node_seed = mix(seed, 0xabcd0000ull + ++node_counter);
    auto d_sub = cpartition(sub.graph, subparts, theta, cfg.c + 1.0, node_seed,
                            cfg.spectral);
    uint64_t vol_d = d_sub.empty() ? 0 : volume(sub.graph, d_sub);
    double nd = static_cast<double>(n);
    if (static_cast<double>(vol_d) < std::pow(nd, 2.0 * cfg.tau)) {
      pieces.push_back(std::move(w));
      return;
    }
    if (static_cast<double>(vol_d) >
        std::pow(nd, 1.0 - static_cast<double>(depth) * cfg.xi)) {
      std::vector<uint8_t> in_d(hp.vertex_count(), 0);
      std::vector<VertexId> dp, rest;
      for (VertexId v : d_sub) {
        dp.push_back(sub.to_parent[v]);
        in_d[sub.to_parent[v]] = 1;
      }
      for (VertexId v : w)
        if (!in_d[v]) rest.push_back(v);
      std::sort(dp.begin(), dp.end());
      recurse(std::move(dp), theta, depth);
      recurse(std::move(rest), theta, depth);
      return;
    }
    recurse(std::move(w), tm.f_plus(theta), depth + 1);
  }
};

}  // namespace

RcResult rcpartition(const Graph& h, const std::vector<std::vector<VertexId>>& parts,
                     const RcConfig& cfg, uint64_t seed) {
  RcResult out;
  size_t n = h.vertex_count();
  if (n == 0) return out;
  ThetaMaps tm{std::max<size_t>(2, n), cfg.spectral.logc};

  double theta = std::cbrt(std::pow(static_cast<double>(std::max<size_t>(2, n)),
                                    -cfg.tau));
  int hops = std::max(1, static_cast<int>(std::ceil(1.0 / cfg.xi)));
  for (int i = 0; i < hops; ++i) theta = tm.f_minus(theta);
  theta = std::min(1.0, theta);
  out.theta_init = theta;

  Graph hp = expander_replace(h, parts, mix(seed, 0x7e9ull), cfg.spectral.expander_d);

  RcWorker worker{hp, parts, cfg, seed, std::max<size_t>(2, n), tm, 0, {}};
  std::vector<VertexId> all;
  for (VertexId v = 0; v < n; ++v) all.push_back(v);
  worker.recurse(std::move(all), theta, 1);

  // Refine each piece into connected components of the original graph.
  std::vector<std::vector<VertexId>> sets;
  for (const auto& piece : worker.pieces) {
    if (piece.empty()) continue;
    Subgraph sub = induced_subgraph(h, piece);
    for (auto& comp : connected_components(sub.graph)) {
      for (VertexId& v : comp) v = sub.to_parent[v];
      sets.push_back(std::move(comp));
    }
  }
  std::sort(sets.begin(), sets.end(),
            [](const auto& a, const auto& b) { return a[0] < b[0]; });

  std::vector<size_t> set_of(n, 0);
  for (size_t i = 0; i < sets.size(); ++i)
    for (VertexId v : sets[i]) set_of[v] = i;
  for (EdgeId e : h.edge_ids()) {
    const Edge& ed = h.edge(e);
    if (set_of[ed.u] != set_of[ed.v]) ++out.crossing_edges;
  }
  out.sets = std::move(sets);
  return out;
}

SampleResult conductance_sample(const Graph& gc, double c, double kappa, double rho,
                                size_t ambient_n, std::mt19937_64& rng,
                                bool skip_degree_check) {
  if (!(kappa > 0.0) || !(rho > 0.0))
    throw ConfigError("conductance_sample: kappa and rho must be positive");
  if (!(c >= 0.0)) throw ConfigError("conductance_sample: c must be nonnegative");
  if (ambient_n < 2) throw ConfigError("conductance_sample: ambient size too small");
  if (!skip_degree_check) {
    double floor = kappa * rho;
    for (VertexId v = 0; v < gc.vertex_count(); ++v)
      if (static_cast<double>(gc.degree(v)) < floor * (1.0 - kSlack))
        throw ConfigError("conductance_sample: vertex degree below kappa*rho");
  }
  SampleResult out;
  out.p = std::min(1.0, (12.0 * c + 24.0) * std::log(static_cast<double>(ambient_n)) /
                            (rho * rho * kappa));
  out.graph = Graph::multi(gc.vertex_count());
  for (EdgeId e : gc.edge_ids()) {
    const Edge& ed = gc.edge(e);
    double u = unit_draw(rng);
    if (out.p >= 1.0 || u < out.p) out.graph.add_edge(ed.u, ed.v, ed.weight);
  }
  return out;
}

}  // namespace dynmsf
