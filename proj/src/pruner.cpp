#include "dynmsf/pruner.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dynmsf/errors.hpp"
#include "dynmsf/rng.hpp"

namespace dynmsf {

namespace {

// Live companion edge joining u and v, if any.
EdgeId edge_between(const Graph& g, VertexId u, VertexId v) {
  for (EdgeId e : g.incident(u))
    if (g.other(e, u) == v) return e;
  return kNoEdge;
}

void emit_line(std::ostream* os, nlohmann::json&& j) {
  if (os) (*os) << j.dump() << "\n";
}

}  // namespace

std::vector<size_t> sample_graph_picks(size_t h, double p, std::mt19937_64& rng) {
  if (!(p >= 0.0) || !(p <= 1.0))
    throw ConfigError("sample_graph_picks: p outside [0, 1]");
  std::vector<size_t> picks;
  if (h == 0 || p == 0.0) return picks;
  std::vector<double> powq(h + 1);  // powq[k] = (1-p)^k
  powq[0] = 1.0;
  for (size_t k = 1; k <= h; ++k) powq[k] = powq[k - 1] * (1.0 - p);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  size_t base = 0;  // replicas before base are already decided
  while (base < h) {
    size_t s = h - base;
    // Offset k in [1, s+1]: k <= s lands the edge in the k-th undecided
    // replica, k = s+1 skips all the rest. P(k >= j) = (1-p)^(j-1), so the
    // mass of [i1, i2] is a difference of powq values and each binary split
    // below needs one uniform draw only.
    auto mass = [&](size_t i1, size_t i2) {
      return powq[i1 - 1] - (i2 <= s ? powq[i2] : 0.0);
    };
    size_t i1 = 1, i2 = s + 1;
    while (i1 < i2) {
      size_t j = (i1 + i2 + 1) / 2;  // split into [i1, j-1] | [j, i2]
      double total = mass(i1, i2);
      if (!(total > 0.0)) {  // mass underflowed: everything sits far right
        i1 = i2;
        break;
      }
      if (unit(rng) * total < mass(i1, j - 1)) i2 = j - 1;
      else i1 = j;
    }
    if (i1 == s + 1) break;
    picks.push_back(base + i1 - 1);
    base += i1;
  }
  return picks;
}

PrunerParams PrunerParams::derive(size_t n, double gamma, double kappa, uint64_t delta,
                                  double c, double companion_degree) {
  if (n < 2 || !(gamma > 0.0) || !(kappa >= 1.0) || delta == 0 ||
      !(companion_degree >= 1.0))
    throw ConfigError("PrunerParams::derive: degenerate inputs");
  PrunerParams p;
  p.gamma = gamma;
  p.kappa = kappa;
  p.theta = gamma / 96.0;
  ThetaMaps maps{n, 1.0};
  p.theta_plus = maps.plus_damped(p.theta);
  p.gamma_prime = p.theta_plus * p.theta_plus * p.theta_plus / 6561.0;
  p.rho = p.theta_plus / 3.0;
  double raw = (12.0 * c + 24.0) * std::log(static_cast<double>(n)) /
               (p.rho * p.rho * kappa);
  p.sample_p = std::min(1.0, raw);
  p.d_max = 6.0 * p.sample_p * kappa;
  double budget = 64.0 * static_cast<double>(delta) / (gamma * kappa);
  p.h_max = static_cast<size_t>(std::ceil(budget));
  if (p.h_max == 0) p.h_max = 1;
  // Largest b >= 1 whose guaranteed sweep-set size (4/7 * 2^(b-1) over the
  // degree bound) still fits the removal budget.
  auto cap_b = [](double limit) {
    int b = 1;
    double t = 1.0;
    while (b < 62 && t * 2.0 <= limit) {
      t *= 2.0;
      ++b;
    }
    return b;
  };
  p.b_max_plain = cap_b(1.75 * p.d_max * budget);
  p.b_max = cap_b(1.75 * companion_degree * 384.0 * p.sample_p *
                  static_cast<double>(delta) / gamma);
  return p;
}

// One sampled replica: its simple companion graph (original endpoints of the
// sampled cross edges plus per-cluster mixing graphs) and every cached
// structure derived from it.
struct ClusterPruner::Replica {
  bool consumed = false;
  Graph comp = Graph::simple(0);

  struct HostEdge {
    VertexId u = 0, v = 0;
    EdgeId comp_eid = kNoEdge;
    bool present = false;
  };
  std::map<EdgeId, HostEdge> edges;        // host id -> record (sampled here)
  std::map<EdgeId, EdgeId> comp_to_host;   // companion id -> host id, live only

  std::map<uint32_t, std::vector<VertexId>> cbar;  // frozen endpoint sets
  std::map<uint32_t, std::vector<EdgeId>> mixer;   // companion ids of mixing edges
  std::map<uint32_t, size_t> deg;                  // live incident cross edges
  std::set<uint32_t> low;                          // active, below degree floor

  std::vector<NibbleParams> prm;  // [b-1]; empty if no edges at build
  // Per scale b: cached sweep per start (companion edge ids touched), the
  // edge -> starts dual, and the starts whose sweep returned a cut.
  std::vector<std::map<VertexId, std::vector<EdgeId>>> visited;
  std::vector<std::map<EdgeId, std::set<VertexId>>> visiting;
  std::vector<std::set<VertexId>> act;

  std::optional<std::pair<uint64_t, uint64_t>> consults;
};

ClusterPruner::ClusterPruner(
    size_t host_n, const std::vector<std::pair<uint32_t, std::vector<VertexId>>>& clusters,
    const std::vector<CrossEdge>& edges, const PrunerParams& params, uint64_t seed,
    const PrunerConfig& cfg)
    : n_(host_n), params_(params), cfg_(cfg), seed_(seed) {
  if (!(params_.theta > 0.0) || params_.theta > 1.0)
    throw ConfigError("ClusterPruner: theta outside (0, 1]");
  if (!(params_.sample_p >= 0.0) || !(params_.sample_p <= 1.0))
    throw ConfigError("ClusterPruner: sample_p outside [0, 1]");
  if (params_.b_max < 1) throw ConfigError("ClusterPruner: b_max below 1");
  if (params_.h_max == 0) throw ConfigError("ClusterPruner: no replicas");
  if (!(params_.low_degree_floor() >= 0.0))
    throw ConfigError("ClusterPruner: degree floor not finite");
  cluster_of_.assign(n_, kNoCluster);
  for (const auto& [id, mem] : clusters) {
    if (id == kNoCluster) throw ConfigError("ClusterPruner: reserved cluster id");
    if (mem.empty()) throw ConfigError("ClusterPruner: empty cluster");
    if (!members_.emplace(id, mem).second)
      throw ConfigError("ClusterPruner: duplicate cluster id");
    for (VertexId v : mem) {
      if (v >= n_) throw ConfigError("ClusterPruner: member out of range");
      if (cluster_of_[v] != kNoCluster)
        throw ConfigError("ClusterPruner: overlapping clusters");
      cluster_of_[v] = id;
    }
    active_.insert(id);
  }
  std::set<EdgeId> seen_ids;
  std::set<std::pair<VertexId, VertexId>> seen_pairs;
  for (const CrossEdge& ce : edges) {
    if (ce.id == kNoEdge || ce.u >= n_ || ce.v >= n_ || ce.u == ce.v)
      throw ConfigError("ClusterPruner: malformed cross edge");
    if (cluster_of_[ce.u] == kNoCluster || cluster_of_[ce.v] == kNoCluster)
      throw ConfigError("ClusterPruner: cross edge endpoint unclustered");
    if (cluster_of_[ce.u] == cluster_of_[ce.v])
      throw ConfigError("ClusterPruner: edge does not cross clusters");
    if (!seen_ids.insert(ce.id).second)
      throw ConfigError("ClusterPruner: duplicate cross edge id");
    if (!seen_pairs.insert({std::min(ce.u, ce.v), std::max(ce.u, ce.v)}).second)
      throw ConfigError("ClusterPruner: cross edges share endpoints");
  }
  build_replicas(edges);

  if (cfg_.events) {
    size_t cap_violations = 0;
    size_t max_deg = 0;
    for (size_t g = 0; g < replicas_.size(); ++g) {
      for (const auto& [c, d] : rep(g).deg) {
        max_deg = std::max(max_deg, d);
        if (params_.d_max > 0.0 && static_cast<double>(d) > params_.d_max)
          ++cap_violations;
      }
    }
    nlohmann::json per_b = nlohmann::json::array();
    for (int b = 1; b <= params_.b_max; ++b) {
      size_t edges_indexed = 0, pairs = 0, widest = 0;
      for (size_t g = 0; g < replicas_.size(); ++g) {
        const Replica& r = rep(g);
        for (const auto& [eid, ss] : r.visiting[b - 1]) {
          if (!r.comp_to_host.count(eid)) continue;  // mixing edges not reported
          ++edges_indexed;
          pairs += ss.size();
          widest = std::max(widest, ss.size());
        }
      }
      per_b.push_back({{"b", b},
                       {"cross_edges_indexed", edges_indexed},
                       {"starts_per_edge_mean",
                        edges_indexed ? static_cast<double>(pairs) / edges_indexed : 0.0},
                       {"starts_per_edge_max", widest}});
    }
    emit_line(cfg_.events, {{"op", "init"},
                            {"replicas", params_.h_max},
                            {"clusters", active_.size()},
                            {"sample_p", params_.sample_p},
                            {"degree_floor", params_.low_degree_floor()},
                            {"degree_cap", params_.d_max},
                            {"degree_cap_violations", cap_violations},
                            {"max_cluster_degree", max_deg},
                            {"b_max", params_.b_max},
                            {"b_max_plain", params_.b_max_plain},
                            {"index", per_b}});
  }
}

ClusterPruner::~ClusterPruner() = default;

const ClusterPruner::Replica& ClusterPruner::rep(size_t g) const {
  if (g >= replicas_.size()) throw NotPresentError("ClusterPruner: replica out of range");
  return replicas_[g];
}

ClusterPruner::Replica& ClusterPruner::rep(size_t g) {
  if (g >= replicas_.size()) throw NotPresentError("ClusterPruner: replica out of range");
  return replicas_[g];
}

std::mt19937_64 ClusterPruner::expander_rng() {
  return RngStream(seed_).stream(2, expander_serial_++);
}

void ClusterPruner::build_replicas(const std::vector<CrossEdge>& edges) {
  replicas_.resize(params_.h_max);
  auto rng = RngStream(seed_).stream(1, 0);
  for (const CrossEdge& ce : edges)
    for (size_t k : sample_graph_picks(params_.h_max, params_.sample_p, rng))
      replicas_[k].edges[ce.id] = {ce.u, ce.v, kNoEdge, true};
  for (size_t g = 0; g < replicas_.size(); ++g) {
    Replica& r = rep(g);
    r.comp = Graph::simple(n_);
    r.visited.assign(params_.b_max, {});
    r.visiting.assign(params_.b_max, {});
    r.act.assign(params_.b_max, {});
    for (uint32_t c : active_) r.deg[c] = 0;
    for (auto& [hid, he] : r.edges) {
      he.comp_eid = r.comp.add_edge(he.u, he.v, 1.0);
      r.comp_to_host[he.comp_eid] = hid;
      ++r.deg[cluster_of_[he.u]];
      ++r.deg[cluster_of_[he.v]];
    }
    for (uint32_t c : active_) {
      std::vector<VertexId> bar;
      for (const auto& [hid, he] : r.edges) {
        if (cluster_of_[he.u] == c) bar.push_back(he.u);
        if (cluster_of_[he.v] == c) bar.push_back(he.v);
      }
      std::sort(bar.begin(), bar.end());
      bar.erase(std::unique(bar.begin(), bar.end()), bar.end());
      attach_endpoints(g, c, std::move(bar));
    }
    if (r.comp.edge_count() > 0)
      for (int b = 1; b <= params_.b_max; ++b)
        r.prm.push_back(NibbleParams::make(r.comp.edge_count(), params_.theta, b));
    prime_index(g);
    for (uint32_t c : active_) refresh_low(g, c);
    order_.push_back(g);
  }
}

void ClusterPruner::attach_endpoints(size_t g, uint32_t cluster,
                                     std::vector<VertexId> bar) {
  Replica& r = rep(g);
  auto& eids = r.mixer[cluster];
  eids.clear();
  if (bar.size() >= 2) {
    auto rng = expander_rng();
    Graph x = simple_expander(bar.size(), rng, cfg_.expander_d);
    for (EdgeId e : x.edge_ids()) {
      VertexId a = bar[x.edge(e).u], b = bar[x.edge(e).v];
      if (edge_between(r.comp, a, b) != kNoEdge) continue;  // pair already wired
      eids.push_back(r.comp.add_edge(a, b, 1.0));
    }
  }
  r.cbar[cluster] = std::move(bar);
}

void ClusterPruner::prime_index(size_t g) {
  Replica& r = rep(g);
  if (r.prm.empty()) return;
  for (uint32_t c : active_)
    for (VertexId s : r.cbar.at(c))
      for (int b = 1; b <= params_.b_max; ++b) store_run(g, b, s);
}

NibbleResult ClusterPruner::run_start(size_t g, int b, VertexId s) const {
  const Replica& r = rep(g);
  if (r.prm.empty())
    throw ContractError("ClusterPruner: replica has no frozen walk scales");
  if (b < 1 || b > static_cast<int>(r.prm.size()))
    throw ConfigError("ClusterPruner: scale out of range");
  return nibble_run(r.comp, s, r.prm[b - 1]);
}

void ClusterPruner::store_run(size_t g, int b, VertexId s) {
  Replica& r = rep(g);
  NibbleResult res = run_start(g, b, s);
  for (EdgeId e : res.visited) r.visiting[b - 1][e].insert(s);
  if (res.cut) r.act[b - 1].insert(s);
  r.visited[b - 1][s] = std::move(res.visited);
}

void ClusterPruner::erase_entry(size_t g, int b, VertexId s) {
  Replica& r = rep(g);
  auto& fwd = r.visited[b - 1];
  auto it = fwd.find(s);
  if (it == fwd.end()) return;
  for (EdgeId e : it->second) {
    auto dit = r.visiting[b - 1].find(e);
    if (dit != r.visiting[b - 1].end()) {
      dit->second.erase(s);
      if (dit->second.empty()) r.visiting[b - 1].erase(dit);
    }
  }
  fwd.erase(it);
  r.act[b - 1].erase(s);
}

void ClusterPruner::erase_start(size_t g, VertexId s) {
  for (int b = 1; b <= static_cast<int>(rep(g).visited.size()); ++b)
    erase_entry(g, b, s);
}

bool ClusterPruner::eligible_start(size_t g, VertexId s) const {
  uint32_t c = cluster_of_[s];
  if (c == kNoCluster || !active_.count(c)) return false;
  const Replica& r = rep(g);
  auto it = r.cbar.find(c);
  return it != r.cbar.end() &&
         std::binary_search(it->second.begin(), it->second.end(), s);
}

std::set<std::pair<int, VertexId>> ClusterPruner::collect_jobs(
    size_t g, const std::vector<EdgeId>& eids) const {
  const Replica& r = rep(g);
  std::set<std::pair<int, VertexId>> jobs;
  for (int b = 1; b <= static_cast<int>(r.visiting.size()); ++b)
    for (EdgeId e : eids) {
      auto it = r.visiting[b - 1].find(e);
      if (it == r.visiting[b - 1].end()) continue;
      for (VertexId s : it->second) jobs.emplace(b, s);
    }
  return jobs;
}

void ClusterPruner::rerun(size_t g, const std::set<std::pair<int, VertexId>>& jobs) {
  for (const auto& [b, s] : jobs) {
    erase_entry(g, b, s);
    if (!eligible_start(g, s)) continue;
    store_run(g, b, s);
    last_reruns_.emplace_back(g, b, s);
  }
}

void ClusterPruner::refresh_low(size_t g, uint32_t cluster) {
  Replica& r = rep(g);
  auto it = r.deg.find(cluster);
  if (it == r.deg.end() || !active_.count(cluster)) {
    r.low.erase(cluster);
    return;
  }
  if (static_cast<double>(it->second) < params_.low_degree_floor())
    r.low.insert(cluster);
  else
    r.low.erase(cluster);
}

void ClusterPruner::retire_clusters(const std::vector<uint32_t>& clusters,
                                    std::optional<size_t> skip, bool require_isolated) {
  std::set<uint32_t> gone(clusters.begin(), clusters.end());
  for (uint32_t c : gone) {
    if (!active_.erase(c)) throw ContractError("ClusterPruner: retiring inactive cluster");
    removed_vertices_ += members_.at(c).size();
  }
  for (size_t g = 0; g < replicas_.size(); ++g) {
    if (rep(g).consumed) continue;
    if (skip && *skip == g) continue;
    Replica& r = rep(g);
    std::vector<EdgeId> doomed;
    std::vector<EdgeId> host_gone;
    for (const auto& [hid, he] : r.edges) {
      if (!he.present) continue;
      if (!gone.count(cluster_of_[he.u]) && !gone.count(cluster_of_[he.v])) continue;
      if (require_isolated)
        throw ContractError(
            "ClusterPruner: undersized cluster still carries certificate edges");
      doomed.push_back(he.comp_eid);
      host_gone.push_back(hid);
    }
    for (uint32_t c : gone) {
      auto mit = r.mixer.find(c);
      if (mit != r.mixer.end())
        doomed.insert(doomed.end(), mit->second.begin(), mit->second.end());
    }
    auto jobs = collect_jobs(g, doomed);
    for (uint32_t c : gone) {
      auto cit = r.cbar.find(c);
      if (cit != r.cbar.end())
        for (VertexId s : cit->second) erase_start(g, s);
    }
    for (EdgeId e : doomed) r.comp.delete_edge(e);
    std::set<uint32_t> touched;
    for (EdgeId hid : host_gone) {
      auto& he = r.edges.at(hid);
      r.comp_to_host.erase(he.comp_eid);
      he.present = false;
      for (uint32_t c : {cluster_of_[he.u], cluster_of_[he.v]})
        if (!gone.count(c)) {
          --r.deg.at(c);
          touched.insert(c);
        }
    }
    for (uint32_t c : gone) {
      r.cbar.erase(c);
      r.mixer.erase(c);
      r.deg.erase(c);
      r.low.erase(c);
    }
    for (uint32_t c : touched) refresh_low(g, c);
    rerun(g, jobs);
  }
}

void ClusterPruner::note_consult(size_t g) {
  Replica& r = rep(g);
  if (r.consults) {
    // A replica may keep answering front-of-list queries only while no
    // certificate-driven removal has happened since its first answer; any
    // such removal pops the deciding replica, so the front one is always
    // queried at a single removal version.
    if (r.consults->first != tainted_version_)
      throw ContractError("ClusterPruner: replica consulted across removals");
    r.consults->second = tainted_version_;
    return;
  }
  r.consults.emplace(tainted_version_, tainted_version_);
}

std::vector<uint32_t> ClusterPruner::round_to_clusters(
    size_t g, const std::vector<VertexId>& cut) const {
  const Replica& r = rep(g);
  std::vector<uint32_t> k;
  for (uint32_t c : active_) {
    auto it = r.cbar.find(c);
    if (it == r.cbar.end() || it->second.empty()) continue;
    size_t inside = 0;
    for (VertexId v : it->second)
      if (std::binary_search(cut.begin(), cut.end(), v)) ++inside;
    if (inside == 0) continue;
    if (2 * inside >= it->second.size()) k.push_back(c);  // majority/tie joins the cut
  }
  return k;
}

PruneOutcome ClusterPruner::prune(EdgeId deleted_edge,
                                  const std::vector<uint32_t>& undersized_created) {
  last_reruns_.clear();
  PruneOutcome out;
  // The host deletion reaches every unconsumed replica holding the edge.
  for (size_t g : alive_replicas()) {
    Replica& r = rep(g);
    auto it = r.edges.find(deleted_edge);
    if (it == r.edges.end() || !it->second.present) continue;
    EdgeId ce = it->second.comp_eid;
    auto jobs = collect_jobs(g, {ce});
    r.comp.delete_edge(ce);
    r.comp_to_host.erase(ce);
    it->second.present = false;
    for (uint32_t c : {cluster_of_[it->second.u], cluster_of_[it->second.v]}) {
      --r.deg.at(c);
      refresh_low(g, c);
    }
    rerun(g, jobs);
  }
  // Freshly cut-off undersized clusters leave without consuming a replica:
  // they are already disconnected from the rest of the region, so no replica
  // took part in the decision.
  if (!undersized_created.empty()) {
    retire_clusters(undersized_created, std::nullopt, /*require_isolated=*/true);
    ++x_version_;
    out.removed.insert(out.removed.end(), undersized_created.begin(),
                       undersized_created.end());
  }
  while (true) {
    if (order_.empty()) {
      out.exhausted = true;
      break;
    }
    size_t g = order_.front();
    note_consult(g);
    Replica& r = rep(g);
    if (!r.low.empty()) {
      // A cluster under the degree floor certifies a sparse cut around it.
      uint32_t c = *r.low.begin();
      order_.pop_front();
      r.consumed = true;
      ++out.graphs_consumed;
      retire_clusters({c}, g, false);
      ++tainted_version_;
      ++x_version_;
      out.removed.push_back(c);
      continue;
    }
    // Cached sweep cuts: smallest scale first, then smallest start.
    bool swept = false;
    for (int b = 1; b <= params_.b_max && !r.prm.empty() && !swept; ++b) {
      for (VertexId s : r.act[b - 1]) {
        NibbleResult res = run_start(g, b, s);
        if (!res.cut) throw ContractError("ClusterPruner: cached cut witness went stale");
        std::vector<uint32_t> k = round_to_clusters(g, *res.cut);
        std::vector<uint32_t> other;
        for (uint32_t c : active_)
          if (!std::binary_search(k.begin(), k.end(), c)) other.push_back(c);
        // The smaller side by cluster count leaves; the cut side wins ties.
        const std::vector<uint32_t>& side = k.size() <= other.size() ? k : other;
        if (side.empty()) continue;  // rounded onto nothing; keep scanning
        order_.pop_front();
        r.consumed = true;
        ++out.graphs_consumed;
        retire_clusters(side, g, false);
        ++tainted_version_;
        ++x_version_;
        out.removed.insert(out.removed.end(), side.begin(), side.end());
        swept = true;
        break;
      }
    }
    if (!swept) break;  // no certificate left: the region expands again
  }
  emit_line(cfg_.events, {{"op", "prune"},
                          {"edge", deleted_edge},
                          {"removed", out.removed},
                          {"graphs_consumed", out.graphs_consumed},
                          {"reruns", last_reruns_.size()},
                          {"exhausted", out.exhausted},
                          {"clusters_left", active_.size()},
                          {"replicas_left", order_.size()}});
  return out;
}

void ClusterPruner::apply_cluster_delta(const ClusterDelta& delta) {
  last_reruns_.clear();
  std::set<uint32_t> dead(delta.destroyed.begin(), delta.destroyed.end());
  if (dead.size() != delta.destroyed.size())
    throw ContractError("ClusterPruner: duplicate destroyed cluster");
  for (uint32_t c : dead)
    if (!active_.count(c)) throw ContractError("ClusterPruner: destroyed cluster not active");
  std::vector<VertexId> before, after;
  for (uint32_t c : dead) {
    const auto& m = members_.at(c);
    before.insert(before.end(), m.begin(), m.end());
  }
  std::set<uint32_t> fresh;
  for (const auto& [id, mem] : delta.created) {
    if (id == kNoCluster || members_.count(id) || !fresh.insert(id).second)
      throw ContractError("ClusterPruner: created cluster id unusable");
    if (mem.empty()) throw ContractError("ClusterPruner: empty created cluster");
    after.insert(after.end(), mem.begin(), mem.end());
  }
  std::sort(before.begin(), before.end());
  std::sort(after.begin(), after.end());
  if (before != after ||
      std::adjacent_find(after.begin(), after.end()) != after.end())
    throw ContractError("ClusterPruner: delta must repartition the destroyed members");

  // Phase 1: lift every edge wired to a dissolving cluster and drop the
  // dissolved mixing graphs, remembering whose cached sweeps they touched.
  struct Pending {
    std::set<std::pair<int, VertexId>> jobs;
    std::vector<EdgeId> lifted;  // host ids awaiting re-attachment
  };
  std::map<size_t, Pending> pend;
  for (size_t g : alive_replicas()) {
    Replica& r = rep(g);
    Pending pd;
    std::vector<EdgeId> doomed;
    for (const auto& [hid, he] : r.edges) {
      if (!he.present) continue;
      if (dead.count(cluster_of_[he.u]) || dead.count(cluster_of_[he.v])) {
        doomed.push_back(he.comp_eid);
        pd.lifted.push_back(hid);
      }
    }
    for (uint32_t c : dead) {
      auto mit = r.mixer.find(c);
      if (mit != r.mixer.end())
        doomed.insert(doomed.end(), mit->second.begin(), mit->second.end());
    }
    pd.jobs = collect_jobs(g, doomed);
    for (uint32_t c : dead) {
      auto cit = r.cbar.find(c);
      if (cit != r.cbar.end())
        for (VertexId s : cit->second) erase_start(g, s);
    }
    for (EdgeId e : doomed) r.comp.delete_edge(e);
    for (EdgeId hid : pd.lifted) {
      auto& he = r.edges.at(hid);
      r.comp_to_host.erase(he.comp_eid);
      he.comp_eid = kNoEdge;
      he.present = false;
      for (uint32_t c : {cluster_of_[he.u], cluster_of_[he.v]})
        if (!dead.count(c)) --r.deg.at(c);
    }
    for (uint32_t c : dead) {
      r.cbar.erase(c);
      r.mixer.erase(c);
      r.deg.erase(c);
      r.low.erase(c);
    }
    pend.emplace(g, std::move(pd));
  }

  for (uint32_t c : dead) {
    active_.erase(c);
    members_.erase(c);
  }
  for (const auto& [id, mem] : delta.created) {
    members_.emplace(id, mem);
    for (VertexId v : mem) cluster_of_[v] = id;
    active_.insert(id);
  }

  // Phase 2: re-attach the lifted edges that still cross clusters, build the
  // new endpoint sets and mixing graphs, then redo the touched sweeps.
  for (auto& [g, pd] : pend) {
    Replica& r = rep(g);
    for (const auto& [id, mem] : delta.created) r.deg[id] = 0;
    for (EdgeId hid : pd.lifted) {
      auto& he = r.edges.at(hid);
      uint32_t cu = cluster_of_[he.u], cv = cluster_of_[he.v];
      if (cu == cv) {  // swallowed inside a cluster: gone for good
        r.edges.erase(hid);
        continue;
      }
      if (edge_between(r.comp, he.u, he.v) != kNoEdge)
        throw ContractError("ClusterPruner: duplicate companion wiring");
      he.comp_eid = r.comp.add_edge(he.u, he.v, 1.0);
      he.present = true;
      r.comp_to_host[he.comp_eid] = hid;
      ++r.deg.at(cu);
      ++r.deg.at(cv);
    }
    for (const auto& [id, mem] : delta.created) {
      std::vector<VertexId> bar;
      for (const auto& [hid, he] : r.edges) {
        if (!he.present) continue;
        if (cluster_of_[he.u] == id) bar.push_back(he.u);
        if (cluster_of_[he.v] == id) bar.push_back(he.v);
      }
      std::sort(bar.begin(), bar.end());
      bar.erase(std::unique(bar.begin(), bar.end()), bar.end());
      attach_endpoints(g, id, std::move(bar));
    }
    for (const auto& [c, d] : r.deg) refresh_low(g, c);
    rerun(g, pd.jobs);
  }
  std::vector<uint32_t> created_ids;
  for (const auto& [id, mem] : delta.created) created_ids.push_back(id);
  emit_line(cfg_.events, {{"op", "cluster_delta"},
                          {"destroyed", delta.destroyed},
                          {"created", created_ids},
                          {"reruns", last_reruns_.size()},
                          {"clusters_left", active_.size()}});
}

size_t ClusterPruner::replica_count() const { return order_.size(); }

std::optional<size_t> ClusterPruner::front_replica() const {
  if (order_.empty()) return std::nullopt;
  return order_.front();
}

std::vector<size_t> ClusterPruner::alive_replicas() const {
  return {order_.begin(), order_.end()};
}

bool ClusterPruner::replica_has(size_t g, EdgeId host_e) const {
  const Replica& r = rep(g);
  auto it = r.edges.find(host_e);
  return it != r.edges.end() && it->second.present;
}

std::vector<EdgeId> ClusterPruner::replica_edges(size_t g) const {
  std::vector<EdgeId> out;
  for (const auto& [hid, he] : rep(g).edges)
    if (he.present) out.push_back(hid);
  return out;
}

const Graph& ClusterPruner::companion(size_t g) const { return rep(g).comp; }

size_t ClusterPruner::replica_degree(size_t g, uint32_t cluster) const {
  const Replica& r = rep(g);
  auto it = r.deg.find(cluster);
  if (it == r.deg.end()) throw NotPresentError("ClusterPruner: cluster not tracked here");
  return it->second;
}

std::vector<uint32_t> ClusterPruner::low_degree(size_t g) const {
  const auto& l = rep(g).low;
  return {l.begin(), l.end()};
}

std::vector<VertexId> ClusterPruner::endpoint_set(size_t g, uint32_t cluster) const {
  const Replica& r = rep(g);
  auto it = r.cbar.find(cluster);
  if (it == r.cbar.end()) throw NotPresentError("ClusterPruner: no endpoint set here");
  return it->second;
}

std::vector<EdgeId> ClusterPruner::edges_visited(size_t g, int b, VertexId s) const {
  const Replica& r = rep(g);
  if (b < 1 || b > static_cast<int>(r.visited.size()))
    throw ConfigError("ClusterPruner: scale out of range");
  auto it = r.visited[b - 1].find(s);
  std::vector<EdgeId> out;
  if (it == r.visited[b - 1].end()) return out;
  for (EdgeId e : it->second) {
    auto mit = r.comp_to_host.find(e);
    if (mit != r.comp_to_host.end()) out.push_back(mit->second);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<VertexId> ClusterPruner::starts_visiting(size_t g, int b, EdgeId host_e) const {
  const Replica& r = rep(g);
  if (b < 1 || b > static_cast<int>(r.visiting.size()))
    throw ConfigError("ClusterPruner: scale out of range");
  auto it = r.edges.find(host_e);
  if (it == r.edges.end() || !it->second.present) return {};
  auto dit = r.visiting[b - 1].find(it->second.comp_eid);
  if (dit == r.visiting[b - 1].end()) return {};
  return {dit->second.begin(), dit->second.end()};
}

bool ClusterPruner::start_active(size_t g, int b, VertexId s) const {
  const Replica& r = rep(g);
  if (b < 1 || b > static_cast<int>(r.act.size()))
    throw ConfigError("ClusterPruner: scale out of range");
  return r.act[b - 1].count(s) > 0;
}

std::vector<VertexId> ClusterPruner::active_starts(size_t g, int b) const {
  const Replica& r = rep(g);
  if (b < 1 || b > static_cast<int>(r.act.size()))
    throw ConfigError("ClusterPruner: scale out of range");
  return {r.act[b - 1].begin(), r.act[b - 1].end()};
}

bool ClusterPruner::cluster_active(uint32_t cluster) const {
  return active_.count(cluster) > 0;
}

std::vector<uint32_t> ClusterPruner::active_clusters() const {
  return {active_.begin(), active_.end()};
}

uint32_t ClusterPruner::cluster_of(VertexId v) const {
  if (v >= n_) throw NotPresentError("ClusterPruner: vertex out of range");
  return cluster_of_[v];
}

const std::vector<VertexId>& ClusterPruner::members(uint32_t cluster) const {
  auto it = members_.find(cluster);
  if (it == members_.end()) throw NotPresentError("ClusterPruner: unknown cluster");
  return it->second;
}

std::optional<std::pair<uint64_t, uint64_t>> ClusterPruner::consult_span(size_t g) const {
  return rep(g).consults;
}

std::optional<std::string> ClusterPruner::audit() const {
  auto fail = [](size_t g, const std::string& what) {
    std::ostringstream oss;
    oss << "replica " << g << ": " << what;
    return std::optional<std::string>(oss.str());
  };
  for (size_t g : alive_replicas()) {
    const Replica& r = rep(g);
    size_t present = 0;
    for (const auto& [hid, he] : r.edges) {
      if (!he.present) continue;
      ++present;
      if (!r.comp.has_edge(he.comp_eid)) return fail(g, "host edge lost its companion");
      const Edge& e = r.comp.edge(he.comp_eid);
      bool match = (e.u == he.u && e.v == he.v) || (e.u == he.v && e.v == he.u);
      if (!match) return fail(g, "companion endpoints drifted");
      auto mit = r.comp_to_host.find(he.comp_eid);
      if (mit == r.comp_to_host.end() || mit->second != hid)
        return fail(g, "reverse edge map drifted");
      uint32_t cu = cluster_of_[he.u], cv = cluster_of_[he.v];
      if (cu == cv || !active_.count(cu) || !active_.count(cv))
        return fail(g, "present edge no longer crosses active clusters");
    }
    if (r.comp_to_host.size() != present) return fail(g, "stray reverse edge entries");
    size_t mix = 0;
    for (const auto& [c, eids] : r.mixer) {
      if (!active_.count(c)) return fail(g, "mixing graph for inactive cluster");
      auto cit = r.cbar.find(c);
      if (cit == r.cbar.end()) return fail(g, "mixing graph without endpoint set");
      for (EdgeId e : eids) {
        ++mix;
        if (!r.comp.has_edge(e)) return fail(g, "dead mixing edge");
        const Edge& me = r.comp.edge(e);
        const auto& bar = cit->second;
        if (!std::binary_search(bar.begin(), bar.end(), me.u) ||
            !std::binary_search(bar.begin(), bar.end(), me.v))
          return fail(g, "mixing edge leaves its endpoint set");
      }
    }
    if (r.comp.edge_count() != present + mix)
      return fail(g, "companion edge count drifted");
    for (uint32_t c : active_) {
      if (!r.deg.count(c)) return fail(g, "active cluster without degree entry");
      if (!r.cbar.count(c)) return fail(g, "active cluster without endpoint set");
      if (!r.mixer.count(c)) return fail(g, "active cluster without mixing record");
    }
    for (const auto& [c, d] : r.deg) {
      if (!active_.count(c)) return fail(g, "degree entry for inactive cluster");
      size_t cnt = 0;
      for (const auto& [hid, he] : r.edges)
        if (he.present && (cluster_of_[he.u] == c || cluster_of_[he.v] == c)) ++cnt;
      if (cnt != d) return fail(g, "cluster degree drifted");
      bool want_low = static_cast<double>(d) < params_.low_degree_floor();
      if (want_low != (r.low.count(c) > 0)) return fail(g, "degree floor set drifted");
    }
    for (uint32_t c : r.low)
      if (!r.deg.count(c)) return fail(g, "floor entry without degree entry");
    for (const auto& [c, bar] : r.cbar) {
      if (!active_.count(c)) return fail(g, "endpoint set for inactive cluster");
      for (VertexId s : bar)
        if (cluster_of_[s] != c) return fail(g, "endpoint outside its cluster");
    }
    if (r.prm.empty()) {
      for (int b = 1; b <= static_cast<int>(r.visited.size()); ++b)
        if (!r.visited[b - 1].empty() || !r.visiting[b - 1].empty() ||
            !r.act[b - 1].empty())
          return fail(g, "cached sweeps without frozen walk scales");
      continue;
    }
    for (int b = 1; b <= params_.b_max; ++b) {
      size_t expected = 0;
      for (uint32_t c : active_) {
        for (VertexId s : r.cbar.at(c)) {
          ++expected;
          NibbleResult res = run_start(g, b, s);
          auto it = r.visited[b - 1].find(s);
          if (it == r.visited[b - 1].end()) return fail(g, "missing cached sweep");
          if (it->second != res.visited) return fail(g, "cached sweep drifted");
          if (bool(res.cut) != (r.act[b - 1].count(s) > 0))
            return fail(g, "cut bit drifted");
        }
      }
      if (r.visited[b - 1].size() != expected) return fail(g, "stray cached sweeps");
      size_t dual_pairs = 0, fwd_pairs = 0;
      for (const auto& [e, ss] : r.visiting[b - 1]) {
        if (ss.empty()) return fail(g, "empty dual entry");
        for (VertexId s : ss) {
          auto it = r.visited[b - 1].find(s);
          if (it == r.visited[b - 1].end() ||
              !std::binary_search(it->second.begin(), it->second.end(), e))
            return fail(g, "dual entry without forward entry");
        }
        dual_pairs += ss.size();
      }
      for (const auto& [s, es] : r.visited[b - 1]) fwd_pairs += es.size();
      if (fwd_pairs != dual_pairs) return fail(g, "forward entry without dual entry");
    }
  }
  return std::nullopt;
}

}  // namespace dynmsf
