#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "lfsim/core.hpp"
#include "lfsim/topology.hpp"

namespace lfsim {

/// Ordered links from a source toward a destination. Empty when source and
/// destination coincide.
struct Path {
  std::vector<LinkId> links;

  bool empty() const { return links.empty(); }
  std::size_t hops() const { return links.size(); }
  bool contains(LinkId l) const {
    return std::find(links.begin(), links.end(), l) != links.end();
  }
};

/// A complete destination-based routing configuration: one next-hop link per
/// (node, destination) entry. Instances are value types; the simulation
/// replaces the deployed instance atomically between timesteps.
class RoutingInstance {
 public:
  RoutingInstance() = default;
  explicit RoutingInstance(int node_count)
      : next_(static_cast<std::size_t>(node_count),
              std::vector<LinkId>(static_cast<std::size_t>(node_count), kNoLink)) {}

  int node_count() const { return static_cast<int>(next_.size()); }

  LinkId next_hop(NodeId from, NodeId dest) const {
    return next_[static_cast<std::size_t>(from)][static_cast<std::size_t>(dest)];
  }

  bool has_entry(NodeId from, NodeId dest) const {
    return next_hop(from, dest) != kNoLink;
  }

  void set_entry(NodeId from, NodeId dest, LinkId via) {
    next_[static_cast<std::size_t>(from)][static_cast<std::size_t>(dest)] = via;
  }

  void clear_entry(NodeId from, NodeId dest) { set_entry(from, dest, kNoLink); }

  std::uint64_t version() const { return version_; }
  void set_version(std::uint64_t v) { version_ = v; }

  /// Digest of the entry set (node, destination, next-hop); ignores version.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 14695981039346656037ull;
    auto mix = [&h](std::uint64_t v) {
      h ^= v;
      h *= 1099511628211ull;
    };
    for (std::size_t n = 0; n < next_.size(); ++n)
      for (std::size_t m = 0; m < next_[n].size(); ++m)
        if (next_[n][m] != kNoLink) {
          mix(n);
          mix(m);
          mix(static_cast<std::uint64_t>(next_[n][m]));
        }
    return h;
  }

  bool same_entries(const RoutingInstance& other) const {
    return next_ == other.next_;
  }

 private:
  std::vector<std::vector<LinkId>> next_;
  std::uint64_t version_ = 0;
};

/// Follows next-hops from `from` to `to`. Empty path when from == to.
/// Throws RoutingError on a missing entry (unreachable) or a revisited node
/// (routing loop).
inline Path route_path(const Topology& topo, const RoutingInstance& r,
                       NodeId from, NodeId to) {
  Path p;
  if (from == to) return p;
  std::vector<char> visited(static_cast<std::size_t>(topo.node_count()), 0);
  NodeId cur = from;
  while (cur != to) {
    if (visited[static_cast<std::size_t>(cur)])
      throw RoutingError("routing loop at node '" + topo.node(cur).name +
                         "' toward '" + topo.node(to).name + "'");
    visited[static_cast<std::size_t>(cur)] = 1;
    const LinkId l = r.next_hop(cur, to);
    if (l == kNoLink)
      throw RoutingError("no route from '" + topo.node(cur).name + "' to '" +
                         topo.node(to).name + "'");
    p.links.push_back(l);
    cur = topo.link(l).destination;
  }
  return p;
}

inline bool is_reachable(const Topology& topo, const RoutingInstance& r,
                         NodeId from, NodeId to) {
  try {
    route_path(topo, r, from, to);
    return true;
  } catch (const RoutingError&) {
    return false;
  }
}

/// Nodes served via link l: every n whose gateway path crosses l. Unroutable
/// destinations are simply not served. Result sorted ascending.
inline std::vector<NodeId> dst_of_link(const Topology& topo,
                                       const RoutingInstance& r,
                                       std::span<const NodeId> gateways,
                                       LinkId l) {
  topo.link(l);  // existence check
  std::vector<NodeId> out;
  for (const auto& n : topo.nodes()) {
    bool served = false;
    for (NodeId g : gateways) {
      if (n.id == g) continue;
      try {
        if (route_path(topo, r, g, n.id).contains(l)) {
          served = true;
          break;
        }
      } catch (const RoutingError&) {
      }
    }
    if (served) out.push_back(n.id);
  }
  return out;
}

/// Per-link serve sets for the whole instance, one path walk per
/// (gateway, destination) pair.
inline std::vector<std::vector<NodeId>> build_dst_index(
    const Topology& topo, const RoutingInstance& r,
    std::span<const NodeId> gateways) {
  std::vector<std::vector<NodeId>> index(
      static_cast<std::size_t>(topo.link_count()));
  for (const auto& n : topo.nodes()) {
    for (NodeId g : gateways) {
      if (n.id == g) continue;
      try {
        for (LinkId l : route_path(topo, r, g, n.id).links) {
          auto& v = index[static_cast<std::size_t>(l)];
          if (v.empty() || v.back() != n.id) v.push_back(n.id);
        }
      } catch (const RoutingError&) {
      }
    }
  }
  for (auto& v : index) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return index;
}

/// Entry-level symmetric-difference count between two instances: a changed
/// next-hop counts as one removal plus one addition.
inline std::int64_t routing_diff(const RoutingInstance& a,
                                 const RoutingInstance& b) {
  if (a.node_count() != b.node_count())
    throw RoutingError("routing_diff: mismatched node sets");
  std::int64_t count = 0;
  const int n = a.node_count();
  for (NodeId u = 0; u < n; ++u)
    for (NodeId m = 0; m < n; ++m) {
      const LinkId la = a.next_hop(u, m);
      const LinkId lb = b.next_hop(u, m);
      if (la == lb) continue;
      if (la != kNoLink) ++count;
      if (lb != kNoLink) ++count;
    }
  return count;
}

/// Cumulative routing-change account across migrations.
struct DisruptionLedger {
  std::vector<std::pair<std::int64_t, std::int64_t>> history;  // (timestep, changes)
  std::int64_t cumulative = 0;

  void record(std::int64_t timestep, std::int64_t changes) {
    if (changes < 0) throw RoutingError("negative change count");
    if (!history.empty() && timestep <= history.back().first)
      throw RoutingError("migration timesteps must be strictly increasing");
    history.emplace_back(timestep, changes);
    cumulative += changes;
  }
};

inline void record_migration(DisruptionLedger& ledger,
                             const RoutingInstance& r_old,
                             const RoutingInstance& r_new,
                             std::int64_t timestep) {
  ledger.record(timestep, routing_diff(r_old, r_new));
}

/// Deterministic shortest-path routing for each destination in dest_set.
/// Distances come from a reverse Dijkstra per destination; each node then
/// picks the out-link minimising weight + downstream distance, ties broken by
/// smaller link id. Positive weights make the induced entries acyclic.
inline RoutingInstance shortest_path_tree(const Topology& topo,
                                          std::span<const double> weights,
                                          std::span<const NodeId> dest_set,
                                          std::span<const NodeId> gateways) {
  const int n = topo.node_count();
  if (static_cast<int>(weights.size()) != topo.link_count())
    throw RoutingError("weight vector size mismatch");
  for (double w : weights)
    if (!(w > 0.0)) throw RoutingError("link weights must be positive");

  // Reverse adjacency: in_links[v] = links with destination v.
  std::vector<std::vector<LinkId>> in_links(static_cast<std::size_t>(n));
  for (const auto& l : topo.links())
    in_links[static_cast<std::size_t>(l.destination)].push_back(l.id);

  RoutingInstance inst(n);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(static_cast<std::size_t>(n));

  for (NodeId dest : dest_set) {
    std::fill(dist.begin(), dist.end(), kInf);
    dist[static_cast<std::size_t>(dest)] = 0.0;
    using Item = std::pair<double, NodeId>;
    std::priority_queue<Item, std::vector<Item>, std::greater<Item>> pq;
    pq.emplace(0.0, dest);
    while (!pq.empty()) {
      auto [d, v] = pq.top();
      pq.pop();
      if (d > dist[static_cast<std::size_t>(v)]) continue;
      for (LinkId lid : in_links[static_cast<std::size_t>(v)]) {
        const auto& l = topo.link(lid);
        const double nd = d + weights[static_cast<std::size_t>(lid)];
        if (nd < dist[static_cast<std::size_t>(l.source)]) {
          dist[static_cast<std::size_t>(l.source)] = nd;
          pq.emplace(nd, l.source);
        }
      }
    }
    for (NodeId g : gateways)
      if (dist[static_cast<std::size_t>(g)] == kInf)
        throw RoutingError("destination '" + topo.node(dest).name +
                           "' unreachable from gateway '" + topo.node(g).name +
                           "'");
    for (NodeId u = 0; u < n; ++u) {
      if (u == dest || dist[static_cast<std::size_t>(u)] == kInf) continue;
      LinkId best = kNoLink;
      double best_cost = kInf;
      for (LinkId lid : topo.out_links(u)) {  // ascending id: ties keep first
        const auto& l = topo.link(lid);
        const double down = dist[static_cast<std::size_t>(l.destination)];
        if (down == kInf) continue;
        const double cost = weights[static_cast<std::size_t>(lid)] + down;
        if (cost < best_cost) {
          best_cost = cost;
          best = lid;
        }
      }
      inst.set_entry(u, dest, best);
    }
  }
  return inst;
}

/// Minimum-hop path from `from` to `to` that avoids forbidden links and uses
/// only links with residual >= demand. BFS expands out-links in ascending id
/// order, so among equal-hop paths the lexicographically smallest link-id
/// sequence wins. Returns nullopt when no feasible path exists.
inline std::optional<Path> link_disjoint_path(
    const Topology& topo, std::span<const double> residual,
    const std::vector<char>& forbidden, NodeId from, NodeId to, double demand) {
  if (!(demand > 0.0)) throw RoutingError("demand must be positive");
  if (static_cast<int>(residual.size()) != topo.link_count() ||
      static_cast<int>(forbidden.size()) != topo.link_count())
    throw RoutingError("residual/forbidden size mismatch");
  if (from == to) return Path{};

  const std::size_t n = static_cast<std::size_t>(topo.node_count());
  std::vector<LinkId> parent_link(n, kNoLink);
  std::vector<char> seen(n, 0);
  std::queue<NodeId> q;
  seen[static_cast<std::size_t>(from)] = 1;
  q.push(from);
  while (!q.empty()) {
    const NodeId u = q.front();
    q.pop();
    for (LinkId lid : topo.out_links(u)) {
      if (forbidden[static_cast<std::size_t>(lid)]) continue;
      if (residual[static_cast<std::size_t>(lid)] < demand) continue;
      const NodeId v = topo.link(lid).destination;
      if (seen[static_cast<std::size_t>(v)]) continue;
      seen[static_cast<std::size_t>(v)] = 1;
      parent_link[static_cast<std::size_t>(v)] = lid;
      if (v == to) {
        Path p;
        NodeId cur = to;
        while (cur != from) {
          const LinkId pl = parent_link[static_cast<std::size_t>(cur)];
          p.links.push_back(pl);
          cur = topo.link(pl).source;
        }
        std::reverse(p.links.begin(), p.links.end());
        return p;
      }
      q.push(v);
    }
  }
  return std::nullopt;
}

/// Every (node, destination) entry chain must terminate without revisiting a
/// node. Used as a safety net after incremental instance edits.
inline bool instance_consistent(const Topology& topo, const RoutingInstance& r) {
  const int n = topo.node_count();
  for (NodeId u = 0; u < n; ++u)
    for (NodeId m = 0; m < n; ++m) {
      if (u == m || !r.has_entry(u, m)) continue;
      try {
        route_path(topo, r, u, m);
      } catch (const RoutingError&) {
        return false;
      }
    }
  return true;
}

}  // namespace lfsim
