#pragma once

// Shared fixtures and generators for the unit suites.

#include <string>
#include <vector>

#include "lfsim/core.hpp"
#include "lfsim/routing.hpp"
#include "lfsim/topology.hpp"
#include "lfsim/traffic.hpp"

namespace lfsim::test {

// g -> a -> b -> c chain, 1 Gbps links.
inline Topology chain4() {
  return TopologyBuilder()
      .node("g", 50, 0)
      .node("a", 45, 0)
      .node("b", 40, 0)
      .node("c", 35, 0)
      .edge("g", "a", 1e9)
      .edge("a", "b", 1e9)
      .edge("b", "c", 1e9)
      .gateway("g")
      .target("c")
      .build();
}

// Diamond: g -> {a, b} -> x.
inline Topology diamond(double cap = 1e9) {
  return TopologyBuilder()
      .node("g", 50, 0)
      .node("a", 45, -1)
      .node("b", 45, 1)
      .node("x", 40, 0)
      .edge("g", "a", cap)
      .edge("g", "b", cap)
      .edge("a", "x", cap)
      .edge("b", "x", cap)
      .gateway("g")
      .target("x")
      .build();
}

inline RoutingInstance uniform_routing(const Topology& topo) {
  std::vector<double> w(static_cast<std::size_t>(topo.link_count()), 1.0);
  return shortest_path_tree(topo, w, topo.non_gateway_nodes(),
                            topo.gateways());
}

// Random connected topology: a spanning tree plus extra edges.
inline Topology random_topology(Rng& rng, int n_nodes, int extra_edges,
                                double cap = 1e9) {
  TopologyBuilder b;
  std::vector<std::string> names;
  for (int i = 0; i < n_nodes; ++i) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "n%02d", i);
    names.emplace_back(buf);
    b.node(buf, 80.0 - i, static_cast<double>(i % 7));
  }
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i < n_nodes; ++i) {
    const int parent = static_cast<int>(rng.index(static_cast<std::size_t>(i)));
    edges.emplace_back(parent, i);
  }
  for (int k = 0; k < extra_edges; ++k) {
    const int u = static_cast<int>(rng.index(static_cast<std::size_t>(n_nodes)));
    const int v = static_cast<int>(rng.index(static_cast<std::size_t>(n_nodes)));
    if (u == v) continue;
    bool dup = false;
    for (auto [a, c] : edges)
      if ((a == u && c == v) || (a == v && c == u)) dup = true;
    if (!dup) edges.emplace_back(u, v);
  }
  for (auto [u, v] : edges) b.edge(names[static_cast<std::size_t>(u)],
                                   names[static_cast<std::size_t>(v)], cap);
  b.gateway(names.front());
  b.target(names.back());
  return b.build();
}

// Random valid instance: shortest-path trees under random positive weights.
inline RoutingInstance random_instance(const Topology& topo, Rng& rng) {
  std::vector<double> w(static_cast<std::size_t>(topo.link_count()));
  for (auto& x : w) x = 1.0 + static_cast<double>(rng.index(1000));
  return shortest_path_tree(topo, w, topo.non_gateway_nodes(),
                            topo.gateways());
}

inline Host benign_host(HostId id, NodeId gw, NodeId dest, double rate) {
  Host h;
  h.id = id;
  h.kind = HostKind::benign;
  h.entry_gateway = gw;
  h.current_dest = dest;
  h.rate_bps = rate;
  return h;
}

inline Host bot_host(HostId id, NodeId gw, NodeId dest, double rate) {
  Host h = benign_host(id, gw, dest, rate);
  h.kind = HostKind::bot;
  h.active = false;
  return h;
}

}  // namespace lfsim::test
