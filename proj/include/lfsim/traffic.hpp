#pragma once

#include <algorithm>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lfsim/core.hpp"
#include "lfsim/routing.hpp"
#include "lfsim/topology.hpp"

namespace lfsim {

enum class HostKind { benign, bot };

/// An external IP behind a gateway. Benign hosts send continuously at their
/// drawn rate; bots send only in cycles where the attacker schedules them,
/// at the rate the attacker assigns (capped by the drawn rate so attack
/// flows stay profile-indistinguishable from benign ones).
struct Host {
  HostId id = -1;
  HostKind kind = HostKind::benign;
  NodeId entry_gateway = kNoNode;
  NodeId current_dest = kNoNode;
  double rate_bps = 0.0;  // drawn once at init, uniform in (0, rate_max]
  NodeId prev_dest = kNoNode;
  bool active = true;           // bots: scheduled this cycle
  double attack_rate_bps = 0.0; // bots: assigned send rate this cycle

  bool is_bot() const { return kind == HostKind::bot; }

  double send_rate() const {
    if (kind == HostKind::benign) return rate_bps;
    return active ? attack_rate_bps : 0.0;
  }
};

/// Per-link loads for the current and previous timestep. Free bandwidth is
/// capacity minus current load; it may go negative, the fluid model records
/// over-capacity load rather than dropping traffic.
struct LinkLoadState {
  std::vector<double> load;
  std::vector<double> prev_load;

  /// View at the end of a round: the rates that flowed all round are, from
  /// the decision instant, the past timestep's measurement.
  LinkLoadState at_round_end() const { return {load, load}; }

  double free_bandwidth(const Topology& topo, LinkId l) const {
    return topo.link(l).capacity_bps - load[static_cast<std::size_t>(l)];
  }
};

namespace detail {

/// Demand aggregated per (gateway, destination); one path walk per pair.
struct DemandMatrix {
  // flat [gateway_index * node_count + dest]
  std::vector<double> demand;
  std::vector<NodeId> gateways;
  int node_count = 0;

  double at(std::size_t g_idx, NodeId dest) const {
    return demand[g_idx * static_cast<std::size_t>(node_count) +
                  static_cast<std::size_t>(dest)];
  }
};

inline DemandMatrix aggregate_demands(const Topology& topo,
                                      std::span<const Host> hosts,
                                      bool include_bots) {
  DemandMatrix m;
  m.node_count = topo.node_count();
  m.gateways = topo.gateways();
  m.demand.assign(m.gateways.size() * static_cast<std::size_t>(m.node_count),
                  0.0);
  for (const auto& h : hosts) {
    if (h.is_bot() && !include_bots) continue;
    const double rate = h.send_rate();
    if (rate <= 0.0) continue;
    const auto it =
        std::find(m.gateways.begin(), m.gateways.end(), h.entry_gateway);
    if (it == m.gateways.end())
      throw ValidationError("host " + std::to_string(h.id) +
                            " enters at a non-gateway node");
    const std::size_t g_idx =
        static_cast<std::size_t>(it - m.gateways.begin());
    m.demand[g_idx * static_cast<std::size_t>(m.node_count) +
             static_cast<std::size_t>(h.current_dest)] += rate;
  }
  return m;
}

inline std::vector<double> loads_for_demands(const Topology& topo,
                                             const RoutingInstance& r,
                                             const DemandMatrix& m) {
  std::vector<double> load(static_cast<std::size_t>(topo.link_count()), 0.0);
  for (std::size_t gi = 0; gi < m.gateways.size(); ++gi) {
    const NodeId g = m.gateways[gi];
    for (NodeId dest = 0; dest < m.node_count; ++dest) {
      const double d = m.at(gi, dest);
      if (d <= 0.0 || dest == g) continue;
      for (LinkId l : route_path(topo, r, g, dest).links)
        load[static_cast<std::size_t>(l)] += d;
    }
  }
  return load;
}

}  // namespace detail

/// Loads induced by routing every host's flow along its gateway path.
/// prev_load carries the supplied previous loads forward (zeros if absent).
/// Throws RoutingError naming the first host whose destination is
/// unreachable from its gateway.
inline LinkLoadState route_demands(const Topology& topo,
                                   const RoutingInstance& r,
                                   std::span<const Host> hosts,
                                   const std::vector<double>* prev = nullptr) {
  LinkLoadState state;
  state.prev_load = prev ? *prev
                         : std::vector<double>(
                               static_cast<std::size_t>(topo.link_count()), 0.0);
  try {
    state.load = detail::loads_for_demands(
        topo, r, detail::aggregate_demands(topo, hosts, /*include_bots=*/true));
  } catch (const RoutingError& e) {
    for (const auto& h : hosts) {
      if (h.send_rate() <= 0.0) continue;
      if (!is_reachable(topo, r, h.entry_gateway, h.current_dest))
        throw RoutingError("host " + std::to_string(h.id) +
                           ": destination unreachable (" + e.what() + ")");
    }
    throw;
  }
  return state;
}

/// Loads with bots silenced; the attacker's planning baseline.
inline std::vector<double> benign_loads(const Topology& topo,
                                        const RoutingInstance& r,
                                        std::span<const Host> hosts) {
  return detail::loads_for_demands(
      topo, r, detail::aggregate_demands(topo, hosts, /*include_bots=*/false));
}

/// Links whose previous-timestep load exceeded threshold * capacity
/// (strict). Detection never looks at the current load.
inline std::vector<LinkId> flooded_links(const LinkLoadState& state,
                                         const Topology& topo,
                                         double threshold) {
  if (!(threshold > 0.0) || threshold > 1.0)
    throw ConfigError("flood threshold must be in (0, 1]");
  std::vector<LinkId> out;
  for (const auto& l : topo.links())
    if (state.prev_load[static_cast<std::size_t>(l.id)] >
        threshold * l.capacity_bps)
      out.push_back(l.id);
  return out;
}

/// Hosts whose current flow traverses l, ascending by host id.
inline std::vector<HostId> src_of_link(const Topology& topo,
                                       const RoutingInstance& r,
                                       std::span<const Host> hosts, LinkId l) {
  topo.link(l);
  std::vector<HostId> out;
  std::map<std::pair<NodeId, NodeId>, bool> crosses;
  for (const auto& h : hosts) {
    if (h.send_rate() <= 0.0) continue;
    const auto key = std::make_pair(h.entry_gateway, h.current_dest);
    auto it = crosses.find(key);
    if (it == crosses.end()) {
      bool hit = false;
      try {
        hit = route_path(topo, r, key.first, key.second).contains(l);
      } catch (const RoutingError&) {
      }
      it = crosses.emplace(key, hit).first;
    }
    if (it->second) out.push_back(h.id);
  }
  return out;
}

/// Each benign host independently rehomes with probability p: remembers its
/// current destination and draws a fresh uniform non-gateway destination
/// (different from the current one when the topology offers a choice).
/// Bots are untouched.
inline void rehome_benign(const Topology& topo, std::vector<Host>& hosts,
                          double p_rehome, Rng& rng) {
  if (p_rehome < 0.0 || p_rehome > 1.0)
    throw ConfigError("p_rehome must be in [0, 1]");
  const auto& candidates = topo.non_gateway_nodes();
  for (auto& h : hosts) {
    if (h.is_bot()) continue;
    if (!rng.chance(p_rehome)) continue;
    h.prev_dest = h.current_dest;
    const auto cur =
        std::find(candidates.begin(), candidates.end(), h.current_dest);
    if (cur == candidates.end() || candidates.size() == 1) {
      h.current_dest = candidates[rng.index(candidates.size())];
    } else {
      // Uniform over candidates minus the current destination.
      std::size_t j = rng.index(candidates.size() - 1);
      if (j >= static_cast<std::size_t>(cur - candidates.begin())) ++j;
      h.current_dest = candidates[j];
    }
  }
}

}  // namespace lfsim
