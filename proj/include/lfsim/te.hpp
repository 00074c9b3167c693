#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lfsim/core.hpp"
#include "lfsim/routing.hpp"
#include "lfsim/traffic.hpp"

namespace lfsim {

struct FloodEvent {
  LinkId link = kNoLink;
  std::vector<HostId> src;  // hosts currently sending over the link
  std::vector<NodeId> dst;  // nodes currently served via the link
};

/// One timestep's flood observations, as seen at the decision instant.
struct FloodReport {
  std::int64_t timestep = 0;
  std::vector<FloodEvent> events;
};

/// Union of the per-event serve sets: every node whose connectivity the
/// flooded links affect. Sorted ascending.
inline std::vector<NodeId> affected_set(const FloodReport& report) {
  if (report.events.empty())
    throw ValidationError("affected_set: empty flood report");
  std::vector<NodeId> out;
  for (const auto& e : report.events)
    out.insert(out.end(), e.dst.begin(), e.dst.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct TeContext {
  const Topology& topo;
  const RoutingInstance& routing;  // incumbent instance
  const FloodReport& report;
  const LinkLoadState& loads;  // loads observed at the decision instant
  std::span<const Host> hosts;
  std::span<const std::uint64_t> past_fingerprints;  // adopted instances
  double flood_threshold = 0.9;
  Rng* rng = nullptr;
};

struct TeResult {
  RoutingInstance routing;
  bool fallback_used = false;  // a stand-in engine produced this instance
  bool infeasible = false;     // engine could not relieve the reported links
  std::string note;
};

class TrafficEngineer {
 public:
  virtual ~TrafficEngineer() = default;
  virtual TeResult step(const TeContext& ctx) = 0;
  virtual std::string_view name() const = 0;
};

/// True when every link in the report stays below threshold * capacity once
/// current demands are re-routed over `candidate`.
inline bool relieves_report(const Topology& topo,
                            const RoutingInstance& candidate,
                            const FloodReport& report,
                            std::span<const Host> hosts, double threshold) {
  const auto loads = route_demands(topo, candidate, hosts);
  for (const auto& e : report.events) {
    const auto& l = topo.link(e.link);
    if (loads.load[static_cast<std::size_t>(e.link)] >=
        threshold * l.capacity_bps)
      return false;
  }
  return true;
}

/// Plain load-balancing recomputation: shortest-path trees under weights
/// that grow with current utilisation, pushing routes off loaded links.
class InverseResidualTe : public TrafficEngineer {
 public:
  TeResult step(const TeContext& ctx) override {
    const auto& topo = ctx.topo;
    std::vector<double> weights(static_cast<std::size_t>(topo.link_count()));
    for (const auto& l : topo.links()) {
      const double util =
          ctx.loads.load[static_cast<std::size_t>(l.id)] / l.capacity_bps;
      weights[static_cast<std::size_t>(l.id)] =
          1.0 + 8.0 * std::min(util, 1.5);
    }
    TeResult res;
    res.routing = shortest_path_tree(topo, weights, topo.non_gateway_nodes(),
                                     topo.gateways());
    if (!relieves_report(topo, res.routing, ctx.report, ctx.hosts,
                         ctx.flood_threshold)) {
      res.infeasible = true;
      res.note = "load balancer could not relieve all reported links";
    }
    return res;
  }

  std::string_view name() const override { return "lb"; }
};

}  // namespace lfsim
