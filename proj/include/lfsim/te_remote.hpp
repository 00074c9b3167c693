#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "lfsim/core.hpp"
#include "lfsim/defense.hpp"
#include "lfsim/routing.hpp"
#include "lfsim/te.hpp"
#include "lfsim/traffic.hpp"

namespace lfsim {

enum class RemotePhase { bisection, disambiguation };

struct RemoteState {
  std::vector<NodeId> suspect_tree_nodes;
  RemotePhase phase = RemotePhase::bisection;
  std::vector<std::int64_t> couple_counts;  // per node, flood co-occurrences
  std::set<std::uint64_t> past_instances;
};

/// The serve structure below one flooded link: nodes on the gateway paths of
/// the affected set, with the unique entry edge of each node. nullopt when
/// the paths do not form a single-rooted tree.
struct RoutingSubtree {
  NodeId root = kNoNode;              // first node below the gateway
  NodeId gateway = kNoNode;
  std::vector<NodeId> nodes;          // sorted, gateway excluded
  std::map<NodeId, LinkId> parent;    // entry link per node (root included)
};

inline std::optional<RoutingSubtree> routing_subtree(
    const Topology& topo, const RoutingInstance& r,
    std::span<const NodeId> gateways, std::span<const NodeId> members) {
  RoutingSubtree tree;
  for (NodeId n : members) {
    Path p;
    NodeId used_gateway = kNoNode;
    for (NodeId g : gateways) {
      if (g == n) return std::nullopt;
      try {
        p = route_path(topo, r, g, n);
        used_gateway = g;
        break;
      } catch (const RoutingError&) {
      }
    }
    if (used_gateway == kNoNode) return std::nullopt;
    if (tree.gateway == kNoNode) tree.gateway = used_gateway;
    else if (tree.gateway != used_gateway) return std::nullopt;

    for (LinkId lid : p.links) {
      const auto& l = topo.link(lid);
      auto [it, inserted] = tree.parent.emplace(l.destination, lid);
      if (!inserted && it->second != lid) return std::nullopt;  // two parents
    }
  }
  if (tree.parent.empty()) return std::nullopt;

  for (const auto& [node, lid] : tree.parent) {
    tree.nodes.push_back(node);
    if (topo.link(lid).source == tree.gateway) {
      if (tree.root != kNoNode && tree.root != node) return std::nullopt;
      tree.root = node;
    }
  }
  if (tree.root == kNoNode) return std::nullopt;
  std::sort(tree.nodes.begin(), tree.nodes.end());
  return tree;
}

struct BisectResult {
  std::vector<NodeId> near_set;  // keeps its routing, contains the tree root
  std::vector<NodeId> far_set;   // to be rehomed
  LinkId cut_link = kNoLink;
};

/// Splits the routing tree of `dst_t` at the internal edge that best
/// balances total demand (then node count, then link id). Single pass over
/// subtree edges after one bottom-up demand aggregation. nullopt when the
/// structure is not a single tree or has no internal edge to cut.
inline std::optional<BisectResult> bisect_tree(
    const Topology& topo, const RoutingInstance& r,
    std::span<const NodeId> gateways, std::span<const NodeId> dst_t,
    std::span<const double> node_demand) {
  const auto tree = routing_subtree(topo, r, gateways, dst_t);
  if (!tree) return std::nullopt;
  if (tree->nodes.size() < 2) return std::nullopt;  // nothing to split

  // children lists over tree edges (root's entry edge is not a candidate).
  std::map<NodeId, std::vector<NodeId>> children;
  for (const auto& [node, lid] : tree->parent) {
    const NodeId parent_node = topo.link(lid).source;
    if (node == tree->root) continue;
    children[parent_node].push_back(node);
  }

  // Bottom-up subtree demand and node counts (iterative post-order).
  std::map<NodeId, double> sub_demand;
  std::map<NodeId, int> sub_count;
  std::vector<NodeId> order;
  std::vector<NodeId> stack{tree->root};
  while (!stack.empty()) {
    const NodeId u = stack.back();
    stack.pop_back();
    order.push_back(u);
    auto it = children.find(u);
    if (it != children.end())
      for (NodeId c : it->second) stack.push_back(c);
  }
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId u = *it;
    double d = node_demand[static_cast<std::size_t>(u)];
    int c = 1;
    auto ch = children.find(u);
    if (ch != children.end())
      for (NodeId v : ch->second) {
        d += sub_demand[v];
        c += sub_count[v];
      }
    sub_demand[u] = d;
    sub_count[u] = c;
  }

  const double total_demand = sub_demand[tree->root];
  const int total_count = sub_count[tree->root];

  std::optional<LinkId> best;
  double best_balance = 0.0;
  int best_count_balance = 0;
  NodeId best_far_root = kNoNode;
  for (const auto& [node, lid] : tree->parent) {
    if (node == tree->root) continue;
    const double far = sub_demand[node];
    const double balance = std::abs((total_demand - far) - far);
    const int count_balance =
        std::abs((total_count - sub_count[node]) - sub_count[node]);
    const bool better =
        !best || balance < best_balance ||
        (balance == best_balance &&
         (count_balance < best_count_balance ||
          (count_balance == best_count_balance && lid < *best)));
    if (better) {
      best = lid;
      best_balance = balance;
      best_count_balance = count_balance;
      best_far_root = node;
    }
  }
  if (!best) return std::nullopt;

  BisectResult res;
  res.cut_link = *best;
  std::vector<NodeId> far_stack{best_far_root};
  std::set<NodeId> far;
  while (!far_stack.empty()) {
    const NodeId u = far_stack.back();
    far_stack.pop_back();
    far.insert(u);
    auto it = children.find(u);
    if (it != children.end())
      for (NodeId c : it->second) far_stack.push_back(c);
  }
  for (NodeId n : tree->nodes) {
    if (far.count(n)) res.far_set.push_back(n);
    else res.near_set.push_back(n);
  }
  return res;
}

enum class RehomeFail {
  none,
  not_a_subtree,
  no_corridor,
  repeated_instance,
  inconsistent,
};

struct RehomeOutcome {
  std::optional<RoutingInstance> instance;
  RehomeFail fail = RehomeFail::none;
  Path corridor;
  NodeId detached_root = kNoNode;
  bool dirty_corridor = false;  // corridor links already serve outside nodes
};

/// Reattaches the detached half to a gateway over a minimum-hop corridor
/// that is link-disjoint from the detached set's old attachment, from the
/// retained half's gateway paths and from the reported flooded links, and
/// that keeps every corridor link below the flood threshold after absorbing
/// the detached demand. Corridors whose links currently serve only detached
/// nodes are preferred; a corridor that couples outsiders is a second
/// choice. Entries outside the detached destinations never change.
inline RehomeOutcome rehome(const Topology& topo, const RoutingInstance& r,
                            std::span<const NodeId> gateways,
                            std::span<const NodeId> detached,
                            std::span<const NodeId> retained,
                            std::span<const double> node_demand,
                            const LinkLoadState& loads, double threshold,
                            std::span<const LinkId> flooded,
                            std::span<const std::uint64_t> past_fps) {
  RehomeOutcome out;
  const std::set<NodeId> detached_set(detached.begin(), detached.end());

  // The detached root: its gateway path crosses no other detached node.
  NodeId root = kNoNode;
  NodeId gateway = kNoNode;
  Path old_path;
  for (NodeId n : detached) {
    for (NodeId g : gateways) {
      Path p;
      try {
        p = route_path(topo, r, g, n);
      } catch (const RoutingError&) {
        continue;
      }
      bool crosses_other = false;
      for (LinkId lid : p.links) {
        const NodeId v = topo.link(lid).destination;
        if (v != n && detached_set.count(v)) {
          crosses_other = true;
          break;
        }
      }
      if (!crosses_other) {
        if (root != kNoNode && root != n) {
          out.fail = RehomeFail::not_a_subtree;
          return out;
        }
        root = n;
        gateway = g;
        old_path = p;
      }
      break;
    }
  }
  if (root == kNoNode) {
    out.fail = RehomeFail::not_a_subtree;
    return out;
  }
  out.detached_root = root;

  double demand = 0.0;
  for (NodeId n : detached) demand += node_demand[static_cast<std::size_t>(n)];
  demand = std::max(demand, 1.0);  // zero-demand subtrees still need a path

  std::vector<char> forbidden(static_cast<std::size_t>(topo.link_count()), 0);
  for (LinkId l : old_path.links) forbidden[static_cast<std::size_t>(l)] = 1;
  for (LinkId l : flooded) forbidden[static_cast<std::size_t>(l)] = 1;
  for (NodeId n : retained) {
    try {
      for (LinkId l : route_path(topo, r, gateway, n).links)
        forbidden[static_cast<std::size_t>(l)] = 1;
    } catch (const RoutingError&) {
    }
  }
  for (const auto& l : topo.links()) {
    const bool src_in = detached_set.count(l.source) && l.source != root;
    const bool dst_in = detached_set.count(l.destination) &&
                        l.destination != root;
    if (src_in || dst_in) forbidden[static_cast<std::size_t>(l.id)] = 1;
  }

  std::vector<double> residual(static_cast<std::size_t>(topo.link_count()));
  for (const auto& l : topo.links())
    residual[static_cast<std::size_t>(l.id)] =
        threshold * l.capacity_bps - loads.load[static_cast<std::size_t>(l.id)];

  // First pass: links that currently serve nobody outside the detached set.
  const auto dst_index = build_dst_index(topo, r, gateways);
  std::vector<char> strict = forbidden;
  for (const auto& l : topo.links()) {
    for (NodeId served : dst_index[static_cast<std::size_t>(l.id)])
      if (!detached_set.count(served)) {
        strict[static_cast<std::size_t>(l.id)] = 1;
        break;
      }
  }

  auto corridor =
      link_disjoint_path(topo, residual, strict, gateway, root, demand);
  if (!corridor) {
    corridor =
        link_disjoint_path(topo, residual, forbidden, gateway, root, demand);
    out.dirty_corridor = corridor.has_value();
  }
  if (!corridor) {
    out.fail = RehomeFail::no_corridor;
    return out;
  }
  out.corridor = *corridor;

  RoutingInstance candidate = r;
  NodeId at = gateway;
  for (LinkId lid : corridor->links) {
    for (NodeId m : detached)
      if (m != at) candidate.set_entry(at, m, lid);
    at = topo.link(lid).destination;
  }

  if (!instance_consistent(topo, candidate)) {
    out.fail = RehomeFail::inconsistent;
    return out;
  }
  const auto fp = candidate.fingerprint();
  for (auto past : past_fps)
    if (past == fp) {
      out.fail = RehomeFail::repeated_instance;
      return out;
    }
  out.instance = std::move(candidate);
  return out;
}

struct DisambiguateOutcome {
  RoutingInstance instance;
  bool changed = false;
  bool best_effort = false;  // node-disjointness not fully achievable
  int decoupled = 0;
};

/// Gives each suspect its own gateway corridor, pairwise node-disjoint
/// except at the gateway, avoiding the reported flooded links. Falls back to
/// link-disjoint corridors (flagged) where the topology cannot do better.
inline DisambiguateOutcome disambiguate(
    const Topology& topo, const RoutingInstance& r,
    std::span<const NodeId> gateways, std::span<const NodeId> suspects,
    std::span<const std::int64_t> couple_counts,
    std::span<const double> node_demand, const LinkLoadState& loads,
    double threshold, std::span<const LinkId> flooded) {
  DisambiguateOutcome out;
  out.instance = r;

  std::vector<NodeId> order(suspects.begin(), suspects.end());
  std::stable_sort(order.begin(), order.end(), [&](NodeId a, NodeId b) {
    const auto ca = couple_counts[static_cast<std::size_t>(a)];
    const auto cb = couple_counts[static_cast<std::size_t>(b)];
    return ca != cb ? ca > cb : a < b;
  });

  std::vector<char> is_flooded(static_cast<std::size_t>(topo.link_count()), 0);
  for (LinkId l : flooded) is_flooded[static_cast<std::size_t>(l)] = 1;

  std::vector<double> residual(static_cast<std::size_t>(topo.link_count()));
  for (const auto& l : topo.links())
    residual[static_cast<std::size_t>(l.id)] =
        threshold * l.capacity_bps - loads.load[static_cast<std::size_t>(l.id)];

  std::set<NodeId> used_nodes;   // interior nodes of assigned corridors
  std::set<LinkId> used_links;
  std::set<NodeId> suspect_set(suspects.begin(), suspects.end());

  auto interior_nodes = [&](const Path& p, NodeId dest) {
    std::vector<NodeId> nodes;
    for (LinkId lid : p.links) {
      const NodeId v = topo.link(lid).destination;
      if (v != dest) nodes.push_back(v);
    }
    return nodes;
  };

  for (NodeId s : order) {
    NodeId gateway = kNoNode;
    Path current;
    for (NodeId g : gateways) {
      try {
        current = route_path(topo, out.instance, g, s);
        gateway = g;
        break;
      } catch (const RoutingError&) {
      }
    }
    if (gateway == kNoNode) {
      out.best_effort = true;
      continue;
    }

    auto acceptable = [&](const Path& p) {
      for (LinkId lid : p.links) {
        if (is_flooded[static_cast<std::size_t>(lid)]) return false;
        if (used_links.count(lid)) return false;
      }
      for (NodeId v : interior_nodes(p, s))
        if (used_nodes.count(v) || suspect_set.count(v)) return false;
      return true;
    };

    auto adopt_path = [&](const Path& p, bool rewrite) {
      if (rewrite) {
        NodeId at = gateway;
        for (LinkId lid : p.links) {
          if (at != s) out.instance.set_entry(at, s, lid);
          at = topo.link(lid).destination;
        }
        out.changed = true;
      }
      for (LinkId lid : p.links) used_links.insert(lid);
      for (NodeId v : interior_nodes(p, s)) used_nodes.insert(v);
      ++out.decoupled;
    };

    if (acceptable(current)) {
      adopt_path(current, /*rewrite=*/false);
      continue;
    }

    const double demand =
        std::max(node_demand[static_cast<std::size_t>(s)], 1.0);

    // Node-disjoint attempt: forbid links touching any reserved node.
    std::vector<char> forbidden(static_cast<std::size_t>(topo.link_count()), 0);
    for (const auto& l : topo.links()) {
      const std::size_t i = static_cast<std::size_t>(l.id);
      if (is_flooded[i] || used_links.count(l.id)) forbidden[i] = 1;
      auto touches = [&](NodeId v) {
        return (used_nodes.count(v) || (suspect_set.count(v) && v != s)) &&
               v != gateway;
      };
      if (touches(l.source) || touches(l.destination)) forbidden[i] = 1;
    }
    auto corridor =
        link_disjoint_path(topo, residual, forbidden, gateway, s, demand);
    if (!corridor) {
      // Link-disjoint retry.
      std::vector<char> relaxed(static_cast<std::size_t>(topo.link_count()), 0);
      for (const auto& l : topo.links()) {
        const std::size_t i = static_cast<std::size_t>(l.id);
        if (is_flooded[i] || used_links.count(l.id)) relaxed[i] = 1;
      }
      corridor = link_disjoint_path(topo, residual, relaxed, gateway, s, demand);
      out.best_effort = true;
    }
    if (corridor) adopt_path(*corridor, /*rewrite=*/true);
    else out.best_effort = true;
  }

  if (out.changed && !instance_consistent(topo, out.instance)) {
    // Give up on the edit; the caller falls back.
    out.instance = r;
    out.changed = false;
    out.best_effort = true;
  }
  return out;
}

/// Attack-aware engine: a binary search for the target across flood cycles.
/// Each cycle bisects the affected routing tree and rehomes one half over a
/// link-disjoint corridor; once the affected set is small, suspects get
/// node-disjoint paths until the penalty ledger settles. Any exceptional
/// case hands the cycle to the fallback engine.
class RemoteEngine : public TrafficEngineer {
 public:
  RemoteEngine(int node_count, TrafficEngineer* fallback)
      : fallback_(fallback) {
    state_.couple_counts.assign(static_cast<std::size_t>(node_count), 0);
  }

  const RemoteState& state() const { return state_; }

  struct TraceRow {
    RemotePhase phase = RemotePhase::bisection;
    int suspect_size = 0;
    LinkId cut_link = kNoLink;
    Path corridor;
    bool fallback = false;
    std::string reason;
  };
  const std::vector<TraceRow>& trace() const { return trace_; }

  TeResult step(const TeContext& ctx) override {
    const auto dst = affected_set(ctx.report);
    for (NodeId n : dst)
      state_.couple_counts[static_cast<std::size_t>(n)] += 1;
    state_.suspect_tree_nodes = dst;
    if (state_.phase == RemotePhase::bisection && dst.size() <= kPhaseSwitch)
      state_.phase = RemotePhase::disambiguation;

    TraceRow row;
    row.phase = state_.phase;
    row.suspect_size = static_cast<int>(dst.size());

    const auto node_demand = current_node_demand(ctx);
    const auto flooded = reported_links(ctx.report);

    TeResult res;
    if (state_.phase == RemotePhase::disambiguation) {
      res = disambiguation_step(ctx, dst, node_demand, flooded, row);
    } else {
      res = bisection_step(ctx, node_demand, flooded, row);
    }
    if (!res.fallback_used)
      state_.past_instances.insert(res.routing.fingerprint());
    trace_.push_back(std::move(row));
    return res;
  }

  std::string_view name() const override { return "remote"; }

 private:
  static constexpr std::size_t kPhaseSwitch = 3;

  static std::vector<LinkId> reported_links(const FloodReport& report) {
    std::vector<LinkId> out;
    for (const auto& e : report.events) out.push_back(e.link);
    return out;
  }

  static std::vector<double> current_node_demand(const TeContext& ctx) {
    std::vector<double> demand(
        static_cast<std::size_t>(ctx.topo.node_count()), 0.0);
    double total = 0.0;
    for (const auto& h : ctx.hosts) {
      const double rate = h.send_rate();
      if (rate <= 0.0) continue;
      demand[static_cast<std::size_t>(h.current_dest)] += rate;
      total += rate;
    }
    if (total > 0.0)
      for (auto& d : demand) d /= total;
    return demand;
  }

  TeResult fall_back(const TeContext& ctx, std::string reason, TraceRow& row) {
    row.fallback = true;
    row.reason = std::move(reason);
    TeResult res = fallback_->step(ctx);
    res.fallback_used = true;
    if (res.note.empty()) res.note = row.reason;
    else res.note = row.reason + "; " + res.note;
    return res;
  }

  bool repeated(const TeContext& ctx, const RoutingInstance& inst) const {
    const auto fp = inst.fingerprint();
    if (state_.past_instances.count(fp)) return true;
    for (auto past : ctx.past_fingerprints)
      if (past == fp) return true;
    return false;
  }

  TeResult bisection_step(const TeContext& ctx,
                          const std::vector<double>& node_demand,
                          const std::vector<LinkId>& flooded, TraceRow& row) {
    // Work on the reported link with the widest serve set.
    const FloodEvent* event = nullptr;
    for (const auto& e : ctx.report.events)
      if (!event || e.dst.size() > event->dst.size() ||
          (e.dst.size() == event->dst.size() && e.link < event->link))
        event = &e;
    if (!event || event->dst.empty())
      return fall_back(ctx, "empty flood event", row);

    const auto bis = bisect_tree(ctx.topo, ctx.routing, ctx.topo.gateways(),
                                 event->dst, node_demand);
    if (!bis) return fall_back(ctx, "empty split", row);
    row.cut_link = bis->cut_link;

    auto rh = rehome(ctx.topo, ctx.routing, ctx.topo.gateways(), bis->far_set,
                     bis->near_set, node_demand, ctx.loads,
                     ctx.flood_threshold, flooded, ctx.past_fingerprints);
    if (!rh.instance) {
      switch (rh.fail) {
        case RehomeFail::no_corridor:
          return fall_back(ctx, "no feasible rehoming corridor", row);
        case RehomeFail::repeated_instance:
          return fall_back(ctx, "rehoming repeats a past instance", row);
        case RehomeFail::not_a_subtree:
          return fall_back(ctx, "affected set is not a routing subtree", row);
        default:
          return fall_back(ctx, "rehoming produced an inconsistent instance",
                           row);
      }
    }
    if (repeated(ctx, *rh.instance))
      return fall_back(ctx, "rehoming repeats a past instance", row);
    if (!relieves_report(ctx.topo, *rh.instance, ctx.report, ctx.hosts,
                         ctx.flood_threshold))
      return fall_back(ctx, "rehoming leaves a reported link flooded", row);

    row.corridor = rh.corridor;
    TeResult res;
    res.routing = std::move(*rh.instance);
    res.note = rh.dirty_corridor ? "bisection (shared corridor)" : "bisection";
    return res;
  }

  TeResult disambiguation_step(const TeContext& ctx,
                               const std::vector<NodeId>& dst,
                               const std::vector<double>& node_demand,
                               const std::vector<LinkId>& flooded,
                               TraceRow& row) {
    std::vector<NodeId> suspects = dst;
    if (suspects.size() > kPhaseSwitch) {
      // A wide flood mid-disambiguation: decouple the most-coupled nodes.
      std::stable_sort(suspects.begin(), suspects.end(),
                       [&](NodeId a, NodeId b) {
                         const auto ca =
                             state_.couple_counts[static_cast<std::size_t>(a)];
                         const auto cb =
                             state_.couple_counts[static_cast<std::size_t>(b)];
                         return ca != cb ? ca > cb : a < b;
                       });
      suspects.resize(kPhaseSwitch);
      std::sort(suspects.begin(), suspects.end());
    }

    auto dis = disambiguate(ctx.topo, ctx.routing, ctx.topo.gateways(),
                            suspects, state_.couple_counts, node_demand,
                            ctx.loads, ctx.flood_threshold, flooded);
    if (dis.changed && repeated(ctx, dis.instance))
      return fall_back(ctx, "disambiguation repeats a past instance", row);
    if (!relieves_report(ctx.topo, dis.instance, ctx.report, ctx.hosts,
                         ctx.flood_threshold))
      return fall_back(ctx, "disambiguation leaves a reported link flooded",
                       row);
    TeResult res;
    res.routing = std::move(dis.instance);
    res.note = dis.best_effort ? "disambiguation (best effort)"
                               : "disambiguation";
    if (dis.best_effort) res.infeasible = !dis.changed;
    return res;
  }

  RemoteState state_;
  TrafficEngineer* fallback_;
  std::vector<TraceRow> trace_;
};

}  // namespace lfsim
