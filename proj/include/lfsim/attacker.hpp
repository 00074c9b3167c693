#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "lfsim/core.hpp"
#include "lfsim/routing.hpp"
#include "lfsim/traffic.hpp"

namespace lfsim {

/// Botnet bookkeeping across attack cycles.
struct AttackerState {
  std::vector<HostId> botnet;               // ascending host ids
  std::vector<std::int64_t> participation;  // parallel to botnet
  int d_min = 2;            // minimum decoy count behind an attackable link
  double b_part = 1.0;      // fraction of the botnet usable per cycle
  double per_bot_rate_bps = 0.0;  // >0: nominal per-bot flow; 0: spread the
                                  // required load across all available bots

  std::int64_t participation_of(HostId h) const {
    const auto it = std::lower_bound(botnet.begin(), botnet.end(), h);
    if (it == botnet.end() || *it != h) return 0;
    return participation[static_cast<std::size_t>(it - botnet.begin())];
  }
};

inline AttackerState make_attacker_state(std::vector<HostId> bots, int d_min,
                                         double b_part,
                                         double per_bot_rate_bps = 0.0) {
  if (d_min < 1) throw ConfigError("d_min must be >= 1");
  if (!(b_part > 0.0) || b_part > 1.0)
    throw ConfigError("b_part must be in (0, 1]");
  AttackerState st;
  std::sort(bots.begin(), bots.end());
  st.botnet = std::move(bots);
  st.participation.assign(st.botnet.size(), 0);
  st.d_min = d_min;
  st.b_part = b_part;
  st.per_bot_rate_bps = per_bot_rate_bps;
  return st;
}

/// Current gateway->target paths, one per gateway that can reach the target.
/// Oracle reconnaissance: reads the deployed routing state directly.
inline std::vector<Path> discover_paths(const Topology& topo,
                                        const RoutingInstance& r,
                                        std::span<const NodeId> gateways,
                                        NodeId target) {
  std::vector<Path> paths;
  for (NodeId g : gateways) {
    try {
      paths.push_back(route_path(topo, r, g, target));
    } catch (const RoutingError&) {
      // Gateway cut off from the target; nothing to flood from here.
    }
  }
  return paths;
}

/// Smallest-free-bandwidth link on the path whose serve set has at least
/// d_min members (and at least one non-target decoy when `target` is given).
/// Ties go to the smaller link id.
inline std::optional<LinkId> select_critical_link(
    const Topology& topo, const RoutingInstance& r, const LinkLoadState& loads,
    std::span<const NodeId> gateways, const Path& path, int d_min,
    NodeId target = kNoNode) {
  std::optional<LinkId> best;
  double best_free = 0.0;
  for (LinkId l : path.links) {
    const auto dst = dst_of_link(topo, r, gateways, l);
    if (static_cast<int>(dst.size()) < d_min) continue;
    if (target != kNoNode) {
      const bool has_decoy =
          std::any_of(dst.begin(), dst.end(),
                      [target](NodeId n) { return n != target; });
      if (!has_decoy) continue;
    }
    const double free = loads.free_bandwidth(topo, l);
    if (!best || free < best_free || (free == best_free && l < *best)) {
      best = l;
      best_free = free;
    }
  }
  return best;
}

/// The ceil(b_part * |botnet|) bot ids available this cycle, sampled
/// uniformly without replacement.
inline std::vector<HostId> sample_available_bots(const AttackerState& st,
                                                 Rng& rng) {
  if (st.botnet.empty()) return {};
  const auto want = static_cast<std::size_t>(
      std::ceil(st.b_part * static_cast<double>(st.botnet.size())));
  const auto count = std::min(want, st.botnet.size());
  std::vector<HostId> out;
  out.reserve(count);
  for (std::size_t idx : rng.sample(count, st.botnet.size()))
    out.push_back(st.botnet[idx]);
  std::sort(out.begin(), out.end());
  return out;
}

struct BotSchedule {
  std::vector<std::pair<HostId, double>> sends;  // (bot, rate this cycle)
  bool underpowered = false;
};

/// Assigns send rates to bots drawn from `pool` (lowest past participation
/// first, ties by id) until `required_rate` is covered. With a positive
/// per-bot nominal rate, ceil(required/nominal) bots each send up to the
/// nominal value; otherwise the load is spread across the whole pool in
/// proportion to each bot's profile rate. Chosen bots gain a participation
/// point and leave the pool.
inline BotSchedule schedule_from_pool(AttackerState& st, double required_rate,
                                      std::vector<HostId>& pool,
                                      std::span<const double> rate_of_host) {
  BotSchedule sched;
  if (required_rate <= 0.0 || pool.empty()) {
    sched.underpowered = required_rate > 0.0;
    return sched;
  }
  std::vector<HostId> order = pool;
  std::stable_sort(order.begin(), order.end(), [&st](HostId a, HostId b) {
    const auto pa = st.participation_of(a), pb = st.participation_of(b);
    return pa != pb ? pa < pb : a < b;
  });

  std::vector<HostId> chosen;
  if (st.per_bot_rate_bps > 0.0) {
    const auto needed = static_cast<std::size_t>(
        std::ceil(required_rate / st.per_bot_rate_bps));
    if (needed > order.size()) sched.underpowered = true;
    chosen.assign(order.begin(),
                  order.begin() + static_cast<std::ptrdiff_t>(
                                      std::min(needed, order.size())));
    double total = 0.0;
    for (HostId h : chosen) {
      const double rate = std::min(st.per_bot_rate_bps,
                                   rate_of_host[static_cast<std::size_t>(h)]);
      sched.sends.emplace_back(h, rate);
      total += rate;
    }
    if (total < required_rate) sched.underpowered = true;
  } else {
    chosen = order;
    double capacity = 0.0;
    for (HostId h : chosen)
      capacity += rate_of_host[static_cast<std::size_t>(h)];
    if (capacity < required_rate) {
      sched.underpowered = true;
      for (HostId h : chosen)
        sched.sends.emplace_back(h, rate_of_host[static_cast<std::size_t>(h)]);
    } else {
      const double scale = required_rate / capacity;
      for (HostId h : chosen)
        sched.sends.emplace_back(
            h, rate_of_host[static_cast<std::size_t>(h)] * scale);
    }
  }

  for (HostId h : chosen) {
    const auto it = std::lower_bound(st.botnet.begin(), st.botnet.end(), h);
    st.participation[static_cast<std::size_t>(it - st.botnet.begin())] += 1;
    pool.erase(std::remove(pool.begin(), pool.end(), h), pool.end());
  }
  return sched;
}

/// One-shot variant: samples this cycle's available subset, then schedules.
inline BotSchedule schedule_bots(AttackerState& st, double required_rate,
                                 std::span<const double> rate_of_host,
                                 Rng& rng) {
  auto pool = sample_available_bots(st, rng);
  return schedule_from_pool(st, required_rate, pool, rate_of_host);
}

struct PlannedFlood {
  LinkId critical_link = kNoLink;
  double required_bps = 0.0;
  bool underpowered = false;
  // (bot, decoy destination, send rate)
  std::vector<std::tuple<HostId, NodeId, double>> assignments;
};

struct AttackPlan {
  std::vector<PlannedFlood> floods;
  bool target_unreachable = false;
  int decoy_starved_links = 0;
};

/// Full attack cycle: per gateway path, pick the critical link, size the
/// flood against the planning-time loads (epsilon margin on top of the gap
/// to the flood threshold), schedule bots, and aim each at a decoy behind
/// the link — never the target, and a different decoy than the bot's last
/// one whenever the link offers a choice.
inline AttackPlan build_plan(const Topology& topo, const RoutingInstance& r,
                             const LinkLoadState& loads, AttackerState& st,
                             std::span<const NodeId> gateways, NodeId target,
                             double threshold, std::span<const Host> hosts,
                             Rng& rng, double margin_fraction = 0.05) {
  AttackPlan plan;
  const auto paths = discover_paths(topo, r, gateways, target);
  if (paths.empty()) {
    plan.target_unreachable = true;
    return plan;
  }

  std::vector<double> rate_of_host(hosts.size(), 0.0);
  for (const auto& h : hosts)
    rate_of_host[static_cast<std::size_t>(h.id)] = h.rate_bps;

  auto pool = sample_available_bots(st, rng);

  std::vector<LinkId> already_targeted;
  for (const auto& path : paths) {
    if (path.empty()) continue;
    const auto critical =
        select_critical_link(topo, r, loads, gateways, path, st.d_min, target);
    if (!critical) {
      // Distinguish "no link clears d_min" from "qualifying links serve the
      // target alone" for the cycle log.
      if (select_critical_link(topo, r, loads, gateways, path, st.d_min)
              .has_value())
        ++plan.decoy_starved_links;
      continue;
    }
    if (std::find(already_targeted.begin(), already_targeted.end(),
                  *critical) != already_targeted.end())
      continue;
    already_targeted.push_back(*critical);

    auto dst = dst_of_link(topo, r, gateways, *critical);
    std::vector<NodeId> decoys;
    for (NodeId n : dst)
      if (n != target) decoys.push_back(n);
    if (decoys.empty()) {
      ++plan.decoy_starved_links;
      continue;
    }

    PlannedFlood flood;
    flood.critical_link = *critical;
    const auto& link = topo.link(*critical);
    const double gap =
        threshold * link.capacity_bps -
        loads.load[static_cast<std::size_t>(*critical)];
    flood.required_bps =
        gap > 0.0 ? gap + margin_fraction * link.capacity_bps : 0.0;

    if (flood.required_bps > 0.0) {
      auto sched = schedule_from_pool(st, flood.required_bps, pool, rate_of_host);
      flood.underpowered = sched.underpowered;
      for (const auto& [bot, rate] : sched.sends) {
        const NodeId prev = hosts[static_cast<std::size_t>(bot)].current_dest;
        NodeId decoy;
        const auto cur = std::find(decoys.begin(), decoys.end(), prev);
        if (decoys.size() >= 2 && cur != decoys.end()) {
          std::size_t j = rng.index(decoys.size() - 1);
          if (j >= static_cast<std::size_t>(cur - decoys.begin())) ++j;
          decoy = decoys[j];
        } else {
          decoy = decoys[rng.index(decoys.size())];
        }
        flood.assignments.emplace_back(bot, decoy, rate);
      }
    }
    plan.floods.push_back(std::move(flood));
  }
  return plan;
}

/// Applies a plan: every bot goes quiet, then scheduled bots re-aim at their
/// assigned decoys. Benign hosts are untouched.
inline void apply_plan(std::vector<Host>& hosts, const AttackPlan& plan) {
  for (auto& h : hosts) {
    if (!h.is_bot()) continue;
    h.active = false;
    h.attack_rate_bps = 0.0;
  }
  for (const auto& flood : plan.floods) {
    for (const auto& [bot, decoy, rate] : flood.assignments) {
      auto& h = hosts[static_cast<std::size_t>(bot)];
      h.prev_dest = h.current_dest;
      h.current_dest = decoy;
      h.attack_rate_bps = rate;
      h.active = true;
    }
  }
}

}  // namespace lfsim
