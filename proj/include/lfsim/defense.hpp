#pragma once

#include <algorithm>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "lfsim/core.hpp"
#include "lfsim/routing.hpp"
#include "lfsim/te.hpp"
#include "lfsim/traffic.hpp"

namespace lfsim {

struct Verdict {
  std::vector<NodeId> deduced_target;  // maximally penalized nodes
  std::vector<HostId> deduced_bots;    // penalty above tau + 1
  std::int64_t conclusive_at = 0;
};

/// Event-counting evidence store: per-node and per-host penalties plus the
/// conclusiveness window. Direct-addressed, constant-time per touched key.
class PenaltyLedger {
 public:
  PenaltyLedger(int node_count, int host_count)
      : node_penalty_(static_cast<std::size_t>(node_count), 0),
        host_penalty_(static_cast<std::size_t>(host_count), 0),
        seen_in_flood_(static_cast<std::size_t>(host_count), 0) {}

  std::int64_t timestep() const { return timestep_; }
  const std::vector<std::int64_t>& node_penalty() const { return node_penalty_; }
  const std::vector<std::int64_t>& host_penalty() const { return host_penalty_; }
  const std::deque<std::vector<NodeId>>& history() const { return history_; }

  /// Nodes sharing the maximal positive penalty; empty when all are zero.
  std::vector<NodeId> top_suspects() const {
    std::int64_t best = 0;
    for (auto p : node_penalty_) best = std::max(best, p);
    std::vector<NodeId> out;
    if (best == 0) return out;
    for (std::size_t i = 0; i < node_penalty_.size(); ++i)
      if (node_penalty_[i] == best) out.push_back(static_cast<NodeId>(i));
    return out;
  }

  void reset() {
    std::fill(node_penalty_.begin(), node_penalty_.end(), 0);
    std::fill(host_penalty_.begin(), host_penalty_.end(), 0);
    std::fill(seen_in_flood_.begin(), seen_in_flood_.end(), 0);
    history_.clear();
    timestep_ = 0;
  }

  friend void penalize(PenaltyLedger&, const FloodReport&,
                       std::span<const Host>);

 private:
  std::vector<std::int64_t> node_penalty_;
  std::vector<std::int64_t> host_penalty_;
  std::vector<char> seen_in_flood_;  // host appeared in an earlier report
  std::deque<std::vector<NodeId>> history_;  // last 5 top-suspect sets
  std::int64_t timestep_ = 0;
};

/// Applies one flood report: +1 to every affected node; +1 to every source
/// host, +2 instead when the host changed destination since the previous
/// timestep and had already appeared in an earlier report. Every other
/// non-zero penalty decays by one. Order-independent across events.
inline void penalize(PenaltyLedger& ledger, const FloodReport& report,
                     std::span<const Host> hosts) {
  if (report.timestep != ledger.timestep_ + 1)
    throw ValidationError("flood report out of order");
  if (report.events.empty())
    throw ValidationError("penalize: empty flood report");

  const auto affected = affected_set(report);
  std::vector<char> node_hit(ledger.node_penalty_.size(), 0);
  for (NodeId n : affected) node_hit[static_cast<std::size_t>(n)] = 1;

  std::vector<char> host_hit(ledger.host_penalty_.size(), 0);
  for (const auto& e : report.events)
    for (HostId h : e.src) host_hit[static_cast<std::size_t>(h)] = 1;

  for (std::size_t n = 0; n < ledger.node_penalty_.size(); ++n) {
    if (node_hit[n]) ledger.node_penalty_[n] += 1;
    else if (ledger.node_penalty_[n] > 0) ledger.node_penalty_[n] -= 1;
  }

  for (std::size_t h = 0; h < ledger.host_penalty_.size(); ++h) {
    if (host_hit[h]) {
      const auto& host = hosts[h];
      const bool changed =
          host.prev_dest != kNoNode && host.prev_dest != host.current_dest;
      const bool again = ledger.seen_in_flood_[h] != 0;
      ledger.host_penalty_[h] += (changed && again) ? 2 : 1;
    } else if (ledger.host_penalty_[h] > 0) {
      ledger.host_penalty_[h] -= 1;
    }
  }
  for (std::size_t h = 0; h < ledger.host_penalty_.size(); ++h)
    if (host_hit[h]) ledger.seen_in_flood_[h] = 1;

  ledger.timestep_ += 1;
  ledger.history_.push_back(ledger.top_suspects());
  while (ledger.history_.size() > 5) ledger.history_.pop_front();
}

/// Stable detection: the maximally penalized node set unchanged across the
/// last five recorded flood cycles.
inline bool conclusive(const PenaltyLedger& ledger) {
  const auto& h = ledger.history();
  if (h.size() < 5) return false;
  for (std::size_t i = 1; i < h.size(); ++i)
    if (h[i] != h.front()) return false;
  return true;
}

/// Reads off the verdict and resets both penalty stores.
inline Verdict deduce(PenaltyLedger& ledger) {
  if (!conclusive(ledger))
    throw ValidationError("deduce called before penalization is conclusive");
  Verdict v;
  v.conclusive_at = ledger.timestep();
  v.deduced_target = ledger.top_suspects();
  const auto tau = ledger.timestep();
  const auto& hp = ledger.host_penalty();
  for (std::size_t h = 0; h < hp.size(); ++h)
    if (hp[h] > tau + 1) v.deduced_bots.push_back(static_cast<HostId>(h));
  ledger.reset();
  return v;
}

struct FloodOutcome {
  RoutingInstance routing;
  bool te_failed = false;
  bool fallback_used = false;
  bool infeasible = false;
  bool relief_ok = true;
  std::int64_t migration_diff = 0;
  std::optional<Verdict> verdict;
  std::string te_note;
};

/// The event body: penalization runs first but reads only the report, so the
/// TE step sees exactly the inputs it would have seen concurrently. TE
/// failure keeps the incumbent routing and is flagged. The adopted
/// migration lands in the disruption ledger; a conclusive ledger yields the
/// verdict alongside the new routing.
inline FloodOutcome on_flood_event(PenaltyLedger& ledger,
                                   DisruptionLedger& disruption,
                                   const FloodReport& report,
                                   TrafficEngineer& te_engine,
                                   const RoutingInstance& routing,
                                   const Topology& topo,
                                   std::span<const Host> hosts,
                                   const LinkLoadState& loads,
                                   std::span<const std::uint64_t> past_fps,
                                   double flood_threshold, Rng& rng) {
  penalize(ledger, report, hosts);

  FloodOutcome out;
  TeContext ctx{topo,  routing,  report,          loads,
                hosts, past_fps, flood_threshold, &rng};
  try {
    TeResult res = te_engine.step(ctx);
    out.routing = std::move(res.routing);
    out.fallback_used = res.fallback_used;
    out.infeasible = res.infeasible;
    out.te_note = std::move(res.note);
  } catch (const std::exception& e) {
    out.routing = routing;
    out.te_failed = true;
    out.te_note = e.what();
  }

  out.migration_diff = routing_diff(routing, out.routing);
  disruption.record(report.timestep, out.migration_diff);
  out.relief_ok = relieves_report(topo, out.routing, report, hosts,
                                  flood_threshold);

  if (conclusive(ledger)) out.verdict = deduce(ledger);
  return out;
}

}  // namespace lfsim
