#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lfsim/attacker.hpp"
#include "lfsim/core.hpp"
#include "lfsim/defense.hpp"
#include "lfsim/routing.hpp"
#include "lfsim/te.hpp"
#include "lfsim/te_gate.hpp"
#include "lfsim/te_remote.hpp"
#include "lfsim/topology.hpp"
#include "lfsim/traffic.hpp"

namespace lfsim {

enum class TeScheme { remote, gate };
enum class FallbackScheme { gate, lb };

inline const char* te_scheme_name(TeScheme s) {
  return s == TeScheme::remote ? "remote" : "gate";
}

struct ScenarioConfig {
  std::string name = "scenario";
  std::string topology_path;
  TeScheme te = TeScheme::gate;
  FallbackScheme remote_fallback = FallbackScheme::gate;
  int host_count = 1000;          // e
  double b_size = 0.10;           // bot fraction of e
  double b_part = 1.0;            // botnet fraction usable per cycle
  double p_rehome = 0.0;          // benign re-destination probability
  int d_min = 2;
  double flood_threshold = 0.90;
  double link_capacity = 1e9;     // default for links without a capacity attr
  double rate_max = 1e6;          // per-host drawn rate cap
  double per_bot_rate = 0.0;      // 0: spread required load over available bots
  double attack_margin = 0.05;    // epsilon over the flood gap, of capacity
  int max_timesteps = 100;
  std::uint64_t seed = 1;
  int repetitions = 1;
  GaConfig ga;
  std::vector<std::string> gateway_override;
  std::string target_override;

  void validate() const {
    if (host_count < 1) throw ConfigError("host_count must be >= 1");
    if (b_size < 0.0 || b_size > 1.0) throw ConfigError("b_size in [0,1]");
    if (!(b_part > 0.0) || b_part > 1.0) throw ConfigError("b_part in (0,1]");
    if (p_rehome < 0.0 || p_rehome > 1.0) throw ConfigError("p_rehome in [0,1]");
    if (d_min < 1) throw ConfigError("d_min must be >= 1");
    if (!(flood_threshold > 0.0) || flood_threshold > 1.0)
      throw ConfigError("flood_threshold in (0,1]");
    if (!(link_capacity > 0.0)) throw ConfigError("link_capacity must be > 0");
    if (!(rate_max > 0.0)) throw ConfigError("rate_max must be > 0");
    if (max_timesteps < 1) throw ConfigError("max_timesteps must be >= 1");
    if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
    ga.validate();
  }
};

struct RunMetrics {
  double mean_link_utilization_pct = 0.0;
  double max_link_utilization_pct = 0.0;
  std::int64_t timesteps_to_conclusive = 0;  // flood cycles processed
  double modifications_per_node = 0.0;
  double bot_detect_rate_pct = 0.0;
  double false_positive_pct = 0.0;
  bool target_detected = false;
  bool conclusive = false;
  // Diagnostics, not part of the export schema.
  int rounds_run = 0;
  int fallback_events = 0;
  int te_failures = 0;
  int unflagged_relief_violations = 0;
  int underpowered_cycles = 0;
  std::int64_t disruption_total = 0;
};

struct EventRecord {
  int round = 0;
  std::int64_t tau = 0;
  std::vector<LinkId> flooded;
  int affected_size = 0;
  bool fallback = false;
  bool te_failed = false;
  bool infeasible = false;
  bool relief_ok = true;
  std::int64_t diff = 0;
  std::string phase;  // remote engine only
  int suspect_size = 0;
  std::string note;
};

struct RunResult {
  RunMetrics metrics;
  std::vector<EventRecord> events;
  std::optional<Verdict> verdict;
  std::vector<HostId> true_bots;
};

struct RunInputs {
  const Topology* topo = nullptr;               // overrides topology_path
  const RoutingInstance* initial_routing = nullptr;  // any valid instance
};

struct SimSinks {
  std::ostream* loads_csv = nullptr;
  std::ostream* attack_log = nullptr;
  std::ostream* te_trace = nullptr;
  std::ostream* ga_trace = nullptr;
};

inline Topology load_topology_for(const ScenarioConfig& cfg) {
  if (cfg.topology_path.empty())
    throw ConfigError("no topology file configured");
  std::ifstream in(cfg.topology_path, std::ios::binary);
  if (!in) throw ConfigError("cannot open topology file " + cfg.topology_path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  GraphmlOptions opts;
  opts.capacity_default_bps = cfg.link_capacity;
  opts.gateway_override = cfg.gateway_override;
  opts.target_override = cfg.target_override;
  return load_graphml(bytes, opts);
}

inline std::vector<Host> init_hosts(const Topology& topo,
                                    const ScenarioConfig& cfg, Rng& rng) {
  const int bot_count = static_cast<int>(
      std::ceil(cfg.b_size * static_cast<double>(cfg.host_count)));
  const auto& gateways = topo.gateways();
  const auto& dests = topo.non_gateway_nodes();
  std::vector<Host> hosts;
  hosts.reserve(static_cast<std::size_t>(cfg.host_count));
  for (int i = 0; i < cfg.host_count; ++i) {
    Host h;
    h.id = i;
    h.kind = i < bot_count ? HostKind::bot : HostKind::benign;
    h.entry_gateway = gateways[rng.index(gateways.size())];
    h.rate_bps = rng.positive_real(cfg.rate_max);
    h.current_dest = dests[rng.index(dests.size())];
    h.active = !h.is_bot();
    hosts.push_back(h);
  }
  return hosts;
}

namespace detail {

inline FloodReport make_report(std::int64_t tau, const Topology& topo,
                               const RoutingInstance& r,
                               std::span<const Host> hosts,
                               const std::vector<LinkId>& flooded) {
  FloodReport report;
  report.timestep = tau;
  for (LinkId l : flooded) {
    FloodEvent e;
    e.link = l;
    e.src = src_of_link(topo, r, hosts, l);
    e.dst = dst_of_link(topo, r, topo.gateways(), l);
    report.events.push_back(std::move(e));
  }
  return report;
}

inline void write_loads_row(std::ostream& os, int round, const Topology& topo,
                            const LinkLoadState& state, double threshold) {
  char buf[160];
  for (const auto& l : topo.links()) {
    const double load = state.load[static_cast<std::size_t>(l.id)];
    const bool over = load > threshold * l.capacity_bps;
    std::snprintf(buf, sizeof(buf), "%d,%d,%.3f,%.3f,%d\n", round, l.id, load,
                  l.capacity_bps, over ? 1 : 0);
    os << buf;
  }
}

}  // namespace detail

/// One seeded attacker/defender run.
///
/// Round structure (single random stream, fixed draw order):
///   1. Detection: links whose load exceeded the threshold during the
///      previous round are reported; the report attributes the flows that
///      were on those links when they flooded, the defense penalizes and
///      the TE engine reroutes.
///   2. Benign rehoming draws.
///   3. Attacker: reads the routing state and the benign-only baseline,
///      picks critical links, samples and schedules bots, re-aims decoys.
///   4. Traffic: loads for the round are recomputed.
/// The loop stops at the first conclusive verdict or after max_timesteps
/// rounds.
inline RunResult run_scenario_detailed(const ScenarioConfig& cfg,
                                       const RunInputs& inputs = {},
                                       SimSinks* sinks = nullptr) {
  cfg.validate();
  Rng rng(cfg.seed);

  Topology owned_topo;
  const Topology* topo_ptr = inputs.topo;
  if (!topo_ptr) {
    owned_topo = load_topology_for(cfg);
    topo_ptr = &owned_topo;
  }
  const Topology& topo = *topo_ptr;
  const int n_nodes = topo.node_count();

  RoutingInstance routing;
  if (inputs.initial_routing) {
    routing = *inputs.initial_routing;
  } else {
    std::vector<double> uniform(static_cast<std::size_t>(topo.link_count()),
                                1.0);
    routing = shortest_path_tree(topo, uniform, topo.non_gateway_nodes(),
                                 topo.gateways());
  }
  routing.set_version(1);

  auto hosts = init_hosts(topo, cfg, rng);

  std::vector<HostId> bots;
  for (const auto& h : hosts)
    if (h.is_bot()) bots.push_back(h.id);
  auto attacker =
      make_attacker_state(bots, cfg.d_min, cfg.b_part, cfg.per_bot_rate);

  GateEngine gate(cfg.ga, topo.link_count());
  InverseResidualTe lb;
  TrafficEngineer* fallback =
      cfg.remote_fallback == FallbackScheme::gate
          ? static_cast<TrafficEngineer*>(&gate)
          : static_cast<TrafficEngineer*>(&lb);
  RemoteEngine remote(n_nodes, fallback);
  TrafficEngineer& engine = cfg.te == TeScheme::remote
                                ? static_cast<TrafficEngineer&>(remote)
                                : static_cast<TrafficEngineer&>(gate);

  PenaltyLedger ledger(n_nodes, cfg.host_count);
  DisruptionLedger disruption;
  std::vector<std::uint64_t> adopted_fps{routing.fingerprint()};

  RunResult result;
  result.true_bots = bots;
  auto& metrics = result.metrics;

  if (sinks && sinks->loads_csv)
    *sinks->loads_csv << "round,link,load_bps,capacity_bps,over_threshold\n";
  if (sinks && sinks->ga_trace) *sinks->ga_trace << "event,generation,best_fitness\n";

  auto state = route_demands(topo, routing, hosts);
  if (sinks && sinks->loads_csv)
    detail::write_loads_row(*sinks->loads_csv, 0, topo, state,
                            cfg.flood_threshold);

  double util_sum = 0.0;
  std::int64_t util_events = 0;
  std::uint64_t next_version = 2;

  for (int round = 1; round <= cfg.max_timesteps; ++round) {
    metrics.rounds_run = round;
    const auto boundary = state.at_round_end();
    const auto flooded = flooded_links(boundary, topo, cfg.flood_threshold);

    if (!flooded.empty()) {
      const auto report = detail::make_report(ledger.timestep() + 1, topo,
                                              routing, hosts, flooded);
      auto outcome = on_flood_event(ledger, disruption, report, engine,
                                    routing, topo, hosts, boundary,
                                    adopted_fps, cfg.flood_threshold, rng);

      EventRecord ev;
      ev.round = round;
      ev.tau = report.timestep;
      ev.flooded = flooded;
      ev.affected_size = static_cast<int>(affected_set(report).size());
      ev.fallback = outcome.fallback_used;
      ev.te_failed = outcome.te_failed;
      ev.infeasible = outcome.infeasible;
      ev.relief_ok = outcome.relief_ok;
      ev.diff = outcome.migration_diff;
      ev.note = outcome.te_note;
      if (cfg.te == TeScheme::remote && !remote.trace().empty()) {
        const auto& row = remote.trace().back();
        ev.phase = row.phase == RemotePhase::bisection ? "bisection"
                                                       : "disambiguation";
        ev.suspect_size = row.suspect_size;
      }

      double sum = 0.0;
      for (const auto& l : topo.links())
        sum += boundary.load[static_cast<std::size_t>(l.id)] / l.capacity_bps;
      util_sum += sum / static_cast<double>(topo.link_count());
      ++util_events;
      for (const auto& l : topo.links())
        metrics.max_link_utilization_pct = std::max(
            metrics.max_link_utilization_pct,
            100.0 * boundary.load[static_cast<std::size_t>(l.id)] /
                l.capacity_bps);

      if (outcome.fallback_used) ++metrics.fallback_events;
      if (outcome.te_failed) ++metrics.te_failures;
      if (!outcome.relief_ok && !(outcome.fallback_used ||
                                  outcome.infeasible || outcome.te_failed))
        ++metrics.unflagged_relief_violations;

      if (!outcome.te_failed && !outcome.routing.same_entries(routing)) {
        routing = outcome.routing;
        routing.set_version(next_version++);
        const auto fp = routing.fingerprint();
        if (adopted_fps.empty() || adopted_fps.back() != fp)
          adopted_fps.push_back(fp);
      }

      if (sinks && sinks->te_trace) {
        *sinks->te_trace << "{\"round\":" << round << ",\"tau\":" << ev.tau
                         << ",\"phase\":\"" << ev.phase << "\",\"suspects\":"
                         << ev.suspect_size << ",\"fallback\":"
                         << (ev.fallback ? "true" : "false")
                         << ",\"relieved\":" << (ev.relief_ok ? "true" : "false")
                         << ",\"diff\":" << ev.diff << "}\n";
      }
      if (sinks && sinks->ga_trace && cfg.te == TeScheme::gate) {
        for (const auto& [gen, fit] : gate.last_trace()) {
          char buf[96];
          std::snprintf(buf, sizeof(buf), "%lld,%d,%.6f\n",
                        static_cast<long long>(ev.tau), gen, fit);
          *sinks->ga_trace << buf;
        }
      }

      result.events.push_back(std::move(ev));
      if (outcome.verdict) {
        result.verdict = std::move(outcome.verdict);
        break;
      }
    }

    rehome_benign(topo, hosts, cfg.p_rehome, rng);

    LinkLoadState baseline;
    baseline.load = benign_loads(topo, routing, hosts);
    baseline.prev_load = baseline.load;
    auto plan = build_plan(topo, routing, baseline, attacker, topo.gateways(),
                           topo.target(), cfg.flood_threshold, hosts, rng,
                           cfg.attack_margin);
    for (const auto& f : plan.floods)
      if (f.underpowered) {
        ++metrics.underpowered_cycles;
        break;
      }
    apply_plan(hosts, plan);

    if (sinks && sinks->attack_log) {
      auto& os = *sinks->attack_log;
      os << "{\"round\":" << round << ",\"links\":[";
      for (std::size_t i = 0; i < plan.floods.size(); ++i)
        os << (i ? "," : "") << plan.floods[i].critical_link;
      std::size_t bots_used = 0;
      for (const auto& f : plan.floods) bots_used += f.assignments.size();
      os << "],\"bots\":" << bots_used << ",\"suspended\":"
         << (plan.target_unreachable ? "true" : "false") << "}\n";
    }

    state = route_demands(topo, routing, hosts, &state.load);
    if (sinks && sinks->loads_csv)
      detail::write_loads_row(*sinks->loads_csv, round, topo, state,
                              cfg.flood_threshold);
  }

  metrics.timesteps_to_conclusive =
      result.verdict ? result.verdict->conclusive_at
                     : static_cast<std::int64_t>(result.events.size());
  metrics.conclusive = result.verdict.has_value();
  metrics.mean_link_utilization_pct =
      util_events > 0 ? 100.0 * util_sum / static_cast<double>(util_events)
                      : 0.0;
  metrics.disruption_total = disruption.cumulative;
  metrics.modifications_per_node =
      static_cast<double>(disruption.cumulative) / static_cast<double>(n_nodes);

  if (result.verdict) {
    const auto& v = *result.verdict;
    std::int64_t hits = 0;
    for (HostId b : v.deduced_bots)
      if (std::binary_search(bots.begin(), bots.end(), b)) ++hits;
    const auto benign_count =
        static_cast<std::int64_t>(hosts.size()) -
        static_cast<std::int64_t>(bots.size());
    metrics.bot_detect_rate_pct =
        bots.empty() ? 0.0
                     : 100.0 * static_cast<double>(hits) /
                           static_cast<double>(bots.size());
    metrics.false_positive_pct =
        benign_count == 0
            ? 0.0
            : 100.0 *
                  static_cast<double>(
                      static_cast<std::int64_t>(v.deduced_bots.size()) - hits) /
                  static_cast<double>(benign_count);
    metrics.target_detected =
        v.deduced_target.size() == 1 && v.deduced_target[0] == topo.target();
  }
  return result;
}

inline RunMetrics run_scenario(const ScenarioConfig& cfg,
                               const RunInputs& inputs = {}) {
  return run_scenario_detailed(cfg, inputs).metrics;
}

struct MetricStat {
  double mean = 0.0;
  double stddev = 0.0;
  double ci95_half_width = 0.0;
};

inline MetricStat summarize(const std::vector<double>& xs) {
  MetricStat s;
  if (xs.empty()) return s;
  for (double x : xs) s.mean += x;
  s.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double acc = 0.0;
    for (double x : xs) acc += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(acc / static_cast<double>(xs.size() - 1));
    s.ci95_half_width =
        1.96 * s.stddev / std::sqrt(static_cast<double>(xs.size()));
  }
  return s;
}

struct BatchReport {
  std::vector<std::uint64_t> seeds;
  std::vector<RunMetrics> runs;
  MetricStat link_util, timesteps, mods_per_node, bot_detect, false_pos;
  double target_detected_fraction = 0.0;
  double conclusive_fraction = 0.0;
};

/// Repeated runs over consecutive seeds; normal-approximation confidence
/// intervals at 95%.
inline BatchReport run_batch(const ScenarioConfig& cfg, int repetitions,
                             std::uint64_t seed_base,
                             const RunInputs& inputs = {}) {
  if (repetitions < 1) throw ConfigError("repetitions must be >= 1");
  BatchReport report;
  std::vector<double> util, steps, mods, detect, fps;
  for (int i = 0; i < repetitions; ++i) {
    ScenarioConfig c = cfg;
    c.seed = seed_base + static_cast<std::uint64_t>(i);
    const auto m = run_scenario(c, inputs);
    report.seeds.push_back(c.seed);
    report.runs.push_back(m);
    util.push_back(m.mean_link_utilization_pct);
    steps.push_back(static_cast<double>(m.timesteps_to_conclusive));
    mods.push_back(m.modifications_per_node);
    detect.push_back(m.bot_detect_rate_pct);
    fps.push_back(m.false_positive_pct);
    if (m.target_detected) report.target_detected_fraction += 1.0;
    if (m.conclusive) report.conclusive_fraction += 1.0;
  }
  report.link_util = summarize(util);
  report.timesteps = summarize(steps);
  report.mods_per_node = summarize(mods);
  report.bot_detect = summarize(detect);
  report.false_pos = summarize(fps);
  report.target_detected_fraction /= static_cast<double>(repetitions);
  report.conclusive_fraction /= static_cast<double>(repetitions);
  return report;
}

}  // namespace lfsim
