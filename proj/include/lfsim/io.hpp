#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lfsim/defense.hpp"
#include "lfsim/routing.hpp"
#include "lfsim/sim.hpp"
#include "lfsim/topology.hpp"

namespace lfsim {

inline constexpr const char* kRunCsvHeader =
    "scenario,te,seed,link_util_pct,timesteps,mods_per_node,bot_detect_pct,"
    "false_pos_pct,target_detected";

enum class ExportFormat { csv, json };

struct RunRow {
  std::string scenario;
  TeScheme te = TeScheme::gate;
  std::uint64_t seed = 0;
  RunMetrics metrics;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace detail

inline std::string run_row_csv(const RunRow& row) {
  const auto& m = row.metrics;
  std::ostringstream os;
  os << row.scenario << ',' << te_scheme_name(row.te) << ',' << row.seed << ','
     << detail::fmt(m.mean_link_utilization_pct) << ','
     << m.timesteps_to_conclusive << ','
     << detail::fmt(m.modifications_per_node) << ','
     << detail::fmt(m.bot_detect_rate_pct) << ','
     << detail::fmt(m.false_positive_pct) << ','
     << (m.target_detected ? "true" : "false");
  return os.str();
}

inline nlohmann::json run_row_json(const RunRow& row) {
  const auto& m = row.metrics;
  return nlohmann::json{
      {"scenario", row.scenario},
      {"te", te_scheme_name(row.te)},
      {"seed", row.seed},
      {"link_util_pct", m.mean_link_utilization_pct},
      {"timesteps", m.timesteps_to_conclusive},
      {"mods_per_node", m.modifications_per_node},
      {"bot_detect_pct", m.bot_detect_rate_pct},
      {"false_pos_pct", m.false_positive_pct},
      {"target_detected", m.target_detected},
  };
}

inline std::string export_rows_to_string(const std::vector<RunRow>& rows,
                                         ExportFormat format,
                                         const BatchReport* summary = nullptr) {
  if (format == ExportFormat::csv) {
    std::ostringstream os;
    os << kRunCsvHeader << '\n';
    for (const auto& r : rows) os << run_row_csv(r) << '\n';
    if (summary && !rows.empty()) {
      RunRow mean_row;
      mean_row.scenario = rows.front().scenario + ":summary";
      mean_row.te = rows.front().te;
      mean_row.seed = summary->seeds.empty() ? 0 : summary->seeds.front();
      mean_row.metrics.mean_link_utilization_pct = summary->link_util.mean;
      mean_row.metrics.timesteps_to_conclusive =
          static_cast<std::int64_t>(summary->timesteps.mean + 0.5);
      mean_row.metrics.modifications_per_node = summary->mods_per_node.mean;
      mean_row.metrics.bot_detect_rate_pct = summary->bot_detect.mean;
      mean_row.metrics.false_positive_pct = summary->false_pos.mean;
      mean_row.metrics.target_detected =
          summary->target_detected_fraction >= 0.5;
      os << run_row_csv(mean_row) << '\n';
    }
    return os.str();
  }
  nlohmann::json j;
  j["runs"] = nlohmann::json::array();
  for (const auto& r : rows) j["runs"].push_back(run_row_json(r));
  if (summary) {
    auto stat = [](const MetricStat& s) {
      return nlohmann::json{{"mean", s.mean},
                            {"stddev", s.stddev},
                            {"ci95_half_width", s.ci95_half_width}};
    };
    j["summary"] = nlohmann::json{
        {"link_util_pct", stat(summary->link_util)},
        {"timesteps", stat(summary->timesteps)},
        {"mods_per_node", stat(summary->mods_per_node)},
        {"bot_detect_pct", stat(summary->bot_detect)},
        {"false_pos_pct", stat(summary->false_pos)},
        {"target_detected_fraction", summary->target_detected_fraction},
        {"conclusive_fraction", summary->conclusive_fraction},
    };
  }
  return j.dump(2) + "\n";
}

/// Writes run rows (plus an optional batch summary) to `path`.
inline void export_runs(const std::vector<RunRow>& rows, const std::string& path,
                        ExportFormat format,
                        const BatchReport* summary = nullptr) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write to " + path);
  out << export_rows_to_string(rows, format, summary);
  if (!out) throw ConfigError("write failed for " + path);
}

inline void export_metrics(const RunMetrics& metrics,
                           const std::string& scenario, TeScheme te,
                           std::uint64_t seed, const std::string& path,
                           ExportFormat format) {
  export_runs({RunRow{scenario, te, seed, metrics}}, path, format);
}

/// Diagnostic dump: node name -> { destination name : next-hop link id }.
inline nlohmann::json routing_to_json(const Topology& topo,
                                      const RoutingInstance& r) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& n : topo.nodes()) {
    nlohmann::json table = nlohmann::json::object();
    for (const auto& m : topo.nodes()) {
      if (m.id == n.id) continue;
      const LinkId l = r.next_hop(n.id, m.id);
      if (l != kNoLink) table[m.name] = l;
    }
    j[n.name] = std::move(table);
  }
  return j;
}

inline nlohmann::json topology_to_json(const Topology& topo) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : topo.nodes())
    nodes.push_back({{"id", n.id},
                     {"name", n.name},
                     {"latitude", n.latitude},
                     {"longitude", n.longitude},
                     {"label", n.label}});
  nlohmann::json links = nlohmann::json::array();
  for (const auto& l : topo.links())
    links.push_back({{"id", l.id},
                     {"source", topo.node(l.source).name},
                     {"destination", topo.node(l.destination).name},
                     {"capacity_bps", l.capacity_bps}});
  nlohmann::json gws = nlohmann::json::array();
  for (NodeId g : topo.gateways()) gws.push_back(topo.node(g).name);
  return nlohmann::json{{"nodes", nodes},
                        {"links", links},
                        {"gateways", gws},
                        {"target", topo.node(topo.target()).name}};
}

inline nlohmann::json verdict_to_json(const Topology& topo, const Verdict& v) {
  nlohmann::json targets = nlohmann::json::array();
  for (NodeId n : v.deduced_target) targets.push_back(topo.node(n).name);
  return nlohmann::json{{"conclusive_at", v.conclusive_at},
                        {"deduced_target", targets},
                        {"deduced_bots", v.deduced_bots}};
}

}  // namespace lfsim
