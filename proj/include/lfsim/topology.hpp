#pragma once

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "lfsim/core.hpp"

namespace lfsim {

struct NodeRecord {
  NodeId id = kNoNode;      // dense index; node order is lexicographic by name
  std::string name;         // external id from the input file
  double latitude = 0.0;
  double longitude = 0.0;
  std::string label;
};

struct LinkRecord {
  LinkId id = kNoLink;
  NodeId source = kNoNode;
  NodeId destination = kNoNode;
  double capacity_bps = 0.0;
};

/// Immutable directed network graph with gateway set and a designated
/// target node. Undirected input edges expand to two directed links that
/// share a capacity value but carry independent load.
class Topology {
 public:
  const std::vector<NodeRecord>& nodes() const { return nodes_; }
  const std::vector<LinkRecord>& links() const { return links_; }
  const std::vector<NodeId>& gateways() const { return gateways_; }
  NodeId target() const { return target_; }

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int link_count() const { return static_cast<int>(links_.size()); }

  const NodeRecord& node(NodeId n) const {
    check_node(n);
    return nodes_[static_cast<std::size_t>(n)];
  }
  const LinkRecord& link(LinkId l) const {
    if (l < 0 || l >= link_count())
      throw ValidationError("unknown link id " + std::to_string(l));
    return links_[static_cast<std::size_t>(l)];
  }

  bool is_gateway(NodeId n) const {
    return std::find(gateways_.begin(), gateways_.end(), n) != gateways_.end();
  }

  /// Out-links of n, ascending by link id.
  std::span<const LinkId> out_links(NodeId n) const {
    check_node(n);
    return out_[static_cast<std::size_t>(n)];
  }

  std::optional<NodeId> find_node(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
  }

  NodeId node_by_name(const std::string& name) const {
    auto n = find_node(name);
    if (!n) throw ValidationError("unknown node name '" + name + "'");
    return *n;
  }

  /// Candidate host destinations: every non-gateway node, ascending id.
  const std::vector<NodeId>& non_gateway_nodes() const { return non_gateways_; }

  /// Copy with different endpoints; revalidates.
  Topology with_endpoints(std::vector<std::string> gateway_names,
                          const std::string& target_name) const {
    Topology t(*this);
    t.gateways_.clear();
    for (const auto& g : gateway_names) t.gateways_.push_back(node_by_name(g));
    std::sort(t.gateways_.begin(), t.gateways_.end());
    t.gateways_.erase(std::unique(t.gateways_.begin(), t.gateways_.end()),
                      t.gateways_.end());
    t.target_ = node_by_name(target_name);
    t.rebuild_indexes();
    t.validate();
    return t;
  }

  friend class TopologyBuilder;

 private:
  void check_node(NodeId n) const {
    if (n < 0 || n >= node_count())
      throw ValidationError("unknown node id " + std::to_string(n));
  }

  void rebuild_indexes() {
    out_.assign(nodes_.size(), {});
    for (const auto& l : links_)
      out_[static_cast<std::size_t>(l.source)].push_back(l.id);
    for (auto& v : out_) std::sort(v.begin(), v.end());
    non_gateways_.clear();
    for (const auto& n : nodes_)
      if (!is_gateway(n.id)) non_gateways_.push_back(n.id);
  }

  void validate() const {
    if (nodes_.size() < 2) throw ValidationError("topology needs at least 2 nodes");
    for (const auto& n : nodes_) {
      if (n.latitude < -90.0 || n.latitude > 90.0)
        throw ValidationError("node '" + n.name + "' latitude out of range");
      if (n.longitude < -180.0 || n.longitude > 180.0)
        throw ValidationError("node '" + n.name + "' longitude out of range");
    }
    for (const auto& l : links_) {
      if (l.source == l.destination)
        throw ValidationError("self-loop link " + std::to_string(l.id));
      if (l.capacity_bps <= 0.0)
        throw ValidationError("link " + std::to_string(l.id) +
                              " has non-positive capacity");
    }
    if (gateways_.empty()) throw ValidationError("no gateway configured");
    if (target_ == kNoNode) throw ValidationError("no target configured");
    if (is_gateway(target_))
      throw ValidationError("target '" + node(target_).name +
                            "' must not be a gateway");

    // Connectivity, ignoring link direction.
    std::vector<char> seen(nodes_.size(), 0);
    std::vector<NodeId> stack{0};
    seen[0] = 1;
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      for (const auto& l : links_) {
        NodeId v = kNoNode;
        if (l.source == u) v = l.destination;
        else if (l.destination == u) v = l.source;
        else continue;
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = 1;
          stack.push_back(v);
        }
      }
    }
    for (const auto& n : nodes_)
      if (!seen[static_cast<std::size_t>(n.id)])
        throw ValidationError("graph is disconnected: node '" + n.name +
                              "' unreachable");

    // Every non-gateway node reachable from at least one gateway, following
    // link direction.
    std::vector<char> reach(nodes_.size(), 0);
    std::vector<NodeId> q;
    for (NodeId g : gateways_) {
      reach[static_cast<std::size_t>(g)] = 1;
      q.push_back(g);
    }
    while (!q.empty()) {
      const NodeId u = q.back();
      q.pop_back();
      for (LinkId lid : out_[static_cast<std::size_t>(u)]) {
        const NodeId v = links_[static_cast<std::size_t>(lid)].destination;
        if (!reach[static_cast<std::size_t>(v)]) {
          reach[static_cast<std::size_t>(v)] = 1;
          q.push_back(v);
        }
      }
    }
    for (const auto& n : nodes_)
      if (!reach[static_cast<std::size_t>(n.id)])
        throw ValidationError("node '" + n.name +
                              "' not reachable from any gateway");
  }

  std::vector<NodeRecord> nodes_;
  std::vector<LinkRecord> links_;
  std::vector<NodeId> gateways_;
  NodeId target_ = kNoNode;
  std::vector<std::vector<LinkId>> out_;
  std::vector<NodeId> non_gateways_;
  std::map<std::string, NodeId> by_name_;
};

/// Programmatic construction; used by tests and by the GraphML loader.
class TopologyBuilder {
 public:
  TopologyBuilder& node(std::string name, double lat, double lon,
                        std::string label = "") {
    if (label.empty()) label = name;
    pending_nodes_.push_back({std::move(name), lat, lon, std::move(label)});
    return *this;
  }

  /// Undirected edge: expands to two directed links with the same capacity.
  TopologyBuilder& edge(const std::string& a, const std::string& b,
                        double capacity_bps) {
    pending_edges_.push_back({a, b, capacity_bps, /*directed=*/false});
    return *this;
  }

  /// One-way link; for tests that need asymmetric adjacency.
  TopologyBuilder& directed_link(const std::string& a, const std::string& b,
                                 double capacity_bps) {
    pending_edges_.push_back({a, b, capacity_bps, /*directed=*/true});
    return *this;
  }

  TopologyBuilder& gateway(const std::string& name) {
    gateway_names_.push_back(name);
    return *this;
  }

  TopologyBuilder& target(const std::string& name) {
    target_name_ = name;
    return *this;
  }

  Topology build() const {
    Topology t;
    std::vector<PendingNode> sorted = pending_nodes_;
    std::sort(sorted.begin(), sorted.end(),
              [](const PendingNode& a, const PendingNode& b) {
                return a.name < b.name;
              });
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
      if (sorted[i].name == sorted[i + 1].name)
        throw ValidationError("duplicate node id '" + sorted[i].name + "'");
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      NodeRecord rec;
      rec.id = static_cast<NodeId>(i);
      rec.name = sorted[i].name;
      rec.latitude = sorted[i].lat;
      rec.longitude = sorted[i].lon;
      rec.label = sorted[i].label;
      t.by_name_[rec.name] = rec.id;
      t.nodes_.push_back(std::move(rec));
    }
    auto resolve = [&t](const std::string& name) {
      auto it = t.by_name_.find(name);
      if (it == t.by_name_.end())
        throw ValidationError("edge endpoint '" + name + "' is not a node");
      return it->second;
    };
    for (const auto& e : pending_edges_) {
      const NodeId a = resolve(e.a);
      const NodeId b = resolve(e.b);
      LinkRecord fwd{static_cast<LinkId>(t.links_.size()), a, b, e.capacity};
      t.links_.push_back(fwd);
      if (!e.directed) {
        LinkRecord rev{static_cast<LinkId>(t.links_.size()), b, a, e.capacity};
        t.links_.push_back(rev);
      }
    }
    for (const auto& g : gateway_names_) t.gateways_.push_back(resolve(g));
    std::sort(t.gateways_.begin(), t.gateways_.end());
    t.gateways_.erase(std::unique(t.gateways_.begin(), t.gateways_.end()),
                      t.gateways_.end());
    if (!target_name_.empty()) t.target_ = resolve(target_name_);
    t.rebuild_indexes();
    t.validate();
    return t;
  }

 private:
  struct PendingNode {
    std::string name;
    double lat, lon;
    std::string label;
  };
  struct PendingEdge {
    std::string a, b;
    double capacity;
    bool directed;
  };
  std::vector<PendingNode> pending_nodes_;
  std::vector<PendingEdge> pending_edges_;
  std::vector<std::string> gateway_names_;
  std::string target_name_;
};

/// Northernmost node becomes the gateway, southernmost the target.
/// Latitude ties are broken by lexicographically smallest node name.
inline std::pair<NodeId, NodeId> select_endpoints_by_latitude(
    const std::vector<NodeRecord>& nodes) {
  if (nodes.size() < 2)
    throw ValidationError("endpoint selection needs at least 2 nodes");
  NodeId hi = nodes.front().id, lo = nodes.front().id;
  for (const auto& n : nodes) {
    const auto& cur_hi = nodes[static_cast<std::size_t>(hi)];
    const auto& cur_lo = nodes[static_cast<std::size_t>(lo)];
    if (n.latitude > cur_hi.latitude ||
        (n.latitude == cur_hi.latitude && n.name < cur_hi.name))
      hi = n.id;
    if (n.latitude < cur_lo.latitude ||
        (n.latitude == cur_lo.latitude && n.name < cur_lo.name))
      lo = n.id;
  }
  if (nodes[static_cast<std::size_t>(hi)].latitude ==
      nodes[static_cast<std::size_t>(lo)].latitude)
    throw ValidationError(
        "all node latitudes equal; configure gateway and target explicitly");
  return {hi, lo};
}

inline std::pair<NodeId, NodeId> select_endpoints(const Topology& topo) {
  return select_endpoints_by_latitude(topo.nodes());
}

/// Out-links of n, ascending by link id.
inline std::vector<LinkId> neighbors_out(const Topology& topo, NodeId n) {
  auto span = topo.out_links(n);
  return {span.begin(), span.end()};
}

namespace detail {

inline std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct GraphmlKey {
  std::string domain;  // "node" or "edge"
  std::string attr_name;
};

}  // namespace detail

struct GraphmlOptions {
  double capacity_default_bps = 1e9;
  std::vector<std::string> gateway_override;  // node names; empty = by latitude
  std::string target_override;
};

/// Parses a GraphML byte stream in the TopologyZoo schema: node keys named
/// Latitude/Longitude (and optionally label), undirected edges, optional
/// per-edge "capacity" attribute in bits/s. Every edge becomes two directed
/// links. Endpoints default to the latitude rule.
inline Topology load_graphml(const std::string& bytes,
                             const GraphmlOptions& opts = {}) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(bytes);
  try {
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ParseError(std::string("malformed GraphML: ") + e.what());
  }

  auto graphml = tree.get_child_optional("graphml");
  if (!graphml) throw ParseError("malformed GraphML: missing <graphml> root");

  std::map<std::string, detail::GraphmlKey> keys;
  for (const auto& [tag, child] : *graphml) {
    if (tag != "key") continue;
    std::string id;
    detail::GraphmlKey k;
    if (auto attrs = child.get_child_optional("<xmlattr>")) {
      // "attr.name" contains a literal dot, so walk the attributes directly.
      for (const auto& [aname, aval] : *attrs) {
        if (aname == "id") id = aval.get_value<std::string>();
        else if (aname == "for") k.domain = aval.get_value<std::string>();
        else if (aname == "attr.name")
          k.attr_name = detail::lower(aval.get_value<std::string>());
      }
    }
    if (!id.empty()) keys[id] = k;
  }

  auto graph = graphml->get_child_optional("graph");
  if (!graph) throw ParseError("malformed GraphML: missing <graph>");

  TopologyBuilder builder;
  struct RawEdge {
    std::string a, b;
    double capacity;
  };
  std::vector<RawEdge> edges;

  for (const auto& [tag, child] : *graph) {
    if (tag == "node") {
      const auto id = child.get<std::string>("<xmlattr>.id", "");
      if (id.empty()) throw ParseError("node without id attribute");
      std::optional<double> lat, lon;
      std::string label;
      for (const auto& [dtag, data] : child) {
        if (dtag != "data") continue;
        const auto key = data.get<std::string>("<xmlattr>.key", "");
        auto it = keys.find(key);
        if (it == keys.end()) continue;
        const auto& attr = it->second.attr_name;
        if (attr == "latitude") lat = data.get_value<double>();
        else if (attr == "longitude") lon = data.get_value<double>();
        else if (attr == "label") label = data.get_value<std::string>();
      }
      if (!lat) throw ValidationError("node '" + id + "' is missing latitude");
      if (!lon) throw ValidationError("node '" + id + "' is missing longitude");
      builder.node(id, *lat, *lon, label);
    } else if (tag == "edge") {
      RawEdge e;
      e.a = child.get<std::string>("<xmlattr>.source", "");
      e.b = child.get<std::string>("<xmlattr>.target", "");
      if (e.a.empty() || e.b.empty())
        throw ParseError("edge without source/target");
      e.capacity = opts.capacity_default_bps;
      for (const auto& [dtag, data] : child) {
        if (dtag != "data") continue;
        const auto key = data.get<std::string>("<xmlattr>.key", "");
        auto it = keys.find(key);
        if (it != keys.end() && it->second.attr_name == "capacity")
          e.capacity = data.get_value<double>();
      }
      edges.push_back(std::move(e));
    }
  }

  for (const auto& e : edges) builder.edge(e.a, e.b, e.capacity);

  // Endpoint defaults come from the latitude rule; overrides win per side.
  std::string default_gateway, default_target;
  if (opts.gateway_override.empty() || opts.target_override.empty()) {
    struct Probe {
      std::string name;
      double lat;
    };
    std::vector<Probe> probes;
    for (const auto& [tag, child] : *graph) {
      if (tag != "node") continue;
      const auto id = child.get<std::string>("<xmlattr>.id", "");
      for (const auto& [dtag, data] : child) {
        if (dtag != "data") continue;
        const auto key = data.get<std::string>("<xmlattr>.key", "");
        auto it = keys.find(key);
        if (it != keys.end() && it->second.attr_name == "latitude") {
          probes.push_back({id, data.get_value<double>()});
          break;
        }
      }
    }
    std::sort(probes.begin(), probes.end(),
              [](const Probe& a, const Probe& b) { return a.name < b.name; });
    std::vector<NodeRecord> recs(probes.size());
    for (std::size_t i = 0; i < probes.size(); ++i) {
      recs[i].id = static_cast<NodeId>(i);
      recs[i].name = probes[i].name;
      recs[i].latitude = probes[i].lat;
    }
    auto [gw, tgt] = select_endpoints_by_latitude(recs);
    default_gateway = recs[static_cast<std::size_t>(gw)].name;
    default_target = recs[static_cast<std::size_t>(tgt)].name;
  }

  if (opts.gateway_override.empty()) {
    builder.gateway(default_gateway);
  } else {
    for (const auto& g : opts.gateway_override) builder.gateway(g);
  }
  builder.target(opts.target_override.empty() ? default_target
                                              : opts.target_override);
  return builder.build();
}

}  // namespace lfsim
