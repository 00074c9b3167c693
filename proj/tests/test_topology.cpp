#include <catch2/catch_amalgamated.hpp>

#include "lfsim/topology.hpp"

#include "support.hpp"

using namespace lfsim;

namespace {

const char* kTwoNodeGraphml = R"(<?xml version="1.0" encoding="utf-8"?>
<graphml xmlns="http://graphml.graphdrawing.org/xmlns">
  <key attr.name="Latitude" attr.type="double" for="node" id="d0"/>
  <key attr.name="Longitude" attr.type="double" for="node" id="d1"/>
  <key attr.name="label" attr.type="string" for="node" id="d2"/>
  <graph edgedefault="undirected">
    <node id="0"><data key="d0">52.0</data><data key="d1">13.0</data><data key="d2">North</data></node>
    <node id="1"><data key="d0">48.0</data><data key="d1">11.0</data><data key="d2">South</data></node>
    <edge source="0" target="1"/>
  </graph>
</graphml>
)";

std::string zoo_style(int copies) {
  std::string nodes, edges;
  for (int i = 0; i < 4; ++i) {
    nodes += "<node id=\"" + std::to_string(i) + "\"><data key=\"d0\">" +
             std::to_string(50 - i) + "</data><data key=\"d1\">8.0</data></node>\n";
  }
  for (int c = 0; c < copies; ++c)
    for (int i = 0; i + 1 < 4; ++i)
      edges += "<edge source=\"" + std::to_string(i) + "\" target=\"" +
               std::to_string(i + 1) + "\"/>\n";
  return "<graphml><key attr.name=\"Latitude\" attr.type=\"double\" "
         "for=\"node\" id=\"d0\"/><key attr.name=\"Longitude\" "
         "attr.type=\"double\" for=\"node\" id=\"d1\"/>"
         "<graph edgedefault=\"undirected\">" +
         nodes + edges + "</graph></graphml>";
}

}  // namespace

TEST_CASE("two-node GraphML loads into two directed links", "[topology]") {
  Topology t = load_graphml(kTwoNodeGraphml);
  REQUIRE(t.node_count() == 2);
  REQUIRE(t.link_count() == 2);
  CHECK(t.link(0).capacity_bps == 1e9);
  CHECK(t.link(1).capacity_bps == 1e9);
  CHECK(t.node(t.gateways().front()).label == "North");
  CHECK(t.node(t.target()).label == "South");
}

TEST_CASE("default capacity applies to every link", "[topology]") {
  Topology t = load_graphml(zoo_style(1));
  for (const auto& l : t.links()) CHECK(l.capacity_bps == 1e9);

  GraphmlOptions opts;
  opts.capacity_default_bps = 5e8;
  Topology t2 = load_graphml(zoo_style(1), opts);
  for (const auto& l : t2.links()) CHECK(l.capacity_bps == 5e8);
}

TEST_CASE("missing latitude is a validation error naming the node",
          "[topology]") {
  const char* broken = R"(<graphml>
    <key attr.name="Latitude" attr.type="double" for="node" id="d0"/>
    <key attr.name="Longitude" attr.type="double" for="node" id="d1"/>
    <graph edgedefault="undirected">
      <node id="okay"><data key="d0">50</data><data key="d1">8</data></node>
      <node id="broken"><data key="d1">8</data></node>
      <edge source="okay" target="broken"/>
    </graph></graphml>)";
  REQUIRE_THROWS_WITH(load_graphml(broken),
                      Catch::Matchers::ContainsSubstring("broken"));
}

TEST_CASE("malformed XML is a parse error", "[topology]") {
  REQUIRE_THROWS_AS(load_graphml("<graphml><graph>"), ParseError);
}

TEST_CASE("disconnected graph is rejected", "[topology]") {
  const char* split = R"(<graphml>
    <key attr.name="Latitude" attr.type="double" for="node" id="d0"/>
    <key attr.name="Longitude" attr.type="double" for="node" id="d1"/>
    <graph edgedefault="undirected">
      <node id="a"><data key="d0">50</data><data key="d1">8</data></node>
      <node id="b"><data key="d0">40</data><data key="d1">8</data></node>
      <node id="c"><data key="d0">30</data><data key="d1">8</data></node>
      <node id="d"><data key="d0">20</data><data key="d1">8</data></node>
      <edge source="a" target="b"/>
      <edge source="c" target="d"/>
    </graph></graphml>)";
  REQUIRE_THROWS_AS(load_graphml(split), ValidationError);
}

TEST_CASE("loading the same bytes twice is deterministic", "[topology]") {
  const std::string bytes = zoo_style(1);
  Topology a = load_graphml(bytes);
  Topology b = load_graphml(bytes);
  REQUIRE(a.node_count() == b.node_count());
  REQUIRE(a.link_count() == b.link_count());
  for (int i = 0; i < a.link_count(); ++i) {
    CHECK(a.link(i).source == b.link(i).source);
    CHECK(a.link(i).destination == b.link(i).destination);
  }
  CHECK(a.gateways() == b.gateways());
  CHECK(a.target() == b.target());
}

TEST_CASE("directed link count is twice the undirected edge count",
          "[topology]") {
  Topology t = load_graphml(zoo_style(1));
  CHECK(t.link_count() == 2 * 3);
}

TEST_CASE("parallel edges stay distinct links", "[topology]") {
  Topology t = load_graphml(zoo_style(2));
  CHECK(t.link_count() == 2 * 6);
}

TEST_CASE("endpoint selection follows the latitude rule", "[topology]") {
  Topology t = TopologyBuilder()
                   .node("mid", 40, 0)
                   .node("north", 60, 0)
                   .node("south", 20, 0)
                   .edge("north", "mid", 1e9)
                   .edge("mid", "south", 1e9)
                   .gateway("north")
                   .target("south")
                   .build();
  auto [gw, tgt] = select_endpoints(t);
  CHECK(t.node(gw).name == "north");
  CHECK(t.node(tgt).name == "south");
}

TEST_CASE("latitude ties break toward the smaller node id", "[topology]") {
  Topology t = TopologyBuilder()
                   .node("bb", 60, 0)
                   .node("aa", 60, 1)
                   .node("zz", 20, 0)
                   .edge("aa", "bb", 1e9)
                   .edge("bb", "zz", 1e9)
                   .gateway("aa")
                   .target("zz")
                   .build();
  auto [gw, tgt] = select_endpoints(t);
  CHECK(t.node(gw).name == "aa");
  CHECK(t.node(tgt).name == "zz");
}

TEST_CASE("endpoint selection needs at least two distinct latitudes",
          "[topology]") {
  std::vector<NodeRecord> single(1);
  single[0].id = 0;
  single[0].name = "only";
  REQUIRE_THROWS_AS(select_endpoints_by_latitude(single), ValidationError);

  std::vector<NodeRecord> flat(2);
  flat[0] = {0, "a", 10.0, 0.0, ""};
  flat[1] = {1, "b", 10.0, 0.0, ""};
  REQUIRE_THROWS_AS(select_endpoints_by_latitude(flat), ValidationError);
}

TEST_CASE("neighbors_out lists ascending link ids", "[topology]") {
  Topology hub = TopologyBuilder()
                     .node("h", 50, 0)
                     .node("a", 45, 0)
                     .node("b", 44, 0)
                     .node("c", 43, 0)
                     .edge("h", "a", 1e9)
                     .edge("h", "b", 1e9)
                     .edge("h", "c", 1e9)
                     .gateway("h")
                     .target("a")
                     .build();
  auto out = neighbors_out(hub, hub.node_by_name("h"));
  REQUIRE(out.size() == 3);
  CHECK(std::is_sorted(out.begin(), out.end()));
}

TEST_CASE("a pure sink has no out-links", "[topology]") {
  Topology t = TopologyBuilder()
                   .node("g", 50, 0)
                   .node("leaf", 40, 0)
                   .directed_link("g", "leaf", 1e9)
                   .directed_link("leaf", "g", 1e9)
                   .node("sink", 30, 0)
                   .directed_link("g", "sink", 1e9)
                   .gateway("g")
                   .target("leaf")
                   .build();
  CHECK(neighbors_out(t, t.node_by_name("sink")).empty());
}

TEST_CASE("neighbors_out rejects unknown nodes", "[topology]") {
  Topology t = test::chain4();
  REQUIRE_THROWS_AS(neighbors_out(t, 99), ValidationError);
}

TEST_CASE("target must not be a gateway", "[topology]") {
  REQUIRE_THROWS_AS(TopologyBuilder()
                        .node("g", 50, 0)
                        .node("a", 40, 0)
                        .edge("g", "a", 1e9)
                        .gateway("g")
                        .target("g")
                        .build(),
                    ValidationError);
}

TEST_CASE("per-edge capacity attribute overrides the default", "[topology]") {
  const char* with_cap = R"(<graphml>
    <key attr.name="Latitude" attr.type="double" for="node" id="d0"/>
    <key attr.name="Longitude" attr.type="double" for="node" id="d1"/>
    <key attr.name="capacity" attr.type="double" for="edge" id="d9"/>
    <graph edgedefault="undirected">
      <node id="a"><data key="d0">50</data><data key="d1">8</data></node>
      <node id="b"><data key="d0">40</data><data key="d1">8</data></node>
      <node id="c"><data key="d0">30</data><data key="d1">8</data></node>
      <edge source="a" target="b"><data key="d9">350000000</data></edge>
      <edge source="b" target="c"/>
    </graph></graphml>)";
  Topology t = load_graphml(with_cap);
  int thin = 0, fat = 0;
  for (const auto& l : t.links()) {
    if (l.capacity_bps == 3.5e8) ++thin;
    if (l.capacity_bps == 1e9) ++fat;
  }
  CHECK(thin == 2);
  CHECK(fat == 2);
}
