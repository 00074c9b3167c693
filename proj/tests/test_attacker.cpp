#include <catch2/catch_amalgamated.hpp>

#include <numeric>

#include "lfsim/attacker.hpp"

#include "support.hpp"

using namespace lfsim;

namespace {

LinkLoadState zero_loads(const Topology& topo) {
  LinkLoadState s;
  s.load.assign(static_cast<std::size_t>(topo.link_count()), 0.0);
  s.prev_load = s.load;
  return s;
}

std::vector<double> host_rates(std::span<const Host> hosts) {
  std::vector<double> rates(hosts.size(), 0.0);
  for (const auto& h : hosts)
    rates[static_cast<std::size_t>(h.id)] = h.rate_bps;
  return rates;
}

}  // namespace

TEST_CASE("path discovery returns one path per reaching gateway",
          "[attacker]") {
  auto chain = test::chain4();
  auto r = test::uniform_routing(chain);
  auto paths = discover_paths(chain, r, chain.gateways(), chain.target());
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].hops() == 3);

  Topology two_gw = TopologyBuilder()
                        .node("g1", 60, 0)
                        .node("g2", 59, 5)
                        .node("mid", 40, 0)
                        .node("t", 20, 0)
                        .edge("g1", "mid", 1e9)
                        .edge("g2", "mid", 1e9)
                        .edge("mid", "t", 1e9)
                        .gateway("g1")
                        .gateway("g2")
                        .target("t")
                        .build();
  auto r2 = test::uniform_routing(two_gw);
  CHECK(discover_paths(two_gw, r2, two_gw.gateways(), two_gw.target()).size() ==
        2);
}

TEST_CASE("an unreachable target suspends the attack cycle", "[attacker]") {
  auto chain = test::chain4();
  RoutingInstance empty(chain.node_count());
  CHECK(discover_paths(chain, empty, chain.gateways(), chain.target()).empty());

  Rng rng(1);
  std::vector<Host> hosts{test::bot_host(0, chain.gateways().front(),
                                         chain.node_by_name("a"), 1e5)};
  auto st = make_attacker_state({0}, 2, 1.0);
  auto plan = build_plan(chain, empty, zero_loads(chain), st, chain.gateways(),
                         chain.target(), 0.9, hosts, rng);
  CHECK(plan.target_unreachable);
  CHECK(plan.floods.empty());
}

TEST_CASE("critical link is the loaded one among qualifying links",
          "[attacker]") {
  auto chain = test::chain4();
  auto r = test::uniform_routing(chain);
  const auto path =
      route_path(chain, r, chain.gateways().front(), chain.target());
  REQUIRE(path.hops() == 3);

  auto loads = zero_loads(chain);
  // Free bandwidth 0.5 / 0.3 / 0.8 Gbps along the path.
  loads.load[static_cast<std::size_t>(path.links[0])] = 0.5e9;
  loads.load[static_cast<std::size_t>(path.links[1])] = 0.7e9;
  loads.load[static_cast<std::size_t>(path.links[2])] = 0.2e9;

  // d_min = 1: even the deepest link (serving only the target) qualifies.
  auto l = select_critical_link(chain, r, loads, chain.gateways(), path, 1);
  REQUIRE(l.has_value());
  CHECK(*l == path.links[1]);
}

TEST_CASE("decoy floor shifts selection to the next qualifying link",
          "[attacker]") {
  auto chain = test::chain4();
  auto r = test::uniform_routing(chain);
  const auto path =
      route_path(chain, r, chain.gateways().front(), chain.target());
  auto loads = zero_loads(chain);
  // The deepest link has the least free bandwidth but serves only {c}.
  loads.load[static_cast<std::size_t>(path.links[2])] = 0.9e9;
  loads.load[static_cast<std::size_t>(path.links[1])] = 0.5e9;

  auto with_floor =
      select_critical_link(chain, r, loads, chain.gateways(), path, 2);
  REQUIRE(with_floor.has_value());
  CHECK(*with_floor == path.links[1]);

  auto without_floor =
      select_critical_link(chain, r, loads, chain.gateways(), path, 1);
  REQUIRE(without_floor.has_value());
  CHECK(*without_floor == path.links[2]);
}

TEST_CASE("no qualifying link yields no critical link", "[attacker]") {
  auto chain = test::chain4();
  auto r = test::uniform_routing(chain);
  const auto path =
      route_path(chain, r, chain.gateways().front(), chain.target());
  CHECK_FALSE(select_critical_link(chain, r, zero_loads(chain),
                                   chain.gateways(), path, 10)
                  .has_value());
}

TEST_CASE("nominal-rate scheduling picks the ceiling count by lowest "
          "participation",
          "[attacker]") {
  std::vector<Host> hosts;
  for (int i = 0; i < 5; ++i) hosts.push_back(test::bot_host(i, 0, 1, 1e5));
  const auto rates = host_rates(hosts);

  auto st = make_attacker_state({0, 1, 2, 3, 4}, 2, 1.0, /*per_bot=*/1e5);
  st.participation = {0, 0, 5, 0, 0};
  Rng rng(3);
  auto sched = schedule_bots(st, 3e5, rates, rng);
  REQUIRE(sched.sends.size() == 3);  // ceil(300k / 100k)
  CHECK_FALSE(sched.underpowered);
  for (const auto& [bot, rate] : sched.sends) {
    CHECK(bot != 2);  // the high-participation bot rests
    CHECK(rate == 1e5);
  }
  // Chosen bots gained a participation point.
  CHECK(st.participation_of(0) == 1);
  CHECK(st.participation_of(2) == 5);
}

TEST_CASE("counts (0,0,5) and demand for two bots picks the zero-count pair",
          "[attacker]") {
  std::vector<Host> hosts;
  for (int i = 0; i < 3; ++i) hosts.push_back(test::bot_host(i, 0, 1, 1e5));
  auto st = make_attacker_state({0, 1, 2}, 2, 1.0, 1e5);
  st.participation = {0, 0, 5};
  Rng rng(3);
  auto sched = schedule_bots(st, 2e5, host_rates(hosts), rng);
  REQUIRE(sched.sends.size() == 2);
  CHECK(sched.sends[0].first == 0);
  CHECK(sched.sends[1].first == 1);
}

TEST_CASE("full participation samples the whole botnet", "[attacker]") {
  auto st = make_attacker_state({3, 1, 4, 5, 9, 2, 6}, 2, 1.0);
  Rng rng(17);
  auto avail = sample_available_bots(st, rng);
  CHECK(avail.size() == st.botnet.size());
  CHECK(std::is_sorted(avail.begin(), avail.end()));
}

TEST_CASE("partial participation samples the ceiling share", "[attacker]") {
  std::vector<HostId> bots(10);
  std::iota(bots.begin(), bots.end(), 0);
  auto st = make_attacker_state(bots, 2, 0.45);
  Rng rng(17);
  CHECK(sample_available_bots(st, rng).size() == 5);  // ceil(4.5)
}

TEST_CASE("spread scheduling uses every available bot proportionally",
          "[attacker]") {
  std::vector<Host> hosts;
  hosts.push_back(test::bot_host(0, 0, 1, 4e4));
  hosts.push_back(test::bot_host(1, 0, 1, 8e4));
  hosts.push_back(test::bot_host(2, 0, 1, 8e4));
  auto st = make_attacker_state({0, 1, 2}, 2, 1.0, /*per_bot=*/0.0);
  Rng rng(5);
  auto sched = schedule_bots(st, 1e5, host_rates(hosts), rng);
  REQUIRE(sched.sends.size() == 3);
  double total = 0.0;
  for (const auto& [bot, rate] : sched.sends) {
    total += rate;
    CHECK(rate <= hosts[static_cast<std::size_t>(bot)].rate_bps);
  }
  CHECK(total == Catch::Approx(1e5));
}

TEST_CASE("insufficient bots are flagged under-powered", "[attacker]") {
  std::vector<Host> hosts;
  for (int i = 0; i < 2; ++i) hosts.push_back(test::bot_host(i, 0, 1, 1e5));
  auto st = make_attacker_state({0, 1}, 2, 1.0, 1e5);
  Rng rng(5);
  auto sched = schedule_bots(st, 1e6, host_rates(hosts), rng);
  CHECK(sched.underpowered);
  CHECK(sched.sends.size() == 2);  // everything available was returned
}

TEST_CASE("a plan never aims a bot at the target", "[attacker]") {
  Rng rng(7);
  auto topo = test::random_topology(rng, 9, 6);
  auto r = test::uniform_routing(topo);
  std::vector<Host> hosts;
  std::vector<HostId> bots;
  for (int i = 0; i < 30; ++i) {
    auto h = test::bot_host(i, topo.gateways().front(),
                            topo.non_gateway_nodes().front(), 1e5);
    hosts.push_back(h);
    bots.push_back(i);
  }
  auto st = make_attacker_state(bots, 2, 1.0);
  auto plan = build_plan(topo, r, zero_loads(topo), st, topo.gateways(),
                         topo.target(), 0.9, hosts, rng);
  for (const auto& flood : plan.floods) {
    auto dst = dst_of_link(topo, r, topo.gateways(), flood.critical_link);
    for (const auto& [bot, decoy, rate] : flood.assignments) {
      CHECK(decoy != topo.target());
      CHECK(std::find(dst.begin(), dst.end(), decoy) != dst.end());
      CHECK(rate > 0.0);
    }
  }
}

TEST_CASE("applying a plan floods the chosen links", "[attacker]") {
  auto chain = test::chain4();
  auto r = test::uniform_routing(chain);
  const NodeId g = chain.gateways().front();
  std::vector<Host> hosts;
  std::vector<HostId> bots;
  for (int i = 0; i < 40; ++i) {
    hosts.push_back(test::bot_host(i, g, chain.node_by_name("a"), 5e7));
    bots.push_back(i);
  }
  // Benign background below the threshold.
  hosts.push_back(test::benign_host(40, g, chain.node_by_name("b"), 4e8));

  auto bl = benign_loads(chain, r, hosts);
  LinkLoadState baseline{bl, bl};
  auto st = make_attacker_state(bots, 2, 1.0);
  Rng rng(11);
  auto plan = build_plan(chain, r, baseline, st, chain.gateways(),
                         chain.target(), 0.9, hosts, rng);
  REQUIRE_FALSE(plan.floods.empty());
  REQUIRE_FALSE(plan.floods[0].underpowered);
  apply_plan(hosts, plan);
  auto after = route_demands(chain, r, hosts);
  for (const auto& flood : plan.floods) {
    const auto& link = chain.link(flood.critical_link);
    CHECK(after.load[static_cast<std::size_t>(flood.critical_link)] >
          0.9 * link.capacity_bps);
  }
}

TEST_CASE("a link already past the threshold needs no bots", "[attacker]") {
  auto chain = test::chain4();
  auto r = test::uniform_routing(chain);
  const NodeId g = chain.gateways().front();
  std::vector<Host> hosts{test::bot_host(0, g, chain.node_by_name("a"), 1e5)};

  auto loads = zero_loads(chain);
  const auto path = route_path(chain, r, g, chain.target());
  for (LinkId l : path.links) loads.load[static_cast<std::size_t>(l)] = 0.95e9;

  auto st = make_attacker_state({0}, 1, 1.0);
  Rng rng(2);
  auto plan = build_plan(chain, r, loads, st, chain.gateways(), chain.target(),
                         0.9, hosts, rng);
  REQUIRE(plan.floods.size() == 1);
  CHECK(plan.floods[0].required_bps == 0.0);
  CHECK(plan.floods[0].assignments.empty());
}

TEST_CASE("a link whose only served node is the target is skipped",
          "[attacker]") {
  Topology t = TopologyBuilder()
                   .node("g", 50, 0)
                   .node("t", 40, 0)
                   .edge("g", "t", 1e9)
                   .gateway("g")
                   .target("t")
                   .build();
  auto r = test::uniform_routing(t);
  std::vector<Host> hosts{test::bot_host(0, t.gateways().front(),
                                         t.node_by_name("t"), 1e5)};
  auto st = make_attacker_state({0}, 1, 1.0);
  Rng rng(2);
  auto plan = build_plan(t, r, zero_loads(t), st, t.gateways(), t.target(),
                         0.9, hosts, rng);
  CHECK(plan.floods.empty());
  CHECK(plan.decoy_starved_links == 1);
}

TEST_CASE("re-planning forces a fresh decoy when the link offers one",
          "[attacker]") {
  // Three decoys and the target behind a shared trunk.
  Topology t = TopologyBuilder()
                   .node("g", 50, 0)
                   .node("hub", 45, 0)
                   .node("d1", 40, -1)
                   .node("d2", 40, 0)
                   .node("tgt", 35, 1)
                   .edge("g", "hub", 1e9)
                   .edge("hub", "d1", 1e9)
                   .edge("hub", "d2", 1e9)
                   .edge("hub", "tgt", 1e9)
                   .gateway("g")
                   .target("tgt")
                   .build();
  auto r = test::uniform_routing(t);
  std::vector<Host> hosts{test::bot_host(0, t.gateways().front(),
                                         t.node_by_name("d1"), 1e5)};
  hosts[0].active = true;
  hosts[0].attack_rate_bps = 1e5;
  auto st = make_attacker_state({0}, 2, 1.0);
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    Rng rng(seed);
    auto plan = build_plan(t, r, zero_loads(t), st, t.gateways(), t.target(),
                           0.9, hosts, rng);
    REQUIRE(plan.floods.size() == 1);
    REQUIRE_FALSE(plan.floods[0].assignments.empty());
    const auto& [bot, decoy, rate] = plan.floods[0].assignments[0];
    CHECK(decoy != t.node_by_name("d1"));  // never the previous decoy
    CHECK(decoy != t.target());
  }
}

TEST_CASE("participation stays balanced under full reuse", "[attacker]") {
  std::vector<Host> hosts;
  std::vector<HostId> bots;
  for (int i = 0; i < 10; ++i) {
    hosts.push_back(test::bot_host(i, 0, 1, 1e5));
    bots.push_back(i);
  }
  auto st = make_attacker_state(bots, 2, 1.0, 1e5);
  Rng rng(13);
  const auto rates = host_rates(hosts);
  for (int cycle = 0; cycle < 30; ++cycle) {
    auto sched = schedule_bots(st, 4e5, rates, rng);
    REQUIRE(sched.sends.size() == 4);
  }
  const auto [lo, hi] =
      std::minmax_element(st.participation.begin(), st.participation.end());
  CHECK(*hi - *lo <= 1);
}
