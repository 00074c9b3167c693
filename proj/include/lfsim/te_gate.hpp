#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "lfsim/core.hpp"
#include "lfsim/routing.hpp"
#include "lfsim/te.hpp"
#include "lfsim/traffic.hpp"

namespace lfsim {

struct GaConfig {
  int population = 50;
  int generations = 100;
  double mutation_rate = 0.05;
  int tournament_size = 4;
  int w_max = 20;
  double repeat_penalty = 1e6;

  void validate() const {
    if (population < 2) throw ConfigError("GA population must be >= 2");
    if (generations < 0) throw ConfigError("GA generations must be >= 0");
    if (mutation_rate < 0.0 || mutation_rate > 1.0)
      throw ConfigError("GA mutation rate must be in [0, 1]");
    if (tournament_size < 1) throw ConfigError("GA tournament size must be >= 1");
    if (w_max < 1) throw ConfigError("GA w_max must be >= 1");
  }
};

using WeightChromosome = std::vector<int>;

/// Deterministic shortest-path routing induced by an integer link-weight
/// vector; valid destination-based instances by construction.
inline RoutingInstance induce_routing(const Topology& topo,
                                      const WeightChromosome& weights) {
  std::vector<double> w(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i)
    w[i] = static_cast<double>(weights[i]);
  return shortest_path_tree(topo, w, topo.non_gateway_nodes(),
                            topo.gateways());
}

namespace detail {

inline double max_utilization(const Topology& topo,
                              std::span<const double> load) {
  double worst = 0.0;
  for (const auto& l : topo.links())
    worst = std::max(worst,
                     load[static_cast<std::size_t>(l.id)] / l.capacity_bps);
  return worst;
}

inline double gate_fitness_for_demands(
    const Topology& topo, const WeightChromosome& weights,
    const DemandMatrix& demands, std::span<const std::uint64_t> past_fps,
    double repeat_penalty) {
  RoutingInstance inst;
  try {
    inst = induce_routing(topo, weights);
  } catch (const RoutingError&) {
    return std::numeric_limits<double>::infinity();
  }
  std::vector<double> load;
  try {
    load = loads_for_demands(topo, inst, demands);
  } catch (const RoutingError&) {
    return std::numeric_limits<double>::infinity();
  }
  double fit = max_utilization(topo, load);
  const auto fp = inst.fingerprint();
  for (auto past : past_fps)
    if (past == fp) {
      fit += repeat_penalty;
      break;
    }
  return fit;
}

}  // namespace detail

/// Max link utilization under the chromosome's induced routing, plus the
/// repeat penalty when that instance was already deployed. Purely a function
/// of its arguments; no randomness.
inline double gate_fitness(const Topology& topo, const WeightChromosome& weights,
                           std::span<const Host> hosts,
                           std::span<const std::uint64_t> past_fps,
                           double repeat_penalty = 1e6) {
  const auto demands =
      detail::aggregate_demands(topo, hosts, /*include_bots=*/true);
  return detail::gate_fitness_for_demands(topo, weights, demands, past_fps,
                                          repeat_penalty);
}

/// Attack-unaware baseline: genetic search over link weights minimizing the
/// maximum link load utilization. The deployed weight vector always seeds
/// generation zero, so the search never loses the incumbent.
class GateEngine : public TrafficEngineer {
 public:
  GateEngine(GaConfig cfg, int link_count) : cfg_(cfg) {
    cfg_.validate();
    incumbent_.assign(static_cast<std::size_t>(link_count), 1);
  }

  const WeightChromosome& incumbent_weights() const { return incumbent_; }
  void set_incumbent_weights(WeightChromosome w) { incumbent_ = std::move(w); }

  /// (generation, best fitness) samples from the most recent step.
  const std::vector<std::pair<int, double>>& last_trace() const {
    return trace_;
  }

  TeResult step(const TeContext& ctx) override {
    if (!ctx.rng) throw ConfigError("GateEngine needs a random stream");
    Rng& rng = *ctx.rng;
    const auto& topo = ctx.topo;
    if (incumbent_.size() != static_cast<std::size_t>(topo.link_count()))
      throw ConfigError("GateEngine weight vector does not match topology");

    const auto demands =
        detail::aggregate_demands(topo, ctx.hosts, /*include_bots=*/true);
    std::map<WeightChromosome, double> memo;
    auto fitness_of = [&](const WeightChromosome& w) {
      auto it = memo.find(w);
      if (it != memo.end()) return it->second;
      const double f = detail::gate_fitness_for_demands(
          topo, w, demands, ctx.past_fingerprints, cfg_.repeat_penalty);
      memo.emplace(w, f);
      return f;
    };

    trace_.clear();
    std::vector<WeightChromosome> pop;
    pop.reserve(static_cast<std::size_t>(cfg_.population));
    pop.push_back(incumbent_);
    while (pop.size() < static_cast<std::size_t>(cfg_.population)) {
      WeightChromosome w(incumbent_.size());
      for (auto& gene : w)
        gene = 1 + static_cast<int>(rng.index(static_cast<std::size_t>(cfg_.w_max)));
      pop.push_back(std::move(w));
    }

    std::vector<double> fit(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) fit[i] = fitness_of(pop[i]);
    std::size_t best = 0;
    for (std::size_t i = 1; i < pop.size(); ++i)
      if (fit[i] < fit[best]) best = i;
    WeightChromosome best_w = pop[best];
    double best_f = fit[best];
    trace_.emplace_back(0, best_f);

    auto tournament = [&]() -> const WeightChromosome& {
      std::size_t winner = rng.index(pop.size());
      for (int i = 1; i < cfg_.tournament_size; ++i) {
        const std::size_t c = rng.index(pop.size());
        if (fit[c] < fit[winner]) winner = c;
      }
      return pop[winner];
    };

    for (int gen = 1; gen <= cfg_.generations; ++gen) {
      std::vector<WeightChromosome> next;
      next.reserve(pop.size());
      next.push_back(best_w);  // elitism
      while (next.size() < pop.size()) {
        const auto& a = tournament();
        const auto& b = tournament();
        WeightChromosome child(a.size());
        for (std::size_t i = 0; i < child.size(); ++i)
          child[i] = rng.chance(0.5) ? a[i] : b[i];
        for (auto& gene : child)
          if (rng.chance(cfg_.mutation_rate))
            gene = 1 + static_cast<int>(
                           rng.index(static_cast<std::size_t>(cfg_.w_max)));
        next.push_back(std::move(child));
      }
      pop = std::move(next);
      for (std::size_t i = 0; i < pop.size(); ++i) fit[i] = fitness_of(pop[i]);
      for (std::size_t i = 0; i < pop.size(); ++i)
        if (fit[i] < best_f) {
          best_f = fit[i];
          best_w = pop[i];
        }
      trace_.emplace_back(gen, best_f);
    }

    TeResult res;
    res.routing = induce_routing(topo, best_w);
    incumbent_ = best_w;
    if (!ctx.report.events.empty() &&
        !relieves_report(topo, res.routing, ctx.report, ctx.hosts,
                         ctx.flood_threshold)) {
      res.infeasible = true;
      res.note = "min-max search could not relieve all reported links";
    }
    return res;
  }

  std::string_view name() const override { return "gate"; }

 private:
  GaConfig cfg_;
  WeightChromosome incumbent_;
  std::vector<std::pair<int, double>> trace_;
};

}  // namespace lfsim
