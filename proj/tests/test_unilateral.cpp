#include "datamarket/unilateral.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace datamarket;
using testing_support::generated;

namespace {

std::uint64_t directed_index(const DirectedGraph& g)
{
    const auto pairs = oracle::ordered_pairs(static_cast<int>(g.n_agents()));
    std::uint64_t index = 0;
    for (std::size_t e = 0; e < pairs.size(); ++e)
        if (g.has_edge(pairs[e].first, pairs[e].second))
            index |= std::uint64_t{1} << e;
    return index;
}

} // namespace

TEST_SUITE("unilateral") {

TEST_CASE("best subset breaks ties toward the smallest indicator vector")
{
    const std::vector<AgentIndex> candidates{2, 0, 1};
    // Constant objective: the empty set wins.
    CHECK(best_subset(candidates, [](AgentSet) { return 1.0; }).chosen.empty());
    // Any set holding agent 0 or 1 scores 1: {1} is smallest (candidates[0]=2 absent, 0 absent).
    const auto pick = best_subset(candidates, [](AgentSet s) { return (s.contains(0) || s.contains(1)) ? 1.0 : 0.0; });
    CHECK(pick.chosen == AgentSet::singleton(1));
    CHECK(pick.value == 1.0);
}

TEST_CASE("demand at extreme prices")
{
    const Scenario s = generated(2, 4);
    CHECK(demand_set(s.profiles, s.preference, 1, PriceSchedule(4, 1e6)).empty());
    CHECK(demand_set(s.profiles, s.preference, 1, PriceSchedule(4, 0.0)) == AgentSet(0b1101));
}

TEST_CASE("demand is optimal against the oracle")
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Scenario s = generated(seed, 2 + seed % 3);
        const PriceSchedule prices = PriceSchedule::at_cost(s.profiles);
        for (AgentIndex b = 0; b < s.n_agents(); ++b) {
            const AgentSet d = demand_set(s.profiles, s.preference, b, prices);
            const double best = oracle::best_demand_value(
                s.profiles, static_cast<int>(b), [&](int i, int j) { return prices(i, j); });
            CHECK(demand_objective(s.profiles, s.preference, b, d, prices) == doctest::Approx(best).epsilon(1e-12));
        }
    }
}

TEST_CASE("competitive allocation reaches the brute-force welfare")
{
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Scenario s = generated(seed, 2 + seed % 3);
        const CompetitiveOutcome out = competitive_allocation(s.profiles, s.preference);
        const auto best = oracle::directed_optimum(s.profiles);
        CHECK(std::abs(out.welfare - best.value) <= 1e-9);
        CHECK(directed_index(out.allocation.graph) == best.graph);

        // Market clears: supply sets mirror the demand sets.
        for (AgentIndex i = 0; i < s.n_agents(); ++i) {
            CHECK(out.allocation.graph.incoming(i) == out.allocation.demand[i]);
            CHECK(out.allocation.graph.outgoing(i) == out.allocation.supply[i]);
        }
        const double net = std::accumulate(out.allocation.transfers.begin(), out.allocation.transfers.end(), 0.0);
        CHECK(std::abs(net) <= 1e-12);
    }
}

TEST_CASE("sellers are indifferent to supplying at cost")
{
    const Scenario s = generated(8, 4);
    const CompetitiveOutcome out = competitive_allocation(s.profiles, s.preference);
    for (auto [from, to] : out.allocation.graph.edges()) {
        DirectedGraph without = out.allocation.graph;
        without.remove_edge(from, to);
        const double before = net_utility(s.profiles, s.preference, out.allocation.graph, out.prices, from);
        const double after = net_utility(s.profiles, s.preference, without, out.prices, from);
        CHECK(std::abs(before - after) <= 1e-12);
    }
}

TEST_CASE("decomposed and brute welfare maximization agree")
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const Scenario s = generated(seed, 2 + seed % 3);
        const auto dec = welfare_max_directed(s.profiles, s.preference, WelfareMode::decomposed);
        const auto ser = welfare_max_directed(s.profiles, s.preference, WelfareMode::brute, Execution::serial);
        const auto par = welfare_max_directed(s.profiles, s.preference, WelfareMode::brute, Execution::parallel);
        CHECK(std::abs(dec.value - ser.value) <= 1e-9);
        CHECK(ser.graph == par.graph);
        CHECK(ser.value == par.value);
        CHECK(dec.graph == ser.graph);
    }
}

TEST_CASE("excluded objectives match the oracle")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Scenario s = generated(seed, 3);
        for (AgentIndex i = 0; i < 3; ++i)
            for (bool isolate : {false, true}) {
                DirectedObjective obj{1.0, i, isolate};
                const auto dec = maximize_decomposed(s.profiles, s.preference, obj);
                const auto brute = maximize_brute(s.profiles, s.preference, obj, Execution::serial, 4);
                const auto ref = oracle::directed_optimum(s.profiles, static_cast<int>(i), 1.0, isolate);
                CHECK(dec.value == doctest::Approx(ref.value).epsilon(1e-12));
                CHECK(brute.value == doctest::Approx(ref.value).epsilon(1e-12));
                CHECK(directed_objective_value(s.profiles, s.preference, dec.graph, obj) ==
                      doctest::Approx(dec.value).epsilon(1e-12));
                if (isolate) {
                    CHECK(dec.graph.incoming(i).empty());
                    CHECK(dec.graph.outgoing(i).empty());
                }
            }
    }
}

TEST_CASE("brute welfare refuses large instances")
{
    const Scenario s = generated(1, 5);
    CHECK_THROWS_AS(welfare_max_directed(s.profiles, s.preference, WelfareMode::brute), OracleScaleError);
    CHECK_NOTHROW(welfare_max_directed(s.profiles, s.preference, WelfareMode::decomposed));
}

TEST_CASE("price upper bound equals the buyer's marginal surplus")
{
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        const Scenario s = generated(seed, 3);
        const PriceSchedule at_cost = PriceSchedule::at_cost(s.profiles);
        for (AgentIndex m = 0; m < 3; ++m)
            for (AgentIndex j = 0; j < 3; ++j) {
                if (m == j)
                    continue;
                const PriceInterval r = price_upper_bound(s.profiles, s.preference, m, j);
                CHECK(r.cost == s.profiles[m].theta.supply_cost[j]);
                CHECK(r.below_unchanged);
                CHECK(r.above_changed_or_indifferent);
                const bool demanded = demand_set(s.profiles, s.preference, j, at_cost).contains(m);
                CHECK(r.degenerate == !demanded);
                if (!demanded) {
                    CHECK(r.upper == r.cost);
                    continue;
                }
                // Oracle: best value with m at cost minus best value without m.
                const double with_m = oracle::best_demand_value(
                    s.profiles, static_cast<int>(j), [&](int i, int b) { return at_cost(i, b); });
                const double without_m = oracle::best_demand_value(s.profiles, static_cast<int>(j), [&](int i, int b) {
                    return i == static_cast<int>(m) ? 1e9 : at_cost(i, b);
                });
                CHECK(r.headroom == doctest::Approx(with_m - without_m).epsilon(1e-9));
                CHECK(r.upper == doctest::Approx(r.cost + r.headroom).epsilon(1e-12));
            }
    }
}

TEST_CASE("transfers are balanced")
{
    DirectedGraph g(3);
    g.add_edge(0, 1);
    g.add_edge(2, 1);
    PriceSchedule p(3);
    p.set(0, 1, 0.5);
    p.set(2, 1, 0.25);
    const auto t = market_transfers(g, p);
    CHECK(t[0] == -0.5);
    CHECK(t[1] == 0.75);
    CHECK(t[2] == -0.25);
}

}
