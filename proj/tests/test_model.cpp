#include "datamarket/model.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>

using namespace datamarket;

namespace {

Profiles two_agents()
{
    // d = (4, 1), a = 1, link costs 0.1, supply 1->2 0.1, 2->1 0.2.
    Profiles p(2);
    p[0] = {1, 4.0, {1.0, 0.1, {0.0, 0.1}}};
    p[1] = {2, 1.0, {1.0, 0.1, {0.2, 0.0}}};
    return p;
}

} // namespace

TEST_SUITE("model") {

TEST_CASE("compare_values treats differences up to the tolerance as ties")
{
    CHECK(compare_values(1.0, 1.0 + 5e-13) == 0);
    CHECK(compare_values(1.0, 1.0 + 1e-11) == -1);
    CHECK(compare_values(2.0, 1.0) == 1);
}

TEST_CASE("agent sets")
{
    const AgentSet s = AgentSet::singleton(0).with(2);
    CHECK(s.bits() == 0b101U);
    CHECK(s.size() == 2);
    CHECK(s.contains(2));
    CHECK_FALSE(s.contains(1));
    CHECK(s.without(0) == AgentSet::singleton(2));
    CHECK(s.subset_of(AgentSet::first(3)));
    CHECK(s.ids() == std::vector<int>{1, 3});
    CHECK(s.members() == std::vector<AgentIndex>{0, 2});
    CHECK(AgentSet::first(32).bits() == 0xFFFFFFFFU);
    CHECK(AgentSet::first(0).empty());
}

TEST_CASE("profile validation rejects malformed inputs")
{
    Profiles p = two_agents();
    CHECK_NOTHROW(validate_profiles(p));
    SUBCASE("ids out of order") { p[1].id = 3; }
    SUBCASE("nonpositive size") { p[0].data_size = 0.0; }
    SUBCASE("short cost row") { p[0].theta.supply_cost.pop_back(); }
    SUBCASE("negative cost") { p[1].theta.supply_cost[0] = -0.1; }
    SUBCASE("negative link cost") { p[1].theta.connection_cost = -1.0; }
    if (p != two_agents())
        CHECK_THROWS_AS(validate_profiles(p), ContractViolation);
}

TEST_CASE("canonical bilateral value matches the closed form")
{
    const Profiles p = two_agents();
    const PreferenceModel canon = PreferenceModel::canonical();
    for (AgentIndex k = 0; k < 2; ++k)
        for (std::uint32_t bits = 1; bits < 4; ++bits) {
            const AgentSet s(bits);
            if (!s.contains(k))
                continue;
            CHECK(eval_bilateral(p, canon, k, s) == doctest::Approx(oracle::canonical_bilateral(p, k, bits)).epsilon(1e-15));
        }
    // a*sqrt(5) - 0.1 for agent 1 holding {1,2}.
    CHECK(eval_bilateral(p, canon, 0, AgentSet(0b11)) == doctest::Approx(std::sqrt(5.0) - 0.1));
}

TEST_CASE("bilateral table agrees with direct evaluation and rejects missing entries")
{
    const auto s = testing_support::generated(3, 4);
    const BilateralTable table(s.profiles, s.preference);
    for (AgentIndex k = 0; k < 4; ++k)
        for (std::uint32_t bits = 1; bits < 16; ++bits)
            if (AgentSet(bits).contains(k))
                CHECK(table.value(k, AgentSet(bits)) == eval_bilateral(s.profiles, s.preference, k, AgentSet(bits)));

    const PreferenceModel partial =
        PreferenceModel::from_rankings(2, {{AgentSet(0b01)}, {AgentSet(0b10), AgentSet(0b11)}});
    const Profiles p = two_agents();
    CHECK_THROWS_AS(eval_bilateral(p, partial, 0, AgentSet(0b11)), MalformedModel);
    const BilateralTable t2(p, partial);
    CHECK_THROWS_AS(t2.value(0, AgentSet(0b11)), MalformedModel);
}

TEST_CASE("rankings become descending values")
{
    const PreferenceModel m = PreferenceModel::from_rankings(2, {{AgentSet(0b11), AgentSet(0b01)}, {AgentSet(0b10)}});
    const Profiles p = two_agents();
    CHECK(eval_bilateral(p, m, 0, AgentSet(0b11)) > eval_bilateral(p, m, 0, AgentSet(0b01)));
    CHECK_THROWS_AS(PreferenceModel::from_rankings(2, {{AgentSet(0b10)}, {AgentSet(0b10)}}), MalformedModel);
    CHECK_THROWS_AS(PreferenceModel::from_rankings(2, {{AgentSet(0b01), AgentSet(0b01)}, {}}), MalformedModel);
    CHECK_THROWS_AS(PreferenceModel::from_rankings(1, {{AgentSet(0b1)}, {}}), MalformedModel);
}

TEST_CASE("graphs keep their edge sets")
{
    SharingGraph g(3);
    g.add_edge(2, 0);
    g.add_edge(0, 1);
    CHECK(g.has_edge(0, 2));
    CHECK(g.edge_count() == 2);
    CHECK(g.edges() == std::vector<std::pair<AgentIndex, AgentIndex>>{{0, 1}, {0, 2}});
    CHECK(g.neighborhood(0) == AgentSet(0b111));
    g.remove_edge(0, 2);
    CHECK(g.neighborhood(2) == AgentSet(0b100));

    DirectedGraph d(3);
    d.add_edge(0, 1);
    d.add_edge(2, 1);
    CHECK(d.incoming(1) == AgentSet(0b101));
    CHECK(d.outgoing(0) == AgentSet(0b010));
    CHECK(d.edge_count() == 2);
    CHECK_FALSE(d.has_edge(1, 0));
}

TEST_CASE("directed utilities match the oracle on every graph")
{
    const Profiles p = two_agents();
    const PreferenceModel canon = PreferenceModel::canonical();
    const auto pairs = oracle::ordered_pairs(2);
    for (std::uint64_t bits = 0; bits < 4; ++bits) {
        DirectedGraph g(2);
        for (std::size_t e = 0; e < pairs.size(); ++e)
            if (bits >> e & 1U)
                g.add_edge(pairs[e].first, pairs[e].second);
        for (AgentIndex k = 0; k < 2; ++k) {
            CHECK(total_utility(p, canon, g, k) == doctest::Approx(oracle::directed_value(p, bits, k)).epsilon(1e-15));
            const WeightedDirectedGraph w(g, 0.5);
            CHECK(total_utility(p, canon, w, k) ==
                  doctest::Approx(oracle::directed_value(p, bits, k, 0.5)).epsilon(1e-15));
        }
    }
    // Agent 2 receiving agent 1's data: sqrt(1 + 4); agent 1 pays 0.1.
    DirectedGraph g(2);
    g.add_edge(0, 1);
    CHECK(total_utility(p, canon, g, 1) == doctest::Approx(std::sqrt(5.0)));
    CHECK(total_utility(p, canon, g, 0) == doctest::Approx(2.0 - 0.1));
    CHECK(supply_cost(p, 1, AgentSet(0b01)) == doctest::Approx(0.2));
}

TEST_CASE("weighted graphs scale incoming edges only")
{
    DirectedGraph g(3);
    g.add_edge(0, 1);
    g.add_edge(2, 1);
    g.add_edge(1, 0);
    WeightedDirectedGraph w(g, 0.5);
    w.scale_incoming(1, 3.0);
    CHECK(w.weight(0, 1) == doctest::Approx(1.5));
    CHECK(w.weight(2, 1) == doctest::Approx(1.5));
    CHECK(w.weight(1, 0) == doctest::Approx(0.5));
    CHECK(w.weight(0, 2) == 0.0);
}

TEST_CASE("table models reject fractional weights")
{
    const PreferenceModel m =
        PreferenceModel::from_values(2, {{{AgentSet(0b01), 1.0}, {AgentSet(0b11), 2.0}}, {{AgentSet(0b10), 0.0}}});
    const Profiles p = two_agents();
    CHECK(incoming_utility(p, m, 0, AgentSet(0b10)) == 2.0);
    CHECK_THROWS(incoming_utility(p, m, 0, AgentSet(0b10), 0.5));
}

TEST_CASE("strict ordering of sizes")
{
    Profiles p = two_agents();
    CHECK(strictly_ordered_sizes(p));
    p[1].data_size = 4.0;
    CHECK_FALSE(strictly_ordered_sizes(p));
}

TEST_CASE("oracle cap comes from the environment")
{
    ::setenv("DATAMARKET_ORACLE_CAP", "3", 1);
    const OracleLimits low = OracleLimits::from_environment();
    CHECK(low.stability == 3);
    CHECK(low.directed == 3);
    ::setenv("DATAMARKET_ORACLE_CAP", "abc", 1);
    CHECK(OracleLimits::from_environment().stability == 5);
    ::unsetenv("DATAMARKET_ORACLE_CAP");
    const OracleLimits defaults = OracleLimits::from_environment();
    CHECK(defaults.stability == 5);
    CHECK(defaults.directed == 4);
}

}
