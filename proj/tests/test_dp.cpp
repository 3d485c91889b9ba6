#include "datamarket/bilateral.hpp"
#include "datamarket/dp.hpp"
#include "datamarket/mechanism.hpp"
#include "datamarket/unilateral.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cmath>

using namespace datamarket;
using testing_support::generated;

namespace {

oracle::Counts counts_of(const QueryGraph& g)
{
    const std::size_t n = g.n_agents();
    oracle::Counts c(n, std::vector<int>(n, 0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            c[i][j] = static_cast<int>(g.count(i, j));
    return c;
}

const PreferenceModel kCanonical = PreferenceModel::canonical();

QueryPreference unit_response() { return QueryPreference::from_table({0.0, 1.0}); }

} // namespace

TEST_SUITE("dp") {

TEST_CASE("response tables")
{
    const QueryPreference h = QueryPreference::halving(3);
    CHECK(h.table() == std::vector<double>{0.0, 0.5, 0.75, 0.875});
    CHECK(h.max_queries() == 3);
    CHECK_THROWS_AS(h.response(4), ContractViolation);
    CHECK_THROWS_AS(QueryPreference::from_table({0.1, 0.5}), MalformedModel);
    CHECK_THROWS_AS(QueryPreference::from_table({0.0, 0.6, 0.5}), MalformedModel);
    CHECK_THROWS_AS(QueryPreference::from_table({0.0, 1.5}), MalformedModel);
    CHECK_THROWS_AS(QueryPreference::from_table({}), MalformedModel);
    CHECK(QueryPreference::halving(0).max_queries() == 0);
}

TEST_CASE("owner pays per query it answers")
{
    const Scenario s = generated(0, 2);
    Profiles p = s.profiles;
    p[0].theta.supply_cost[1] = 0.1;
    QueryGraph g(2);
    g.set_count(0, 1, 2);
    const QueryPreference q = QueryPreference::halving(4);
    CHECK(dp_cost(p, q, g, 0) == doctest::Approx(0.2));
    CHECK(dp_cost(p, q, g, 1) == 0.0);
    CHECK(dp_benefit(p, q, g, 0) == doctest::Approx(p[0].theta.benefit_scale * std::sqrt(p[0].data_size)));
    CHECK(dp_benefit(p, q, g, 1) ==
          doctest::Approx(p[1].theta.benefit_scale * std::sqrt(p[1].data_size + 0.75 * p[0].data_size)));
    CHECK_THROWS_AS(g.set_count(1, 1, 1), ContractViolation);
}

TEST_CASE("mixed counts agree with an independent recomputation")
{
    const Scenario s = testing_support::generated(6, 3);
    const QueryPreference q = QueryPreference::halving(3);
    QueryGraph g(3);
    g.set_count(0, 1, 1);
    g.set_count(0, 2, 3);
    g.set_count(2, 1, 2);
    g.set_count(1, 0, 1);
    const auto c = counts_of(g);
    for (AgentIndex k = 0; k < 3; ++k)
        CHECK(dp_value(s.profiles, q, g, k) ==
              doctest::Approx(oracle::query_value(s.profiles, q.table(), c, static_cast<int>(k))).epsilon(1e-14));
    CHECK(g.total_queries() == 7);
    CHECK(g.support().edge_count() == 4);
}

TEST_CASE("demand at extreme prices")
{
    const Scenario s = generated(1, 3);
    const QueryPreference q = QueryPreference::halving(2);
    CHECK(dp_demand(s.profiles, q, 0, PriceSchedule(3, 1e6)) == CountVector{0, 0, 0});
    CHECK(dp_demand(s.profiles, q, 0, PriceSchedule(3, 0.0)) == CountVector{0, 2, 2});
}

TEST_CASE("competitive allocation and both optimizers reach the brute optimum")
{
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const Scenario s = generated(seed, 2 + seed % 2);
        const QueryPreference q = QueryPreference::halving(2);
        const double best = oracle::query_optimum(s.profiles, q.table());
        const DpMarket market = dp_competitive_allocation(s.profiles, q);
        CHECK(std::abs(market.welfare - best) <= 1e-9);
        const DpOptimum dec = dp_maximize_decomposed(s.profiles, q);
        const DpOptimum ser = dp_maximize_brute(s.profiles, q, std::nullopt, Execution::serial);
        const DpOptimum par = dp_maximize_brute(s.profiles, q, std::nullopt, Execution::parallel);
        CHECK(std::abs(dec.value - best) <= 1e-9);
        CHECK(std::abs(ser.value - best) <= 1e-9);
        CHECK(ser.graph == par.graph);
        CHECK(dec.graph == ser.graph);
        CHECK(market.graph == dec.graph);
        for (AgentIndex i = 0; i < s.n_agents(); ++i) {
            const double ref = oracle::query_optimum(s.profiles, q.table(), static_cast<int>(i));
            CHECK(std::abs(dp_maximize_decomposed(s.profiles, q, i).value - ref) <= 1e-9);
        }
    }
}

TEST_CASE("zero query cap collapses the market")
{
    const Scenario s = generated(2, 3);
    const QueryPreference q = QueryPreference::halving(0);
    CHECK(dp_ordered_match(s.profiles, q).graph.total_queries() == 0);
    const DpMechanismOutcome out = dp_vcg(s.profiles, q);
    for (double t : out.t_tilde)
        CHECK(t == 0.0);
    CHECK(out.allocation.total_queries() == 0);
}

TEST_CASE("ordered match output is stable per the exhaustive checker")
{
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const Scenario s = generated(seed, 3);
        const QueryPreference q = QueryPreference::halving(1);
        const DpMatchResult m = dp_ordered_match(s.profiles, q);
        CHECK(m.proposals_made <= 3);
        const DpStability a = dp_is_strongly_stable(s.profiles, q, m.graph, Execution::serial);
        const DpStability b = dp_is_strongly_stable(s.profiles, q, m.graph, Execution::parallel);
        CHECK(a.stable == b.stable);
        CHECK(a.deviations_checked == b.deviations_checked);
        CHECK(a.stable);
    }
}

TEST_CASE("dp deviation reachability")
{
    QueryGraph from(3);
    from.set_count(0, 2, 2);
    from.set_count(2, 0, 1);
    QueryGraph dropped = from;
    dropped.set_count(0, 2, 0);
    dropped.set_count(2, 0, 0);
    CHECK(is_dp_coalition_deviation(from, dropped, AgentSet(0b001)));
    QueryGraph half = from;
    half.set_count(0, 2, 1);
    CHECK_FALSE(is_dp_coalition_deviation(from, half, AgentSet(0b001)));
    CHECK(is_dp_coalition_deviation(from, half, AgentSet(0b101)));
}

TEST_CASE("a blocked graph yields a verifiable witness")
{
    Scenario s = generated(3, 3);
    for (auto& p : s.profiles)
        p.theta.supply_cost.assign(3, 0.0);
    const QueryPreference q = QueryPreference::halving(1);
    const QueryGraph empty(3);
    const DpStability r = dp_is_strongly_stable(s.profiles, q, empty);
    CHECK_FALSE(r.stable);
    REQUIRE(r.witness.has_value());
    CHECK(is_dp_coalition_deviation(empty, r.witness->new_graph, r.witness->coalition));
    CHECK(dp_value(s.profiles, q, r.witness->new_graph, r.witness->strict_gainer) >
          dp_value(s.profiles, q, empty, r.witness->strict_gainer));
}

TEST_CASE("mechanism invariants on count matrices")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Scenario s = generated(seed, 3);
        const QueryPreference q = QueryPreference::halving(2);
        const DpMechanismOutcome dec = dp_vcg(s.profiles, q);
        const DpMechanismOutcome brute = dp_vcg(s.profiles, q, 10.0, SolverMode::brute);
        CHECK(dec.t_tilde.size() == 3);
        for (std::size_t i = 0; i < 3; ++i)
            CHECK(std::abs(dec.t_tilde[i] - brute.t_tilde[i]) <= 1e-9);
        for (const Check& c : dp_check_mechanism(s.profiles, q, dec)) {
            if (c.name == "budget" && !dec.balanced())
                continue;
            CHECK_MESSAGE(c.pass, c.name, " seed ", seed);
        }
    }
}

TEST_CASE("unit response reduces to the base markets")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Scenario s = generated(seed, 3, true);
        const QueryPreference q = unit_response();

        const MatchResult base_match = ordered_match(s.profiles, s.preference);
        const DpMatchResult dp_match = dp_ordered_match(s.profiles, q);
        for (AgentIndex i = 0; i < 3; ++i)
            for (AgentIndex j = 0; j < 3; ++j)
                if (i != j)
                    CHECK((dp_match.graph.count(i, j) == 1) == base_match.graph.has_edge(i, j));
        CHECK(dp_match.proposals_made == base_match.proposals_made);

        const CompetitiveOutcome base_market = competitive_allocation(s.profiles, s.preference);
        const DpMarket dp_market = dp_competitive_allocation(s.profiles, q);
        CHECK(dp_market.graph.support() == base_market.allocation.graph);
        CHECK(dp_market.welfare == base_market.welfare);
        CHECK(dp_market.transfers == base_market.allocation.transfers);

        const MechanismOutcome base_vcg = mixed_vcg(s.profiles, s.preference);
        const DpMechanismOutcome dp_out = dp_vcg(s.profiles, q);
        CHECK(dp_out.t_tilde == base_vcg.core.t_tilde);
        CHECK(dp_out.money == base_vcg.money);
        CHECK(dp_out.alpha == base_vcg.alpha);
    }
}

TEST_CASE("enumeration limits are enforced")
{
    const Scenario s = generated(0, 4);
    const QueryPreference q = QueryPreference::halving(4);
    CHECK_THROWS_AS(dp_maximize_brute(s.profiles, q), OracleScaleError);
    CHECK_NOTHROW(dp_maximize_decomposed(s.profiles, q));
}

}
