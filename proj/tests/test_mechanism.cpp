#include "datamarket/mechanism.hpp"
#include "datamarket/scenario.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace datamarket;
using testing_support::generated;
using testing_support::scenario_path;

namespace {

// Only 1 -> 2 is worth building: 2 gains sqrt(5) - 1 from 1's data at a
// cost of 0.3 to agent 1, while 2's data is worth less to 1 than 2's cost.
// With 2's own V dropped, 1 would take 2's data for free: the charge to 2
// is sqrt(5) - (2 - 0.3).
Profiles pivotal()
{
    Profiles p(2);
    p[0] = {1, 4.0, {1.0, 0.0, {0.0, 0.3}}};
    p[1] = {2, 1.0, {1.0, 0.0, {5.0, 0.0}}};
    return p;
}

const PreferenceModel kCanonical = PreferenceModel::canonical();

bool check_passes(const std::vector<Check>& checks, const std::string& name)
{
    const auto it = std::find_if(checks.begin(), checks.end(), [&](const Check& c) { return c.name == name; });
    REQUIRE(it != checks.end());
    return it->pass;
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

} // namespace

TEST_SUITE("mechanism") {

TEST_CASE("split sweeps the surplus from the largest charge")
{
    const std::vector<double> t{5.0, 2.0, -3.0};
    const std::vector<double> ample{100.0, 100.0, 100.0};
    const auto a = split_data_money(t, 4.0, ample);
    CHECK(a.data_money == std::vector<double>{4.0, 0.0, 0.0});
    CHECK(a.residual == 0.0);

    const std::vector<double> tight{3.0, 100.0, 100.0};
    const auto b = split_data_money(t, 4.0, tight);
    CHECK(b.data_money == std::vector<double>{3.0, 1.0, 0.0});
    CHECK(b.residual == 0.0);

    // Money left over: t - t^d sums to zero.
    std::vector<double> money(3);
    for (std::size_t i = 0; i < 3; ++i)
        money[i] = t[i] - b.data_money[i];
    CHECK(money == std::vector<double>{2.0, 1.0, -3.0});
    CHECK(sum(money) == 0.0);
}

TEST_CASE("split sweeps a deficit from the smallest charge")
{
    const std::vector<double> t{-1.0, 2.0, -4.0};
    const std::vector<double> caps{10.0, 10.0, 1.5};
    const auto s = split_data_money(t, -3.0, caps);
    CHECK(s.data_money == std::vector<double>{-1.0, 0.0, -1.5});
    CHECK(s.residual == doctest::Approx(-0.5));
}

TEST_CASE("split reports what capacities cannot absorb")
{
    const std::vector<double> t{1.0, 1.0};
    const std::vector<double> caps{0.25, 0.5};
    const auto s = split_data_money(t, 2.0, caps);
    CHECK(s.data_money == std::vector<double>{0.25, 0.5});
    CHECK(s.residual == doctest::Approx(1.25));
}

TEST_CASE("calibration hits the closed form")
{
    const DistortionCurve curve{1.0, 4.0, 5.0};
    const double alpha = calibrate_scale(curve, 0.5, {0.0, 1.0}, 0);
    CHECK(alpha == doctest::Approx(0.45).epsilon(1e-12));
    CHECK(curve.at(alpha) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(calibrate_scale(curve, 0.0, {0.0, 1.0}, 0) == 1.0);
    // Injection above U(1) needs an upward multiplier.
    const double up = calibrate_scale(curve, -0.5, {0.0, 10.0}, 0);
    CHECK(up == doctest::Approx((3.5 * 3.5 - 4.0) / 5.0).epsilon(1e-12));
    CHECK_THROWS_AS(calibrate_scale(curve, 2.0, {0.0, 1.0}, 0), CalibrationInfeasible);
    CHECK_THROWS_AS(calibrate_scale(DistortionCurve{1.0, 4.0, 0.0}, 0.1, {0.0, 1.0}, 0), CalibrationInfeasible);
}

TEST_CASE("pivotal pair: charges, balance and welfare")
{
    const Profiles p = pivotal();
    const VcgCore core = solve_vcg(p, kCanonical);
    CHECK(core.g_star.has_edge(0, 1));
    CHECK_FALSE(core.g_star.has_edge(1, 0));
    CHECK(core.t_tilde[0] == doctest::Approx(0.0));
    CHECK(core.t_tilde[1] == doctest::Approx(std::sqrt(5.0) - 1.7));
    const auto ref = oracle::vcg_payments(p);
    for (std::size_t i = 0; i < 2; ++i)
        CHECK(core.t_tilde[i] == doctest::Approx(ref[i]).epsilon(1e-12));
    CHECK(total_utility(p, kCanonical, core.g_star, 0) == doctest::Approx(2.0 - 0.3));
    CHECK(total_utility(p, kCanonical, core.g_star, 1) == doctest::Approx(std::sqrt(5.0)));

    const MechanismOutcome standard = standard_vcg(p, kCanonical);
    const MechanismOutcome mixed = mixed_vcg(p, kCanonical);
    CHECK(mixed.balanced());
    CHECK(std::abs(sum(mixed.money)) <= 1e-9);
    for (AgentIndex i = 0; i < 2; ++i)
        CHECK(mechanism_net_utility(p, kCanonical, mixed, i) ==
              doctest::Approx(mechanism_net_utility(p, kCanonical, standard, i)).epsilon(1e-12));
    CHECK(total_social_welfare(p, kCanonical, mixed) ==
          doctest::Approx(total_social_welfare(p, kCanonical, standard) - core.delta).epsilon(1e-12));
    for (const Check& c : check_mechanism(p, kCanonical, mixed))
        if (c.name != "ir")
            CHECK_MESSAGE(c.pass, c.name);

    const MechanismOutcome distorted = d_mixed_vcg(p, kCanonical, 0.5);
    CHECK(total_social_welfare(p, kCanonical, distorted) <= total_social_welfare(p, kCanonical, mixed) + 1e-9);
}

TEST_CASE("remove-agent pivot isolates the agent")
{
    const Profiles p = pivotal();
    const VcgCore core = solve_vcg(p, kCanonical, {}, SolverMode::decomposed, Execution::serial, std::nullopt,
                                   PivotRule::remove_agent);
    CHECK(core.t_tilde[0] == doctest::Approx(1.0 - std::sqrt(5.0)));
    CHECK(core.t_tilde[1] == doctest::Approx(0.3));
    CHECK(core.g_minus[0].edge_count() == 0);
}

TEST_CASE("two-agent scenario file: frozen charges and multipliers")
{
    const Scenario s = load_scenario(scenario_path("twoagent.json"));
    const MechanismOutcome out = mixed_vcg(s.profiles, s.preference);
    CHECK(out.core.t_tilde[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(out.core.t_tilde[1] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(out.core.delta == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(out.data_money[0] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(out.data_money[1] == doctest::Approx(0.1).epsilon(1e-12));
    // sqrt(4 + 1*a1) = sqrt(5) - 0.2 and sqrt(1 + 4*a2) = sqrt(5) - 0.1.
    const double r5 = std::sqrt(5.0);
    CHECK(out.alpha[0] == doctest::Approx((r5 - 0.2) * (r5 - 0.2) - 4.0).epsilon(1e-12));
    CHECK(out.alpha[1] == doctest::Approx(((r5 - 0.1) * (r5 - 0.1) - 1.0) / 4.0).epsilon(1e-12));
    CHECK(out.alpha[0] == doctest::Approx(0.1455728090000834).epsilon(1e-12));
    CHECK(out.alpha[1] == doctest::Approx(0.8906966011250106).epsilon(1e-12));
    CHECK(check_passes(check_mechanism(s.profiles, s.preference, out), "budget"));
}

TEST_CASE("symmetric agents with free sharing are never pivotal")
{
    Profiles p(3);
    for (int i = 0; i < 3; ++i)
        p[i] = {i + 1, 2.0, {1.0, 0.0, {0.0, 0.0, 0.0}}};
    const MechanismOutcome out = mixed_vcg(p, kCanonical, {.solver = SolverMode::brute});
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(out.core.t_tilde[i] == 0.0);
        CHECK(out.money[i] == 0.0);
        CHECK(out.alpha[i] == 1.0);
    }
    CHECK(out.core.delta == 0.0);
    CHECK(out.core.g_star.edge_count() == 6);
}

TEST_CASE("single agent owes nothing")
{
    const Scenario s = generated(0, 1);
    const MechanismOutcome out = mixed_vcg(s.profiles, s.preference);
    CHECK(out.core.t_tilde == std::vector<double>{0.0});
    CHECK(out.money == std::vector<double>{0.0});
    CHECK(out.balanced());
}

TEST_CASE("charges match the oracle for both pivots and solvers")
{
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
        const Scenario s = generated(seed, 2 + seed % 3);
        for (PivotRule pivot : {PivotRule::keep_data, PivotRule::remove_agent}) {
            const auto ref = oracle::vcg_payments(s.profiles, 1.0, pivot == PivotRule::remove_agent);
            const VcgCore dec =
                solve_vcg(s.profiles, s.preference, {}, SolverMode::decomposed, Execution::serial, std::nullopt, pivot);
            const VcgCore brute =
                solve_vcg(s.profiles, s.preference, {}, SolverMode::brute, Execution::parallel, std::nullopt, pivot);
            for (std::size_t i = 0; i < s.n_agents(); ++i) {
                CHECK(std::abs(dec.t_tilde[i] - ref[i]) <= 1e-9);
                CHECK(std::abs(brute.t_tilde[i] - ref[i]) <= 1e-9);
            }
            CHECK(dec.g_star == brute.g_star);
        }
        // Pre-distorted class.
        const auto ref_half = oracle::vcg_payments(s.profiles, 0.5);
        const VcgCore half = solve_vcg(s.profiles, s.preference, GraphClass::base_distorted(0.5));
        for (std::size_t i = 0; i < s.n_agents(); ++i)
            CHECK(std::abs(half.t_tilde[i] - ref_half[i]) <= 1e-9);
    }
}

TEST_CASE("serial and parallel outcomes are identical")
{
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const Scenario s = generated(seed, 4);
        MechanismOptions serial{.exec = Execution::serial};
        MechanismOptions parallel{.exec = Execution::parallel};
        const auto a = mixed_vcg(s.profiles, s.preference, serial);
        const auto b = mixed_vcg(s.profiles, s.preference, parallel);
        CHECK(a.core.t_tilde == b.core.t_tilde);
        CHECK(a.alpha == b.alpha);
        CHECK(a.money == b.money);
        CHECK(a.allocation == b.allocation);
    }
}

TEST_CASE("mixed invariants hold across seeds")
{
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        const Scenario s = generated(seed, 2 + seed % 3);
        for (MechanismKind kind : {MechanismKind::mixed, MechanismKind::d_mixed}) {
            MechanismOptions o;
            o.kind = kind;
            const MechanismOutcome out = run_mechanism(s.profiles, s.preference, o);
            const auto checks = check_mechanism(s.profiles, s.preference, out);
            for (const char* name : {"split_identity", "utility_equivalence", "sw_agents_identity", "sw_total_identity",
                                     "calibration_residual", "isolated_impact"})
                CHECK_MESSAGE(check_passes(checks, name), name, " seed ", seed);
            if (out.balanced())
                CHECK(std::abs(sum(out.money)) <= 1e-9);
            for (double a : out.alpha) {
                CHECK(a >= out.bounds.lower);
                CHECK(a <= out.bounds.upper);
            }
            if (kind == MechanismKind::d_mixed)
                for (auto [from, to] : out.allocation.base().edges())
                    CHECK(out.allocation.weight(from, to) <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("isolated impact: distorting one agent leaves the others untouched")
{
    const Scenario s = generated(3, 3);
    const VcgCore core = solve_vcg(s.profiles, s.preference);
    const WeightedDirectedGraph base(core.g_star);
    for (AgentIndex i = 0; i < 3; ++i) {
        WeightedDirectedGraph scaled = base;
        scaled.scale_incoming(i, 0.3);
        for (AgentIndex k = 0; k < 3; ++k)
            if (k != i)
                CHECK(total_utility(s.profiles, s.preference, scaled, k) ==
                      total_utility(s.profiles, s.preference, base, k));
    }
}

TEST_CASE("participation holds when the pivot removes the agent")
{
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Scenario s = generated(seed, 2 + seed % 3);
        MechanismOptions o;
        o.pivot = PivotRule::remove_agent;
        o.kind = MechanismKind::standard;
        const MechanismOutcome out = run_mechanism(s.profiles, s.preference, o);
        const WeightedDirectedGraph empty{DirectedGraph(s.n_agents())};
        for (AgentIndex i = 0; i < s.n_agents(); ++i)
            CHECK(mechanism_net_utility(s.profiles, s.preference, out, i) >=
                  total_utility(s.profiles, s.preference, empty, i) - 1e-9);
    }
}

TEST_CASE("standard VCG resists the misreport grid")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Scenario s = generated(seed, 2 + seed % 2);
        for (AgentIndex i = 0; i < s.n_agents(); ++i) {
            const ProbeReport r = truthfulness_probe(s.profiles, s.preference, i, kMisreportFactors,
                                                     {.kind = MechanismKind::standard});
            CHECK(r.points.size() == 9);
            CHECK(r.max_gain <= 1e-9);
        }
    }
}

TEST_CASE("mixed VCG rewards overstating the benefit scale")
{
    // Calibration trusts the reported scale: reporting f*a leaves the agent
    // only t^d/f of distortion, so the gain is t^d * (1 - 1/f).
    const Profiles p = pivotal();
    const double charge = std::sqrt(5.0) - 1.7;
    const ProbeReport r = truthfulness_probe(p, kCanonical, 1, kMisreportFactors, {});
    for (const ProbePoint& point : r.points)
        if (point.parameter == "benefit_scale" && point.factor > 1.0)
            CHECK(point.gain == doctest::Approx(charge * (1.0 - 1.0 / point.factor)).epsilon(1e-9));
    CHECK(r.max_gain == doctest::Approx(charge / 2.0).epsilon(1e-9));
}

TEST_CASE("table models carry no distortion capacity")
{
    const Scenario s = load_scenario(scenario_path("stable_not_optimal.json"));
    const MechanismOutcome standard = standard_vcg(s.profiles, s.preference);
    const MechanismOutcome mixed = mixed_vcg(s.profiles, s.preference);
    CHECK(mixed.capacity == std::vector<double>{0.0, 0.0});
    CHECK(mixed.residual == standard.core.delta);
    CHECK(mixed.money == standard.money);
    CHECK_THROWS(d_mixed_vcg(s.profiles, s.preference, 0.5));
}

TEST_CASE("graph class rejects weights outside the open unit interval")
{
    CHECK_THROWS_AS(GraphClass::base_distorted(0.0), ContractViolation);
    CHECK_THROWS_AS(GraphClass::base_distorted(1.0), ContractViolation);
    CHECK(GraphClass::base_distorted(0.25).base_weight == 0.25);
}

}
