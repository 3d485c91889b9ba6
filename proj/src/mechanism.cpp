#include "datamarket/mechanism.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace datamarket {

GraphClass GraphClass::base_distorted(double w0)
{
    if (!(w0 > 0.0 && w0 < 1.0))
        throw ContractViolation("base distortion weight must lie in (0, 1)");
    return GraphClass{w0};
}

VcgCore solve_vcg(const Profiles& profiles, const PreferenceModel& pref, GraphClass graph_class, SolverMode mode,
                  Execution exec, std::optional<std::size_t> cap, PivotRule pivot)
{
    const std::size_t n = profiles.size();
    const std::size_t brute_cap = cap.value_or(OracleLimits::from_environment().directed);
    if (mode == SolverMode::brute && n > brute_cap)
        throw OracleScaleError("brute-force VCG is capped at " + std::to_string(brute_cap) + " agents, got " +
                               std::to_string(n));

    // problem 0 is G*, problem i+1 is the pivot problem without agent i
    std::vector<DirectedOptimum> solved(n + 1);
    auto solve = [&](std::size_t problem) {
        DirectedObjective objective{graph_class.base_weight, std::nullopt};
        if (problem > 0) {
            objective.excluded = problem - 1;
            objective.isolate_excluded = pivot == PivotRule::remove_agent;
        }
        return mode == SolverMode::decomposed
                   ? maximize_decomposed(profiles, pref, objective)
                   : maximize_brute(profiles, pref, objective, Execution::serial, brute_cap);
    };
    detail::for_each_index(n + 1, exec, [&](std::uint64_t p) { solved[p] = solve(p); });

    VcgCore core;
    core.base_weight = graph_class.base_weight;
    core.g_star = solved[0].graph;
    core.welfare = directed_objective_value(profiles, pref, core.g_star, {graph_class.base_weight, std::nullopt});
    core.t_tilde.resize(n);
    core.g_minus.reserve(n);
    for (AgentIndex i = 0; i < n; ++i) {
        const DirectedObjective others{graph_class.base_weight, i, false};
        core.g_minus.push_back(solved[i + 1].graph);
        core.t_tilde[i] = directed_objective_value(profiles, pref, core.g_minus[i], others) -
                          directed_objective_value(profiles, pref, core.g_star, others);
    }
    core.delta = std::accumulate(core.t_tilde.begin(), core.t_tilde.end(), 0.0);
    return core;
}

DataMoneySplit split_data_money(std::span<const double> t_tilde, double delta, std::span<const double> capacities)
{
    const std::size_t n = t_tilde.size();
    if (capacities.size() != n)
        throw ContractViolation("one capacity per agent is required");
    DataMoneySplit out;
    out.data_money.assign(n, 0.0);
    if (delta == 0.0)
        return out;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const bool surplus = delta > 0.0;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return surplus ? t_tilde[a] > t_tilde[b] : t_tilde[a] < t_tilde[b];
    });

    double remaining = delta;
    for (std::size_t k : order) {
        double take = 0.0;
        if (surplus)
            take = std::max(0.0, std::min({std::max(t_tilde[k], 0.0), capacities[k], remaining}));
        else
            take = std::min(0.0, std::max({std::min(t_tilde[k], 0.0), -capacities[k], remaining}));
        out.data_money[k] = take;
        remaining -= take;
    }
    out.residual = remaining;
    return out;
}

double DistortionCurve::at(double alpha) const { return scale * std::sqrt(own + alpha * received); }

std::optional<DistortionCurve> distortion_curve(const Profiles& profiles, const PreferenceModel& pref,
                                                const WeightedDirectedGraph& g, AgentIndex agent)
{
    if (!pref.is_canonical())
        return std::nullopt;
    DistortionCurve curve;
    curve.scale = profiles[agent].theta.benefit_scale;
    curve.own = profiles[agent].data_size;
    g.base().incoming(agent).for_each(
        [&](AgentIndex j) { curve.received += g.weight(j, agent) * profiles[j].data_size; });
    return curve;
}

double calibrate_scale(const DistortionCurve& curve, double data_money, DistortionBounds bounds, AgentIndex agent)
{
    if (data_money == 0.0)
        return 1.0;
    if (curve.received <= 0.0)
        throw CalibrationInfeasible(agent, "no incoming data to distort");
    const double target = curve.at(1.0) - data_money;
    const double lo_value = curve.at(bounds.lower);
    const double hi_value = curve.at(bounds.upper);
    const double slack = kCalibrationTolerance * std::max(1.0, std::abs(target));
    if (target < lo_value - slack || target > hi_value + slack)
        throw CalibrationInfeasible(agent, "data money " + std::to_string(data_money) + " outside [" +
                                               std::to_string(curve.at(1.0) - hi_value) + ", " +
                                               std::to_string(curve.at(1.0) - lo_value) + "]");

    const double ratio = target / curve.scale;
    const double closed =
        std::clamp((ratio * ratio - curve.own) / curve.received, bounds.lower, bounds.upper);

    double lo = bounds.lower;
    double hi = bounds.upper;
    for (int iter = 0; iter < 200 && hi - lo > 1e-15; ++iter) {
        const double mid = 0.5 * (lo + hi);
        (curve.at(mid) < target ? lo : hi) = mid;
    }
    const double bisected = 0.5 * (lo + hi);
    if (std::abs(curve.at(closed) - target) > kCalibrationTolerance &&
        std::abs(curve.at(bisected) - target) <= kCalibrationTolerance)
        return bisected;
    if (std::abs(curve.at(closed) - target) > kCalibrationTolerance)
        throw CalibrationInfeasible(agent, "could not reach the target utility to tolerance");
    return closed;
}

Calibration calibrate_distortion(const Profiles& profiles, const PreferenceModel& pref,
                                 const WeightedDirectedGraph& g_star, std::span<const double> data_money,
                                 DistortionBounds bounds)
{
    const std::size_t n = profiles.size();
    if (data_money.size() != n)
        throw ContractViolation("one data-money entry per agent is required");
    Calibration out{g_star, std::vector<double>(n, 1.0)};
    for (AgentIndex i = 0; i < n; ++i) {
        if (data_money[i] == 0.0)
            continue;
        const auto curve = distortion_curve(profiles, pref, g_star, i);
        if (!curve)
            throw CalibrationInfeasible(i, "table preferences cannot be distorted");
        out.alpha[i] = calibrate_scale(*curve, data_money[i], bounds, i);
        out.allocation.scale_incoming(i, out.alpha[i]);
    }
    return out;
}

namespace {

MechanismOutcome mixed_pipeline(const Profiles& profiles, const PreferenceModel& pref, GraphClass graph_class,
                                DistortionBounds bounds, MechanismKind kind, const MechanismOptions& options)
{
    const std::size_t n = profiles.size();
    MechanismOutcome out;
    out.kind = kind;
    out.bounds = bounds;
    out.core = solve_vcg(profiles, pref, graph_class, options.solver, options.exec, std::nullopt, options.pivot);
    const WeightedDirectedGraph g_star(out.core.g_star, graph_class.base_weight);

    out.capacity.assign(n, 0.0);
    for (AgentIndex i = 0; i < n; ++i)
        if (const auto curve = distortion_curve(profiles, pref, g_star, i)) {
            const double here = curve->at(1.0);
            out.capacity[i] = out.core.delta >= 0.0 ? here - curve->at(bounds.lower)
                                                     : curve->at(bounds.upper) - here;
            out.capacity[i] = std::max(0.0, out.capacity[i]);
        }

    auto split = split_data_money(out.core.t_tilde, out.core.delta, out.capacity);
    out.data_money = std::move(split.data_money);
    out.residual = split.residual;
    out.money.resize(n);
    for (AgentIndex i = 0; i < n; ++i)
        out.money[i] = out.core.t_tilde[i] - out.data_money[i];

    auto calibration = calibrate_distortion(profiles, pref, g_star, out.data_money, bounds);
    out.allocation = std::move(calibration.allocation);
    out.alpha = std::move(calibration.alpha);
    return out;
}

} // namespace

MechanismOutcome standard_vcg(const Profiles& profiles, const PreferenceModel& pref, MechanismOptions options)
{
    const std::size_t n = profiles.size();
    MechanismOutcome out;
    out.kind = MechanismKind::standard;
    out.core = solve_vcg(profiles, pref, GraphClass::unweighted(), options.solver, options.exec, std::nullopt,
                         options.pivot);
    out.allocation = WeightedDirectedGraph(out.core.g_star);
    out.money = out.core.t_tilde;
    out.data_money.assign(n, 0.0);
    out.alpha.assign(n, 1.0);
    out.capacity.assign(n, 0.0);
    out.residual = out.core.delta;
    out.bounds = {1.0, 1.0};
    return out;
}

MechanismOutcome mixed_vcg(const Profiles& profiles, const PreferenceModel& pref, MechanismOptions options)
{
    if (!(options.alpha_max >= 1.0))
        throw ContractViolation("alpha_max must be at least 1");
    return mixed_pipeline(profiles, pref, GraphClass::unweighted(), {0.0, options.alpha_max}, MechanismKind::mixed,
                          options);
}

MechanismOutcome d_mixed_vcg(const Profiles& profiles, const PreferenceModel& pref, double w0,
                             MechanismOptions options)
{
    const auto graph_class = GraphClass::base_distorted(w0);
    // lifting the base noise can at most restore full quality
    return mixed_pipeline(profiles, pref, graph_class, {0.0, 1.0 / w0}, MechanismKind::d_mixed, options);
}

MechanismOutcome run_mechanism(const Profiles& profiles, const PreferenceModel& pref, const MechanismOptions& options)
{
    switch (options.kind) {
    case MechanismKind::standard:
        return standard_vcg(profiles, pref, options);
    case MechanismKind::mixed:
        return mixed_vcg(profiles, pref, options);
    case MechanismKind::d_mixed:
        return d_mixed_vcg(profiles, pref, options.w0, options);
    }
    throw ContractViolation("unknown mechanism kind");
}

double mechanism_net_utility(const Profiles& profiles, const PreferenceModel& pref, const MechanismOutcome& out,
                             AgentIndex agent)
{
    return total_utility(profiles, pref, out.allocation, agent) - out.money[agent];
}

double agents_welfare(const Profiles& profiles, const PreferenceModel& pref, const MechanismOutcome& out)
{
    double total = 0.0;
    for (AgentIndex i = 0; i < profiles.size(); ++i)
        total += mechanism_net_utility(profiles, pref, out, i);
    return total;
}

double total_social_welfare(const Profiles& profiles, const PreferenceModel& pref, const MechanismOutcome& out)
{
    return total_welfare(profiles, pref, out.allocation);
}

std::vector<Check> check_mechanism(const Profiles& profiles, const PreferenceModel& pref,
                                   const MechanismOutcome& out)
{
    const std::size_t n = profiles.size();
    const WeightedDirectedGraph g_star(out.core.g_star, out.core.base_weight);
    std::vector<Check> checks;

    // Outside option is autarky. The VCG guarantee needs the pivot graph to
    // leave the agent no worse than autarky; agents failing that are skipped.
    Check ir{"ir", true, std::numeric_limits<double>::infinity(), 0};
    const WeightedDirectedGraph empty{DirectedGraph(n)};
    for (AgentIndex i = 0; i < n; ++i) {
        const double autarky = total_utility(profiles, pref, empty, i);
        const double pivot = total_utility(profiles, pref, WeightedDirectedGraph(out.core.g_minus[i], out.core.base_weight), i);
        if (pivot < autarky - kIdentityTolerance)
            continue;
        ++ir.checked;
        const double margin = mechanism_net_utility(profiles, pref, out, i) - autarky;
        ir.slack = std::min(ir.slack, margin);
        if (margin < -kIdentityTolerance)
            ir.pass = false;
    }
    if (ir.checked == 0)
        ir.slack = 0.0;

    if (out.kind == MechanismKind::standard) {
        checks.push_back(ir);
        return checks;
    }

    Check split{"split_identity", true, 0.0, n};
    for (AgentIndex i = 0; i < n; ++i)
        split.slack = std::max(split.slack, std::abs(out.money[i] + out.data_money[i] - out.core.t_tilde[i]));
    split.pass = split.slack <= kIdentityTolerance;
    checks.push_back(split);

    Check budget{"budget", true, 0.0, 1};
    budget.slack = std::abs(std::accumulate(out.money.begin(), out.money.end(), 0.0));
    budget.pass = budget.slack <= kIdentityTolerance;
    checks.push_back(budget);

    Check equivalence{"utility_equivalence", true, 0.0, n};
    double vcg_agents = 0.0;
    for (AgentIndex i = 0; i < n; ++i) {
        const double standard = total_utility(profiles, pref, g_star, i) - out.core.t_tilde[i];
        vcg_agents += standard;
        equivalence.slack =
            std::max(equivalence.slack, std::abs(mechanism_net_utility(profiles, pref, out, i) - standard));
    }
    equivalence.pass = equivalence.slack <= kIdentityTolerance;
    checks.push_back(equivalence);

    Check sw_agents{"sw_agents_identity", true, std::abs(agents_welfare(profiles, pref, out) - vcg_agents), 1};
    sw_agents.pass = sw_agents.slack <= kIdentityTolerance;
    checks.push_back(sw_agents);

    Check sw_total{"sw_total_identity", true, 0.0, 1};
    sw_total.slack = std::abs(total_social_welfare(profiles, pref, out) - (total_welfare(profiles, pref, g_star) - (out.core.delta - out.residual)));
    sw_total.pass = sw_total.slack <= kIdentityTolerance;
    checks.push_back(sw_total);

    Check calibration{"calibration_residual", true, 0.0, 0};
    Check isolated{"isolated_impact", true, 0.0, 0};
    for (AgentIndex i = 0; i < n; ++i) {
        if (out.data_money[i] == 0.0)
            continue;
        ++calibration.checked;
        const auto before = distortion_curve(profiles, pref, g_star, i);
        const auto after = distortion_curve(profiles, pref, out.allocation, i);
        if (before && after)
            calibration.slack =
                std::max(calibration.slack, std::abs(after->at(1.0) - (before->at(1.0) - out.data_money[i])));
        else
            calibration.pass = false;

        WeightedDirectedGraph only_i = g_star;
        only_i.scale_incoming(i, out.alpha[i]);
        for (AgentIndex j = 0; j < n; ++j) {
            if (j == i)
                continue;
            ++isolated.checked;
            const double diff =
                std::abs(total_utility(profiles, pref, only_i, j) - total_utility(profiles, pref, g_star, j));
            isolated.slack = std::max(isolated.slack, diff);
            if (diff != 0.0)
                isolated.pass = false;
        }
    }
    calibration.pass = calibration.pass && calibration.slack <= kCalibrationTolerance;
    checks.push_back(calibration);
    checks.push_back(isolated);
    checks.push_back(ir);
    return checks;
}

ProbeReport truthfulness_probe(const Profiles& profiles, const PreferenceModel& pref, AgentIndex agent,
                               std::span<const double> factors, const MechanismOptions& options)
{
    if (agent >= profiles.size())
        throw ContractViolation("probe agent out of range");
    ProbeReport report;
    report.agent = agent;
    auto true_net = [&](const MechanismOutcome& out) {
        return total_utility(profiles, pref, out.allocation, agent) - out.money[agent];
    };
    report.truthful_utility = true_net(run_mechanism(profiles, pref, options));
    report.points.push_back({"truthful", 1.0, report.truthful_utility, 0.0});

    for (const char* parameter : {"benefit_scale", "supply_cost"}) {
        for (double factor : factors) {
            Profiles reported = profiles;
            auto& theta = reported[agent].theta;
            if (std::string_view(parameter) == "benefit_scale") {
                theta.benefit_scale *= factor;
            } else {
                for (double& c : theta.supply_cost)
                    c *= factor;
            }
            const double utility = true_net(run_mechanism(reported, pref, options));
            report.points.push_back({parameter, factor, utility, utility - report.truthful_utility});
        }
    }
    report.max_gain = 0.0;
    for (const auto& p : report.points)
        report.max_gain = std::max(report.max_gain, p.gain);
    return report;
}

} // namespace datamarket
