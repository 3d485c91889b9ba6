#include "datamarket/report.hpp"

#include "datamarket/bilateral.hpp"
#include "datamarket/dp.hpp"
#include "datamarket/mechanism.hpp"
#include "datamarket/unilateral.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>


namespace datamarket {

using nlohmann::ordered_json;

namespace {

constexpr double kMarketTolerance = 1e-12;

ordered_json id_list(AgentSet s) { return s.ids(); }

ordered_json id_list(const std::vector<AgentIndex>& agents)
{
    ordered_json out = ordered_json::array();
    for (AgentIndex a : agents)
        out.push_back(a + 1);
    return out;
}

ordered_json edge_list(const SharingGraph& g)
{
    ordered_json out = ordered_json::array();
    for (auto [i, j] : g.edges())
        out.push_back({i + 1, j + 1});
    return out;
}

ordered_json edge_list(const DirectedGraph& g)
{
    ordered_json out = ordered_json::array();
    for (auto [i, j] : g.edges())
        out.push_back({i + 1, j + 1});
    return out;
}

ordered_json count_matrix(const QueryGraph& g)
{
    ordered_json out = ordered_json::array();
    for (AgentIndex i = 0; i < g.n_agents(); ++i) {
        ordered_json row = ordered_json::array();
        for (AgentIndex j = 0; j < g.n_agents(); ++j)
            row.push_back(g.count(i, j));
        out.push_back(row);
    }
    return out;
}

ordered_json quality_matrix(const QueryGraph& g)
{
    ordered_json out = ordered_json::array();
    for (AgentIndex i = 0; i < g.n_agents(); ++i) {
        ordered_json row = ordered_json::array();
        for (AgentIndex j = 0; j < g.n_agents(); ++j)
            row.push_back(g.count(i, j) > 0 ? g.quality(i, j) : 0.0);
        out.push_back(row);
    }
    return out;
}

ordered_json price_matrix(const PriceSchedule& p)
{
    ordered_json out = ordered_json::array();
    for (AgentIndex i = 0; i < p.n_agents(); ++i) {
        ordered_json row = ordered_json::array();
        for (AgentIndex j = 0; j < p.n_agents(); ++j)
            row.push_back(p(i, j));
        out.push_back(row);
    }
    return out;
}

class Checks {
public:
    void add(const std::string& name, bool pass, double slack, std::size_t checked)
    {
        doc_[name] = ordered_json{{"pass", pass}, {"slack", slack}, {"checked", checked}};
        ok_ = ok_ && pass;
    }
    void add(const Check& c) { add(c.name, c.pass, c.slack, c.checked); }

    ordered_json doc() const { return doc_.empty() ? ordered_json::object() : doc_; }
    bool ok() const { return ok_; }

private:
    ordered_json doc_ = ordered_json::object();
    bool ok_ = true;
};

ordered_json witness_json(const std::optional<PropertyWitness>& w)
{
    if (!w)
        return nullptr;
    return ordered_json{{"agent", w->agent + 1}, {"i", w->i + 1},         {"j", w->j + 1},
                        {"base", id_list(w->base)}, {"added", id_list(w->added)}, {"reason", w->reason}};
}

ordered_json deviation_json(const Deviation& d)
{
    return ordered_json{{"coalition", id_list(d.coalition)},
                        {"new_graph", edge_list(d.new_graph)},
                        {"weak_gainers", id_list(d.weak_gainers)},
                        {"strict_gainer", d.strict_gainer + 1}};
}

bool cardinal_model(const PreferenceModel& pref)
{
    return pref.is_canonical() || pref.ordinal().tables.empty() || pref.ordinal().tables[0].cardinal;
}

double bilateral_value(const Profiles& profiles, const PreferenceModel& pref, const SharingGraph& g)
{
    double total = 0.0;
    for (AgentIndex i = 0; i < profiles.size(); ++i)
        total += eval_bilateral(profiles, pref, i, g.neighborhood(i));
    return total;
}

void run_match(const Scenario& s, const CommandOptions& opt, ordered_json& results, Checks& checks)
{
    const auto& profiles = s.profiles;
    const auto& pref = s.preference;
    const std::size_t n = profiles.size();
    const auto limits = OracleLimits::from_environment();

    const MatchResult m = ordered_match(profiles, pref);
    results["order"] = id_list(m.order);
    results["ranked_by_preference"] = m.ranked_by_preference;
    results["graph"] = edge_list(m.graph);
    results["proposals_made"] = m.proposals_made;
    checks.add("proposal_bound", m.proposals_made <= n * (n - 1) / 2,
               static_cast<double>(n * (n - 1) / 2) - static_cast<double>(m.proposals_made), 1);

    const TopAgentResult top = check_top_agent(profiles, pref, limits.stability);
    const ComplementarityResult lc = check_limited_complementarity(profiles, pref, limits.stability);
    results["properties"] = {{"top_agent", top.pass}, {"limited_complementarity", lc.pass}};

    ordered_json stability = ordered_json::object();
    if (n <= limits.stability) {
        const auto cert = is_strongly_stable(profiles, pref, m.graph, opt.exec, limits.stability);
        stability["checked"] = true;
        stability["stable"] = cert.stable;
        stability["witness"] = cert.witness ? deviation_json(*cert.witness) : ordered_json(nullptr);
        const bool hypotheses = top.pass && lc.pass;
        checks.add("stability_under_hypotheses", !hypotheses || cert.stable, 0.0, hypotheses ? 1 : 0);
        if (cert.witness)
            checks.add("witness_verified", verify_deviation(BilateralTable(profiles, pref), m.graph, *cert.witness),
                       0.0, 1);
    } else {
        stability["checked"] = false;
        stability["reason"] = "more than " + std::to_string(limits.stability) + " agents";
    }
    results["stability"] = stability;

    if (opt.certify) {
        ordered_json cert = ordered_json::object();
        if (n <= limits.stability) {
            const auto stable = all_stable_graphs(profiles, pref, opt.exec, limits.stability);
            cert["graphs_enumerated"] = std::uint64_t{1} << (n * (n - 1) / 2);
            cert["stable_graphs"] = ordered_json::array();
            for (const auto& g : stable)
                cert["stable_graphs"].push_back(edge_list(g));
            cert["stable_exists"] = !stable.empty();
            const bool listed = std::find(stable.begin(), stable.end(), m.graph) != stable.end();
            const bool expected = results["stability"]["stable"].get<bool>();
            checks.add("certificate_consistent", listed == expected, 0.0, 1);
        } else {
            cert["checked"] = false;
        }
        results["certificate"] = cert;
    }

    if (cardinal_model(pref)) {
        results["match_value"] = bilateral_value(profiles, pref, m.graph);
        if (n <= limits.stability) {
            const auto best = welfare_max_bilateral(profiles, pref, limits.stability);
            results["welfare_max"] = {{"graph", edge_list(best.graph)}, {"value", best.value}};
        }
    }
}

void run_properties(const Scenario& s, ordered_json& results, Checks& checks)
{
    const auto limits = OracleLimits::from_environment();
    const TopAgentResult top = check_top_agent(s.profiles, s.preference, limits.stability);
    const ComplementarityResult lc = check_limited_complementarity(s.profiles, s.preference, limits.stability);
    results["top_agent"] = {{"pass", top.pass},
                            {"common_ranking", id_list(top.common_ranking)},
                            {"witness", witness_json(top.witness)}};
    results["limited_complementarity"] = {{"pass", lc.pass}, {"witness", witness_json(lc.witness)}};
    ordered_json witnesses = ordered_json::array();
    if (top.witness)
        witnesses.push_back({{"property", "top_agent"}, {"witness", witness_json(top.witness)}});
    if (lc.witness)
        witnesses.push_back({{"property", "limited_complementarity"}, {"witness", witness_json(lc.witness)}});
    results["witnesses"] = witnesses;
    checks.add("witness_consistency", top.pass == !top.witness && lc.pass == !lc.witness, 0.0, 2);
}

bool demand_is_optimal(const Profiles& profiles, const PreferenceModel& pref, AgentIndex buyer, AgentSet chosen,
                       const PriceSchedule& prices, double& slack)
{
    const std::size_t n = profiles.size();
    const double value = demand_objective(profiles, pref, buyer, chosen, prices);
    bool ok = true;
    const AgentSet others = AgentSet::first(n).without(buyer);
    for (AgentSet::Bits b = 0; b < (AgentSet::Bits{1} << n); ++b) {
        const AgentSet s(b);
        if (!s.subset_of(others))
            continue;
        const double gap = demand_objective(profiles, pref, buyer, s, prices) - value;
        slack = std::max(slack, gap);
        if (gap > kIndifference)
            ok = false;
    }
    return ok;
}

void run_prices(const Scenario& s, const CommandOptions& opt, ordered_json& results, Checks& checks)
{
    const auto& profiles = s.profiles;
    const auto& pref = s.preference;
    const std::size_t n = profiles.size();
    const auto limits = OracleLimits::from_environment();
    const CompetitiveOutcome out = competitive_allocation(profiles, pref, opt.exec);
    const auto& alloc = out.allocation;

    results["price_matrix"] = price_matrix(out.prices);
    ordered_json demand = ordered_json::array();
    ordered_json supply = ordered_json::array();
    for (AgentIndex i = 0; i < n; ++i) {
        demand.push_back(id_list(alloc.demand[i]));
        supply.push_back(id_list(alloc.supply[i]));
    }
    results["allocation"] = {{"edges", edge_list(alloc.graph)}, {"demand", demand}, {"supply", supply}};
    results["transfers"] = alloc.transfers;
    results["welfare"] = out.welfare;

    bool clears = true;
    for (AgentIndex seller = 0; seller < n; ++seller) {
        AgentSet buyers;
        for (AgentIndex b = 0; b < n; ++b)
            if (alloc.demand[b].contains(seller))
                buyers = buyers.with(b);
        clears = clears && buyers == alloc.supply[seller];
    }
    checks.add("market_clears", clears, 0.0, n);

    const double imbalance = std::abs(std::accumulate(alloc.transfers.begin(), alloc.transfers.end(), 0.0));
    checks.add("transfers_balance", imbalance <= kIdentityTolerance, imbalance, 1);

    if (n <= 12) {
        bool optimal = true;
        double slack = 0.0;
        for (AgentIndex b = 0; b < n; ++b)
            optimal = demand_is_optimal(profiles, pref, b, alloc.demand[b], out.prices, slack) && optimal;
        checks.add("demand_optimal", optimal, slack, n);
    }

    double neutral_slack = 0.0;
    std::size_t perturbations = 0;
    for (AgentIndex seller = 0; seller < n; ++seller) {
        const double base = net_utility(profiles, pref, alloc.graph, out.prices, seller);
        for (AgentIndex b = 0; b < n; ++b) {
            if (b == seller)
                continue;
            DirectedGraph g = alloc.graph;
            if (g.has_edge(seller, b))
                g.remove_edge(seller, b);
            else
                g.add_edge(seller, b);
            ++perturbations;
            neutral_slack =
                std::max(neutral_slack, std::abs(net_utility(profiles, pref, g, out.prices, seller) - base));
        }
    }
    checks.add("supply_neutral", neutral_slack <= kMarketTolerance, neutral_slack, perturbations);

    const bool brute = n <= limits.directed;
    const auto best = welfare_max_directed(profiles, pref, brute ? WelfareMode::brute : WelfareMode::decomposed,
                                           opt.exec, limits.directed);
    results["welfare_max"] = {{"method", brute ? "brute" : "decomposed"}, {"value", best.value}};
    const double gap = std::abs(out.welfare - best.value);
    checks.add("welfare_optimal", gap <= kIdentityTolerance, gap, 1);

    results["equilibrium_checks"] = {{"market_clears", clears},
                                     {"supply_neutral", neutral_slack <= kMarketTolerance},
                                     {"welfare_optimal", gap <= kIdentityTolerance}};
}

void run_price_interval(const Scenario& s, const CommandOptions& opt, ordered_json& results, Checks& checks)
{
    const int n = static_cast<int>(s.n_agents());
    if (!opt.pair)
        throw ContractViolation("price-interval needs --pair seller,buyer");
    const auto [m, j] = *opt.pair;
    if (m < 1 || m > n || j < 1 || j > n || m == j)
        throw ContractViolation("--pair needs two distinct agent ids in 1.." + std::to_string(n));
    const PriceInterval iv = price_upper_bound(s.profiles, s.preference, m - 1, j - 1);
    results["seller"] = m;
    results["buyer"] = j;
    results["cost"] = iv.cost;
    results["upper"] = iv.upper;
    results["headroom"] = iv.headroom;
    results["degenerate"] = iv.degenerate;
    checks.add("below_unchanged", iv.below_unchanged, 0.0, 1);
    checks.add("above_changed_or_indifferent", iv.above_changed_or_indifferent, 0.0, 1);
}

MechanismOptions mechanism_options(const CommandOptions& opt)
{
    MechanismOptions m;
    if (opt.mode == "standard")
        m.kind = MechanismKind::standard;
    else if (opt.mode == "mixed")
        m.kind = MechanismKind::mixed;
    else if (opt.mode == "d-mixed")
        m.kind = MechanismKind::d_mixed;
    else
        throw ContractViolation("unknown mode '" + opt.mode + "' (standard, mixed or d-mixed)");
    if (opt.pivot == "keep-data")
        m.pivot = PivotRule::keep_data;
    else if (opt.pivot == "remove-agent")
        m.pivot = PivotRule::remove_agent;
    else
        throw ContractViolation("unknown pivot rule '" + opt.pivot + "' (keep-data or remove-agent)");
    m.w0 = opt.w0;
    m.alpha_max = opt.alpha_max;
    m.exec = opt.exec;
    return m;
}

void run_vcg(const Scenario& s, const CommandOptions& opt, ordered_json& results, Checks& checks)
{
    const auto& profiles = s.profiles;
    const auto& pref = s.preference;
    const std::size_t n = profiles.size();
    const MechanismOptions mopt = mechanism_options(opt);
    const MechanismOutcome out = run_mechanism(profiles, pref, mopt);

    results["mode"] = opt.mode;
    results["base_weight"] = out.core.base_weight;
    results["g_star"] = edge_list(out.core.g_star);
    results["t_tilde"] = out.core.t_tilde;
    results["delta"] = out.core.delta;
    results["t"] = out.money;
    results["t_d"] = out.data_money;
    results["alpha"] = out.alpha;
    results["capacity"] = out.capacity;
    results["residual"] = out.residual;
    results["balanced"] = out.balanced();
    std::vector<double> net(n);
    for (AgentIndex i = 0; i < n; ++i)
        net[i] = mechanism_net_utility(profiles, pref, out, i);
    results["net_utility"] = net;
    results["sw_agents"] = agents_welfare(profiles, pref, out);
    results["sw_total"] = total_social_welfare(profiles, pref, out);

    // Autarky comparison for every agent, including those the IR check skips.
    const WeightedDirectedGraph empty{DirectedGraph(n)};
    ordered_json below = ordered_json::array();
    for (AgentIndex i = 0; i < n; ++i)
        if (net[i] < total_utility(profiles, pref, empty, i) - kIdentityTolerance)
            below.push_back(i + 1);
    results["below_autarky"] = below;

    for (const auto& c : check_mechanism(profiles, pref, out))
        checks.add(c);
}

void run_probe(const Scenario& s, const CommandOptions& opt, ordered_json& results, Checks& checks)
{
    const std::size_t n = s.n_agents();
    const MechanismOptions mopt = mechanism_options(opt);
    std::vector<AgentIndex> agents;
    if (opt.agent) {
        if (*opt.agent < 1 || static_cast<std::size_t>(*opt.agent) > n)
            throw ContractViolation("--agent must be in 1.." + std::to_string(n));
        agents.push_back(static_cast<AgentIndex>(*opt.agent - 1));
    } else {
        for (AgentIndex i = 0; i < n; ++i)
            agents.push_back(i);
    }
    results["mode"] = opt.mode;
    ordered_json probes = ordered_json::array();
    double max_gain = 0.0;
    std::size_t points = 0;
    for (AgentIndex a : agents) {
        const ProbeReport r = truthfulness_probe(s.profiles, s.preference, a, kMisreportFactors, mopt);
        ordered_json grid = ordered_json::array();
        for (const auto& p : r.points)
            grid.push_back({{"parameter", p.parameter}, {"factor", p.factor}, {"net_utility", p.net_utility},
                            {"gain", p.gain}});
        probes.push_back({{"agent", a + 1}, {"truthful_utility", r.truthful_utility}, {"points", grid},
                          {"max_gain", r.max_gain}});
        max_gain = std::max(max_gain, r.max_gain);
        points += r.points.size() - 1;
    }
    results["probes"] = probes;
    results["max_gain"] = max_gain;
    checks.add("truthfulness", max_gain <= kIdentityTolerance, max_gain, points);
}

QueryPreference dp_preference(const Scenario& s, const CommandOptions& opt, ordered_json& results)
{
    if (!s.preference.is_canonical())
        throw ContractViolation("query markets need the canonical preference model");
    DpSettings settings = s.dp.value_or(DpSettings{});
    if (opt.wmax && *opt.wmax != settings.max_queries) {
        settings.max_queries = *opt.wmax;
        settings.response.reset();
    }
    const QueryPreference q = settings.query_preference();
    results["wmax"] = q.max_queries();
    results["q"] = q.table();
    return q;
}

void run_dp(const Scenario& s, const CommandOptions& opt, ordered_json& results, Checks& checks)
{
    const auto& profiles = s.profiles;
    const std::size_t n = profiles.size();
    const QueryPreference q = dp_preference(s, opt, results);
    results["command"] = opt.dp_command;

    if (opt.dp_command == "match") {
        const DpMatchResult m = dp_ordered_match(profiles, q);
        results["order"] = id_list(m.order);
        results["counts"] = count_matrix(m.graph);
        results["proposals_made"] = m.proposals_made;
        bool within = true;
        for (AgentIndex i = 0; i < n; ++i)
            for (AgentIndex j = 0; j < n; ++j)
                within = within && m.graph.count(i, j) <= q.max_queries();
        checks.add("counts_within_cap", within, 0.0, n * n);
        ordered_json stability = ordered_json::object();
        try {
            const DpStability st = dp_is_strongly_stable(profiles, q, m.graph, opt.exec);
            stability["checked"] = true;
            stability["stable"] = st.stable;
            stability["deviations_checked"] = st.deviations_checked;
            if (st.witness) {
                stability["witness"] = {{"coalition", id_list(st.witness->coalition)},
                                        {"counts", count_matrix(st.witness->new_graph)},
                                        {"strict_gainer", st.witness->strict_gainer + 1}};
                checks.add("witness_verified",
                           is_dp_coalition_deviation(m.graph, st.witness->new_graph, st.witness->coalition), 0.0, 1);
            } else {
                stability["witness"] = nullptr;
            }
        } catch (const OracleScaleError& e) {
            stability["checked"] = false;
            stability["reason"] = e.what();
        }
        results["stability"] = stability;
    } else if (opt.dp_command == "prices") {
        const DpMarket market = dp_competitive_allocation(profiles, q, opt.exec);
        results["price_matrix"] = price_matrix(market.prices);
        results["counts"] = count_matrix(market.graph);
        results["transfers"] = market.transfers;
        results["welfare"] = market.welfare;
        bool clears = true;
        for (AgentIndex b = 0; b < n; ++b)
            for (AgentIndex sl = 0; sl < n; ++sl)
                clears = clears && market.graph.count(sl, b) == market.demand[b][sl];
        checks.add("market_clears", clears, 0.0, n);
        const double imbalance = std::abs(std::accumulate(market.transfers.begin(), market.transfers.end(), 0.0));
        checks.add("transfers_balance", imbalance <= kIdentityTolerance, imbalance, 1);
        DpOptimum best;
        std::string method = "brute";
        try {
            best = dp_maximize_brute(profiles, q, std::nullopt, opt.exec);
        } catch (const OracleScaleError&) {
            best = dp_maximize_decomposed(profiles, q);
            method = "decomposed";
        }
        results["welfare_max"] = {{"method", method}, {"value", best.value}};
        const double gap = std::abs(market.welfare - best.value);
        checks.add("welfare_optimal", gap <= kIdentityTolerance, gap, 1);
    } else if (opt.dp_command == "vcg") {
        const DpMechanismOutcome out = dp_vcg(profiles, q, opt.alpha_max, SolverMode::decomposed, opt.exec);
        results["g_star"] = count_matrix(out.g_star);
        results["t_tilde"] = out.t_tilde;
        results["delta"] = out.delta;
        results["t"] = out.money;
        results["t_d"] = out.data_money;
        results["alpha"] = out.alpha;
        results["capacity"] = out.capacity;
        results["residual"] = out.residual;
        results["balanced"] = out.balanced();
        results["quality"] = quality_matrix(out.allocation);
        for (const auto& c : dp_check_mechanism(profiles, q, out))
            checks.add(c);
    } else {
        throw ContractViolation("unknown dp command '" + opt.dp_command + "' (match, prices or vcg)");
    }
}

ordered_json echo_args(const std::string& command, const CommandOptions& opt)
{
    ordered_json args = ordered_json::object();
    if (command == "match")
        args["certify"] = opt.certify;
    if (command == "vcg" || command == "probe") {
        args["mode"] = opt.mode;
        if (opt.mode == "d-mixed")
            args["w0"] = opt.w0;
        if (opt.mode != "standard")
            args["alpha_max"] = opt.alpha_max;
        args["pivot"] = opt.pivot;
    }
    if (command == "probe")
        args["agent"] = opt.agent ? ordered_json(*opt.agent) : ordered_json("all");
    if (command == "price-interval" && opt.pair)
        args["pair"] = {opt.pair->first, opt.pair->second};
    if (command == "dp") {
        args["cmd"] = opt.dp_command;
        args["wmax"] = opt.wmax ? ordered_json(*opt.wmax) : ordered_json(nullptr);
        args["alpha_max"] = opt.alpha_max;
    }
    return args;
}

} // namespace

bool is_scenario_command(const std::string& command)
{
    return std::find(std::begin(kScenarioCommands), std::end(kScenarioCommands), command) !=
           std::end(kScenarioCommands);
}

Report run_command(const std::string& command, const Scenario& scenario, const CommandOptions& options)
{
    if (!is_scenario_command(command))
        throw ContractViolation("unknown command '" + command + "'");
    validate_scenario(scenario);
    const auto started = std::chrono::steady_clock::now();

    ordered_json results = ordered_json::object();
    Checks checks;
    if (command == "match")
        run_match(scenario, options, results, checks);
    else if (command == "check-properties")
        run_properties(scenario, results, checks);
    else if (command == "prices")
        run_prices(scenario, options, results, checks);
    else if (command == "price-interval")
        run_price_interval(scenario, options, results, checks);
    else if (command == "vcg")
        run_vcg(scenario, options, results, checks);
    else if (command == "probe")
        run_probe(scenario, options, results, checks);
    else
        run_dp(scenario, options, results, checks);

    Report report;
    report.ok = checks.ok();
    report.doc["command"] = command;
    report.doc["args"] = echo_args(command, options);
    report.doc["scenario"] = scenario.metadata.name;
    report.doc["scenario_digest"] = scenario_digest(scenario);
    report.doc["results"] = std::move(results);
    report.doc["checks"] = checks.doc();
    report.doc["status"] = report.ok ? "pass" : "fail";
    if (options.timing)
        report.doc["wall_time_s"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

Report run_sweep(const CommandOptions& options)
{
    if (!is_scenario_command(options.sweep_command))
        throw ContractViolation("sweep cannot run '" + options.sweep_command + "'");
    if (options.sweep_command == "price-interval")
        throw ContractViolation("sweep does not support price-interval");
    const auto started = std::chrono::steady_clock::now();

    struct Run {
        std::string digest;
        bool ok = false;
        std::vector<std::string> failed;
        std::string error;
    };
    std::vector<Run> runs(options.count);
    CommandOptions inner = options;
    inner.timing = false;
    inner.exec = Execution::serial;

    GeneratorParams params;
    params.n_agents = options.sweep_agents;
    auto one = [&](std::size_t k) {
        Run& r = runs[k];
        try {
            const Scenario s = generate_scenario(options.seed + k, params);
            r.digest = scenario_digest(s);
            const Report rep = run_command(options.sweep_command, s, inner);
            r.ok = rep.ok;
            for (const auto& [name, c] : rep.doc["checks"].items())
                if (!c["pass"].get<bool>())
                    r.failed.push_back(name);
        } catch (const std::exception& e) {
            r.error = e.what();
        }
    };
    detail::for_each_index(options.count, options.exec, one);

    ordered_json list = ordered_json::array();
    std::size_t passed = 0;
    std::size_t errors = 0;
    std::map<std::string, std::size_t> failures;
    for (std::size_t k = 0; k < runs.size(); ++k) {
        const Run& r = runs[k];
        ordered_json entry = {{"seed", options.seed + k}, {"scenario_digest", r.digest}};
        if (!r.error.empty()) {
            entry["status"] = "error";
            entry["error"] = r.error;
            ++errors;
        } else {
            entry["status"] = r.ok ? "pass" : "fail";
            entry["failed_checks"] = r.failed;
            passed += r.ok ? 1 : 0;
            for (const auto& f : r.failed)
                ++failures[f];
        }
        list.push_back(entry);
    }

    Report report;
    ordered_json results = ordered_json::object();
    results["runs"] = list;
    ordered_json failure_counts = ordered_json::object();
    for (const auto& [name, count] : failures)
        failure_counts[name] = count;
    results["summary"] = {{"runs", runs.size()},
                          {"passed", passed},
                          {"failed", runs.size() - passed - errors},
                          {"errors", errors},
                          {"failed_checks", failure_counts}};
    Checks checks;
    checks.add("all_runs_pass", passed == runs.size(), static_cast<double>(runs.size() - passed), runs.size());

    report.ok = checks.ok();
    ordered_json args = ordered_json::object();
    args["cmd"] = options.sweep_command;
    args["seed"] = options.seed;
    args["count"] = options.count;
    args["agents"] = options.sweep_agents;
    if (options.sweep_command == "vcg" || options.sweep_command == "probe") {
        args["mode"] = options.mode;
        args["pivot"] = options.pivot;
    }
    if (options.sweep_command == "dp")
        args["dp_cmd"] = options.dp_command;
    report.doc["command"] = "sweep";
    report.doc["args"] = args;
    report.doc["scenario"] = nullptr;
    report.doc["scenario_digest"] = nullptr;
    report.doc["results"] = std::move(results);
    report.doc["checks"] = checks.doc();
    report.doc["status"] = report.ok ? "pass" : "fail";
    if (options.timing)
        report.doc["wall_time_s"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

} // namespace datamarket
