#include "datamarket/model.hpp"

#include <cmath>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <mutex>
#include <string>

namespace datamarket {

int compare_values(double lhs, double rhs)
{
    const double diff = lhs - rhs;
    if (diff > kIndifference)
        return 1;
    if (diff < -kIndifference)
        return -1;
    return 0;
}

std::vector<AgentIndex> AgentSet::members() const
{
    std::vector<AgentIndex> out;
    out.reserve(size());
    for_each([&](AgentIndex k) { out.push_back(k); });
    return out;
}

std::vector<int> AgentSet::ids() const
{
    std::vector<int> out;
    out.reserve(size());
    for_each([&](AgentIndex k) { out.push_back(static_cast<int>(k) + 1); });
    return out;
}

void validate_profiles(const Profiles& profiles)
{
    const std::size_t n = profiles.size();
    if (n > AgentSet::capacity)
        throw ContractViolation("at most 32 agents are supported");
    for (std::size_t k = 0; k < n; ++k) {
        const auto& p = profiles[k];
        const std::string who = "agent " + std::to_string(k + 1);
        if (p.id != static_cast<int>(k) + 1)
            throw ContractViolation("agent ids must be contiguous 1..N in order; found id " +
                                    std::to_string(p.id) + " at position " + std::to_string(k + 1));
        if (!(p.data_size > 0.0) || !std::isfinite(p.data_size))
            throw ContractViolation(who + ": data size must be positive and finite");
        if (!(p.theta.benefit_scale > 0.0) || !std::isfinite(p.theta.benefit_scale))
            throw ContractViolation(who + ": benefit scale must be positive and finite");
        if (!(p.theta.connection_cost >= 0.0) || !std::isfinite(p.theta.connection_cost))
            throw ContractViolation(who + ": connection cost must be nonnegative and finite");
        if (p.theta.supply_cost.size() != n)
            throw ContractViolation(who + ": supply cost row must have one entry per agent");
        for (std::size_t j = 0; j < n; ++j) {
            const double c = p.theta.supply_cost[j];
            if (!(c >= 0.0) || !std::isfinite(c))
                throw ContractViolation(who + ": supply costs must be nonnegative and finite");
        }
    }
}

PreferenceModel PreferenceModel::from_rankings(std::size_t n_agents,
                                               const std::vector<std::vector<AgentSet>>& best_first)
{
    if (best_first.size() != n_agents)
        throw MalformedModel("one ranking per agent is required");
    OrdinalPreference model;
    for (std::size_t n = 0; n < n_agents; ++n) {
        PreferenceTable table;
        table.values.assign(std::size_t{1} << n_agents, std::nullopt);
        const auto& list = best_first[n];
        for (std::size_t pos = 0; pos < list.size(); ++pos) {
            const AgentSet s = list[pos];
            if (!s.contains(n) || !s.subset_of(AgentSet::first(n_agents)))
                throw MalformedModel("ranking of agent " + std::to_string(n + 1) +
                                     " lists a subset that does not contain it");
            if (table.values[s.bits()])
                throw MalformedModel("ranking of agent " + std::to_string(n + 1) + " repeats a subset");
            table.values[s.bits()] = static_cast<double>(list.size() - pos);
        }
        model.tables.push_back(std::move(table));
    }
    return PreferenceModel(std::move(model));
}

PreferenceModel PreferenceModel::from_values(
    std::size_t n_agents, const std::vector<std::vector<std::pair<AgentSet, double>>>& entries)
{
    if (entries.size() != n_agents)
        throw MalformedModel("one value table per agent is required");
    OrdinalPreference model;
    for (std::size_t n = 0; n < n_agents; ++n) {
        PreferenceTable table;
        table.cardinal = true;
        table.values.assign(std::size_t{1} << n_agents, std::nullopt);
        for (const auto& [s, v] : entries[n]) {
            if (!s.contains(n) || !s.subset_of(AgentSet::first(n_agents)))
                throw MalformedModel("value table of agent " + std::to_string(n + 1) +
                                     " lists a subset that does not contain it");
            if (!std::isfinite(v))
                throw MalformedModel("value table of agent " + std::to_string(n + 1) + " has a non-finite value");
            if (table.values[s.bits()])
                throw MalformedModel("value table of agent " + std::to_string(n + 1) + " repeats a subset");
            table.values[s.bits()] = v;
        }
        model.tables.push_back(std::move(table));
    }
    return PreferenceModel(std::move(model));
}

namespace {

double pooled_size(const Profiles& profiles, AgentSet s)
{
    double total = 0.0;
    s.for_each([&](AgentIndex k) { total += profiles[k].data_size; });
    return total;
}

double table_lookup(const PreferenceModel& pref, AgentIndex agent, AgentSet s)
{
    const auto& tables = pref.ordinal().tables;
    if (agent >= tables.size() || s.bits() >= tables[agent].values.size())
        throw MalformedModel("preference table does not cover agent " + std::to_string(agent + 1));
    const auto& v = tables[agent].values[s.bits()];
    if (!v) {
        std::string set;
        for (int id : s.ids())
            set += (set.empty() ? "" : ",") + std::to_string(id);
        throw MalformedModel("preference table of agent " + std::to_string(agent + 1) + " has no entry for {" +
                             set + "}");
    }
    return *v;
}

} // namespace

double eval_bilateral(const Profiles& profiles, const PreferenceModel& pref, AgentIndex agent, AgentSet s)
{
    if (agent >= profiles.size() || !s.contains(agent))
        throw ContractViolation("subset must contain the evaluating agent");
    if (!s.subset_of(AgentSet::first(profiles.size())))
        throw ContractViolation("subset names agents outside the scenario");
    if (!pref.is_canonical())
        return table_lookup(pref, agent, s);
    const auto& theta = profiles[agent].theta;
    return theta.benefit_scale * std::sqrt(pooled_size(profiles, s)) -
           theta.connection_cost * static_cast<double>(s.size() - 1);
}

BilateralTable::BilateralTable(const Profiles& profiles, const PreferenceModel& pref)
    : n_(profiles.size()), values_(n_ << n_, std::numeric_limits<double>::quiet_NaN())
{
    if (n_ > 20)
        throw OracleScaleError("bilateral tables are limited to 20 agents");
    const std::size_t subsets = std::size_t{1} << n_;
    for (AgentIndex agent = 0; agent < n_; ++agent) {
        for (std::size_t bits = 0; bits < subsets; ++bits) {
            const AgentSet s(static_cast<AgentSet::Bits>(bits));
            if (!s.contains(agent))
                continue;
            if (!pref.is_canonical()) {
                const auto& table = pref.ordinal().tables;
                if (agent >= table.size() || !table[agent].values[bits])
                    continue;
            }
            values_[agent * subsets + bits] = eval_bilateral(profiles, pref, agent, s);
        }
    }
}

double BilateralTable::value(AgentIndex agent, AgentSet s) const
{
    const double v = values_[(agent << n_) + s.bits()];
    if (std::isnan(v)) {
        if (!s.contains(agent))
            throw ContractViolation("subset must contain the evaluating agent");
        std::string set;
        for (int id : s.ids())
            set += (set.empty() ? "" : ",") + std::to_string(id);
        throw MalformedModel("preference table of agent " + std::to_string(agent + 1) + " has no entry for {" +
                             set + "}");
    }
    return v;
}

void SharingGraph::add_edge(AgentIndex i, AgentIndex j)
{
    if (i == j)
        throw ContractViolation("sharing graphs have no self-loops");
    adj_[i] = adj_[i].with(j);
    adj_[j] = adj_[j].with(i);
}

void SharingGraph::remove_edge(AgentIndex i, AgentIndex j)
{
    adj_[i] = adj_[i].without(j);
    adj_[j] = adj_[j].without(i);
}

std::size_t SharingGraph::edge_count() const
{
    std::size_t total = 0;
    for (auto s : adj_)
        total += s.size();
    return total / 2;
}

std::vector<std::pair<AgentIndex, AgentIndex>> SharingGraph::edges() const
{
    std::vector<std::pair<AgentIndex, AgentIndex>> out;
    for (AgentIndex i = 0; i < adj_.size(); ++i)
        adj_[i].for_each([&](AgentIndex j) {
            if (i < j)
                out.emplace_back(i, j);
        });
    return out;
}

void DirectedGraph::add_edge(AgentIndex from, AgentIndex to)
{
    if (from == to)
        throw ContractViolation("directed graphs have no self-loops");
    in_[to] = in_[to].with(from);
}

void DirectedGraph::set_incoming(AgentIndex agent, AgentSet from)
{
    if (from.contains(agent))
        throw ContractViolation("directed graphs have no self-loops");
    in_[agent] = from;
}

AgentSet DirectedGraph::outgoing(AgentIndex agent) const
{
    AgentSet out;
    for (AgentIndex j = 0; j < in_.size(); ++j)
        if (in_[j].contains(agent))
            out = out.with(j);
    return out;
}

std::size_t DirectedGraph::edge_count() const
{
    std::size_t total = 0;
    for (auto s : in_)
        total += s.size();
    return total;
}

std::vector<std::pair<AgentIndex, AgentIndex>> DirectedGraph::edges() const
{
    std::vector<std::pair<AgentIndex, AgentIndex>> out;
    for (AgentIndex i = 0; i < in_.size(); ++i)
        for (AgentIndex j = 0; j < in_.size(); ++j)
            if (in_[j].contains(i))
                out.emplace_back(i, j);
    return out;
}

WeightedDirectedGraph::WeightedDirectedGraph(DirectedGraph base, double weight)
    : base_(std::move(base)), weights_(base_.n_agents() * base_.n_agents(), 0.0)
{
    if (!(weight >= 0.0) || !std::isfinite(weight))
        throw ContractViolation("edge weights must be finite and nonnegative");
    for (auto [i, j] : base_.edges())
        weights_[i * base_.n_agents() + j] = weight;
}

double WeightedDirectedGraph::weight(AgentIndex from, AgentIndex to) const
{
    return weights_[from * base_.n_agents() + to];
}

void WeightedDirectedGraph::set_weight(AgentIndex from, AgentIndex to, double w)
{
    if (!base_.has_edge(from, to))
        throw ContractViolation("weights exist only on edges");
    if (!(w >= 0.0) || !std::isfinite(w))
        throw ContractViolation("edge weights must be finite and nonnegative");
    weights_[from * base_.n_agents() + to] = w;
}

void WeightedDirectedGraph::scale_incoming(AgentIndex agent, double factor)
{
    base_.incoming(agent).for_each(
        [&](AgentIndex from) { set_weight(from, agent, weight(from, agent) * factor); });
}

double incoming_utility(const Profiles& profiles, const PreferenceModel& pref, AgentIndex agent,
                        AgentSet incoming, double weight)
{
    if (pref.is_canonical()) {
        double received = 0.0;
        incoming.for_each([&](AgentIndex j) { received += profiles[j].data_size; });
        return profiles[agent].theta.benefit_scale * std::sqrt(profiles[agent].data_size + weight * received);
    }
    if (weight != 1.0 && !incoming.empty())
        throw MalformedModel("table preferences have no meaning for distorted data");
    return table_lookup(pref, agent, incoming.with(agent));
}

double supply_cost(const Profiles& profiles, AgentIndex agent, AgentSet outgoing)
{
    double total = 0.0;
    const auto& row = profiles[agent].theta.supply_cost;
    outgoing.for_each([&](AgentIndex j) { total += row[j]; });
    return total;
}

double total_utility(const Profiles& profiles, const PreferenceModel& pref, const DirectedGraph& g,
                     AgentIndex agent)
{
    if (g.n_agents() != profiles.size())
        throw ContractViolation("graph and profiles disagree on the number of agents");
    return incoming_utility(profiles, pref, agent, g.incoming(agent)) -
           supply_cost(profiles, agent, g.outgoing(agent));
}

double total_utility(const Profiles& profiles, const PreferenceModel& pref, const WeightedDirectedGraph& g,
                     AgentIndex agent)
{
    if (g.n_agents() != profiles.size())
        throw ContractViolation("graph and profiles disagree on the number of agents");
    const AgentSet in = g.base().incoming(agent);
    double benefit = 0.0;
    if (pref.is_canonical()) {
        double received = 0.0;
        in.for_each([&](AgentIndex j) { received += g.weight(j, agent) * profiles[j].data_size; });
        benefit = profiles[agent].theta.benefit_scale * std::sqrt(profiles[agent].data_size + received);
    } else {
        in.for_each([&](AgentIndex j) {
            if (g.weight(j, agent) != 1.0)
                throw MalformedModel("table preferences have no meaning for distorted data");
        });
        benefit = table_lookup(pref, agent, in.with(agent));
    }
    return benefit - supply_cost(profiles, agent, g.base().outgoing(agent));
}

double total_welfare(const Profiles& profiles, const PreferenceModel& pref, const WeightedDirectedGraph& g)
{
    double total = 0.0;
    for (AgentIndex i = 0; i < profiles.size(); ++i)
        total += total_utility(profiles, pref, g, i);
    return total;
}

bool strictly_ordered_sizes(const Profiles& profiles)
{
    for (std::size_t k = 1; k < profiles.size(); ++k)
        if (!(profiles[k - 1].data_size > profiles[k].data_size))
            return false;
    return true;
}

OracleLimits OracleLimits::from_environment()
{
    OracleLimits limits;
    const char* raw = std::getenv("DATAMARKET_ORACLE_CAP");
    if (raw == nullptr || *raw == '\0')
        return limits;
    char* end = nullptr;
    const long cap = std::strtol(raw, &end, 10);
    if (end == raw || *end != '\0' || cap < 1 || cap > 16) {
        std::cerr << "warning: ignoring DATAMARKET_ORACLE_CAP='" << raw << "' (expected 1..16)\n";
        return limits;
    }
    static std::once_flag warned;
    std::call_once(warned, [&] {
        std::cerr << "warning: DATAMARKET_ORACLE_CAP=" << cap
                  << " overrides brute-force caps; large values may run for a very long time\n";
    });
    limits.stability = static_cast<std::size_t>(cap);
    limits.directed = static_cast<std::size_t>(cap);
    return limits;
}

} // namespace datamarket
