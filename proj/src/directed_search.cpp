#include "datamarket/directed_search.hpp"

#include "parallel.hpp"

#include <array>
#include <limits>
#include <string>

namespace datamarket {

std::vector<AgentIndex> sellers_for(std::size_t n_agents, AgentIndex buyer)
{
    std::vector<AgentIndex> out;
    for (AgentIndex k = 0; k < n_agents; ++k)
        if (k != buyer)
            out.push_back(k);
    return out;
}

SubsetChoice best_subset(const std::vector<AgentIndex>& candidates,
                         const std::function<double(AgentSet)>& objective)
{
    const std::size_t m = candidates.size();
    SubsetChoice best{AgentSet{}, -std::numeric_limits<double>::infinity()};
    // rank r enumerates indicator vectors in lexicographic order: bit
    // (m-1-b) of r is the indicator of candidates[b].
    for (std::size_t r = 0; r < (std::size_t{1} << m); ++r) {
        AgentSet s;
        for (std::size_t b = 0; b < m; ++b)
            if ((r >> (m - 1 - b)) & 1U)
                s = s.with(candidates[b]);
        const double v = objective(s);
        if (compare_values(v, best.value) > 0 || r == 0) {
            best.chosen = s;
            best.value = v;
        }
    }
    return best;
}

namespace {

double buyer_term(const Profiles& profiles, const PreferenceModel& pref, AgentIndex buyer, AgentSet sellers,
                  const DirectedObjective& objective)
{
    double term = 0.0;
    if (objective.excluded != buyer)
        term += incoming_utility(profiles, pref, buyer, sellers, objective.edge_weight);
    sellers.for_each([&](AgentIndex k) {
        if (objective.excluded != k)
            term -= profiles[k].theta.supply_cost[buyer];
    });
    return term;
}

std::size_t ordered_pairs(std::size_t n) { return n * (n - 1); }

void incoming_from_index(std::size_t n, std::uint64_t index, AgentSet* incoming)
{
    for (AgentIndex j = 0; j < n; ++j)
        incoming[j] = AgentSet{};
    std::size_t bit = 0;
    for (AgentIndex i = 0; i < n; ++i)
        for (AgentIndex j = 0; j < n; ++j) {
            if (i == j)
                continue;
            if ((index >> bit) & 1U)
                incoming[j] = incoming[j].with(i);
            ++bit;
        }
}

DirectedGraph graph_from_index(std::size_t n, std::uint64_t index)
{
    std::array<AgentSet, AgentSet::capacity> incoming{};
    incoming_from_index(n, index, incoming.data());
    DirectedGraph g(n);
    for (AgentIndex j = 0; j < n; ++j)
        g.set_incoming(j, incoming[j]);
    return g;
}

/// Sum of V_i = U_i(S^I_i) - C_i(S^O_i) over counted agents, evaluated
/// agent by agent (seller-side costs), not through the buyer split.
double value_from_incoming(const Profiles& profiles, const PreferenceModel& pref, const AgentSet* incoming,
                           const DirectedObjective& objective)
{
    const std::size_t n = profiles.size();
    double total = 0.0;
    for (AgentIndex i = 0; i < n; ++i) {
        if (objective.excluded == i)
            continue;
        double cost = 0.0;
        for (AgentIndex j = 0; j < n; ++j)
            if (incoming[j].contains(i))
                cost += profiles[i].theta.supply_cost[j];
        total += incoming_utility(profiles, pref, i, incoming[i], objective.edge_weight) - cost;
    }
    return total;
}

} // namespace

double directed_objective_value(const Profiles& profiles, const PreferenceModel& pref, const DirectedGraph& g,
                                const DirectedObjective& objective)
{
    const WeightedDirectedGraph weighted(g, objective.edge_weight);
    double total = 0.0;
    for (AgentIndex j = 0; j < profiles.size(); ++j)
        if (objective.excluded != j)
            total += total_utility(profiles, pref, weighted, j);
    return total;
}

DirectedOptimum maximize_decomposed(const Profiles& profiles, const PreferenceModel& pref,
                                    const DirectedObjective& objective)
{
    const std::size_t n = profiles.size();
    DirectedGraph g(n);
    const bool isolate = objective.isolate_excluded && objective.excluded;
    for (AgentIndex buyer = 0; buyer < n; ++buyer) {
        if (isolate && buyer == *objective.excluded)
            continue;
        auto sellers = sellers_for(n, buyer);
        if (isolate)
            std::erase(sellers, *objective.excluded);
        const auto choice = best_subset(sellers, [&](AgentSet s) {
            return buyer_term(profiles, pref, buyer, s, objective);
        });
        g.set_incoming(buyer, choice.chosen);
    }
    const double value = directed_objective_value(profiles, pref, g, objective);
    return {std::move(g), value};
}

DirectedOptimum maximize_brute(const Profiles& profiles, const PreferenceModel& pref,
                               const DirectedObjective& objective, Execution exec, std::size_t cap)
{
    const std::size_t n = profiles.size();
    if (n > cap)
        throw OracleScaleError("brute-force graph search is capped at " + std::to_string(cap) + " agents, got " +
                               std::to_string(n));
    const std::uint64_t graphs = std::uint64_t{1} << ordered_pairs(n);

    auto better = [](double v, std::uint64_t idx, double best_v, std::uint64_t best_idx) {
        return v > best_v || (v == best_v && idx < best_idx);
    };

    double best_value = -std::numeric_limits<double>::infinity();
    std::uint64_t best_index = graphs;
    const bool isolate = objective.isolate_excluded && objective.excluded;
    auto admissible = [&](const AgentSet* incoming) {
        if (!isolate)
            return true;
        const AgentIndex x = *objective.excluded;
        if (!incoming[x].empty())
            return false;
        for (AgentIndex j = 0; j < n; ++j)
            if (incoming[j].contains(x))
                return false;
        return true;
    };

    if (exec == Execution::serial) {
        std::array<AgentSet, AgentSet::capacity> incoming{};
        for (std::uint64_t idx = 0; idx < graphs; ++idx) {
            incoming_from_index(n, idx, incoming.data());
            if (!admissible(incoming.data()))
                continue;
            const double v = value_from_incoming(profiles, pref, incoming.data(), objective);
            if (better(v, idx, best_value, best_index)) {
                best_value = v;
                best_index = idx;
            }
        }
    } else {
        detail::FirstError error;
#pragma omp parallel
        {
            double local_value = -std::numeric_limits<double>::infinity();
            std::uint64_t local_index = graphs;
            std::array<AgentSet, AgentSet::capacity> incoming{};
#pragma omp for schedule(static) nowait
            for (std::int64_t k = 0; k < static_cast<std::int64_t>(graphs); ++k) {
                const auto idx = static_cast<std::uint64_t>(k);
                try {
                    incoming_from_index(n, idx, incoming.data());
                    if (!admissible(incoming.data()))
                        continue;
                    const double v = value_from_incoming(profiles, pref, incoming.data(), objective);
                    if (better(v, idx, local_value, local_index)) {
                        local_value = v;
                        local_index = idx;
                    }
                } catch (...) {
                    error.record(idx);
                }
            }
#pragma omp critical(datamarket_brute_merge)
            if (better(local_value, local_index, best_value, best_index)) {
                best_value = local_value;
                best_index = local_index;
            }
        }
        error.rethrow_if_any();
    }
    return {graph_from_index(n, best_index), best_value};
}

} // namespace datamarket
