#pragma once

// Welfare-style maximization over directed sharing graphs.
//
// Every objective here has the form sum over a set of counted agents of
// V_j(G), with every present edge carrying the same weight. Because costs
// are additive per edge, the objective splits into one independent subset
// problem per buyer; the brute-force kernel enumerates whole graphs instead
// and is kept as the reference that the decomposition is tested against.

#include "datamarket/model.hpp"

#include <functional>
#include <optional>

namespace datamarket {

/// Sellers available to `buyer`, in the order used for tie-breaking.
std::vector<AgentIndex> sellers_for(std::size_t n_agents, AgentIndex buyer);

/// Maximizes `objective` over subsets of `candidates`. Ties within the
/// indifference tolerance go to the lexicographically smallest indicator
/// vector, where candidates[0] is the most significant position (so the
/// empty set is the smallest and a set without candidates[0] precedes any
/// set containing it).
struct SubsetChoice {
    AgentSet chosen;
    double value = 0.0;
};
SubsetChoice best_subset(const std::vector<AgentIndex>& candidates,
                         const std::function<double(AgentSet)>& objective);

struct DirectedObjective {
    /// Weight placed on every present edge.
    double edge_weight = 1.0;
    /// Agent whose own V is dropped from the sum (the VCG pivot problem).
    std::optional<AgentIndex> excluded;
    /// Also forbid every edge incident to the excluded agent.
    bool isolate_excluded = false;
};

struct DirectedOptimum {
    DirectedGraph graph;
    double value = 0.0;
};

/// Value of `g` under the objective.
double directed_objective_value(const Profiles& profiles, const PreferenceModel& pref, const DirectedGraph& g,
                                const DirectedObjective& objective);

/// Per-buyer decomposition; exact whenever costs are additive, which holds
/// for every model in this library.
DirectedOptimum maximize_decomposed(const Profiles& profiles, const PreferenceModel& pref,
                                    const DirectedObjective& objective);

/// Enumerates all 2^(N(N-1)) directed graphs; ties go to the smallest graph
/// index. Throws OracleScaleError above `cap` agents.
DirectedOptimum maximize_brute(const Profiles& profiles, const PreferenceModel& pref,
                               const DirectedObjective& objective, Execution exec, std::size_t cap);

} // namespace datamarket
