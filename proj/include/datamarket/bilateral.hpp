#pragma once

// Bilateral (data-for-data) network formation: the ordered match swipe and
// the brute-force checkers for strong stability, the top agent property,
// limited complementarity and edge-removal monotonicity.

#include "datamarket/model.hpp"

#include <optional>
#include <string>
#include <vector>

namespace datamarket {

struct MatchResult {
    SharingGraph graph;
    /// Proposals issued, i.e. swipes where the proposer weakly gained.
    std::size_t proposals_made = 0;
    /// Agents in the order they moved (best ranked first).
    std::vector<AgentIndex> order;
    /// False when a table model had no common ranking and id order was used.
    bool ranked_by_preference = true;
};

/// Swipe order: descending data size for the canonical family, the verified
/// common ranking for table models, id order when no common ranking exists.
std::vector<AgentIndex> common_order(const Profiles& profiles, const PreferenceModel& pref, bool* verified = nullptr);

/// Agent order[0] proposes to every later agent in turn, then order[1], and
/// so on. An edge forms iff both endpoints weakly prefer the enlarged
/// neighborhood given the graph built so far.
MatchResult ordered_match(const Profiles& profiles, const PreferenceModel& pref);

/// A coalition deviation that blocks a graph.
struct Deviation {
    AgentSet coalition;
    SharingGraph new_graph;
    AgentSet weak_gainers;
    AgentIndex strict_gainer = 0;
};

struct StabilityCertificate {
    bool stable = true;
    std::optional<Deviation> witness;
};

/// True iff `to` is reachable from `from` by `coalition`: edges inside the
/// coalition are free, edges from a member to an outsider may only be kept
/// or dropped, and edges between outsiders are frozen.
bool is_coalition_deviation(const SharingGraph& from, const SharingGraph& to, AgentSet coalition);

/// Re-checks a witness from scratch: reachability plus weak gain for every
/// member and strict gain for the named one.
bool verify_deviation(const BilateralTable& table, const SharingGraph& original, const Deviation& d);

/// Enumerates every nonempty coalition and every deviation available to it.
/// The returned witness is the first blocking deviation in (coalition bits,
/// internal edges, kept cross edges) order for both execution modes.
StabilityCertificate is_strongly_stable(const Profiles& profiles, const PreferenceModel& pref,
                                        const SharingGraph& g, Execution exec = Execution::parallel,
                                        std::optional<std::size_t> cap = std::nullopt);

/// Same check against a prebuilt table; no size cap.
StabilityCertificate is_strongly_stable(const BilateralTable& table, const SharingGraph& g,
                                        Execution exec = Execution::parallel);

/// All 2^(N(N-1)/2) sharing graphs that are strongly stable, by graph index.
std::vector<SharingGraph> all_stable_graphs(const Profiles& profiles, const PreferenceModel& pref,
                                            Execution exec = Execution::parallel,
                                            std::optional<std::size_t> cap = std::nullopt);

struct PropertyWitness {
    AgentIndex agent = 0;
    AgentIndex i = 0;
    AgentIndex j = 0;
    AgentSet base;
    AgentSet added; // limited complementarity only
    std::string reason;
};

struct TopAgentResult {
    bool pass = true;
    /// Best first; empty when the check fails.
    std::vector<AgentIndex> common_ranking;
    std::optional<PropertyWitness> witness;
};

/// Every agent must rank every pair of others the same way against every
/// admissible base set, and the per-agent rankings must fit one common order.
TopAgentResult check_top_agent(const Profiles& profiles, const PreferenceModel& pref,
                               std::optional<std::size_t> cap = std::nullopt);

struct ComplementarityResult {
    bool pass = true;
    std::optional<PropertyWitness> witness;
};

/// If adding i hurts agent k at base S, adding any nonempty set of agents
/// ranked at or below i (outside S) must hurt k as well. Uses the common
/// ranking when one exists and id order otherwise.
ComplementarityResult check_limited_complementarity(const Profiles& profiles, const PreferenceModel& pref,
                                                    std::optional<std::size_t> cap = std::nullopt);

struct RemovalResult {
    bool pass = true;
    /// Removed edges and the agent that strictly preferred the reduced graph.
    std::optional<std::pair<SharingGraph, AgentIndex>> witness;
};

/// Every agent weakly prefers `g` to every graph obtained by deleting some
/// of its edges.
RemovalResult check_edge_removal_monotonicity(const Profiles& profiles, const PreferenceModel& pref,
                                              const SharingGraph& g, std::optional<std::size_t> cap = std::nullopt);

struct BilateralWelfare {
    SharingGraph graph;
    double value = 0.0;
};

/// Brute-force utilitarian optimum over sharing graphs (cardinal models).
BilateralWelfare welfare_max_bilateral(const Profiles& profiles, const PreferenceModel& pref,
                                       std::optional<std::size_t> cap = std::nullopt);

/// Graph with the given index over the N(N-1)/2 agent pairs in (i, j) order.
SharingGraph sharing_graph_from_index(std::size_t n_agents, std::uint64_t index);

} // namespace datamarket
