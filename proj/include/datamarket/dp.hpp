#pragma once

// Query-count markets. Edge i->j carries the number of queries j runs on
// owner i's data; the owner bears c_i(j) per query and j's benefit is
// a_j * sqrt(d_j + sum_i w_ij * q(count_ij) * d_i).
//
// Only the canonical benefit family is supported.

#include "datamarket/mechanism.hpp"
#include "datamarket/model.hpp"
#include "datamarket/unilateral.hpp"

#include <optional>
#include <vector>

namespace datamarket {

/// Per-query response q on 0..max_queries.
class QueryPreference {
public:
    /// q(w) = 1 - 2^-w.
    static QueryPreference halving(std::size_t max_queries);
    /// Explicit table q(0..W); q(0) = 0, nondecreasing, at most 1.
    static QueryPreference from_table(std::vector<double> response);

    std::size_t max_queries() const { return response_.size() - 1; }
    double response(std::size_t count) const;
    const std::vector<double>& table() const { return response_; }

    friend bool operator==(const QueryPreference&, const QueryPreference&) = default;

private:
    explicit QueryPreference(std::vector<double> response) : response_(std::move(response)) {}
    std::vector<double> response_{0.0};
};

inline constexpr std::size_t kDefaultMaxQueries = 4;
/// Largest count-vector enumeration a single demand problem may run.
inline constexpr std::uint64_t kDpDemandLimit = 100'000;
/// Largest count-matrix (or per-coalition deviation) enumeration.
inline constexpr std::uint64_t kDpEnumerationLimit = 1'000'000;

class QueryGraph {
public:
    QueryGraph() = default;
    explicit QueryGraph(std::size_t n_agents)
        : n_(n_agents), counts_(n_agents * n_agents, 0), quality_(n_agents * n_agents, 1.0)
    {
    }

    std::size_t n_agents() const { return n_; }
    std::size_t count(AgentIndex owner, AgentIndex querier) const { return counts_[owner * n_ + querier]; }
    void set_count(AgentIndex owner, AgentIndex querier, std::size_t count);
    double quality(AgentIndex owner, AgentIndex querier) const { return quality_[owner * n_ + querier]; }
    void set_quality(AgentIndex owner, AgentIndex querier, double w);
    /// Multiplies the quality of every query `querier` runs.
    void scale_incoming(AgentIndex querier, double factor);
    /// Edge i->j iff count(i, j) > 0.
    DirectedGraph support() const;
    std::size_t total_queries() const;

    friend bool operator==(const QueryGraph&, const QueryGraph&) = default;

private:
    std::size_t n_ = 0;
    std::vector<std::size_t> counts_;
    std::vector<double> quality_;
};

double dp_benefit(const Profiles& profiles, const QueryPreference& qpref, const QueryGraph& g, AgentIndex agent);
/// sum_j count(agent, j) * c_agent(j).
double dp_cost(const Profiles& profiles, const QueryPreference& qpref, const QueryGraph& g, AgentIndex agent);
double dp_value(const Profiles& profiles, const QueryPreference& qpref, const QueryGraph& g, AgentIndex agent);
double dp_welfare(const Profiles& profiles, const QueryPreference& qpref, const QueryGraph& g);

/// Counts indexed by owner id; the buyer's own slot is 0.
using CountVector = std::vector<std::size_t>;

/// argmax over count vectors of U - sum count * price. Vectors are scanned
/// in lexicographic order over sellers in id order; ties within the
/// indifference tolerance keep the earlier (smaller) vector.
CountVector dp_demand(const Profiles& profiles, const QueryPreference& qpref, AgentIndex buyer,
                      const PriceSchedule& per_query_prices);

struct DpMarket {
    PriceSchedule prices;
    QueryGraph graph;
    std::vector<CountVector> demand;
    /// Positive means the agent pays.
    std::vector<double> transfers;
    double welfare = 0.0;
};

/// Per-query prices at cost, every buyer's demand, owners supply it.
DpMarket dp_competitive_allocation(const Profiles& profiles, const QueryPreference& qpref,
                                   Execution exec = Execution::parallel);

struct DpOptimum {
    QueryGraph graph;
    double value = 0.0;
};

/// Maximizes sum of dp_value over counted agents, per querier.
DpOptimum dp_maximize_decomposed(const Profiles& profiles, const QueryPreference& qpref,
                                 std::optional<AgentIndex> excluded = std::nullopt);
/// Enumerates every count matrix; ties go to the smallest matrix index.
DpOptimum dp_maximize_brute(const Profiles& profiles, const QueryPreference& qpref,
                            std::optional<AgentIndex> excluded = std::nullopt, Execution exec = Execution::parallel);

struct DpMatchResult {
    QueryGraph graph;
    std::size_t proposals_made = 0;
    std::vector<AgentIndex> order;
};

/// The proposer offers every count pair (to target, from target) that
/// leaves it no worse off; the target takes its favourite offered pair
/// (ties to the smaller pair), where (0, 0) means rejection.
DpMatchResult dp_ordered_match(const Profiles& profiles, const QueryPreference& qpref);

struct DpDeviation {
    AgentSet coalition;
    QueryGraph new_graph;
    AgentIndex strict_gainer = 0;
};

struct DpStability {
    bool stable = true;
    std::optional<DpDeviation> witness;
    std::size_t deviations_checked = 0;
};

/// Members rewrite their mutual counts freely and keep or drop each pair
/// with an outsider as a whole; outsiders' pairs are frozen.
bool is_dp_coalition_deviation(const QueryGraph& from, const QueryGraph& to, AgentSet coalition);

/// Exhaustive check of all coalitions and their deviations.
DpStability dp_is_strongly_stable(const Profiles& profiles, const QueryPreference& qpref, const QueryGraph& g,
                                  Execution exec = Execution::parallel);

struct DpMechanismOutcome {
    QueryGraph g_star;
    std::vector<QueryGraph> g_minus;
    std::vector<double> t_tilde;
    double delta = 0.0;
    QueryGraph allocation;
    std::vector<double> money;
    std::vector<double> data_money;
    std::vector<double> alpha;
    std::vector<double> capacity;
    double residual = 0.0;

    bool balanced() const { return residual == 0.0; }
};

/// Mixed VCG over count matrices; calibration scales query quality in
/// [0, alpha_max].
DpMechanismOutcome dp_vcg(const Profiles& profiles, const QueryPreference& qpref, double alpha_max = 10.0,
                          SolverMode solver = SolverMode::decomposed, Execution exec = Execution::parallel);

std::vector<Check> dp_check_mechanism(const Profiles& profiles, const QueryPreference& qpref,
                                      const DpMechanismOutcome& out);

} // namespace datamarket
