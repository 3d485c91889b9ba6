#pragma once

// Unilateral (data-for-money) markets: per-pair competitive prices, buyer
// demand, market clearing, welfare maximization and per-pair price headroom.

#include "datamarket/directed_search.hpp"
#include "datamarket/model.hpp"

namespace datamarket {

/// p_i(j): the price seller i charges buyer j.
class PriceSchedule {
public:
    PriceSchedule() = default;
    explicit PriceSchedule(std::size_t n_agents, double fill = 0.0) : n_(n_agents), prices_(n_agents * n_agents, fill)
    {
        for (AgentIndex i = 0; i < n_; ++i)
            prices_[i * n_ + i] = 0.0;
    }

    /// Prices equal to supply costs, p_i(j) = c_i(j).
    static PriceSchedule at_cost(const Profiles& profiles);

    std::size_t n_agents() const { return n_; }
    double operator()(AgentIndex seller, AgentIndex buyer) const { return prices_[seller * n_ + buyer]; }
    void set(AgentIndex seller, AgentIndex buyer, double price);

    friend bool operator==(const PriceSchedule&, const PriceSchedule&) = default;

private:
    std::size_t n_ = 0;
    std::vector<double> prices_;
};

/// Buyer's value of purchasing `sellers` at `prices`: U(S) - sum of prices.
double demand_objective(const Profiles& profiles, const PreferenceModel& pref, AgentIndex buyer, AgentSet sellers,
                        const PriceSchedule& prices);

/// argmax over subsets of the other agents of demand_objective; ties go to
/// the lexicographically smallest indicator vector (see best_subset).
AgentSet demand_set(const Profiles& profiles, const PreferenceModel& pref, AgentIndex buyer,
                    const PriceSchedule& prices);

struct MarketAllocation {
    DirectedGraph graph;
    /// Positive means the agent pays.
    std::vector<double> transfers;
    std::vector<AgentSet> demand;
    std::vector<AgentSet> supply;
};

struct CompetitiveOutcome {
    PriceSchedule prices;
    MarketAllocation allocation;
    double welfare = 0.0;
};

/// t_i = sum of prices i pays for its purchases minus prices it collects.
std::vector<double> market_transfers(const DirectedGraph& g, const PriceSchedule& prices);

/// Prices at cost, every buyer's demand, supply set to clear the market.
CompetitiveOutcome competitive_allocation(const Profiles& profiles, const PreferenceModel& pref,
                                          Execution exec = Execution::parallel);

/// V_i - t_i for an agent under a given allocation and prices.
double net_utility(const Profiles& profiles, const PreferenceModel& pref, const DirectedGraph& g,
                   const PriceSchedule& prices, AgentIndex agent);

enum class WelfareMode { decomposed, brute };

/// Maximizes sum of V_i over directed graphs. Brute mode is capped by
/// OracleLimits::directed (4 agents by default).
DirectedOptimum welfare_max_directed(const Profiles& profiles, const PreferenceModel& pref, WelfareMode mode,
                                     Execution exec = Execution::parallel,
                                     std::optional<std::size_t> cap = std::nullopt);

struct PriceInterval {
    AgentIndex seller = 0;
    AgentIndex buyer = 0;
    double cost = 0.0;
    double upper = 0.0;
    double headroom = 0.0;
    /// Seller not demanded at baseline: the interval collapses to the cost.
    bool degenerate = false;
    /// Demand at upper - delta equals the baseline demand.
    bool below_unchanged = true;
    /// Demand at upper + delta drops the seller or is indifferent to it.
    bool above_changed_or_indifferent = true;
};

inline constexpr double kPriceProbeStep = 1e-6;

/// Largest price seller `seller` can charge `buyer` (all other prices at
/// cost) without changing any agent's demand.
PriceInterval price_upper_bound(const Profiles& profiles, const PreferenceModel& pref, AgentIndex seller,
                                AgentIndex buyer);

} // namespace datamarket
