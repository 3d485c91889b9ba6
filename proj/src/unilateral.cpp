#include "datamarket/unilateral.hpp"

#include "parallel.hpp"

#include <cmath>

namespace datamarket {

PriceSchedule PriceSchedule::at_cost(const Profiles& profiles)
{
    const std::size_t n = profiles.size();
    PriceSchedule p(n);
    for (AgentIndex i = 0; i < n; ++i)
        for (AgentIndex j = 0; j < n; ++j)
            if (i != j)
                p.set(i, j, profiles[i].theta.supply_cost[j]);
    return p;
}

void PriceSchedule::set(AgentIndex seller, AgentIndex buyer, double price)
{
    if (seller == buyer)
        throw ContractViolation("an agent does not sell to itself");
    if (!(price >= 0.0) || !std::isfinite(price))
        throw ContractViolation("prices must be finite and nonnegative");
    prices_[seller * n_ + buyer] = price;
}

double demand_objective(const Profiles& profiles, const PreferenceModel& pref, AgentIndex buyer, AgentSet sellers,
                        const PriceSchedule& prices)
{
    double value = incoming_utility(profiles, pref, buyer, sellers);
    sellers.for_each([&](AgentIndex k) { value -= prices(k, buyer); });
    return value;
}

AgentSet demand_set(const Profiles& profiles, const PreferenceModel& pref, AgentIndex buyer,
                    const PriceSchedule& prices)
{
    if (buyer >= profiles.size())
        throw ContractViolation("buyer out of range");
    if (profiles.size() > 20)
        throw OracleScaleError("exhaustive demand is limited to 20 agents");
    return best_subset(sellers_for(profiles.size(), buyer), [&](AgentSet s) {
               return demand_objective(profiles, pref, buyer, s, prices);
           })
        .chosen;
}

std::vector<double> market_transfers(const DirectedGraph& g, const PriceSchedule& prices)
{
    const std::size_t n = g.n_agents();
    std::vector<double> t(n, 0.0);
    for (auto [seller, buyer] : g.edges()) {
        t[buyer] += prices(seller, buyer);
        t[seller] -= prices(seller, buyer);
    }
    return t;
}

CompetitiveOutcome competitive_allocation(const Profiles& profiles, const PreferenceModel& pref, Execution exec)
{
    const std::size_t n = profiles.size();
    CompetitiveOutcome out;
    out.prices = PriceSchedule::at_cost(profiles);
    auto& alloc = out.allocation;
    alloc.demand.assign(n, AgentSet{});
    detail::for_each_index(n, exec, [&](std::uint64_t b) {
        alloc.demand[b] = demand_set(profiles, pref, static_cast<AgentIndex>(b), out.prices);
    });
    alloc.graph = DirectedGraph(n);
    for (AgentIndex b = 0; b < n; ++b)
        alloc.graph.set_incoming(b, alloc.demand[b]);
    alloc.supply.resize(n);
    for (AgentIndex s = 0; s < n; ++s)
        alloc.supply[s] = alloc.graph.outgoing(s);
    alloc.transfers = market_transfers(alloc.graph, out.prices);
    out.welfare = total_welfare(profiles, pref, WeightedDirectedGraph(alloc.graph));
    return out;
}

double net_utility(const Profiles& profiles, const PreferenceModel& pref, const DirectedGraph& g,
                   const PriceSchedule& prices, AgentIndex agent)
{
    return total_utility(profiles, pref, g, agent) - market_transfers(g, prices)[agent];
}

DirectedOptimum welfare_max_directed(const Profiles& profiles, const PreferenceModel& pref, WelfareMode mode,
                                     Execution exec, std::optional<std::size_t> cap)
{
    if (mode == WelfareMode::decomposed)
        return maximize_decomposed(profiles, pref, {});
    return maximize_brute(profiles, pref, {}, exec, cap.value_or(OracleLimits::from_environment().directed));
}

PriceInterval price_upper_bound(const Profiles& profiles, const PreferenceModel& pref, AgentIndex seller,
                                AgentIndex buyer)
{
    const std::size_t n = profiles.size();
    if (seller >= n || buyer >= n || seller == buyer)
        throw ContractViolation("price interval needs two distinct agents");
    const PriceSchedule base = PriceSchedule::at_cost(profiles);

    PriceInterval out;
    out.seller = seller;
    out.buyer = buyer;
    out.cost = base(seller, buyer);

    const AgentSet baseline = demand_set(profiles, pref, buyer, base);
    if (!baseline.contains(seller)) {
        out.degenerate = true;
        out.upper = out.cost;
        return out;
    }

    auto others = sellers_for(n, buyer);
    std::erase(others, seller);
    const auto without = best_subset(others, [&](AgentSet s) {
        return demand_objective(profiles, pref, buyer, s, base);
    });
    const auto with = best_subset(others, [&](AgentSet s) {
        return demand_objective(profiles, pref, buyer, s.with(seller), base);
    });
    out.headroom = with.value - without.value;
    out.upper = out.cost + out.headroom;

    auto probe = [&](double price) {
        PriceSchedule p = base;
        p.set(seller, buyer, std::max(0.0, price));
        return demand_set(profiles, pref, buyer, p);
    };
    out.below_unchanged = probe(out.upper - kPriceProbeStep) == baseline;
    const AgentSet above = probe(out.upper + kPriceProbeStep);
    if (above.contains(seller)) {
        // still bought: acceptable only when dropping the seller is a tie
        PriceSchedule p = base;
        p.set(seller, buyer, out.upper + kPriceProbeStep);
        out.above_changed_or_indifferent =
            std::abs(demand_objective(profiles, pref, buyer, above, p) - without.value) <= 2 * kPriceProbeStep;
    } else {
        out.above_changed_or_indifferent = true;
    }
    return out;
}

} // namespace datamarket
