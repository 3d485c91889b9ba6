#include "datamarket/dp.hpp"

#include "datamarket/bilateral.hpp"
#include "datamarket/directed_search.hpp"
#include "parallel.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <string>


namespace datamarket {

QueryPreference QueryPreference::halving(std::size_t max_queries)
{
    std::vector<double> q(max_queries + 1);
    for (std::size_t w = 0; w <= max_queries; ++w)
        q[w] = 1.0 - std::ldexp(1.0, -static_cast<int>(w));
    return QueryPreference(std::move(q));
}

QueryPreference QueryPreference::from_table(std::vector<double> response)
{
    if (response.empty())
        throw MalformedModel("query response table needs at least q(0)");
    if (response[0] != 0.0)
        throw MalformedModel("query response must satisfy q(0) = 0");
    for (std::size_t w = 1; w < response.size(); ++w) {
        if (!std::isfinite(response[w]) || response[w] > 1.0)
            throw MalformedModel("query response must stay within [0, 1]");
        if (response[w] < response[w - 1])
            throw MalformedModel("query response must be nondecreasing");
    }
    return QueryPreference(std::move(response));
}

double QueryPreference::response(std::size_t count) const
{
    if (count > max_queries())
        throw ContractViolation("query count " + std::to_string(count) + " exceeds the cap " +
                                std::to_string(max_queries()));
    return response_[count];
}

void QueryGraph::set_count(AgentIndex owner, AgentIndex querier, std::size_t count)
{
    if (owner == querier && count != 0)
        throw ContractViolation("an agent does not query its own data");
    counts_[owner * n_ + querier] = count;
}

void QueryGraph::set_quality(AgentIndex owner, AgentIndex querier, double w)
{
    if (!(w >= 0.0) || !std::isfinite(w))
        throw ContractViolation("query quality must be finite and nonnegative");
    quality_[owner * n_ + querier] = w;
}

void QueryGraph::scale_incoming(AgentIndex querier, double factor)
{
    for (AgentIndex owner = 0; owner < n_; ++owner)
        if (count(owner, querier) > 0)
            set_quality(owner, querier, quality(owner, querier) * factor);
}

DirectedGraph QueryGraph::support() const
{
    DirectedGraph g(n_);
    for (AgentIndex i = 0; i < n_; ++i)
        for (AgentIndex j = 0; j < n_; ++j)
            if (count(i, j) > 0)
                g.add_edge(i, j);
    return g;
}

std::size_t QueryGraph::total_queries() const { return std::accumulate(counts_.begin(), counts_.end(), std::size_t{0}); }

namespace {

void require_shape(const Profiles& profiles, const QueryGraph& g)
{
    if (g.n_agents() != profiles.size())
        throw ContractViolation("query graph and profiles disagree on the number of agents");
}

double received_volume(const Profiles& profiles, const QueryPreference& qpref, const QueryGraph& g, AgentIndex agent)
{
    double received = 0.0;
    for (AgentIndex i = 0; i < profiles.size(); ++i)
        if (const std::size_t c = g.count(i, agent); c > 0)
            received += g.quality(i, agent) * qpref.response(c) * profiles[i].data_size;
    return received;
}

double benefit_from_counts(const Profiles& profiles, const QueryPreference& qpref, AgentIndex buyer,
                           const CountVector& counts)
{
    double received = 0.0;
    for (AgentIndex i = 0; i < profiles.size(); ++i)
        if (counts[i] > 0)
            received += qpref.response(counts[i]) * profiles[i].data_size;
    return profiles[buyer].theta.benefit_scale * std::sqrt(profiles[buyer].data_size + received);
}

std::uint64_t checked_power(std::uint64_t base, std::size_t exponent, std::uint64_t limit, const char* what)
{
    std::uint64_t out = 1;
    for (std::size_t k = 0; k < exponent; ++k) {
        if (base != 0 && out > limit / base)
            throw OracleScaleError(std::string(what) + " exceeds the enumeration limit of " + std::to_string(limit));
        out *= base;
    }
    if (out > limit)
        throw OracleScaleError(std::string(what) + " exceeds the enumeration limit of " + std::to_string(limit));
    return out;
}

/// Writes `rank` as base-`radix` digits into `slots`, the first slot most significant.
void decode_lex(std::uint64_t rank, std::size_t radix, const std::vector<AgentIndex>& slots, CountVector& counts)
{
    for (std::size_t b = slots.size(); b-- > 0;) {
        counts[slots[b]] = static_cast<std::size_t>(rank % radix);
        rank /= radix;
    }
}

/// Best count vector for one querier under `objective`, lexicographic tie-break.
CountVector best_counts(const Profiles& profiles, const QueryPreference& qpref, AgentIndex buyer,
                        const std::function<double(const CountVector&)>& objective)
{
    const std::size_t n = profiles.size();
    const std::size_t radix = qpref.max_queries() + 1;
    const auto sellers = sellers_for(n, buyer);
    const std::uint64_t total = checked_power(radix, sellers.size(), kDpDemandLimit, "count-vector demand");
    CountVector counts(n, 0);
    CountVector best(n, 0);
    double best_value = -std::numeric_limits<double>::infinity();
    for (std::uint64_t r = 0; r < total; ++r) {
        decode_lex(r, radix, sellers, counts);
        const double v = objective(counts);
        if (r == 0 || compare_values(v, best_value) > 0) {
            best = counts;
            best_value = v;
        }
    }
    return best;
}

double counted_value(const Profiles& profiles, const QueryPreference& qpref, const QueryGraph& g,
                     std::optional<AgentIndex> excluded)
{
    double total = 0.0;
    for (AgentIndex j = 0; j < profiles.size(); ++j)
        if (excluded != j)
            total += dp_value(profiles, qpref, g, j);
    return total;
}

} // namespace

double dp_benefit(const Profiles& profiles, const QueryPreference& qpref, const QueryGraph& g, AgentIndex agent)
{
    require_shape(profiles, g);
    return profiles[agent].theta.benefit_scale *
           std::sqrt(profiles[agent].data_size + received_volume(profiles, qpref, g, agent));
}

double dp_cost(const Profiles& profiles, const QueryPreference& qpref, const QueryGraph& g, AgentIndex agent)
{
    require_shape(profiles, g);
    double total = 0.0;
    const auto& row = profiles[agent].theta.supply_cost;
    for (AgentIndex j = 0; j < profiles.size(); ++j)
        if (const std::size_t c = g.count(agent, j); c > 0) {
            if (c > qpref.max_queries())
                throw ContractViolation("query count exceeds the cap");
            total += static_cast<double>(c) * row[j];
        }
    return total;
}

double dp_value(const Profiles& profiles, const QueryPreference& qpref, const QueryGraph& g, AgentIndex agent)
{
    return dp_benefit(profiles, qpref, g, agent) - dp_cost(profiles, qpref, g, agent);
}

double dp_welfare(const Profiles& profiles, const QueryPreference& qpref, const QueryGraph& g)
{
    return counted_value(profiles, qpref, g, std::nullopt);
}

CountVector dp_demand(const Profiles& profiles, const QueryPreference& qpref, AgentIndex buyer,
                      const PriceSchedule& per_query_prices)
{
    if (buyer >= profiles.size())
        throw ContractViolation("buyer out of range");
    return best_counts(profiles, qpref, buyer, [&](const CountVector& counts) {
        double value = benefit_from_counts(profiles, qpref, buyer, counts);
        for (AgentIndex k = 0; k < profiles.size(); ++k)
            if (counts[k] > 0)
                value -= static_cast<double>(counts[k]) * per_query_prices(k, buyer);
        return value;
    });
}

DpMarket dp_competitive_allocation(const Profiles& profiles, const QueryPreference& qpref, Execution exec)
{
    const std::size_t n = profiles.size();
    DpMarket out;
    out.prices = PriceSchedule::at_cost(profiles);
    out.demand.assign(n, CountVector(n, 0));
    detail::for_each_index(n, exec, [&](std::uint64_t b) {
        out.demand[b] = dp_demand(profiles, qpref, static_cast<AgentIndex>(b), out.prices);
    });
    out.graph = QueryGraph(n);
    for (AgentIndex b = 0; b < n; ++b)
        for (AgentIndex s = 0; s < n; ++s)
            out.graph.set_count(s, b, out.demand[b][s]);
    out.transfers.assign(n, 0.0);
    for (AgentIndex i = 0; i < n; ++i)
        for (AgentIndex j = 0; j < n; ++j)
            if (const std::size_t c = out.graph.count(i, j); c > 0) {
                const double paid = static_cast<double>(c) * out.prices(i, j);
                out.transfers[j] += paid;
                out.transfers[i] -= paid;
            }
    out.welfare = dp_welfare(profiles, qpref, out.graph);
    return out;
}

DpOptimum dp_maximize_decomposed(const Profiles& profiles, const QueryPreference& qpref,
                                 std::optional<AgentIndex> excluded)
{
    const std::size_t n = profiles.size();
    QueryGraph g(n);
    for (AgentIndex buyer = 0; buyer < n; ++buyer) {
        const auto counts = best_counts(profiles, qpref, buyer, [&](const CountVector& c) {
            double term = 0.0;
            if (excluded != buyer)
                term += benefit_from_counts(profiles, qpref, buyer, c);
            for (AgentIndex k = 0; k < n; ++k)
                if (c[k] > 0 && excluded != k)
                    term -= static_cast<double>(c[k]) * profiles[k].theta.supply_cost[buyer];
            return term;
        });
        for (AgentIndex k = 0; k < n; ++k)
            g.set_count(k, buyer, counts[k]);
    }
    const double value = counted_value(profiles, qpref, g, excluded);
    return {std::move(g), value};
}

namespace {

/// Count matrix with index digits over ordered pairs (i outer, j inner),
/// the first pair least significant.
void matrix_from_index(std::size_t n, std::size_t radix, std::uint64_t index, QueryGraph& g)
{
    for (AgentIndex i = 0; i < n; ++i)
        for (AgentIndex j = 0; j < n; ++j) {
            if (i == j)
                continue;
            g.set_count(i, j, static_cast<std::size_t>(index % radix));
            index /= radix;
        }
}

} // namespace

DpOptimum dp_maximize_brute(const Profiles& profiles, const QueryPreference& qpref,
                            std::optional<AgentIndex> excluded, Execution exec)
{
    const std::size_t n = profiles.size();
    const std::size_t radix = qpref.max_queries() + 1;
    const std::uint64_t total =
        checked_power(radix, n * (n > 0 ? n - 1 : 0), kDpEnumerationLimit, "count-matrix enumeration");

    auto better = [](double v, std::uint64_t idx, double best_v, std::uint64_t best_idx) {
        return v > best_v || (v == best_v && idx < best_idx);
    };
    double best_value = -std::numeric_limits<double>::infinity();
    std::uint64_t best_index = total;

    if (exec == Execution::serial) {
        QueryGraph g(n);
        for (std::uint64_t idx = 0; idx < total; ++idx) {
            matrix_from_index(n, radix, idx, g);
            const double v = counted_value(profiles, qpref, g, excluded);
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
            std::uint64_t local_index = total;
            QueryGraph g(n);
#pragma omp for schedule(static) nowait
            for (std::int64_t k = 0; k < static_cast<std::int64_t>(total); ++k) {
                const auto idx = static_cast<std::uint64_t>(k);
                try {
                    matrix_from_index(n, radix, idx, g);
                    const double v = counted_value(profiles, qpref, g, excluded);
                    if (better(v, idx, local_value, local_index)) {
                        local_value = v;
                        local_index = idx;
                    }
                } catch (...) {
                    error.record(idx);
                }
            }
#pragma omp critical(datamarket_dp_brute_merge)
            if (better(local_value, local_index, best_value, best_index)) {
                best_value = local_value;
                best_index = local_index;
            }
        }
        error.rethrow_if_any();
    }
    QueryGraph g(n);
    matrix_from_index(n, radix, best_index, g);
    return {std::move(g), best_value};
}

DpMatchResult dp_ordered_match(const Profiles& profiles, const QueryPreference& qpref)
{
    const std::size_t n = profiles.size();
    const std::size_t w_max = qpref.max_queries();
    DpMatchResult result;
    result.graph = QueryGraph(n);
    result.order = common_order(profiles, PreferenceModel::canonical());

    auto& g = result.graph;
    for (std::size_t a = 0; a < n; ++a) {
        const AgentIndex proposer = result.order[a];
        for (std::size_t b = a + 1; b < n; ++b) {
            const AgentIndex target = result.order[b];
            const double proposer_now = dp_value(profiles, qpref, g, proposer);
            const double target_now = dp_value(profiles, qpref, g, target);

            QueryGraph trial = g;
            std::pair<std::size_t, std::size_t> choice{0, 0};
            double choice_value = target_now;
            bool exchange_offered = false;
            // pair = (queries target runs on proposer, queries proposer runs on target)
            for (std::size_t to_target = 0; to_target <= w_max; ++to_target)
                for (std::size_t from_target = 0; from_target <= w_max; ++from_target) {
                    trial.set_count(proposer, target, to_target);
                    trial.set_count(target, proposer, from_target);
                    if (compare_values(dp_value(profiles, qpref, trial, proposer), proposer_now) < 0)
                        continue;
                    if (to_target > 0 && from_target > 0)
                        exchange_offered = true;
                    const double v = dp_value(profiles, qpref, trial, target);
                    if (compare_values(v, choice_value) > 0) {
                        choice = {to_target, from_target};
                        choice_value = v;
                    }
                }
            if (exchange_offered)
                ++result.proposals_made;
            g.set_count(proposer, target, choice.first);
            g.set_count(target, proposer, choice.second);
        }
    }
    return result;
}

bool is_dp_coalition_deviation(const QueryGraph& from, const QueryGraph& to, AgentSet coalition)
{
    const std::size_t n = from.n_agents();
    if (to.n_agents() != n)
        return false;
    for (AgentIndex i = 0; i < n; ++i)
        for (AgentIndex j = i + 1; j < n; ++j) {
            const bool in_i = coalition.contains(i);
            const bool in_j = coalition.contains(j);
            if (in_i && in_j)
                continue;
            const bool same = from.count(i, j) == to.count(i, j) && from.count(j, i) == to.count(j, i);
            if (!in_i && !in_j) {
                if (!same)
                    return false;
            } else if (!same && (to.count(i, j) != 0 || to.count(j, i) != 0)) {
                return false;
            }
        }
    return true;
}

namespace {

std::optional<DpDeviation> first_dp_deviation(const Profiles& profiles, const QueryPreference& qpref,
                                              const QueryGraph& g, AgentSet coalition, std::size_t& checked)
{
    const std::size_t n = profiles.size();
    const std::size_t radix = qpref.max_queries() + 1;
    std::vector<std::pair<AgentIndex, AgentIndex>> internal;
    std::vector<std::pair<AgentIndex, AgentIndex>> cross;
    for (AgentIndex i = 0; i < n; ++i)
        for (AgentIndex j = 0; j < n; ++j) {
            if (i == j)
                continue;
            if (coalition.contains(i) && coalition.contains(j))
                internal.emplace_back(i, j);
            else if (i < j && coalition.contains(i) != coalition.contains(j) && (g.count(i, j) || g.count(j, i)))
                cross.emplace_back(i, j);
        }
    const std::uint64_t internal_total =
        checked_power(radix, internal.size(), kDpEnumerationLimit, "coalition deviation enumeration");
    if (cross.size() >= 20 || (internal_total << cross.size()) > kDpEnumerationLimit)
        throw OracleScaleError("coalition deviation enumeration exceeds the limit");

    std::vector<double> before(n);
    coalition.for_each([&](AgentIndex m) { before[m] = dp_value(profiles, qpref, g, m); });

    QueryGraph trial = g;
    for (std::uint64_t in_idx = 0; in_idx < internal_total; ++in_idx) {
        std::uint64_t rest = in_idx;
        for (auto [i, j] : internal) {
            trial.set_count(i, j, static_cast<std::size_t>(rest % radix));
            rest /= radix;
        }
        for (std::uint64_t keep = 0; keep < (std::uint64_t{1} << cross.size()); ++keep) {
            for (std::size_t k = 0; k < cross.size(); ++k) {
                const auto [i, j] = cross[k];
                const bool dropped = (keep >> k) & 1U;
                trial.set_count(i, j, dropped ? 0 : g.count(i, j));
                trial.set_count(j, i, dropped ? 0 : g.count(j, i));
            }
            ++checked;
            bool all_weak = true;
            std::optional<AgentIndex> strict;
            coalition.for_each([&](AgentIndex m) {
                const int c = compare_values(dp_value(profiles, qpref, trial, m), before[m]);
                if (c < 0)
                    all_weak = false;
                else if (c > 0 && !strict)
                    strict = m;
            });
            if (all_weak && strict)
                return DpDeviation{coalition, trial, *strict};
        }
    }
    return std::nullopt;
}

} // namespace

DpStability dp_is_strongly_stable(const Profiles& profiles, const QueryPreference& qpref, const QueryGraph& g,
                                  Execution exec)
{
    require_shape(profiles, g);
    const std::size_t n = profiles.size();
    const std::uint64_t coalitions = (std::uint64_t{1} << n) - 1;
    std::vector<std::optional<DpDeviation>> found(coalitions);
    std::vector<std::size_t> checked(coalitions, 0);

    auto run = [&](std::uint64_t k) {
        const AgentSet coalition(static_cast<AgentSet::Bits>(k + 1));
        found[k] = first_dp_deviation(profiles, qpref, g, coalition, checked[k]);
    };
    detail::for_each_index(coalitions, exec, run);

    DpStability out;
    for (std::uint64_t k = 0; k < coalitions; ++k) {
        out.deviations_checked += checked[k];
        if (found[k] && out.stable) {
            out.stable = false;
            out.witness = std::move(found[k]);
        }
    }
    return out;
}

DpMechanismOutcome dp_vcg(const Profiles& profiles, const QueryPreference& qpref, double alpha_max, SolverMode solver,
                          Execution exec)
{
    if (!(alpha_max >= 1.0))
        throw ContractViolation("alpha_max must be at least 1");
    const std::size_t n = profiles.size();
    std::vector<DpOptimum> solved(n + 1);
    auto solve = [&](std::size_t problem) {
        std::optional<AgentIndex> excluded;
        if (problem > 0)
            excluded = problem - 1;
        return solver == SolverMode::decomposed ? dp_maximize_decomposed(profiles, qpref, excluded)
                                                : dp_maximize_brute(profiles, qpref, excluded, Execution::serial);
    };
    detail::for_each_index(n + 1, exec, [&](std::uint64_t p) { solved[p] = solve(p); });

    DpMechanismOutcome out;
    out.g_star = solved[0].graph;
    out.t_tilde.resize(n);
    for (AgentIndex i = 0; i < n; ++i) {
        out.g_minus.push_back(solved[i + 1].graph);
        out.t_tilde[i] = counted_value(profiles, qpref, out.g_minus[i], i) - counted_value(profiles, qpref, out.g_star, i);
    }
    out.delta = std::accumulate(out.t_tilde.begin(), out.t_tilde.end(), 0.0);

    const DistortionBounds bounds{0.0, alpha_max};
    std::vector<DistortionCurve> curves(n);
    out.capacity.assign(n, 0.0);
    for (AgentIndex i = 0; i < n; ++i) {
        curves[i] = {profiles[i].theta.benefit_scale, profiles[i].data_size,
                     received_volume(profiles, qpref, out.g_star, i)};
        const double here = curves[i].at(1.0);
        out.capacity[i] =
            std::max(0.0, out.delta >= 0.0 ? here - curves[i].at(bounds.lower) : curves[i].at(bounds.upper) - here);
    }

    auto split = split_data_money(out.t_tilde, out.delta, out.capacity);
    out.data_money = std::move(split.data_money);
    out.residual = split.residual;
    out.money.resize(n);
    for (AgentIndex i = 0; i < n; ++i)
        out.money[i] = out.t_tilde[i] - out.data_money[i];

    out.allocation = out.g_star;
    out.alpha.assign(n, 1.0);
    for (AgentIndex i = 0; i < n; ++i) {
        if (out.data_money[i] == 0.0)
            continue;
        out.alpha[i] = calibrate_scale(curves[i], out.data_money[i], bounds, i);
        out.allocation.scale_incoming(i, out.alpha[i]);
    }
    return out;
}

std::vector<Check> dp_check_mechanism(const Profiles& profiles, const QueryPreference& qpref,
                                      const DpMechanismOutcome& out)
{
    const std::size_t n = profiles.size();
    std::vector<Check> checks;
    auto net = [&](AgentIndex i) { return dp_value(profiles, qpref, out.allocation, i) - out.money[i]; };

    Check split{"split_identity", true, 0.0, n};
    for (AgentIndex i = 0; i < n; ++i)
        split.slack = std::max(split.slack, std::abs(out.money[i] + out.data_money[i] - out.t_tilde[i]));
    split.pass = split.slack <= kIdentityTolerance;
    checks.push_back(split);

    Check budget{"budget", true, std::abs(std::accumulate(out.money.begin(), out.money.end(), 0.0)), 1};
    budget.pass = budget.slack <= kIdentityTolerance;
    checks.push_back(budget);

    Check equivalence{"utility_equivalence", true, 0.0, n};
    double vcg_agents = 0.0;
    double mixed_agents = 0.0;
    for (AgentIndex i = 0; i < n; ++i) {
        const double standard = dp_value(profiles, qpref, out.g_star, i) - out.t_tilde[i];
        vcg_agents += standard;
        mixed_agents += net(i);
        equivalence.slack = std::max(equivalence.slack, std::abs(net(i) - standard));
    }
    equivalence.pass = equivalence.slack <= kIdentityTolerance;
    checks.push_back(equivalence);

    Check sw_agents{"sw_agents_identity", true, std::abs(mixed_agents - vcg_agents), 1};
    sw_agents.pass = sw_agents.slack <= kIdentityTolerance;
    checks.push_back(sw_agents);

    Check sw_total{"sw_total_identity", true,
                   std::abs(dp_welfare(profiles, qpref, out.allocation) -
                            (dp_welfare(profiles, qpref, out.g_star) - (out.delta - out.residual))),
                   1};
    sw_total.pass = sw_total.slack <= kIdentityTolerance;
    checks.push_back(sw_total);

    Check isolated{"isolated_impact", true, 0.0, 0};
    for (AgentIndex i = 0; i < n; ++i) {
        if (out.alpha[i] == 1.0)
            continue;
        QueryGraph only_i = out.g_star;
        only_i.scale_incoming(i, out.alpha[i]);
        for (AgentIndex j = 0; j < n; ++j) {
            if (j == i)
                continue;
            ++isolated.checked;
            const double diff =
                std::abs(dp_value(profiles, qpref, only_i, j) - dp_value(profiles, qpref, out.g_star, j));
            isolated.slack = std::max(isolated.slack, diff);
            if (diff != 0.0)
                isolated.pass = false;
        }
    }
    checks.push_back(isolated);
    return checks;
}

} // namespace datamarket
