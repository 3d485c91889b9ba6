#include "datamarket/bilateral.hpp"

#include "parallel.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <limits>
#include <numeric>
#include <random>

namespace datamarket {

namespace {

std::size_t stability_cap(std::optional<std::size_t> cap)
{
    return cap.value_or(OracleLimits::from_environment().stability);
}

void require_cap(std::size_t n, std::size_t cap, const char* what)
{
    if (n > cap)
        throw OracleScaleError(std::string(what) + " is capped at " + std::to_string(cap) + " agents, got " +
                               std::to_string(n));
}

std::string id_list(AgentSet s)
{
    std::string out = "{";
    for (int id : s.ids())
        out += (out.size() > 1 ? "," : "") + std::to_string(id);
    return out + "}";
}

std::string id_of(AgentIndex k) { return std::to_string(k + 1); }

/// Order agents by descending data size, ties by id.
std::vector<AgentIndex> by_data_size(const Profiles& profiles)
{
    std::vector<AgentIndex> order(profiles.size());
    std::iota(order.begin(), order.end(), AgentIndex{0});
    std::stable_sort(order.begin(), order.end(), [&](AgentIndex a, AgentIndex b) {
        return profiles[a].data_size > profiles[b].data_size;
    });
    return order;
}

} // namespace

SharingGraph sharing_graph_from_index(std::size_t n_agents, std::uint64_t index)
{
    SharingGraph g(n_agents);
    std::size_t bit = 0;
    for (AgentIndex i = 0; i < n_agents; ++i)
        for (AgentIndex j = i + 1; j < n_agents; ++j, ++bit)
            if ((index >> bit) & 1U)
                g.add_edge(i, j);
    return g;
}

std::vector<AgentIndex> common_order(const Profiles& profiles, const PreferenceModel& pref, bool* verified)
{
    if (verified != nullptr)
        *verified = true;
    if (pref.is_canonical())
        return by_data_size(profiles);
    const auto top = check_top_agent(profiles, pref);
    if (top.pass)
        return top.common_ranking;
    if (verified != nullptr)
        *verified = false;
    std::vector<AgentIndex> order(profiles.size());
    std::iota(order.begin(), order.end(), AgentIndex{0});
    return order;
}

MatchResult ordered_match(const Profiles& profiles, const PreferenceModel& pref)
{
    const std::size_t n = profiles.size();
    MatchResult result;
    result.graph = SharingGraph(n);
    result.order = common_order(profiles, pref, &result.ranked_by_preference);

    auto& g = result.graph;
    for (std::size_t a = 0; a < n; ++a) {
        const AgentIndex proposer = result.order[a];
        for (std::size_t b = a + 1; b < n; ++b) {
            const AgentIndex target = result.order[b];
            const AgentSet own = g.neighborhood(proposer);
            if (compare_values(eval_bilateral(profiles, pref, proposer, own.with(target)),
                               eval_bilateral(profiles, pref, proposer, own)) < 0)
                continue;
            ++result.proposals_made;
            const AgentSet theirs = g.neighborhood(target);
            if (compare_values(eval_bilateral(profiles, pref, target, theirs.with(proposer)),
                               eval_bilateral(profiles, pref, target, theirs)) >= 0)
                g.add_edge(proposer, target);
        }
    }
    assert(result.proposals_made <= n * (n - (n > 0 ? 1 : 0)) / 2);
    return result;
}

bool is_coalition_deviation(const SharingGraph& from, const SharingGraph& to, AgentSet coalition)
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
            if (!in_i && !in_j) {
                if (from.has_edge(i, j) != to.has_edge(i, j))
                    return false;
            } else if (to.has_edge(i, j) && !from.has_edge(i, j)) {
                return false;
            }
        }
    return true;
}

bool verify_deviation(const BilateralTable& table, const SharingGraph& original, const Deviation& d)
{
    if (d.coalition.empty() || !is_coalition_deviation(original, d.new_graph, d.coalition))
        return false;
    if (!d.coalition.contains(d.strict_gainer))
        return false;
    bool ok = true;
    d.coalition.for_each([&](AgentIndex m) {
        const int c = compare_values(table.value(m, d.new_graph.neighborhood(m)),
                                     table.value(m, original.neighborhood(m)));
        if (c < 0 || (m == d.strict_gainer && c <= 0))
            ok = false;
    });
    return ok;
}

namespace {

/// First blocking deviation for one coalition, in enumeration order.
std::optional<Deviation> first_deviation(const BilateralTable& table, const SharingGraph& g, AgentSet coalition)
{
    const std::size_t n = table.n_agents();
    std::vector<std::pair<AgentIndex, AgentIndex>> internal;
    std::vector<std::pair<AgentIndex, AgentIndex>> cross;
    for (AgentIndex i = 0; i < n; ++i)
        for (AgentIndex j = i + 1; j < n; ++j) {
            const bool in_i = coalition.contains(i);
            const bool in_j = coalition.contains(j);
            if (in_i && in_j)
                internal.emplace_back(i, j);
            else if ((in_i || in_j) && g.has_edge(i, j))
                cross.emplace_back(i, j);
        }

    // Adjacency with every coalition-incident edge removed.
    std::array<AgentSet::Bits, AgentSet::capacity> frozen{};
    for (AgentIndex i = 0; i < n; ++i) {
        AgentSet nb = g.neighbors(i);
        if (coalition.contains(i))
            nb = AgentSet{};
        else
            nb = nb.minus(coalition);
        frozen[i] = nb.bits();
    }

    const auto members = coalition.members();
    std::vector<double> current(members.size());
    for (std::size_t k = 0; k < members.size(); ++k)
        current[k] = table.value(members[k], g.neighborhood(members[k]));

    std::array<AgentSet::Bits, AgentSet::capacity> adj{};
    const std::uint64_t internal_count = std::uint64_t{1} << internal.size();
    const std::uint64_t cross_count = std::uint64_t{1} << cross.size();
    for (std::uint64_t im = 0; im < internal_count; ++im) {
        for (std::uint64_t cm = 0; cm < cross_count; ++cm) {
            for (AgentIndex m : members)
                adj[m] = 0;
            for (std::size_t e = 0; e < internal.size(); ++e)
                if ((im >> e) & 1U) {
                    adj[internal[e].first] |= AgentSet::Bits{1} << internal[e].second;
                    adj[internal[e].second] |= AgentSet::Bits{1} << internal[e].first;
                }
            for (std::size_t e = 0; e < cross.size(); ++e)
                if ((cm >> e) & 1U) {
                    const auto [i, j] = cross[e];
                    const AgentIndex member = coalition.contains(i) ? i : j;
                    const AgentIndex outsider = member == i ? j : i;
                    adj[member] |= AgentSet::Bits{1} << outsider;
                }

            bool weak = true;
            std::optional<AgentIndex> strict;
            for (std::size_t k = 0; k < members.size() && weak; ++k) {
                const AgentIndex m = members[k];
                const int c = compare_values(table.value(m, AgentSet(adj[m]).with(m)), current[k]);
                if (c < 0)
                    weak = false;
                else if (c > 0 && !strict)
                    strict = m;
            }
            if (!weak || !strict)
                continue;

            Deviation d;
            d.coalition = coalition;
            d.weak_gainers = coalition;
            d.strict_gainer = *strict;
            d.new_graph = SharingGraph(n);
            for (AgentIndex i = 0; i < n; ++i) {
                const AgentSet row = coalition.contains(i) ? AgentSet(adj[i]) : AgentSet(frozen[i]);
                row.for_each([&](AgentIndex j) {
                    if (i < j)
                        d.new_graph.add_edge(i, j);
                });
            }
            // cross edges were recorded on the member side only
            for (AgentIndex i = 0; i < n; ++i)
                if (coalition.contains(i))
                    AgentSet(adj[i]).minus(coalition).for_each([&](AgentIndex j) { d.new_graph.add_edge(i, j); });
            return d;
        }
    }
    return std::nullopt;
}

} // namespace

StabilityCertificate is_strongly_stable(const BilateralTable& table, const SharingGraph& g, Execution exec)
{
    const std::size_t n = table.n_agents();
    if (g.n_agents() != n)
        throw ContractViolation("graph and profiles disagree on the number of agents");
    const std::uint64_t coalitions = std::uint64_t{1} << n;

    StabilityCertificate cert;
    if (exec == Execution::serial) {
        for (std::uint64_t c = 1; c < coalitions; ++c) {
            if (auto d = first_deviation(table, g, AgentSet(static_cast<AgentSet::Bits>(c)))) {
                cert.stable = false;
                cert.witness = std::move(d);
                return cert;
            }
        }
        return cert;
    }

    std::vector<std::optional<Deviation>> found(coalitions);
    detail::for_each_index(coalitions, Execution::parallel, [&](std::uint64_t c) {
        if (c > 0)
            found[c] = first_deviation(table, g, AgentSet(static_cast<AgentSet::Bits>(c)));
    });
    for (auto& d : found)
        if (d) {
            cert.stable = false;
            cert.witness = std::move(d);
            break;
        }
    return cert;
}

StabilityCertificate is_strongly_stable(const Profiles& profiles, const PreferenceModel& pref,
                                        const SharingGraph& g, Execution exec, std::optional<std::size_t> cap)
{
    require_cap(profiles.size(), stability_cap(cap), "strong-stability oracle");
    return is_strongly_stable(BilateralTable(profiles, pref), g, exec);
}

std::vector<SharingGraph> all_stable_graphs(const Profiles& profiles, const PreferenceModel& pref, Execution exec,
                                            std::optional<std::size_t> cap)
{
    const std::size_t n = profiles.size();
    require_cap(n, stability_cap(cap), "strong-stability oracle");
    const BilateralTable table(profiles, pref);
    const std::uint64_t graphs = std::uint64_t{1} << (n * (n - (n > 0 ? 1 : 0)) / 2);
    std::vector<char> stable(graphs, 0);
    detail::for_each_index(graphs, exec, [&](std::uint64_t idx) {
        stable[idx] = is_strongly_stable(table, sharing_graph_from_index(n, idx), Execution::serial).stable;
    });
    std::vector<SharingGraph> out;
    for (std::uint64_t idx = 0; idx < graphs; ++idx)
        if (stable[idx])
            out.push_back(sharing_graph_from_index(n, idx));
    return out;
}

namespace {

/// Subsets containing `agent` and avoiding `excluded`, ascending.
template <typename F>
void for_each_base(std::size_t n, AgentIndex agent, AgentSet excluded, F&& f)
{
    const AgentSet others = AgentSet::first(n).minus(excluded).without(agent);
    // enumerate submasks of `others` in increasing order
    const auto bits = others.bits();
    AgentSet::Bits sub = 0;
    while (true) {
        if (!f(AgentSet(sub).with(agent)))
            return;
        if (sub == bits)
            return;
        sub = (sub - bits) & bits;
    }
}

struct PairwiseRelation {
    std::size_t n = 0;
    // verdict[k][i*n+j] = +1 if k ranks i above j, -1 below, 0 unknown
    std::vector<std::vector<int>> verdict;
};

std::optional<PropertyWitness> per_agent_relation(const Profiles& profiles, const PreferenceModel& pref,
                                                  const BilateralTable* table, AgentIndex k, std::vector<int>& out)
{
    const std::size_t n = profiles.size();
    out.assign(n * n, 0);
    auto value = [&](AgentSet s) {
        return table != nullptr ? table->value(k, s) : eval_bilateral(profiles, pref, k, s);
    };
    for (AgentIndex i = 0; i < n; ++i) {
        if (i == k)
            continue;
        for (AgentIndex j = i + 1; j < n; ++j) {
            if (j == k)
                continue;
            int sign = 0;
            std::optional<PropertyWitness> bad;
            for_each_base(n, k, AgentSet::singleton(i).with(j), [&](AgentSet s) {
                const int c = compare_values(value(s.with(i)), value(s.with(j)));
                if (c == 0) {
                    bad = PropertyWitness{k, i, j, s, {},
                                          "agent " + id_of(k) + " is indifferent between adding " + id_of(i) +
                                              " and adding " + id_of(j) + " to " + id_list(s)};
                    return false;
                }
                if (sign != 0 && c != sign) {
                    bad = PropertyWitness{k, i, j, s, {},
                                          "agent " + id_of(k) + "'s ranking of " + id_of(i) + " and " + id_of(j) +
                                              " flips at base " + id_list(s)};
                    return false;
                }
                sign = c;
                return true;
            });
            if (bad)
                return bad;
            out[i * n + j] = sign;
            out[j * n + i] = -sign;
        }
    }
    // a complete tournament is transitive iff it has no 3-cycle
    for (AgentIndex a = 0; a < n; ++a)
        for (AgentIndex b = 0; b < n; ++b)
            for (AgentIndex c = 0; c < n; ++c) {
                if (a == k || b == k || c == k || a == b || b == c || a == c)
                    continue;
                if (out[a * n + b] > 0 && out[b * n + c] > 0 && out[c * n + a] > 0)
                    return PropertyWitness{k, a, b, AgentSet::singleton(k), {},
                                           "agent " + id_of(k) + "'s ranking is intransitive: " + id_of(a) + ">" +
                                               id_of(b) + ">" + id_of(c) + ">" + id_of(a)};
            }
    return std::nullopt;
}

} // namespace

TopAgentResult check_top_agent(const Profiles& profiles, const PreferenceModel& pref,
                               std::optional<std::size_t> cap)
{
    const std::size_t n = profiles.size();
    TopAgentResult result;
    const auto prior = pref.is_canonical() ? by_data_size(profiles) : [&] {
        std::vector<AgentIndex> ids(n);
        std::iota(ids.begin(), ids.end(), AgentIndex{0});
        return ids;
    }();
    if (n <= 1) {
        result.common_ranking = prior;
        return result;
    }

    const bool exhaustive = !pref.is_canonical() || n <= 16;
    if (!pref.is_canonical())
        require_cap(n, std::max<std::size_t>(stability_cap(cap), 6), "top-agent check on table models");

    if (!exhaustive) {
        // Each agent compares S+i against S+j with |S+i| = |S+j|: the
        // canonical value is increasing in pooled size, so distinct sizes
        // give one strict common order. Spot-check that on random bases.
        for (std::size_t k = 1; k < n; ++k)
            if (profiles[prior[k - 1]].data_size == profiles[prior[k]].data_size) {
                result.pass = false;
                result.common_ranking.clear();
                result.witness = PropertyWitness{prior[k - 1], prior[k - 1], prior[k], AgentSet::singleton(prior[k - 1]),
                                                 {}, "agents " + id_of(prior[k - 1]) + " and " + id_of(prior[k]) +
                                                         " have equal data sizes"};
                return result;
            }
        std::mt19937_64 rng(0x5eed);
        for (int draw = 0; draw < 4096; ++draw) {
            const AgentIndex k = rng() % n;
            AgentIndex i = rng() % n, j = rng() % n;
            if (i == k || j == k || i == j)
                continue;
            AgentSet s = AgentSet(static_cast<AgentSet::Bits>(rng())) & AgentSet::first(n);
            s = s.with(k).without(i).without(j);
            const int c = compare_values(eval_bilateral(profiles, pref, k, s.with(i)),
                                         eval_bilateral(profiles, pref, k, s.with(j)));
            const int expected = profiles[i].data_size > profiles[j].data_size ? 1 : -1;
            if (c != expected) {
                result.pass = false;
                result.witness = PropertyWitness{k, i, j, s, {}, "sampled comparison contradicts data-size order"};
                return result;
            }
        }
        result.common_ranking = prior;
        return result;
    }

    std::optional<BilateralTable> table;
    if (n <= 12)
        table.emplace(profiles, pref);

    std::vector<std::vector<int>> verdict(n);
    for (AgentIndex k = 0; k < n; ++k) {
        if (auto w = per_agent_relation(profiles, pref, table ? &*table : nullptr, k, verdict[k])) {
            result.pass = false;
            result.witness = std::move(w);
            return result;
        }
    }

    // Agents must agree on every pair they both judge.
    std::vector<int> common(n * n, 0);
    std::vector<AgentIndex> judge(n * n, n);
    for (AgentIndex k = 0; k < n; ++k)
        for (AgentIndex i = 0; i < n; ++i)
            for (AgentIndex j = 0; j < n; ++j) {
                const int v = verdict[k][i * n + j];
                if (v == 0)
                    continue;
                if (common[i * n + j] != 0 && common[i * n + j] != v) {
                    const AgentIndex other = judge[i * n + j];
                    result.pass = false;
                    result.witness = PropertyWitness{
                        k, i, j, AgentSet::singleton(k), {},
                        "agent " + id_of(k) + " ranks " + id_of(v > 0 ? i : j) + " above " + id_of(v > 0 ? j : i) +
                            " but agent " + id_of(other) + " ranks them the other way"};
                    return result;
                }
                common[i * n + j] = v;
                judge[i * n + j] = k;
            }

    // Topological order of the union, ties broken by the prior order.
    std::vector<std::size_t> indegree(n, 0);
    for (AgentIndex i = 0; i < n; ++i)
        for (AgentIndex j = 0; j < n; ++j)
            if (common[i * n + j] > 0)
                ++indegree[j];
    std::vector<bool> placed(n, false);
    for (std::size_t step = 0; step < n; ++step) {
        std::optional<AgentIndex> next;
        for (AgentIndex cand : prior)
            if (!placed[cand] && indegree[cand] == 0) {
                next = cand;
                break;
            }
        if (!next)
            break;
        placed[*next] = true;
        result.common_ranking.push_back(*next);
        for (AgentIndex j = 0; j < n; ++j)
            if (common[*next * n + j] > 0)
                --indegree[j];
    }
    if (result.common_ranking.size() == n)
        return result;

    // Report one cycle of the union relation.
    AgentIndex start = 0;
    while (placed[start])
        ++start;
    std::vector<AgentIndex> walk{start};
    std::vector<std::size_t> seen(n, n);
    seen[start] = 0;
    AgentIndex cur = start;
    while (true) {
        AgentIndex nxt = n;
        for (AgentIndex j = 0; j < n; ++j)
            if (!placed[j] && common[cur * n + j] > 0) {
                nxt = j;
                break;
            }
        if (seen[nxt] != n) {
            walk.erase(walk.begin(), walk.begin() + static_cast<std::ptrdiff_t>(seen[nxt]));
            break;
        }
        seen[nxt] = walk.size();
        walk.push_back(nxt);
        cur = nxt;
    }
    std::string reason = "no common ranking:";
    for (std::size_t e = 0; e < walk.size(); ++e) {
        const AgentIndex a = walk[e];
        const AgentIndex b = walk[(e + 1) % walk.size()];
        reason += (e == 0 ? " " : ", ") + id_of(a) + ">" + id_of(b) + " for agent " + id_of(judge[a * n + b]);
    }
    const AgentIndex a = walk[0];
    const AgentIndex b = walk[1 % walk.size()];
    result.pass = false;
    result.common_ranking.clear();
    result.witness = PropertyWitness{judge[a * n + b], a, b, AgentSet::singleton(judge[a * n + b]), {}, reason};
    return result;
}

ComplementarityResult check_limited_complementarity(const Profiles& profiles, const PreferenceModel& pref,
                                                    std::optional<std::size_t> cap)
{
    const std::size_t n = profiles.size();
    require_cap(n, stability_cap(cap), "limited-complementarity check");
    ComplementarityResult result;
    if (n <= 1)
        return result;

    const auto top = check_top_agent(profiles, pref, cap);
    std::vector<AgentIndex> ranking = top.common_ranking;
    if (!top.pass) {
        ranking.resize(n);
        std::iota(ranking.begin(), ranking.end(), AgentIndex{0});
    }
    std::vector<std::size_t> position(n);
    for (std::size_t p = 0; p < n; ++p)
        position[ranking[p]] = p;

    const BilateralTable table(profiles, pref);
    for (AgentIndex k = 0; k < n && result.pass; ++k) {
        for_each_base(n, k, AgentSet{}, [&](AgentSet base) {
            const double here = table.value(k, base);
            for (AgentIndex i : ranking) {
                if (base.contains(i) || compare_values(here, table.value(k, base.with(i))) <= 0)
                    continue;
                AgentSet lower;
                for (std::size_t p = position[i]; p < n; ++p)
                    lower = lower.with(ranking[p]);
                lower = lower.minus(base);
                const auto bits = lower.bits();
                // nonempty submasks of `lower`, ascending
                AgentSet::Bits sub = 0;
                do {
                    sub = (sub - bits) & bits;
                    if (sub == 0)
                        break;
                    const AgentSet added(sub);
                    if (compare_values(here, table.value(k, base | added)) <= 0) {
                        result.pass = false;
                        result.witness = PropertyWitness{
                            k, i, i, base, added,
                            "agent " + id_of(k) + " loses by adding " + id_of(i) + " to " + id_list(base) +
                                " but does not lose by adding " + id_list(added)};
                        return false;
                    }
                } while (sub != bits);
            }
            return true;
        });
    }
    return result;
}

RemovalResult check_edge_removal_monotonicity(const Profiles& profiles, const PreferenceModel& pref,
                                              const SharingGraph& g, std::optional<std::size_t> cap)
{
    const std::size_t n = profiles.size();
    require_cap(n, stability_cap(cap), "edge-removal check");
    const BilateralTable table(profiles, pref);
    const auto edges = g.edges();
    RemovalResult result;
    for (std::uint64_t removed = 1; removed < (std::uint64_t{1} << edges.size()); ++removed) {
        SharingGraph reduced = g;
        for (std::size_t e = 0; e < edges.size(); ++e)
            if ((removed >> e) & 1U)
                reduced.remove_edge(edges[e].first, edges[e].second);
        for (AgentIndex m = 0; m < n; ++m)
            if (compare_values(table.value(m, g.neighborhood(m)), table.value(m, reduced.neighborhood(m))) < 0) {
                result.pass = false;
                result.witness = std::make_pair(std::move(reduced), m);
                return result;
            }
    }
    return result;
}

BilateralWelfare welfare_max_bilateral(const Profiles& profiles, const PreferenceModel& pref,
                                       std::optional<std::size_t> cap)
{
    const std::size_t n = profiles.size();
    require_cap(n, stability_cap(cap), "bilateral welfare search");
    const BilateralTable table(profiles, pref);
    BilateralWelfare best{SharingGraph(n), -std::numeric_limits<double>::infinity()};
    const std::uint64_t graphs = std::uint64_t{1} << (n * (n - (n > 0 ? 1 : 0)) / 2);
    for (std::uint64_t idx = 0; idx < graphs; ++idx) {
        const SharingGraph g = sharing_graph_from_index(n, idx);
        double total = 0.0;
        for (AgentIndex m = 0; m < n; ++m)
            total += table.value(m, g.neighborhood(m));
        if (total > best.value) {
            best.graph = g;
            best.value = total;
        }
    }
    return best;
}

} // namespace datamarket
