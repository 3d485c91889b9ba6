#pragma once

// Agents, preference models, outcome graphs and the utility evaluations
// every market module builds on.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace datamarket {

/// Values closer than this are indifferent.
inline constexpr double kIndifference = 1e-12;

/// Three-way comparison with the indifference tolerance: -1, 0 or 1.
int compare_values(double lhs, double rhs);

enum class Execution { serial, parallel };

using AgentIndex = std::size_t;

/// Caller broke an operation's precondition.
struct ContractViolation : std::logic_error {
    using std::logic_error::logic_error;
};

/// A preference model that cannot answer the query it was asked.
struct MalformedModel : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A brute-force oracle was asked to run above its configured size cap.
struct OracleScaleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Set of agents packed into 32 bits; bit k is the agent with index k.
class AgentSet {
public:
    using Bits = std::uint32_t;
    static constexpr std::size_t capacity = 32;

    constexpr AgentSet() = default;
    constexpr explicit AgentSet(Bits bits) : bits_(bits) {}

    static constexpr AgentSet singleton(AgentIndex k) { return AgentSet(Bits{1} << k); }
    static constexpr AgentSet first(std::size_t n)
    {
        return AgentSet(n >= capacity ? ~Bits{0} : ((Bits{1} << n) - 1));
    }

    constexpr Bits bits() const { return bits_; }
    constexpr bool contains(AgentIndex k) const { return (bits_ >> k) & 1U; }
    constexpr bool empty() const { return bits_ == 0; }
    constexpr std::size_t size() const { return static_cast<std::size_t>(std::popcount(bits_)); }

    constexpr AgentSet with(AgentIndex k) const { return AgentSet(bits_ | (Bits{1} << k)); }
    constexpr AgentSet without(AgentIndex k) const { return AgentSet(bits_ & ~(Bits{1} << k)); }

    constexpr AgentSet operator|(AgentSet o) const { return AgentSet(bits_ | o.bits_); }
    constexpr AgentSet operator&(AgentSet o) const { return AgentSet(bits_ & o.bits_); }
    constexpr AgentSet minus(AgentSet o) const { return AgentSet(bits_ & ~o.bits_); }
    constexpr bool subset_of(AgentSet o) const { return (bits_ & ~o.bits_) == 0; }

    friend constexpr bool operator==(AgentSet, AgentSet) = default;

    template <typename F>
    void for_each(F&& f) const
    {
        for (Bits b = bits_; b != 0; b &= b - 1)
            f(static_cast<AgentIndex>(std::countr_zero(b)));
    }

    std::vector<AgentIndex> members() const;
    /// 1-based ids, ascending.
    std::vector<int> ids() const;

private:
    Bits bits_ = 0;
};

struct TypeParams {
    double benefit_scale = 1.0;
    double connection_cost = 0.0;
    /// supply_cost[j] is the cost of handing this agent's data to agent j;
    /// the entry for the agent itself is unused and kept at zero.
    std::vector<double> supply_cost;

    friend bool operator==(const TypeParams&, const TypeParams&) = default;
};

struct AgentProfile {
    int id = 0;
    double data_size = 0.0;
    TypeParams theta;

    friend bool operator==(const AgentProfile&, const AgentProfile&) = default;
};

using Profiles = std::vector<AgentProfile>;

/// Throws ContractViolation unless ids are 1..N in order, sizes are
/// positive and every cost row has N nonnegative entries.
void validate_profiles(const Profiles& profiles);

/// Per-agent table over subsets containing that agent. Rankings given as
/// best-first lists are stored with descending integer values.
struct PreferenceTable {
    std::vector<std::optional<double>> values; // indexed by AgentSet bits
    bool cardinal = false;

    friend bool operator==(const PreferenceTable&, const PreferenceTable&) = default;
};

struct CanonicalPreference {
    friend bool operator==(const CanonicalPreference&, const CanonicalPreference&) = default;
};

struct OrdinalPreference {
    std::vector<PreferenceTable> tables;

    friend bool operator==(const OrdinalPreference&, const OrdinalPreference&) = default;
};

class PreferenceModel {
public:
    PreferenceModel() = default;
    PreferenceModel(CanonicalPreference c) : model_(c) {}
    PreferenceModel(OrdinalPreference o) : model_(std::move(o)) {}

    static PreferenceModel canonical() { return PreferenceModel(CanonicalPreference{}); }

    /// Builds a table model from best-first subset lists, one per agent.
    static PreferenceModel from_rankings(std::size_t n_agents,
                                         const std::vector<std::vector<AgentSet>>& best_first);
    /// Builds a table model from explicit (subset, value) entries.
    static PreferenceModel from_values(std::size_t n_agents,
                                       const std::vector<std::vector<std::pair<AgentSet, double>>>& entries);

    bool is_canonical() const { return std::holds_alternative<CanonicalPreference>(model_); }
    const OrdinalPreference& ordinal() const { return std::get<OrdinalPreference>(model_); }

    friend bool operator==(const PreferenceModel&, const PreferenceModel&) = default;

private:
    std::variant<CanonicalPreference, OrdinalPreference> model_;
};

/// Comparison key of agent `agent` for holding neighborhood `s` in the
/// bilateral game; higher is better. For the canonical family this is
/// a*sqrt(sum of data in s) - c_link*(|s|-1).
double eval_bilateral(const Profiles& profiles, const PreferenceModel& pref, AgentIndex agent, AgentSet s);

/// eval_bilateral for every agent and every subset containing it, for the
/// brute-force oracles. Entry [n][bits] is NaN when n is not in the set or
/// an ordinal table lacks the entry (lookups of such entries must throw).
class BilateralTable {
public:
    BilateralTable(const Profiles& profiles, const PreferenceModel& pref);

    std::size_t n_agents() const { return n_; }
    double value(AgentIndex agent, AgentSet s) const;

private:
    std::size_t n_;
    std::vector<double> values_;
};

/// Undirected sharing graph for bilateral exchange.
class SharingGraph {
public:
    explicit SharingGraph(std::size_t n_agents = 0) : adj_(n_agents) {}

    std::size_t n_agents() const { return adj_.size(); }
    void add_edge(AgentIndex i, AgentIndex j);
    void remove_edge(AgentIndex i, AgentIndex j);
    bool has_edge(AgentIndex i, AgentIndex j) const { return adj_[i].contains(j); }
    AgentSet neighbors(AgentIndex n) const { return adj_[n]; }
    /// The agent together with its neighbors.
    AgentSet neighborhood(AgentIndex n) const { return adj_[n].with(n); }
    std::size_t edge_count() const;
    /// Edges as (i, j) with i < j, ordered by i then j.
    std::vector<std::pair<AgentIndex, AgentIndex>> edges() const;

    friend bool operator==(const SharingGraph&, const SharingGraph&) = default;

private:
    std::vector<AgentSet> adj_;
};

/// Directed graph; an edge i -> j means i shares its data with j.
class DirectedGraph {
public:
    explicit DirectedGraph(std::size_t n_agents = 0) : in_(n_agents) {}

    std::size_t n_agents() const { return in_.size(); }
    void add_edge(AgentIndex from, AgentIndex to);
    void remove_edge(AgentIndex from, AgentIndex to) { in_[to] = in_[to].without(from); }
    bool has_edge(AgentIndex from, AgentIndex to) const { return in_[to].contains(from); }
    /// S^I: agents whose data `agent` receives.
    AgentSet incoming(AgentIndex agent) const { return in_[agent]; }
    void set_incoming(AgentIndex agent, AgentSet from);
    /// S^O: agents that receive `agent`'s data.
    AgentSet outgoing(AgentIndex agent) const;
    std::size_t edge_count() const;
    std::vector<std::pair<AgentIndex, AgentIndex>> edges() const;

    friend bool operator==(const DirectedGraph&, const DirectedGraph&) = default;

private:
    std::vector<AgentSet> in_;
};

/// Directed graph with a nonnegative weight on every present edge.
class WeightedDirectedGraph {
public:
    WeightedDirectedGraph() = default;
    /// Every edge of `base` gets `weight`.
    explicit WeightedDirectedGraph(DirectedGraph base, double weight = 1.0);

    const DirectedGraph& base() const { return base_; }
    std::size_t n_agents() const { return base_.n_agents(); }
    double weight(AgentIndex from, AgentIndex to) const;
    void set_weight(AgentIndex from, AgentIndex to, double w);
    /// Multiplies the weight of every edge into `agent`.
    void scale_incoming(AgentIndex agent, double factor);

    friend bool operator==(const WeightedDirectedGraph&, const WeightedDirectedGraph&) = default;

private:
    DirectedGraph base_;
    std::vector<double> weights_; // row-major [from][to], zero off the edge set
};

/// U_i for receiving data from `incoming`, each edge at `weight`.
/// Table models only admit unit weight.
double incoming_utility(const Profiles& profiles, const PreferenceModel& pref, AgentIndex agent,
                        AgentSet incoming, double weight = 1.0);

/// C_i(S^O) = sum of supply costs; independent of edge weights.
double supply_cost(const Profiles& profiles, AgentIndex agent, AgentSet outgoing);

/// V_i = U_i(weighted incoming data) - C_i(outgoing).
double total_utility(const Profiles& profiles, const PreferenceModel& pref, const DirectedGraph& g,
                     AgentIndex agent);
double total_utility(const Profiles& profiles, const PreferenceModel& pref, const WeightedDirectedGraph& g,
                     AgentIndex agent);

/// Sum of total utilities over all agents.
double total_welfare(const Profiles& profiles, const PreferenceModel& pref, const WeightedDirectedGraph& g);

/// Data sizes strictly decreasing in id order; required by the canonical
/// family for a strict common ranking.
bool strictly_ordered_sizes(const Profiles& profiles);

/// Brute-force size caps. DATAMARKET_ORACLE_CAP raises (or lowers) every
/// cap at once and prints a warning the first time it is read.
struct OracleLimits {
    std::size_t stability = 5;
    std::size_t directed = 4;

    static OracleLimits from_environment();
};

} // namespace datamarket
