#include "datamarket/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

namespace datamarket {

using nlohmann::json;
using nlohmann::ordered_json;

QueryPreference DpSettings::query_preference() const
{
    if (!response)
        return QueryPreference::halving(max_queries);
    if (response->size() != max_queries + 1)
        throw MalformedModel("query response table must have wmax + 1 entries");
    return QueryPreference::from_table(*response);
}

namespace {

std::string pointer(const std::string& base, const std::string& key) { return base + "/" + key; }
std::string pointer(const std::string& base, std::size_t idx) { return base + "/" + std::to_string(idx); }

void allow_keys(const json& obj, const std::string& at, std::initializer_list<std::string_view> keys)
{
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        if (std::find(keys.begin(), keys.end(), key) == keys.end())
            throw ScenarioError(pointer(at, key), "unknown key");
    }
}

const json& require(const json& obj, const std::string& at, const char* key)
{
    if (!obj.contains(key))
        throw ScenarioError(pointer(at, key), "missing required key");
    return obj.at(key);
}

double number(const json& v, const std::string& at)
{
    if (!v.is_number())
        throw ScenarioError(at, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x))
        throw ScenarioError(at, "expected a finite number");
    return x;
}

double number_or(const json& obj, const std::string& at, const char* key, double fallback)
{
    return obj.contains(key) ? number(obj.at(key), pointer(at, key)) : fallback;
}

std::uint64_t unsigned_integer(const json& v, const std::string& at)
{
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
        throw ScenarioError(at, "expected a nonnegative integer");
    return v.get<std::uint64_t>();
}

int agent_id(const json& v, const std::string& at, std::size_t n)
{
    const auto id = unsigned_integer(v, at);
    if (id < 1 || id > n)
        throw ScenarioError(at, "agent id " + std::to_string(id) + " outside 1.." + std::to_string(n));
    return static_cast<int>(id);
}

AgentSet parse_set(const json& v, const std::string& at, std::size_t n)
{
    if (!v.is_array())
        throw ScenarioError(at, "expected a list of agent ids");
    AgentSet s;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const int id = agent_id(v[k], pointer(at, k), n);
        if (s.contains(static_cast<AgentIndex>(id - 1)))
            throw ScenarioError(pointer(at, k), "duplicate agent id " + std::to_string(id));
        s = s.with(static_cast<AgentIndex>(id - 1));
    }
    return s;
}

Profiles parse_agents(const json& agents, const std::string& at)
{
    if (!agents.is_array())
        throw ScenarioError(at, "expected a list of agents");
    const std::size_t n = agents.size();
    if (n == 0)
        throw ScenarioError(at, "scenario has no agents");
    if (n > AgentSet::capacity)
        throw ScenarioError(at, "at most " + std::to_string(AgentSet::capacity) + " agents are supported");
    Profiles profiles(n);
    std::set<std::uint64_t> seen;
    for (std::size_t k = 0; k < n; ++k) {
        const std::string here = pointer(at, k);
        const json& a = agents[k];
        if (!a.is_object())
            throw ScenarioError(here, "expected an agent object");
        allow_keys(a, here, {"id", "d", "a", "c_link", "c_supply"});
        const auto id = unsigned_integer(require(a, here, "id"), pointer(here, "id"));
        if (!seen.insert(id).second)
            throw ScenarioError(pointer(here, "id"), "duplicate agent id " + std::to_string(id));
        if (id != k + 1)
            throw ScenarioError(pointer(here, "id"), "agents must be listed with ids 1..N in order");
        auto& p = profiles[k];
        p.id = static_cast<int>(id);
        p.data_size = number(require(a, here, "d"), pointer(here, "d"));
        if (!(p.data_size > 0.0))
            throw ScenarioError(pointer(here, "d"), "data size must be positive");
        p.theta.benefit_scale = number_or(a, here, "a", 1.0);
        if (!(p.theta.benefit_scale > 0.0))
            throw ScenarioError(pointer(here, "a"), "benefit scale must be positive");
        p.theta.connection_cost = number_or(a, here, "c_link", 0.0);
        if (p.theta.connection_cost < 0.0)
            throw ScenarioError(pointer(here, "c_link"), "link cost must be nonnegative");
        p.theta.supply_cost.assign(n, 0.0);
        if (a.contains("c_supply")) {
            const json& row = a.at("c_supply");
            const std::string row_at = pointer(here, "c_supply");
            if (!row.is_object())
                throw ScenarioError(row_at, "expected an object keyed by buyer id");
            for (const auto& [key, value] : row.items()) {
                const std::string entry_at = pointer(row_at, key);
                std::size_t used = 0;
                unsigned long target = 0;
                try {
                    target = std::stoul(key, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != key.size() || target < 1 || target > n)
                    throw ScenarioError(entry_at, "key must be a buyer id in 1.." + std::to_string(n));
                if (target == id)
                    throw ScenarioError(entry_at, "an agent has no supply cost towards itself");
                const double c = number(value, entry_at);
                if (c < 0.0)
                    throw ScenarioError(entry_at, "supply cost must be nonnegative");
                p.theta.supply_cost[target - 1] = c;
            }
        }
    }
    return profiles;
}

PreferenceModel parse_tables(const json& tables, const std::string& at, std::size_t n)
{
    if (!tables.is_array() || tables.size() != n)
        throw ScenarioError(at, "expected one table per agent");
    if (n > kMaxTableAgents)
        throw ScenarioError(at, "table preferences are limited to " + std::to_string(kMaxTableAgents) + " agents");
    std::optional<bool> cardinal;
    std::vector<std::vector<AgentSet>> rankings(n);
    std::vector<std::vector<std::pair<AgentSet, double>>> values(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::string here = pointer(at, k);
        const json& t = tables[k];
        if (!t.is_array())
            throw ScenarioError(here, "expected a list of subsets or {set, value} entries");
        for (std::size_t e = 0; e < t.size(); ++e) {
            const std::string entry_at = pointer(here, e);
            const bool is_value = t[e].is_object();
            if (cardinal && *cardinal != is_value)
                throw ScenarioError(entry_at, "tables must all be rankings or all be value lists");
            cardinal = is_value;
            if (is_value) {
                allow_keys(t[e], entry_at, {"set", "value"});
                const AgentSet s = parse_set(require(t[e], entry_at, "set"), pointer(entry_at, "set"), n);
                if (!s.contains(k))
                    throw ScenarioError(pointer(entry_at, "set"), "subset must contain agent " + std::to_string(k + 1));
                values[k].emplace_back(s, number(require(t[e], entry_at, "value"), pointer(entry_at, "value")));
            } else {
                const AgentSet s = parse_set(t[e], entry_at, n);
                if (!s.contains(k))
                    throw ScenarioError(entry_at, "subset must contain agent " + std::to_string(k + 1));
                rankings[k].push_back(s);
            }
        }
    }
    try {
        if (cardinal.value_or(false))
            return PreferenceModel::from_values(n, values);
        return PreferenceModel::from_rankings(n, rankings);
    } catch (const MalformedModel& e) {
        throw ScenarioError(at, e.what());
    }
}

DpSettings parse_dp(const json& dp, const std::string& at)
{
    if (!dp.is_object())
        throw ScenarioError(at, "expected an object");
    allow_keys(dp, at, {"wmax", "q"});
    DpSettings out;
    if (dp.contains("wmax"))
        out.max_queries = unsigned_integer(dp.at("wmax"), pointer(at, "wmax"));
    if (out.max_queries > 64)
        throw ScenarioError(pointer(at, "wmax"), "wmax above 64 is not supported");
    if (dp.contains("q")) {
        const json& q = dp.at("q");
        const std::string q_at = pointer(at, "q");
        if (!q.is_array())
            throw ScenarioError(q_at, "expected a list q(0..wmax)");
        std::vector<double> table;
        for (std::size_t k = 0; k < q.size(); ++k)
            table.push_back(number(q[k], pointer(q_at, k)));
        if (!dp.contains("wmax") && !table.empty())
            out.max_queries = table.size() - 1;
        out.response = std::move(table);
    }
    try {
        (void)out.query_preference();
    } catch (const MalformedModel& e) {
        throw ScenarioError(pointer(at, "q"), e.what());
    }
    return out;
}

} // namespace

Scenario parse_scenario(const json& doc)
{
    if (!doc.is_object())
        throw ScenarioError("", "scenario must be a JSON object");
    allow_keys(doc, "", {"metadata", "preference", "agents", "ordinal_tables", "dp"});
    Scenario s;
    s.profiles = parse_agents(require(doc, "", "agents"), "/agents");
    const std::size_t n = s.profiles.size();

    std::string kind = "canonical";
    if (doc.contains("preference")) {
        if (!doc.at("preference").is_string())
            throw ScenarioError("/preference", "expected \"canonical\" or \"ordinal\"");
        kind = doc.at("preference").get<std::string>();
    }
    if (kind == "canonical") {
        if (doc.contains("ordinal_tables"))
            throw ScenarioError("/ordinal_tables", "tables given for a canonical scenario");
        s.preference = PreferenceModel::canonical();
    } else if (kind == "ordinal") {
        s.preference = parse_tables(require(doc, "", "ordinal_tables"), "/ordinal_tables", n);
    } else {
        throw ScenarioError("/preference", "unknown preference model \"" + kind + "\"");
    }

    if (doc.contains("dp"))
        s.dp = parse_dp(doc.at("dp"), "/dp");

    if (doc.contains("metadata")) {
        const json& m = doc.at("metadata");
        if (!m.is_object())
            throw ScenarioError("/metadata", "expected an object");
        allow_keys(m, "/metadata", {"name", "seed"});
        if (m.contains("name")) {
            if (!m.at("name").is_string())
                throw ScenarioError("/metadata/name", "expected a string");
            s.metadata.name = m.at("name").get<std::string>();
        }
        if (m.contains("seed"))
            s.metadata.seed = unsigned_integer(m.at("seed"), "/metadata/seed");
    }
    validate_scenario(s);
    return s;
}

Scenario parse_scenario_text(std::string_view text)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ScenarioError("byte " + std::to_string(e.byte), "JSON syntax error");
    }
    return parse_scenario(doc);
}

Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ScenarioError("", "cannot open scenario file " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_scenario_text(buffer.str());
    } catch (const ScenarioError& e) {
        throw ScenarioError(path + (e.location.empty() ? "" : ":" + e.location),
                            std::string(e.what()).substr(e.location.empty() ? 0 : e.location.size() + 2));
    }
}

ordered_json emit_scenario(const Scenario& s)
{
    const std::size_t n = s.n_agents();
    ordered_json doc = ordered_json::object();
    ordered_json meta = ordered_json::object();
    meta["name"] = s.metadata.name;
    if (s.metadata.seed)
        meta["seed"] = *s.metadata.seed;
    doc["metadata"] = meta;
    doc["preference"] = s.preference.is_canonical() ? "canonical" : "ordinal";

    ordered_json agents = ordered_json::array();
    for (const auto& p : s.profiles) {
        ordered_json a = ordered_json::object();
        a["id"] = p.id;
        a["d"] = p.data_size;
        a["a"] = p.theta.benefit_scale;
        a["c_link"] = p.theta.connection_cost;
        ordered_json row = ordered_json::object();
        for (AgentIndex j = 0; j < n; ++j)
            if (static_cast<int>(j + 1) != p.id)
                row[std::to_string(j + 1)] = p.theta.supply_cost[j];
        a["c_supply"] = row;
        agents.push_back(a);
    }
    doc["agents"] = agents;

    if (!s.preference.is_canonical()) {
        ordered_json tables = ordered_json::array();
        for (const auto& table : s.preference.ordinal().tables) {
            ordered_json t = ordered_json::array();
            std::vector<std::pair<AgentSet, double>> entries;
            for (std::size_t bits = 0; bits < table.values.size(); ++bits)
                if (table.values[bits])
                    entries.emplace_back(AgentSet(static_cast<AgentSet::Bits>(bits)), *table.values[bits]);
            if (table.cardinal) {
                for (const auto& [set, v] : entries)
                    t.push_back(ordered_json{{"set", set.ids()}, {"value", v}});
            } else {
                std::stable_sort(entries.begin(), entries.end(),
                                 [](const auto& x, const auto& y) { return x.second > y.second; });
                for (const auto& entry : entries)
                    t.push_back(entry.first.ids());
            }
            tables.push_back(t);
        }
        doc["ordinal_tables"] = tables;
    }

    if (s.dp) {
        ordered_json dp = ordered_json::object();
        dp["wmax"] = s.dp->max_queries;
        if (s.dp->response)
            dp["q"] = *s.dp->response;
        doc["dp"] = dp;
    }
    return doc;
}

std::string canonical_text(const Scenario& s) { return emit_scenario(s).dump(); }

std::string scenario_digest(const Scenario& s)
{
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical_text(s)) {
        hash ^= ch;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

void validate_scenario(const Scenario& s)
{
    if (s.profiles.empty())
        throw ScenarioError("/agents", "scenario has no agents");
    try {
        validate_profiles(s.profiles);
    } catch (const ContractViolation& e) {
        throw ScenarioError("/agents", e.what());
    }
    if (s.preference.is_canonical()) {
        for (std::size_t k = 1; k < s.profiles.size(); ++k) {
            if (s.profiles[k].data_size == s.profiles[k - 1].data_size)
                throw ScenarioError(pointer(pointer("/agents", k), "d"),
                                    "duplicate data size " + std::to_string(s.profiles[k].data_size) +
                                        " (canonical models need strictly decreasing sizes)");
            if (s.profiles[k].data_size > s.profiles[k - 1].data_size)
                throw ScenarioError(pointer(pointer("/agents", k), "d"),
                                    "canonical models need data sizes strictly decreasing in id order");
        }
    } else if (s.preference.ordinal().tables.size() != s.profiles.size()) {
        throw ScenarioError("/ordinal_tables", "expected one table per agent");
    }
    if (s.dp) {
        if (!s.preference.is_canonical())
            throw ScenarioError("/dp", "query markets need the canonical preference model");
        try {
            (void)s.dp->query_preference();
        } catch (const MalformedModel& e) {
            throw ScenarioError("/dp/q", e.what());
        }
    }
}

namespace {

double draw(std::mt19937_64& rng, double lo, double hi)
{
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

void check_range(double lo, double hi, const char* what, bool positive)
{
    if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi || (positive ? lo <= 0.0 : lo < 0.0))
        throw ContractViolation(std::string("invalid ") + what + " range");
}

} // namespace

Scenario generate_scenario(std::uint64_t seed, const GeneratorParams& params)
{
    const std::size_t n = params.n_agents;
    if (n < 1 || n > AgentSet::capacity)
        throw ContractViolation("generated scenarios need 1.." + std::to_string(AgentSet::capacity) + " agents");
    check_range(params.d_min, params.d_max, "data size", true);
    check_range(params.a_min, params.a_max, "benefit scale", true);
    check_range(params.link_min, params.link_max, "link cost", false);
    check_range(params.supply_min, params.supply_max, "supply cost", false);
    if (n > 1 && params.d_min == params.d_max)
        throw ContractViolation("distinct data sizes need a nondegenerate range");

    std::mt19937_64 rng(seed);
    std::vector<double> sizes;
    while (sizes.size() < n) {
        const double d = draw(rng, params.d_min, params.d_max);
        if (d > 0.0 && std::find(sizes.begin(), sizes.end(), d) == sizes.end())
            sizes.push_back(d);
    }
    std::sort(sizes.begin(), sizes.end(), std::greater<>());

    Scenario s;
    s.preference = PreferenceModel::canonical();
    s.metadata.name = "generated-n" + std::to_string(n) + "-seed" + std::to_string(seed);
    s.metadata.seed = seed;
    s.dp = params.dp;
    s.profiles.resize(n);
    for (AgentIndex i = 0; i < n; ++i) {
        auto& p = s.profiles[i];
        p.id = static_cast<int>(i + 1);
        p.data_size = sizes[i];
        p.theta.benefit_scale = draw(rng, params.a_min, params.a_max);
        p.theta.connection_cost = draw(rng, params.link_min, params.link_max);
        p.theta.supply_cost.assign(n, 0.0);
        for (AgentIndex j = 0; j < n; ++j) {
            if (j == i)
                continue;
            p.theta.supply_cost[j] =
                params.supply_equals_link ? p.theta.connection_cost : draw(rng, params.supply_min, params.supply_max);
        }
    }
    validate_scenario(s);
    return s;
}

} // namespace datamarket
