#pragma once

// Scenario files: agent profiles, the preference model, optional query
// settings and metadata. Emission is canonical (fixed key order, shortest
// round-trip reals) so that the digest is stable.

#include "datamarket/dp.hpp"
#include "datamarket/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace datamarket {

/// Malformed scenario; `location` is a JSON pointer into the document.
struct ScenarioError : std::runtime_error {
    ScenarioError(std::string location, const std::string& what)
        : std::runtime_error(location.empty() ? what : location + ": " + what), location(std::move(location))
    {
    }
    std::string location;
};

/// Table models store 2^N entries per agent.
inline constexpr std::size_t kMaxTableAgents = 6;

struct DpSettings {
    std::size_t max_queries = kDefaultMaxQueries;
    /// Explicit q(0..max_queries); halving response when absent.
    std::optional<std::vector<double>> response;

    QueryPreference query_preference() const;

    friend bool operator==(const DpSettings&, const DpSettings&) = default;
};

struct ScenarioMetadata {
    std::string name;
    std::optional<std::uint64_t> seed;

    friend bool operator==(const ScenarioMetadata&, const ScenarioMetadata&) = default;
};

struct Scenario {
    Profiles profiles;
    PreferenceModel preference;
    std::optional<DpSettings> dp;
    ScenarioMetadata metadata;

    std::size_t n_agents() const { return profiles.size(); }

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

Scenario parse_scenario(const nlohmann::json& doc);
/// Parses text; syntax errors carry the byte offset.
Scenario parse_scenario_text(std::string_view text);
Scenario load_scenario(const std::string& path);

nlohmann::ordered_json emit_scenario(const Scenario& scenario);
/// Compact canonical text of emit_scenario.
std::string canonical_text(const Scenario& scenario);
/// FNV-1a 64 of canonical_text, as 16 hex digits.
std::string scenario_digest(const Scenario& scenario);

/// Profiles valid, at least one agent, canonical models strictly ordered
/// by data size, table models complete enough to name every agent.
void validate_scenario(const Scenario& scenario);

struct GeneratorParams {
    std::size_t n_agents = 3;
    double d_min = 1.0;
    double d_max = 10.0;
    double a_min = 0.5;
    double a_max = 2.0;
    double link_min = 0.0;
    double link_max = 0.6;
    double supply_min = 0.0;
    double supply_max = 0.6;
    /// Every supply cost equals the agent's link cost (the per-query
    /// market then mirrors the bilateral one).
    bool supply_equals_link = false;
    std::optional<DpSettings> dp;
};

/// Canonical scenario with distinct data sizes sorted so that agent 1
/// holds the most data. Same seed and parameters give the same scenario.
Scenario generate_scenario(std::uint64_t seed, const GeneratorParams& params);

} // namespace datamarket
