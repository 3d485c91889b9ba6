#pragma once

// Command dispatch behind the CLI. Every command returns a report whose
// bytes depend only on the scenario and the options.

#include "datamarket/scenario.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <utility>

namespace datamarket {

struct CommandOptions {
    bool certify = false;
    std::string mode = "mixed"; // standard | mixed | d-mixed
    double w0 = 0.5;
    double alpha_max = 10.0;
    std::string pivot = "keep-data"; // keep-data | remove-agent
    std::optional<std::size_t> wmax;
    std::string dp_command = "match"; // match | prices | vcg
    std::optional<std::pair<int, int>> pair; // 1-based seller, buyer
    std::optional<int> agent;                // 1-based
    bool timing = false;
    Execution exec = Execution::parallel;

    // sweep
    std::string sweep_command = "match";
    std::uint64_t seed = 0;
    std::size_t count = 20;
    std::size_t sweep_agents = 3;
};

struct Report {
    nlohmann::ordered_json doc;
    bool ok = true;

    std::string text() const { return doc.dump(2) + "\n"; }
};

/// Commands that read a scenario file.
inline constexpr const char* kScenarioCommands[] = {"match", "check-properties", "prices", "price-interval",
                                                    "vcg",   "probe",            "dp"};

bool is_scenario_command(const std::string& command);

/// Runs a scenario command. Throws ContractViolation for unknown commands
/// or bad options.
Report run_command(const std::string& command, const Scenario& scenario, const CommandOptions& options);

/// Generates options.count scenarios from options.seed on and runs
/// options.sweep_command on each; results are listed in seed order.
Report run_sweep(const CommandOptions& options);

} // namespace datamarket
