// datamarket: run the market mechanisms and their checkers on scenario files.
//
// Exit codes: 0 all checks pass, 1 some check failed, 2 usage or input error.

#include "datamarket/report.hpp"
#include "datamarket/scenario.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

using namespace datamarket;

struct Cli {
    std::string scenario_path;
    std::string out_path;
    std::string pair;
    int agent = 0;
    std::size_t wmax = 0;
    bool serial = false;
    CommandOptions options;

    // generate
    std::uint64_t seed = 0;
    std::size_t agents = 3;
    bool supply_equals_link = false;
};

std::pair<int, int> parse_pair(const std::string& text)
{
    const auto comma = text.find(',');
    if (comma == std::string::npos)
        throw CLI::ValidationError("--pair", "expected m,j");
    try {
        std::size_t a = 0;
        std::size_t b = 0;
        const int m = std::stoi(text.substr(0, comma), &a);
        const int j = std::stoi(text.substr(comma + 1), &b);
        if (a != comma || b != text.size() - comma - 1)
            throw std::invalid_argument(text);
        return {m, j};
    } catch (const std::logic_error&) {
        throw CLI::ValidationError("--pair", "expected two integer ids m,j");
    }
}

void emit(const std::string& text, const std::string& out_path)
{
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + out_path);
    out << text;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Data-sharing market mechanisms with brute-force certification"};
    app.require_subcommand(1);
    Cli cli;

    auto add_common = [&](CLI::App* sub, bool with_scenario) {
        if (with_scenario)
            sub->add_option("scenario", cli.scenario_path, "Scenario JSON file")->required();
        sub->add_option("--out", cli.out_path, "Write the report here instead of stdout");
        sub->add_flag("--timing", cli.options.timing, "Add wall-clock time to the report");
        sub->add_flag("--serial", cli.serial, "Use the serial kernels");
    };
    auto add_mechanism = [&](CLI::App* sub) {
        sub->add_option("--mode", cli.options.mode, "standard, mixed or d-mixed")
            ->check(CLI::IsMember({"standard", "mixed", "d-mixed"}));
        sub->add_option("--w0", cli.options.w0, "Base weight for d-mixed")->check(CLI::Range(0.0, 1.0));
        sub->add_option("--alpha-max", cli.options.alpha_max, "Largest upward quality multiplier");
        sub->add_option("--pivot", cli.options.pivot, "Pivot problem: keep-data or remove-agent")
            ->check(CLI::IsMember({"keep-data", "remove-agent"}));
    };

    auto* match = app.add_subcommand("match", "Ordered match with a stability certificate");
    add_common(match, true);
    match->add_flag("--certify", cli.options.certify, "Also list every stable graph");

    auto* props = app.add_subcommand("check-properties", "Top agent and limited complementarity checks");
    add_common(props, true);

    auto* prices = app.add_subcommand("prices", "Competitive prices and the resulting market");
    add_common(prices, true);

    auto* interval = app.add_subcommand("price-interval", "Largest demand-preserving price for one pair");
    add_common(interval, true);
    interval->add_option("--pair", cli.pair, "Seller and buyer ids, m,j")->required();

    auto* vcg = app.add_subcommand("vcg", "VCG and its budget-balanced variants");
    add_common(vcg, true);
    add_mechanism(vcg);

    auto* probe = app.add_subcommand("probe", "Misreport grid for one agent or all agents");
    add_common(probe, true);
    add_mechanism(probe);
    probe->add_option("--agent", cli.agent, "Agent id (default: every agent)");

    auto* dp = app.add_subcommand("dp", "Query-count markets");
    add_common(dp, true);
    dp->add_option("--wmax", cli.wmax, "Per-pair query cap (overrides the scenario)");
    dp->add_option("--cmd", cli.options.dp_command, "match, prices or vcg")
        ->check(CLI::IsMember({"match", "prices", "vcg"}));
    dp->add_option("--alpha-max", cli.options.alpha_max, "Largest upward quality multiplier");

    auto* sweep = app.add_subcommand("sweep", "Run a command over generated scenarios");
    add_common(sweep, false);
    sweep->add_option("--cmd", cli.options.sweep_command, "Command to run on each scenario")
        ->check(CLI::IsMember({"match", "check-properties", "prices", "vcg", "probe", "dp"}));
    sweep->add_option("--seed", cli.options.seed, "First seed");
    sweep->add_option("--count", cli.options.count, "Number of scenarios");
    sweep->add_option("--agents", cli.options.sweep_agents, "Agents per scenario")->check(CLI::Range(1, 16));
    add_mechanism(sweep);
    sweep->add_option("--dp-cmd", cli.options.dp_command, "Query-market command when --cmd dp")
        ->check(CLI::IsMember({"match", "prices", "vcg"}));

    auto* generate = app.add_subcommand("generate", "Write a seeded random scenario");
    generate->add_option("--seed", cli.seed, "Random seed");
    generate->add_option("--agents", cli.agents, "Number of agents")->check(CLI::Range(1, 32));
    generate->add_flag("--supply-equals-link", cli.supply_equals_link, "Set every supply cost to the link cost");
    generate->add_option("--out", cli.out_path, "Write the scenario here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        cli.options.exec = cli.serial ? Execution::serial : Execution::parallel;
        if (!cli.pair.empty())
            cli.options.pair = parse_pair(cli.pair);
        if (probe->parsed() && probe->count("--agent") > 0)
            cli.options.agent = cli.agent;
        if (dp->parsed() && dp->count("--wmax") > 0)
            cli.options.wmax = cli.wmax;

        if (generate->parsed()) {
            GeneratorParams params;
            params.n_agents = cli.agents;
            params.supply_equals_link = cli.supply_equals_link;
            emit(emit_scenario(generate_scenario(cli.seed, params)).dump(2) + "\n", cli.out_path);
            return 0;
        }
        if (sweep->parsed()) {
            const Report report = run_sweep(cli.options);
            emit(report.text(), cli.out_path);
            return report.ok ? 0 : 1;
        }

        const auto* sub = app.get_subcommands().front();
        const Scenario scenario = load_scenario(cli.scenario_path);
        const Report report = run_command(sub->get_name(), scenario, cli.options);
        emit(report.text(), cli.out_path);
        return report.ok ? 0 : 1;
    } catch (const ScenarioError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
