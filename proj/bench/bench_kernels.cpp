// Serial versus OpenMP timings for the exhaustive kernels.

#include "datamarket/bilateral.hpp"
#include "datamarket/dp.hpp"
#include "datamarket/mechanism.hpp"
#include "datamarket/scenario.hpp"
#include "datamarket/unilateral.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include <omp.h>

using namespace datamarket;

namespace {

double seconds(const std::function<void()>& body, int repeats)
{
    const auto start = std::chrono::steady_clock::now();
    for (int r = 0; r < repeats; ++r)
        body();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / repeats;
}

void row(const std::string& name, const std::function<void(Execution)>& kernel, int repeats)
{
    const double serial = seconds([&] { kernel(Execution::serial); }, repeats);
    const double parallel = seconds([&] { kernel(Execution::parallel); }, repeats);
    std::printf("%-34s %12.6f %12.6f %8.2fx\n", name.c_str(), serial, parallel, serial / parallel);
}

} // namespace

int main(int argc, char** argv)
{
    const int repeats = argc > 1 ? std::stoi(argv[1]) : 3;
    std::printf("threads: %d\n", omp_get_max_threads());
    std::printf("%-34s %12s %12s %9s\n", "kernel", "serial [s]", "parallel [s]", "speedup");

    GeneratorParams params;
    params.n_agents = 5;
    const Scenario five = generate_scenario(7, params);
    const MatchResult m = ordered_match(five.profiles, five.preference);
    row("strong stability, N=5", [&](Execution e) {
        (void)is_strongly_stable(five.profiles, five.preference, m.graph, e, 5);
    }, repeats);
    row("all stable graphs, N=5", [&](Execution e) {
        (void)all_stable_graphs(five.profiles, five.preference, e, 5);
    }, repeats);

    params.n_agents = 4;
    const Scenario four = generate_scenario(11, params);
    row("directed welfare brute, N=4", [&](Execution e) {
        (void)welfare_max_directed(four.profiles, four.preference, WelfareMode::brute, e, 4);
    }, repeats);
    row("competitive allocation, N=4", [&](Execution e) {
        (void)competitive_allocation(four.profiles, four.preference, e);
    }, repeats);
    row("mixed VCG brute, N=4", [&](Execution e) {
        MechanismOptions o;
        o.solver = SolverMode::brute;
        o.exec = e;
        (void)mixed_vcg(four.profiles, four.preference, o);
    }, repeats);

    params.n_agents = 3;
    const Scenario three = generate_scenario(5, params);
    const QueryPreference q = QueryPreference::halving(2);
    const DpMatchResult dm = dp_ordered_match(three.profiles, q);
    row("query-market stability, N=3 W=2", [&](Execution e) {
        (void)dp_is_strongly_stable(three.profiles, q, dm.graph, e);
    }, repeats);
    row("query-market brute optimum, N=3 W=2", [&](Execution e) {
        (void)dp_maximize_brute(three.profiles, q, std::nullopt, e);
    }, repeats);
    return 0;
}
