#pragma once

#include "datamarket/scenario.hpp"

#include <string>

namespace testing_support {

inline std::string scenario_path(const std::string& name)
{
    return std::string(DATAMARKET_SCENARIO_DIR) + "/" + name;
}

inline datamarket::Scenario generated(std::uint64_t seed, std::size_t n, bool supply_equals_link = false)
{
    datamarket::GeneratorParams params;
    params.n_agents = n;
    params.supply_equals_link = supply_equals_link;
    return datamarket::generate_scenario(seed, params);
}

} // namespace testing_support
