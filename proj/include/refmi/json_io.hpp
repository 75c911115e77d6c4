#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

#include "refmi/analysis.hpp"
#include "refmi/freq_variance.hpp"
#include "refmi/simulation.hpp"

namespace refmi {

using Json = nlohmann::ordered_json;

/// {estimate, se, df, ci, components:{within, between}, method, ...}
Json to_json(const PooledEstimate& p);
Json to_json(const BootMiEstimate& p);

Json to_json(const ScenarioConfig& cfg);
Json to_json(const SimReport& report, bool include_runtime = true);

/// Scenario from JSON; keys mirror ScenarioConfig field names. Unknown keys
/// and type mismatches throw InvalidArgument. The result is validated.
ScenarioConfig scenario_from_json(const Json& j);
ScenarioConfig parse_scenario(std::string_view text);

/// Compact, deterministic serialization used by the CLI and C API.
std::string dump(const Json& j);

}  // namespace refmi
