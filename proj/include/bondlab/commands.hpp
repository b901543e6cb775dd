#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bondlab/scenario.hpp"
#include "json.hpp"

namespace bondlab {

struct CommandResult {
  nlohmann::json summary;
  std::vector<std::filesystem::path> files;
};

/// Each command writes into scenario.output_dir, together with scenario.resolved.json,
/// schema.json and metadata.json. Outputs depend only on the resolved scenario.
CommandResult cmd_simulate(const Scenario& sc);
CommandResult cmd_hedge(const Scenario& sc);
CommandResult cmd_optimize(const Scenario& sc);
CommandResult cmd_hjb(const Scenario& sc);
/// Runs every command into a subdirectory and writes report.json.
CommandResult cmd_report(const Scenario& sc);

/// Dispatches on the verb name; throws ConfigInvalid for unknown verbs.
CommandResult run_command(const std::string& verb, const Scenario& sc);

/// {"error": kind, "category": "validation" | "numerical", "message", "field"}
nlohmann::json error_payload(const std::exception& e);
/// 0 success, 2 validation, 3 numerical.
int exit_code_for(const std::exception& e);

}  // namespace bondlab
