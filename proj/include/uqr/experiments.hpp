#pragma once

#include <iosfwd>
#include <string>

#include <json.hpp>

#include "uqr/config.hpp"
#include "uqr/report.hpp"

namespace uqr::cli {

/// Exit statuses of `uqr_lab run`.
enum ExitCode : int { kOk = 0, kAuditFailed = 1, kConfigError = 2, kBudgetError = 3, kInternalError = 4 };

struct ExperimentResult {
  CsvTable results{{"empty"}};
  nlohmann::json report = nlohmann::json::object();
  bool pass = true;  // conjunction of the audits the experiment performs
};

/// Runs the configured experiment without touching the file system.
ExperimentResult execute(const RunConfig& config);

/// Runs the experiment and writes results.csv, report.json and
/// resolved-config.json into config.output_dir. Returns kOk or kAuditFailed;
/// library exceptions propagate.
int run_and_write(const RunConfig& config, std::ostream& log);

}  // namespace uqr::cli
