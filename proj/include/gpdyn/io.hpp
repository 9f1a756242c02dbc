#pragma once

// Persistence: trajectory and history CSV, run configuration and checkpoint
// JSON. Numbers are written with 17 significant digits so that a write/read
// round trip is exact.

#include <string>

#include "json.hpp"

#include "gpdyn/systems.hpp"
#include "gpdyn/trainer.hpp"

namespace gpdyn {

using Json = nlohmann::json;

constexpr int kSchemaVersion = 1;

/// Malformed files or documents.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string format_double(double v);

/// Header "t,x0,...,x{d-1}", one row per state.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory_csv(const std::string& path);

/// Columns epoch,lr,loss,selection_error,skipped.
void write_history_csv(const std::string& path, const std::vector<EpochRecord>& history);
std::vector<EpochRecord> read_history_csv(const std::string& path);

/// One experiment plus the run-level settings.
struct RunConfig {
  ExperimentConfig experiment;
  std::uint64_t seed = 0;
  std::string output_dir = "run";
};

/// Every key optional except schema_version and system; absent keys take
/// the default_experiment values. Unknown keys are rejected.
RunConfig run_config_from_json(const Json& doc);
Json run_config_to_json(const RunConfig& config);
RunConfig load_run_config(const std::string& path);

Json checkpoint_to_json(const Checkpoint& cp, const RunConfig& config);
Checkpoint checkpoint_from_json(const Json& doc, RunConfig* config = nullptr);

Json read_json(const std::string& path);
void write_json(const std::string& path, const Json& doc);

}  // namespace gpdyn
