#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "stgp/baseline.hpp"
#include "stgp/config.hpp"
#include "stgp/io.hpp"

namespace stgp {

/// Synthetic grid data for filter/baseline/sweep modes: the exact field on
/// locations × times and the measurements kept by the schedule.
struct GeneratedData {
  std::vector<Location> locations;
  std::vector<double> times;
  Matrix field;
  Dataset dataset;
};
GeneratedData generate_dataset(const ExperimentConfig& config);

/// Patrol scenario for adaptive mode over the configured candidates.
struct GeneratedScenario {
  std::vector<Location> candidates;
  std::vector<double> times;
  Matrix field;
  std::vector<ScenarioRow> rows;
};
GeneratedScenario generate_scenario(const ExperimentConfig& config);

struct SweepCell {
  std::vector<double> values;  // one per axis
  double nll = 0.0;
  bool ok = false;
  std::string error;
};
/// Streamed NLL at every point of the Cartesian grid, evaluated in parallel.
/// A failing cell is marked, the rest still run.
std::vector<SweepCell> run_sweep(const ExperimentConfig& config, const Dataset& data);

/// Sets one sweepable parameter by name (see SweepAxis).
void set_parameter(ExperimentConfig& config, const std::string& name, double value);

// Subcommands. Each writes its files under `out` and a short report to `log`.
void cmd_generate(const ExperimentConfig& config, const std::filesystem::path& out, std::ostream& log);
void cmd_run(const ExperimentConfig& config, const std::filesystem::path& out, std::ostream& log);
void cmd_sweep(const ExperimentConfig& config, const std::filesystem::path& out, std::ostream& log);
void cmd_approx_psd(const ExperimentConfig& config, const std::filesystem::path& out,
                    std::ostream& log);
void cmd_compare(const ExperimentConfig& config, const std::filesystem::path& out, std::ostream& log);

}  // namespace stgp
