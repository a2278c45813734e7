#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "stgp/adaptive.hpp"
#include "stgp/baseline.hpp"
#include "stgp/filter.hpp"
#include "stgp/spectral.hpp"
#include "stgp/statespace.hpp"

namespace stgp {

/// %.17g.
std::string format_double(double v);

// Dataset CSV: header `t,x1[,x2,...],y,sigma`; sigma is the noise standard
// deviation. Parse failures raise ParseError with the 1-based line.
Dataset read_dataset_csv(std::istream& in);
Dataset load_dataset(const std::filesystem::path& path);
void write_dataset_csv(std::ostream& out, const Dataset& data);
void save_dataset(const std::filesystem::path& path, const Dataset& data);

// Scenario CSV: the dataset columns followed by `is_new` (0/1). The flag is
// advisory; the estimator decides membership itself.
struct ScenarioRow {
  Record record;
  bool is_new = false;
};
std::vector<ScenarioRow> read_scenario_csv(std::istream& in);
std::vector<ScenarioRow> load_scenario(const std::filesystem::path& path);
void write_scenario_csv(std::ostream& out, const std::vector<ScenarioRow>& rows);
void save_scenario(const std::filesystem::path& path, const std::vector<ScenarioRow>& rows);

/// Rows grouped by time, in file order within each instant.
std::vector<AdaptiveBatch> scenario_batches(const std::vector<ScenarioRow>& rows);

/// Records grouped by time into batches over `set`, indices in increasing
/// order. Throws InputError for a record off the set or a location measured
/// twice at one instant.
std::vector<MeasurementBatch> group_batches(const Dataset& data, const LocationSet& set);

/// Noiseless field on a grid as CSV `t,x1[,...],f`.
void write_field_csv(std::ostream& out, const std::vector<Location>& locations,
                     const std::vector<double>& times, const Matrix& field);

// JSON lines, one record per output time.
void write_trajectory_jsonl(std::ostream& out, const std::vector<TrajectoryPoint>& points);
void write_adaptive_jsonl(std::ostream& out, const std::vector<AdaptiveTracePoint>& points);
void write_truncated_jsonl(std::ostream& out, const std::vector<TruncatedStep>& steps);

/// {"numerator": [...], "denominator": [...]}.
std::string factor_to_json(const SpectralFactor& factor);
SpectralFactor factor_from_json(const std::string& text);

}  // namespace stgp
