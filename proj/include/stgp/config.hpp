#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "stgp/kernel.hpp"
#include "stgp/linalg.hpp"
#include "stgp/spectral.hpp"

namespace stgp {

inline constexpr int kConfigVersion = 1;

enum class Mode { Filter, Adaptive, Baseline, Sweep };
std::string_view to_string(Mode m);
Mode parse_mode(std::string_view name);

struct SpatialSpec {
  SpatialFamily family = SpatialFamily::SquaredExponential;
  double length_scale = 1.0;
  double amplitude = 1.0;
};

struct TemporalSpec {
  TemporalFamily family = TemporalFamily::Exponential;
  double scale = 1.0;
  double decay = 1.0;
  double frequency = 0.0;
};

struct RealizationSpec {
  bool approximate = false;  // "exact" | "approximate"
  int order = 6;
  std::vector<int> ladder;   // orders fitted by approx-psd; empty means {order}
  int grid_points = 400;
  double grid_lo = 1e-3;
  double grid_hi = 1e3;
  int restarts = 3;
  int max_evaluations = 1000;
  PsdWeighting weighting = PsdWeighting::Uniform;
};

/// Explicit points, or a regular grid with `count[d]` points per axis on
/// [lower[d], upper[d]].
struct LocationSpec {
  std::vector<Location> points;
  std::vector<double> lower;
  std::vector<double> upper;
  std::vector<int> count;
};

/// Sampling instants t_k = step·k for k = 1..⌊horizon/step⌋.
struct ScheduleSpec {
  double step = 1.0;
  double horizon = 10.0;
  int active = 0;  // locations measured per instant; 0 means all
};

struct NoiseSpec {
  double sigma = 1.0;
  double relative = 0.0;
};

struct QuerySpec {
  std::vector<Location> points;
  std::vector<double> times;
};

struct AdaptiveSpec {
  int capacity = 10;
  std::optional<double> freeze_time;
  double persistence = 0.8;
};

struct BaselineSpec {
  int buffer = 5;
};

struct SweepAxis {
  std::string parameter;  // spatial.length_scale, temporal.scale, temporal.decay,
                          // temporal.frequency or noise.sigma
  std::vector<double> values;
};

struct SweepSpec {
  std::vector<SweepAxis> axes;
  int workers = 0;  // 0: hardware concurrency
};

struct CompareSpec {
  std::vector<int> orders;
  std::vector<int> buffers;
};

struct DataSpec {
  std::string dataset;
  std::string scenario;
};

struct ExperimentConfig {
  int version = kConfigVersion;
  std::uint64_t seed = 0;
  Mode mode = Mode::Filter;
  SpatialSpec spatial;
  TemporalSpec temporal;
  RealizationSpec realization;
  LocationSpec locations;
  ScheduleSpec schedule;
  NoiseSpec noise;
  QuerySpec queries;
  AdaptiveSpec adaptive;
  BaselineSpec baseline;
  SweepSpec sweep;
  CompareSpec compare;
  DataSpec data;
  std::string output = "out";

  SeparableKernel kernel() const;
  /// False when the temporal kernel has no exact realization and no
  /// approximation was requested.
  bool approximate_or_rational() const;
  std::vector<Location> location_list() const;
  std::vector<double> sample_times() const;
  /// Exact factorization, or the rational fit of `realization.order` with
  /// restarts drawn from `rng`.
  TemporalRealization make_realization(std::mt19937_64& rng) const;
  PsdApproximationOptions approximation_options() const;
};

/// Strict parse: the version must match, unknown keys and wrong types raise
/// ParseError (with a line number for syntax errors).
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical JSON with every field spelled out; parse_config(to_json(c))
/// reproduces c.
std::string to_json(const ExperimentConfig& config);

/// Independent generator for a named purpose ("sampling", "optimizer", ...)
/// derived from the run seed.
std::mt19937_64 substream(std::uint64_t seed, std::string_view name);

}  // namespace stgp
