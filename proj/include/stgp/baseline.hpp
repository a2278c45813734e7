#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "stgp/kernel.hpp"
#include "stgp/linalg.hpp"

namespace stgp {

struct Record {
  Location x;
  double t = 0.0;
  double y = 0.0;
  double noise_variance = 1.0;
};

/// Space-time measurements ordered by time.
struct Dataset {
  std::vector<Record> records;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  /// Finite values, positive variances, consistent dimensions, nondecreasing
  /// times. Throws InputError.
  void validate() const;
  /// Distinct time stamps in increasing order.
  std::vector<double> times() const;
  /// Distinct locations in order of first appearance.
  std::vector<Location> locations() const;
};

struct SpaceTimePoint {
  Location x;
  double t = 0.0;
};

struct BatchPrediction {
  Vector mean;
  Vector variance;
  std::optional<Matrix> cov;
};

/// Posterior of the full separable GP given every record. Throws
/// ConditioningError when K + R is not positive definite.
BatchPrediction batch_gp(const Dataset& data, const SeparableKernel& kernel,
                         const std::vector<SpaceTimePoint>& queries, bool full_cov = false);

/// -log N(y; 0, K + R).
double batch_nll(const Dataset& data, const SeparableKernel& kernel);

struct TruncatedStep {
  double t = 0.0;
  Vector mean;
  Vector variance;
};

/// At each distinct data time t_k, batch GP on the records of the last
/// `buffer` distinct times up to t_k, queried at (x, t_k) for every x.
std::vector<TruncatedStep> truncated_gp(const Dataset& data, const SeparableKernel& kernel,
                                        int buffer, const std::vector<Location>& query_locations);

/// (1 - ‖estimate - reference‖ / ‖reference‖) · 100. Throws
/// UndefinedFitError for a zero reference.
double fit_percent(const Vector& estimate, const Vector& reference);

struct NoiseModel {
  double sigma = 1.0;     // absolute standard deviation
  double relative = 0.0;  // added fraction of |f|
  double std_dev(double f) const { return sigma + relative * std::abs(f); }
};

struct SampledProcess {
  std::vector<Location> locations;
  std::vector<double> times;
  Matrix field;  // M × K, field(i, k) = f(x_i, t_k)
  Dataset dataset;
};

/// Exact joint draw of f on the full location × time grid, plus one noisy
/// measurement per grid node. The space-time covariance on a grid is
/// K_t ⊗ K_s, so f = L_s Z L_tᵀ with symmetric square roots of both factors.
SampledProcess sample_process(const SeparableKernel& kernel, const std::vector<Location>& locations,
                              const std::vector<double>& times, const NoiseModel& noise,
                              std::uint64_t seed);
SampledProcess sample_process(const SeparableKernel& kernel, const std::vector<Location>& locations,
                              const std::vector<double>& times, const NoiseModel& noise,
                              std::mt19937_64& rng);

}  // namespace stgp
