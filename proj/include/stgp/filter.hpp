#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "stgp/linalg.hpp"
#include "stgp/spectral.hpp"
#include "stgp/statespace.hpp"

namespace stgp {

/// Noisy samples y_i = f(x_i, t) + v_i collected at one instant.
struct MeasurementBatch {
  double t = 0.0;
  std::vector<Eigen::Index> indices;  // into the location set
  Vector values;
  Vector noise_variances;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
  /// Indices unique and in [0, m), sizes consistent, values finite,
  /// variances positive. Throws InputError.
  void validate(Eigen::Index m) const;
};

/// Reusable gain for repeated identical update schedules. Only populated
/// when FilterOptions::cache_steady_gain is set.
struct SteadyGainCache {
  double step = 0.0;
  std::vector<Eigen::Index> indices;
  Vector noise_variances;
  Matrix gain;
  Matrix posterior_cov;
  Matrix innovation_cov;
  double log_det = 0.0;
  Eigen::LLT<Matrix> innovation_llt;
  bool converged = false;
};

struct FilterState {
  double t = 0.0;
  Vector mean;
  Matrix cov;
  double nll = 0.0;
  int updates = 0;
  std::shared_ptr<SteadyGainCache> cache;
};

struct OutputEstimate {
  double t = 0.0;
  Vector mean;
  Matrix cov;
  /// H s_i per location and its covariance, before mixing by L.
  Vector latent_mean;
  Matrix latent_cov;
};

enum class CovarianceForm { Joseph, Standard };

struct FilterOptions {
  CovarianceForm form = CovarianceForm::Joseph;
  /// Reuse the gain once it stops changing for a repeated (step, indices,
  /// noise) schedule. Off by default.
  bool cache_steady_gain = false;
  double steady_tolerance = 1e-12;
};

/// Innovation statistics of one update, exposed for diagnostics and tests.
struct UpdateDiagnostics {
  Vector innovation;
  Matrix innovation_cov;
  Matrix gain;
  double nll_increment = 0.0;
  bool used_cached_gain = false;
};

/// ½(m log 2π + log det I + iᵀ I⁻¹ i). Throws ConditioningError when I is
/// not positive definite.
double nll_increment(const Vector& innovation, const Matrix& innovation_cov);

/// Exact Kalman regression over a fixed location set.
class GridFilter {
 public:
  GridFilter(TemporalRealization realization, LocationSet locations, FilterOptions options = {});

  const TemporalRealization& realization() const { return realization_; }
  const LocationSet& locations() const { return locations_; }
  const FilterOptions& options() const { return options_; }
  /// h(0) of the realized temporal kernel.
  double prior_variance() const { return h0_; }
  Eigen::Index state_dimension() const { return realization_.order() * locations_.size(); }

  /// Stationary prior (zero mean, I ⊗ Σ0) at time t.
  FilterState initial_state(double t) const;
  /// Open-loop prediction to `t` ≥ state.t; τ = 0 returns the state as is.
  FilterState predict(const FilterState& state, double t) const;
  /// Prediction to batch.t followed by the measurement correction. An empty
  /// batch predicts only.
  FilterState update(const FilterState& state, const MeasurementBatch& batch,
                     UpdateDiagnostics* diagnostics = nullptr) const;
  /// f̂ = L (I⊗H) ŝ and Σᶠ = L (I⊗H) Σ (I⊗H)ᵀ Lᵀ.
  OutputEstimate output(const FilterState& state) const;

  /// Φ(T) and Q̄(T), memoized per step.
  DiscreteBlock block(double step) const;

 private:
  Matrix apply_transition(const Matrix& phi, const Matrix& m) const;

  TemporalRealization realization_;
  LocationSet locations_;
  FilterOptions options_;
  double h0_;
  struct BlockCache {
    std::mutex mutex;
    std::vector<DiscreteBlock> blocks;
  };
  std::shared_ptr<BlockCache> blocks_;
};

struct TrajectoryPoint {
  double t = 0.0;
  Vector mean;
  Matrix cov;
  double nll = 0.0;
  bool at_batch = false;
  Vector query_mean;
  Vector query_var;
};

/// Interleaves predict/update over increasing batch times and emits an output
/// at every batch time and every query time. Query times between batches
/// predict a copy; the running state only advances at batches. Optional
/// off-grid points are extended through the representer at every output.
/// `update_seconds`, when given, receives the wall time of each update.
std::vector<TrajectoryPoint> run_stream(const GridFilter& filter,
                                        std::span<const MeasurementBatch> batches,
                                        std::span<const double> query_times,
                                        const std::vector<Location>& query_points = {},
                                        std::vector<double>* update_seconds = nullptr);

}  // namespace stgp
