#pragma once

#include <optional>
#include <random>
#include <vector>

#include "stgp/filter.hpp"
#include "stgp/kernel.hpp"
#include "stgp/linalg.hpp"
#include "stgp/spectral.hpp"
#include "stgp/statespace.hpp"

namespace stgp {

enum class DiscardPolicy {
  /// Drop the location whose most recent visit is oldest. Ties go to the
  /// location that entered the set first.
  OldestFirst,
};

struct AdaptiveOptions {
  std::size_t capacity = 10;
  /// From this time on the location set is frozen: visits to locations
  /// outside it are skipped and the estimator is plain grid filtering.
  std::optional<double> freeze_time;
  DiscardPolicy policy = DiscardPolicy::OldestFirst;
  SqrtMethod sqrt_method = SqrtMethod::Symmetric;
  FilterOptions filter;
};

/// Statistics kept by the adaptive estimator. `f`/`sigma_f` live in output
/// space over the current set; `s`/`sigma_s` are the state statistics
/// driving the filter. `state_valid` is false between an expansion or
/// contraction and the next reconstruction.
struct AdaptiveState {
  LocationSet set;
  std::vector<double> last_visit{};
  double t = 0.0;
  Vector f{};
  Matrix sigma_f{};
  Vector s{};
  Matrix sigma_s{};
  bool state_valid = true;
  double nll = 0.0;
  int steps = 0;
};

struct Visit {
  Location x;
  double y = 0.0;
  double noise_variance = 1.0;
};

/// Measurements collected at one instant, identified by coordinates.
struct AdaptiveBatch {
  double t = 0.0;
  std::vector<Visit> visits;
};

struct AdaptiveStepReport {
  std::vector<Location> added;
  std::vector<Location> dropped;
  std::vector<Location> skipped;
};

/// Virtual measurement covariance ((Σ̃ᶠ)⁻¹ - (Σᶠ₀)⁻¹)⁻¹ consistent with the
/// current f-statistics. Returns nullopt in the no-information limit
/// (Σ̃ᶠ = Σᶠ₀). Eigenvalues of the precision difference are floored at
/// 1e-10·trace, with a warning. Diagnostic only: reconstruction does not need it.
std::optional<Matrix> virtual_measurement_noise(const Matrix& sigma_f, const Matrix& prior_f);

class AdaptiveEstimator {
 public:
  AdaptiveEstimator(TemporalRealization realization, SpatialKernel kernel,
                    AdaptiveOptions options = {});

  const TemporalRealization& realization() const { return realization_; }
  const SpatialKernel& kernel() const { return kernel_; }
  const AdaptiveOptions& options() const { return options_; }
  double prior_variance() const { return h0_; }

  /// Stationary prior over `initial` (possibly empty) at time t. Initial
  /// locations count as visited at t.
  AdaptiveState initial_state(double t, std::vector<Location> initial = {}) const;

  /// Step 1: grid filtering on the current set with measurements at old
  /// locations only. An empty batch predicts to batch.t.
  AdaptiveState step_old_locations(const AdaptiveState& state, const MeasurementBatch& batch) const;
  /// Steps 2-3: representer prediction at `x`, joint covariance, rank-one
  /// correction with y. The new location is appended last.
  AdaptiveState expand(const AdaptiveState& state, const Location& x, double y,
                       double noise_variance) const;
  /// Step 4: marginalize out location `index`.
  AdaptiveState contract(const AdaptiveState& state, Eigen::Index index) const;
  /// Step 5: state statistics from the f-statistics through the virtual
  /// measurement model.
  AdaptiveState reconstruct_state(const AdaptiveState& state) const;
  /// Location the discard policy removes next.
  Eigen::Index choose_discard(const AdaptiveState& state) const;

  /// Steps 1-5 for one instant. New locations are processed in arrival order.
  AdaptiveState step(const AdaptiveState& state, const AdaptiveBatch& batch,
                     AdaptiveStepReport* report = nullptr) const;

  /// (f̃, Σ̃ᶠ) recomputed from the state statistics; used to audit C s̃ = f̃.
  OutputEstimate output_from_state(const AdaptiveState& state) const;

 private:
  TemporalRealization realization_;
  SpatialKernel kernel_;
  AdaptiveOptions options_;
  double h0_;
};

struct AdaptiveTracePoint {
  double t = 0.0;
  std::vector<Location> locations;
  Vector f;
  Matrix sigma_f;
  double nll = 0.0;
  std::vector<Location> added;
  std::vector<Location> dropped;
};

/// Replays batches with strictly increasing times.
std::vector<AdaptiveTracePoint> run_adaptive(const AdaptiveEstimator& estimator,
                                             std::vector<Location> initial,
                                             const std::vector<AdaptiveBatch>& batches);

/// Patrol visit sequence over fixed 1-D or N-D candidates: one visit per
/// step, a random walk over the candidate order that keeps its heading with
/// probability `persistence`. After the freeze time the walk is restricted
/// to the last `capacity` distinct candidates visited before it.
struct PatrolStep {
  double t = 0.0;
  std::size_t candidate = 0;
  bool is_new = false;  // not among the last `capacity` distinct visits
};

std::vector<PatrolStep> patrol_schedule(std::size_t candidates, std::size_t steps, double period,
                                        std::size_t capacity, std::optional<double> freeze_time,
                                        double persistence, std::mt19937_64& rng);

}  // namespace stgp
