#pragma once

#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>

#include "stgp/kernel.hpp"
#include "stgp/linalg.hpp"
#include "stgp/spectral.hpp"

namespace stgp {

enum class SqrtMethod { Symmetric, Cholesky };

/// Ordered finite set of spatial locations with its sampled spatial kernel
/// matrix K̄_s and a factor L with L Lᵀ = K̄_s.
///
/// The symmetric factor comes from an eigendecomposition (tiny negative
/// eigenvalues are clipped). Cholesky escalates a diagonal jitter from
/// 1e-12 to 1e-6 of the mean diagonal before giving up.
class LocationSet {
 public:
  LocationSet(std::vector<Location> locations, SpatialKernel kernel,
              SqrtMethod method = SqrtMethod::Symmetric);

  Eigen::Index size() const { return static_cast<Eigen::Index>(locations_.size()); }
  bool empty() const { return locations_.empty(); }
  Eigen::Index dimension() const { return dimension_; }
  const std::vector<Location>& locations() const { return locations_; }
  const Location& location(Eigen::Index i) const { return locations_[static_cast<std::size_t>(i)]; }
  const SpatialKernel& kernel() const { return kernel_; }
  SqrtMethod method() const { return method_; }

  const Matrix& gram() const { return gram_; }
  const Matrix& sqrt_factor() const { return sqrt_; }
  /// Diagonal jitter that was added before factorizing (0 when none).
  double jitter() const { return jitter_; }

  /// K̄_s⁻¹ B via the cached eigendecomposition (pseudo-inverse below a
  /// relative eigenvalue cutoff).
  Matrix solve(const Matrix& b) const;
  /// L⁻¹ B for the stored factor L.
  Matrix solve_sqrt(const Matrix& b) const;
  /// K_s(x*, x_j) for every query row and every stored location, P×M.
  Matrix cross_kernel(const std::vector<Location>& queries) const;
  /// Index of a location equal to `x`, or -1.
  Eigen::Index find(const Location& x) const;

  LocationSet with_appended(const Location& x) const;
  LocationSet without(Eigen::Index index) const;

 private:
  void factorize();

  std::vector<Location> locations_;
  SpatialKernel kernel_;
  SqrtMethod method_;
  Eigen::Index dimension_ = 0;
  Matrix gram_;
  Matrix sqrt_;
  Matrix eigvec_;
  Vector eigval_;
  Eigen::LLT<Matrix> llt_;
  double jitter_ = 0.0;
};

LocationSet build_location_set(std::vector<Location> locations, const SpatialKernel& kernel,
                               SqrtMethod method = SqrtMethod::Symmetric);

/// One temporal block of the discretized model: Φ = e^{FT} and
/// Q̄ = ∫₀ᵀ e^{Fτ} G Gᵀ e^{Fᵀτ} dτ.
struct DiscreteBlock {
  Matrix Phi;
  Matrix Qbar;
  double step = 0.0;
};

/// Van Loan block exponential, evaluated at T/2ⁿ with ‖F‖T/2ⁿ ≤ 1/2 and
/// brought back to T by repeated doubling. T = 0 gives (I, 0).
DiscreteBlock discretize_block(const TemporalRealization& realization, double step);

/// Dense joint model over a location set. Intended for tests and small
/// instances; the filter works blockwise and never builds A or Q.
struct DiscreteModel {
  Matrix A;  // I_M ⊗ Φ
  Matrix Q;  // I_M ⊗ Q̄
  Matrix C;  // I_k L (I_M ⊗ H)
  Matrix R;  // diag(σ_i²)
  double step = 0.0;
};

DiscreteModel discretize(const TemporalRealization& realization, const LocationSet& set,
                         double step, std::span<const Eigen::Index> active,
                         std::span<const double> noise_variances);
DiscreteModel discretize(const TemporalRealization& realization, const LocationSet& set,
                         double step, std::span<const Eigen::Index> active,
                         double noise_variance);

/// Rows of L (I⊗H) selected by `active`, in the order given.
Matrix output_matrix(const TemporalRealization& realization, const LocationSet& set,
                     std::span<const Eigen::Index> active);
/// All M rows.
Matrix output_matrix(const TemporalRealization& realization, const LocationSet& set);

/// Zero mean and I_M ⊗ Σ0.
std::pair<Vector, Matrix> stationary_prior(const TemporalRealization& realization,
                                           const LocationSet& set);

/// Exact draw of f(x_i, t_k) on a sorted time grid by simulating the
/// discretized model from its stationary prior; M × K. An alternative to
/// grid factorization when K is large.
Matrix simulate_outputs(const TemporalRealization& realization, const LocationSet& set,
                        const std::vector<double>& times, std::mt19937_64& rng);

}  // namespace stgp
