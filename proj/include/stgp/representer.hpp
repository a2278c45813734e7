#pragma once

#include <vector>

#include "stgp/linalg.hpp"
#include "stgp/statespace.hpp"

namespace stgp {

/// Off-grid query points bound to one location set. Weights
/// w = K̄_s(𝕏̄,𝕏̄)⁻¹ K̄_s(𝕏̄,x*) are solved once here and reused; rebuild the
/// query whenever the location set changes.
class SpatialQuery {
 public:
  SpatialQuery(const LocationSet& set, std::vector<Location> points);

  Eigen::Index size() const { return static_cast<Eigen::Index>(points_.size()); }
  const std::vector<Location>& points() const { return points_; }
  /// K_s(x*_p, x_j), P×M.
  const Matrix& cross() const { return cross_; }
  /// M×P, column p solves K̄_s w = K̄_s(𝕏̄, x*_p).
  const Matrix& weights() const { return weights_; }
  /// M×P, z = L⁻¹ K̄_s(𝕏̄, x*) for the stored factor L. Bounded by K_s(x*,x*)
  /// even when K̄_s is badly conditioned.
  const Matrix& latent_weights() const { return latent_; }
  /// K_s(x*_p, x*_p).
  const Vector& self() const { return self_; }

 private:
  std::vector<Location> points_;
  Matrix cross_;
  Matrix weights_;
  Matrix latent_;
  Vector self_;
};

/// f̂(x*) = wᵀ f̂.
Vector extend_estimate(const Vector& f, const SpatialQuery& query);

/// V(x*) = h0 (K_s(x*,x*) - kᵀ K̄_s⁻¹ k) + wᵀ Σᶠ w, floored at 0.
Vector extend_variance(const Matrix& sigma_f, double h0, const SpatialQuery& query);

/// Same quantities from the unmixed outputs g with f = L g and Σᶠ = L Σᵍ Lᵀ:
/// f̂(x*) = zᵀ ĝ and V(x*) = h0 (K_s(x*,x*) - zᵀz) + zᵀ Σᵍ z.
Vector extend_estimate_latent(const Vector& g, const SpatialQuery& query);
Vector extend_variance_latent(const Matrix& sigma_g, double h0, const SpatialQuery& query);

/// Covariance of [f(𝕏̄); f(x*)]:
///   [ Σᶠ      Σᶠ w ]
///   [ wᵀ Σᶠ   V(x*) ]
Matrix joint_covariance(const Matrix& sigma_f, double h0, const LocationSet& set,
                        const Location& x);

}  // namespace stgp
