#pragma once

#include <complex>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "stgp/kernel.hpp"
#include "stgp/linalg.hpp"

namespace stgp {

/// Stable spectral factor
///
///   W(s) = (b_{r-1} s^{r-1} + ... + b_0) / (s^r + a_{r-1} s^{r-1} + ... + a_0),
///
/// with S(ω) = W(iω) W(-iω) = |W(iω)|².
struct SpectralFactor {
  Vector numerator;    // b_0 .. b_{r-1}
  Vector denominator;  // a_0 .. a_{r-1}

  int order() const { return static_cast<int>(denominator.size()); }
  std::complex<double> transfer(std::complex<double> s) const;
  double psd(double omega) const;
  /// Roots of the monic denominator polynomial.
  Eigen::VectorXcd poles() const;
  bool is_hurwitz() const;
};

/// Companion-form realization ds = F s dt + G dw, z = H s, with stationary
/// state covariance Σ0 solving F Σ0 + Σ0 Fᵀ + G Gᵀ = 0.
struct TemporalRealization {
  Matrix F;
  Matrix G;
  Matrix H;
  Matrix stationary_cov;

  int order() const { return static_cast<int>(F.rows()); }
  /// H Σ0 Hᵀ, the implied h(0).
  double output_variance() const;
  /// H e^{F|τ|} Σ0 Hᵀ, the implied h(τ).
  double autocovariance(double tau) const;
};

/// Exact factorization of a kernel with rational spectrum: order 1 for
/// Exponential, order 2 for PeriodicExponential. Throws
/// UnsupportedExactFactorization for SquaredExponential.
SpectralFactor factorize(const TemporalKernel& kernel);

/// Companion realization of a factor; throws InstabilityError when the
/// denominator is not Hurwitz.
TemporalRealization realize(const SpectralFactor& factor);

/// Stationary covariance of a stable linear SDE; throws InstabilityError
/// when F has an eigenvalue with nonnegative real part.
Matrix solve_lyapunov(const Matrix& F, const Matrix& G);

/// Log-spaced angular-frequency grid over [lo, hi] · (1/σ_t).
std::vector<double> default_frequency_grid(const TemporalKernel& kernel, int points = 400,
                                           double lo = 1e-3, double hi = 1e3);

/// Weight of the squared PSD mismatch in the fitting objective.
enum class PsdWeighting {
  Spectrum,  // w(ω) = S(ω): emphasizes high-power bands
  Uniform,   // w(ω) = S(0): plain L2 spectral error, constrains tails too
};

struct PsdApproximationOptions {
  PsdWeighting weighting = PsdWeighting::Spectrum;
  int restarts = 3;
  int max_evaluations = 1000;
  /// Lower-order (or same-order) factor whose PSD the search must at least
  /// match. The factor is embedded at the requested order by pole/zero
  /// cancellation.
  std::optional<SpectralFactor> warm_start;
};

struct PsdApproximation {
  SpectralFactor factor;
  /// Σ w_i (S_r(ω_i) - S(ω_i))², with w_i = w(ω_i) Δω_i normalized so that
  /// Σ w_i S(ω_i)² = 1 (a weighted relative squared error).
  double objective = 0.0;
  int starts = 0;
  int evaluations = 0;
};

/// Rational approximation of the target spectrum by weighted nonlinear least
/// squares over `grid`. Denominators are parameterized as products of
/// positive-coefficient sections so every iterate is Hurwitz.
PsdApproximation approximate_psd(const TemporalKernel& target, int order,
                                 std::span<const double> grid, std::mt19937_64& rng,
                                 const PsdApproximationOptions& options = {});

/// Fits increasing orders in sequence, each warm-started from the previous
/// result, so the objective is non-increasing along `orders`.
std::vector<PsdApproximation> approximate_psd_ladder(const TemporalKernel& target,
                                                     std::span<const int> orders,
                                                     std::span<const double> grid,
                                                     std::mt19937_64& rng,
                                                     const PsdApproximationOptions& options = {});

/// Weighted objective of an arbitrary factor against the target on `grid`.
double psd_objective(const SpectralFactor& factor, const TemporalKernel& target,
                     std::span<const double> grid,
                     PsdWeighting weighting = PsdWeighting::Spectrum);

inline TemporalRealization realize_exact(const TemporalKernel& kernel) {
  return realize(factorize(kernel));
}

}  // namespace stgp
