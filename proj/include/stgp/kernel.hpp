#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "stgp/linalg.hpp"

namespace stgp {

enum class SpatialFamily { SquaredExponential, Exponential };
enum class TemporalFamily { Exponential, PeriodicExponential, SquaredExponential };

std::string_view to_string(SpatialFamily f);
std::string_view to_string(TemporalFamily f);
SpatialFamily parse_spatial_family(std::string_view name);
TemporalFamily parse_temporal_family(std::string_view name);

/// Stationary spatial kernel.
///
///   SquaredExponential: a · exp(-‖x - x'‖² / σ_s)
///   Exponential:        a · exp(-‖x - x'‖ / σ_s)
///
/// The squared-exponential scale enters unsquared. Spatial kernels are
/// correlation-shaped by default (a = 1); output variance is carried by the
/// temporal factor.
class SpatialKernel {
 public:
  SpatialKernel(SpatialFamily family, double length_scale, double amplitude = 1.0);

  double operator()(const Location& x, const Location& x2) const;
  /// Kernel matrix between two point lists, rows indexed by `a`.
  Matrix gram(const std::vector<Location>& a, const std::vector<Location>& b) const;
  Matrix gram(const std::vector<Location>& a) const { return gram(a, a); }

  SpatialFamily family() const { return family_; }
  double length_scale() const { return length_scale_; }
  double amplitude() const { return amplitude_; }

 private:
  SpatialFamily family_;
  double length_scale_;
  double amplitude_;
};

/// Stationary temporal kernel h(τ) with closed-form spectral density.
///
///   Exponential:         λ · exp(-|τ| / σ_t)
///   PeriodicExponential: λ · cos(2π f |τ|) · exp(-|τ| / σ_t)
///   SquaredExponential:  λ · exp(-τ² / σ_t²)
///
/// h(0) = λ for every family.
class TemporalKernel {
 public:
  static TemporalKernel exponential(double scale, double decay);
  static TemporalKernel periodic_exponential(double scale, double decay, double frequency);
  static TemporalKernel squared_exponential(double scale, double decay);

  double operator()(double tau) const;
  /// Power spectral density S(ω) = ∫ h(τ) e^{-iωτ} dτ at angular frequency ω.
  double psd(double omega) const;
  /// True when the spectrum is exactly rational (a finite realization exists).
  bool has_rational_psd() const { return family_ != TemporalFamily::SquaredExponential; }

  TemporalFamily family() const { return family_; }
  double scale() const { return scale_; }
  double decay() const { return decay_; }
  double frequency() const { return frequency_; }

 private:
  TemporalKernel(TemporalFamily family, double scale, double decay, double frequency);

  TemporalFamily family_;
  double scale_;
  double decay_;
  double frequency_;
};

/// K(x, x', t, t') = K_s(x, x') · h(t - t').
class SeparableKernel {
 public:
  SeparableKernel(SpatialKernel spatial, TemporalKernel temporal)
      : spatial_(std::move(spatial)), temporal_(std::move(temporal)) {}

  double operator()(const Location& x, double t, const Location& x2, double t2) const {
    return spatial_(x, x2) * temporal_(t - t2);
  }

  const SpatialKernel& spatial() const { return spatial_; }
  const TemporalKernel& temporal() const { return temporal_; }

 private:
  SpatialKernel spatial_;
  TemporalKernel temporal_;
};

inline double eval_spatial(const SpatialKernel& k, const Location& x, const Location& x2) {
  return k(x, x2);
}
inline double eval_temporal(const TemporalKernel& k, double tau) { return k(tau); }
inline double temporal_psd(const TemporalKernel& k, double omega) { return k.psd(omega); }

}  // namespace stgp
