#include "stgp/kernel.hpp"

#include <cmath>
#include <numbers>

#include "stgp/error.hpp"

namespace stgp {

std::string_view to_string(SpatialFamily f) {
  switch (f) {
    case SpatialFamily::SquaredExponential: return "squared_exponential";
    case SpatialFamily::Exponential: return "exponential";
  }
  return "?";
}

std::string_view to_string(TemporalFamily f) {
  switch (f) {
    case TemporalFamily::Exponential: return "exponential";
    case TemporalFamily::PeriodicExponential: return "periodic_exponential";
    case TemporalFamily::SquaredExponential: return "squared_exponential";
  }
  return "?";
}

SpatialFamily parse_spatial_family(std::string_view name) {
  if (name == "squared_exponential") return SpatialFamily::SquaredExponential;
  if (name == "exponential") return SpatialFamily::Exponential;
  throw InputError("unknown spatial kernel family '" + std::string(name) + "'");
}

TemporalFamily parse_temporal_family(std::string_view name) {
  if (name == "exponential") return TemporalFamily::Exponential;
  if (name == "periodic_exponential") return TemporalFamily::PeriodicExponential;
  if (name == "squared_exponential") return TemporalFamily::SquaredExponential;
  throw InputError("unknown temporal kernel family '" + std::string(name) + "'");
}

SpatialKernel::SpatialKernel(SpatialFamily family, double length_scale, double amplitude)
    : family_(family), length_scale_(length_scale), amplitude_(amplitude) {
  if (!(length_scale > 0.0) || !std::isfinite(length_scale)) {
    throw InputError("spatial length scale must be positive and finite");
  }
  if (!(amplitude > 0.0) || !std::isfinite(amplitude)) {
    throw InputError("spatial amplitude must be positive and finite");
  }
}

double SpatialKernel::operator()(const Location& x, const Location& x2) const {
  if (x.size() != x2.size()) {
    throw InputError("spatial kernel: location dimensions differ (" + std::to_string(x.size()) +
                     " vs " + std::to_string(x2.size()) + ")");
  }
  const double d2 = (x - x2).squaredNorm();
  switch (family_) {
    case SpatialFamily::SquaredExponential: return amplitude_ * std::exp(-d2 / length_scale_);
    case SpatialFamily::Exponential: return amplitude_ * std::exp(-std::sqrt(d2) / length_scale_);
  }
  return 0.0;
}

Matrix SpatialKernel::gram(const std::vector<Location>& a, const std::vector<Location>& b) const {
  Matrix out(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (*this)(a[i], b[j]);
    }
  }
  return out;
}

TemporalKernel::TemporalKernel(TemporalFamily family, double scale, double decay, double frequency)
    : family_(family), scale_(scale), decay_(decay), frequency_(frequency) {
  // λ = 0 is allowed; it yields the zero process.
  if (!(scale >= 0.0) || !std::isfinite(scale)) {
    throw InputError("temporal scale must be nonnegative and finite");
  }
  if (!(decay > 0.0) || !std::isfinite(decay)) {
    throw InputError("temporal decay must be positive and finite");
  }
  if (!(frequency >= 0.0) || !std::isfinite(frequency)) {
    throw InputError("temporal frequency must be nonnegative and finite");
  }
}

TemporalKernel TemporalKernel::exponential(double scale, double decay) {
  return {TemporalFamily::Exponential, scale, decay, 0.0};
}

TemporalKernel TemporalKernel::periodic_exponential(double scale, double decay, double frequency) {
  return {TemporalFamily::PeriodicExponential, scale, decay, frequency};
}

TemporalKernel TemporalKernel::squared_exponential(double scale, double decay) {
  return {TemporalFamily::SquaredExponential, scale, decay, 0.0};
}

double TemporalKernel::operator()(double tau) const {
  const double a = std::abs(tau);
  switch (family_) {
    case TemporalFamily::Exponential: return scale_ * std::exp(-a / decay_);
    case TemporalFamily::PeriodicExponential:
      return scale_ * std::cos(2.0 * std::numbers::pi * frequency_ * a) * std::exp(-a / decay_);
    case TemporalFamily::SquaredExponential: return scale_ * std::exp(-(a * a) / (decay_ * decay_));
  }
  return 0.0;
}

double TemporalKernel::psd(double omega) const {
  const double w2 = omega * omega;
  switch (family_) {
    case TemporalFamily::Exponential:
      return 2.0 * scale_ * decay_ / (1.0 + decay_ * decay_ * w2);
    case TemporalFamily::PeriodicExponential: {
      const double a2 = 1.0 / (decay_ * decay_);
      const double w0 = 2.0 * std::numbers::pi * frequency_;
      const double c2 = a2 + w0 * w0;
      const double num = w2 + c2;
      const double den = w2 * w2 + 2.0 * (a2 - w0 * w0) * w2 + c2 * c2;
      return 2.0 * scale_ / decay_ * num / den;
    }
    case TemporalFamily::SquaredExponential:
      return scale_ * decay_ * std::sqrt(std::numbers::pi) * std::exp(-decay_ * decay_ * w2 / 4.0);
  }
  return 0.0;
}

}  // namespace stgp
