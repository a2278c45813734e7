#include "stgp/spectral.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "stgp/error.hpp"

namespace stgp {

namespace {

Matrix companion(const Vector& a) {
  const Eigen::Index r = a.size();
  Matrix f = Matrix::Zero(r, r);
  for (Eigen::Index i = 0; i + 1 < r; ++i) f(i, i + 1) = 1.0;
  f.row(r - 1) = -a.transpose();
  return f;
}

}  // namespace

std::complex<double> SpectralFactor::transfer(std::complex<double> s) const {
  std::complex<double> num = 0.0;
  for (Eigen::Index i = numerator.size() - 1; i >= 0; --i) num = num * s + numerator(i);
  std::complex<double> den = 1.0;
  for (Eigen::Index i = denominator.size() - 1; i >= 0; --i) den = den * s + denominator(i);
  return num / den;
}

double SpectralFactor::psd(double omega) const {
  return std::norm(transfer({0.0, omega}));
}

Eigen::VectorXcd SpectralFactor::poles() const {
  Eigen::EigenSolver<Matrix> es(companion(denominator), false);
  return es.eigenvalues();
}

bool SpectralFactor::is_hurwitz() const {
  if (denominator.size() == 0) return false;
  return poles().real().maxCoeff() < 0.0;
}

double TemporalRealization::output_variance() const {
  return (H * stationary_cov * H.transpose())(0, 0);
}

double TemporalRealization::autocovariance(double tau) const {
  const Matrix phi = (F * std::abs(tau)).exp();
  return (H * phi * stationary_cov * H.transpose())(0, 0);
}

SpectralFactor factorize(const TemporalKernel& kernel) {
  const double lambda = kernel.scale();
  const double st = kernel.decay();
  SpectralFactor out;
  switch (kernel.family()) {
    case TemporalFamily::Exponential:
      out.numerator = Vector::Constant(1, std::sqrt(2.0 * lambda / st));
      out.denominator = Vector::Constant(1, 1.0 / st);
      return out;
    case TemporalFamily::PeriodicExponential: {
      const double w0 = 2.0 * std::numbers::pi * kernel.frequency();
      const double c2 = 1.0 / (st * st) + w0 * w0;
      const double gain = std::sqrt(2.0 * lambda / st);
      out.numerator = Vector(2);
      out.numerator << gain * std::sqrt(c2), gain;
      out.denominator = Vector(2);
      out.denominator << c2, 2.0 / st;
      return out;
    }
    case TemporalFamily::SquaredExponential:
      throw UnsupportedExactFactorization(
          "squared-exponential temporal kernel has no finite rational spectrum; "
          "use approximate_psd");
  }
  throw UnsupportedExactFactorization("unknown temporal family");
}

TemporalRealization realize(const SpectralFactor& factor) {
  const int r = factor.order();
  if (r < 1) throw InputError("spectral factor order must be at least 1");
  if (factor.numerator.size() != r) {
    throw InputError("spectral factor numerator must have exactly r coefficients");
  }
  if (!factor.is_hurwitz()) {
    throw InstabilityError("spectral factor denominator is not Hurwitz");
  }
  TemporalRealization out;
  out.F = companion(factor.denominator);
  out.G = Matrix::Zero(r, 1);
  out.G(r - 1, 0) = 1.0;
  out.H = factor.numerator.transpose();
  out.stationary_cov = solve_lyapunov(out.F, out.G);
  return out;
}

Matrix solve_lyapunov(const Matrix& F, const Matrix& G) {
  const Eigen::Index n = F.rows();
  if (F.cols() != n || G.rows() != n) throw InputError("solve_lyapunov: dimension mismatch");
  if (!(spectral_abscissa(F) < 0.0)) {
    throw InstabilityError("solve_lyapunov: F is not stable, no stationary covariance exists");
  }
  // (I ⊗ F + F ⊗ I) vec(X) = -vec(G Gᵀ), column-major vec.
  const Matrix I = Matrix::Identity(n, n);
  Matrix big = Matrix::Zero(n * n, n * n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      big.block(j * n, i * n, n, n) += I(j, i) * F;
      big.block(j * n, i * n, n, n) += F(j, i) * I;
    }
  }
  const Matrix q = G * G.transpose();
  const Vector rhs = -Eigen::Map<const Vector>(q.data(), n * n);
  const Vector x = big.fullPivLu().solve(rhs);
  Matrix out = Eigen::Map<const Matrix>(x.data(), n, n);
  return symmetrized(out);
}

std::vector<double> default_frequency_grid(const TemporalKernel& kernel, int points, double lo,
                                           double hi) {
  if (points < 2 || !(lo > 0.0) || !(hi > lo)) {
    throw InputError("frequency grid needs >= 2 points and 0 < lo < hi");
  }
  std::vector<double> out(static_cast<std::size_t>(points));
  const double l0 = std::log(lo / kernel.decay());
  const double l1 = std::log(hi / kernel.decay());
  for (int i = 0; i < points; ++i) {
    out[static_cast<std::size_t>(i)] = std::exp(l0 + (l1 - l0) * i / (points - 1));
  }
  return out;
}

}  // namespace stgp
