#include "stgp/statespace.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "stgp/error.hpp"

namespace stgp {

namespace {

constexpr double kNegativeEigenTolerance = 1e-10;
constexpr double kJitterStart = 1e-12;
constexpr double kJitterStop = 1e-6;

}  // namespace

LocationSet::LocationSet(std::vector<Location> locations, SpatialKernel kernel, SqrtMethod method)
    : locations_(std::move(locations)), kernel_(std::move(kernel)), method_(method) {
  if (!locations_.empty()) dimension_ = locations_.front().size();
  for (std::size_t i = 0; i < locations_.size(); ++i) {
    const Location& xi = locations_[i];
    if (xi.size() != dimension_ || dimension_ < 1) {
      throw InputError("location set: inconsistent location dimensions");
    }
    if (!xi.allFinite()) throw InputError("location set: non-finite coordinate");
    for (std::size_t j = 0; j < i; ++j) {
      if ((xi - locations_[j]).squaredNorm() == 0.0) {
        std::ostringstream msg;
        msg << "location set: locations " << j << " and " << i << " coincide";
        throw DuplicateLocationError(msg.str());
      }
    }
  }
  factorize();
}

void LocationSet::factorize() {
  const Eigen::Index m = size();
  gram_ = kernel_.gram(locations_, locations_);
  jitter_ = 0.0;
  if (m == 0) {
    sqrt_.resize(0, 0);
    eigvec_.resize(0, 0);
    eigval_.resize(0);
    return;
  }
  const double mean_diag = gram_.trace() / static_cast<double>(m);
  const Matrix identity = Matrix::Identity(m, m);

  if (method_ == SqrtMethod::Cholesky) {
    for (double jitter = 0.0;;) {
      llt_.compute(gram_ + jitter * identity);
      if (llt_.info() == Eigen::Success) {
        jitter_ = jitter;
        break;
      }
      jitter = jitter == 0.0 ? kJitterStart * mean_diag : jitter * 10.0;
      if (jitter > kJitterStop * mean_diag * (1.0 + 1e-9)) {
        throw ConditioningError("location set: Cholesky factorization failed at maximum jitter");
      }
    }
    sqrt_ = llt_.matrixL();
    if (jitter_ > 0.0) {
      std::ostringstream msg;
      msg << "location set: Cholesky needed diagonal jitter " << jitter_;
      warn(msg.str());
    }
    return;
  }

  for (double jitter = 0.0;;) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(gram_ + jitter * identity);
    if (es.info() != Eigen::Success) throw ConditioningError("location set: eigensolver failed");
    if (es.eigenvalues()(0) >= -kNegativeEigenTolerance * mean_diag * static_cast<double>(m)) {
      jitter_ = jitter;
      eigvec_ = es.eigenvectors();
      eigval_ = es.eigenvalues().cwiseMax(0.0);
      break;
    }
    jitter = jitter == 0.0 ? kJitterStart * mean_diag : jitter * 10.0;
    if (jitter > kJitterStop * mean_diag * (1.0 + 1e-9)) {
      throw ConditioningError("location set: kernel matrix is indefinite beyond maximum jitter");
    }
  }
  sqrt_ = eigvec_ * eigval_.cwiseSqrt().asDiagonal() * eigvec_.transpose();
  sqrt_ = symmetrized(sqrt_);
}

Matrix LocationSet::solve(const Matrix& b) const {
  if (b.rows() != size()) throw InputError("location set solve: dimension mismatch");
  if (size() == 0) return Matrix::Zero(0, b.cols());
  if (method_ == SqrtMethod::Cholesky) return llt_.solve(b);
  const double cutoff = eigval_.maxCoeff() * static_cast<double>(size()) * 16.0 *
                        std::numeric_limits<double>::epsilon();
  const Vector inv = eigval_.unaryExpr([cutoff](double v) { return v > cutoff ? 1.0 / v : 0.0; });
  return eigvec_ * (inv.asDiagonal() * (eigvec_.transpose() * b));
}

Matrix LocationSet::solve_sqrt(const Matrix& b) const {
  if (b.rows() != size()) throw InputError("location set solve: dimension mismatch");
  if (size() == 0) return Matrix::Zero(0, b.cols());
  if (method_ == SqrtMethod::Cholesky) return llt_.matrixL().solve(b);
  const double cutoff = eigval_.maxCoeff() * static_cast<double>(size()) * 16.0 *
                        std::numeric_limits<double>::epsilon();
  const Vector inv =
      eigval_.unaryExpr([cutoff](double v) { return v > cutoff ? 1.0 / std::sqrt(v) : 0.0; });
  return eigvec_ * (inv.asDiagonal() * (eigvec_.transpose() * b));
}

Matrix LocationSet::cross_kernel(const std::vector<Location>& queries) const {
  return kernel_.gram(queries, locations_);
}

Eigen::Index LocationSet::find(const Location& x) const {
  for (Eigen::Index i = 0; i < size(); ++i) {
    const Location& xi = location(i);
    if (xi.size() == x.size() && (xi - x).squaredNorm() == 0.0) return i;
  }
  return -1;
}

LocationSet LocationSet::with_appended(const Location& x) const {
  std::vector<Location> next = locations_;
  next.push_back(x);
  return LocationSet(std::move(next), kernel_, method_);
}

LocationSet LocationSet::without(Eigen::Index index) const {
  if (index < 0 || index >= size()) throw InputError("location set: index out of range");
  std::vector<Location> next = locations_;
  next.erase(next.begin() + index);
  return LocationSet(std::move(next), kernel_, method_);
}

LocationSet build_location_set(std::vector<Location> locations, const SpatialKernel& kernel,
                               SqrtMethod method) {
  if (locations.empty()) throw InputError("location set needs at least one location");
  return LocationSet(std::move(locations), kernel, method);
}

DiscreteBlock discretize_block(const TemporalRealization& realization, double step) {
  if (!(step >= 0.0) || !std::isfinite(step)) {
    throw InputError("discretization step must be finite and nonnegative");
  }
  const Matrix& F = realization.F;
  const Eigen::Index r = F.rows();
  DiscreteBlock out;
  out.step = step;
  if (step == 0.0) {
    out.Phi = Matrix::Identity(r, r);
    out.Qbar = Matrix::Zero(r, r);
    return out;
  }

  const double norm = F.cwiseAbs().colwise().sum().maxCoeff();
  int halvings = 0;
  double tau = step;
  while (norm * tau > 0.5 && halvings < 60) {
    tau *= 0.5;
    ++halvings;
  }

  Matrix vl = Matrix::Zero(2 * r, 2 * r);
  vl.topLeftCorner(r, r) = -F * tau;
  vl.topRightCorner(r, r) = realization.G * realization.G.transpose() * tau;
  vl.bottomRightCorner(r, r) = F.transpose() * tau;
  const Matrix e = vl.exp();
  Matrix phi = e.bottomRightCorner(r, r).transpose();
  Matrix q = symmetrized(phi * e.topRightCorner(r, r));

  for (int i = 0; i < halvings; ++i) {
    q = symmetrized(phi * q * phi.transpose() + q);
    phi = phi * phi;
  }
  out.Phi = std::move(phi);
  out.Qbar = std::move(q);
  return out;
}

Matrix output_matrix(const TemporalRealization& realization, const LocationSet& set,
                     std::span<const Eigen::Index> active) {
  const Eigen::Index m = set.size();
  const Eigen::Index r = realization.order();
  Matrix c(static_cast<Eigen::Index>(active.size()), r * m);
  const Matrix& l = set.sqrt_factor();
  for (Eigen::Index row = 0; row < c.rows(); ++row) {
    const Eigen::Index i = active[static_cast<std::size_t>(row)];
    if (i < 0 || i >= m) throw InputError("output matrix: active index out of range");
    for (Eigen::Index j = 0; j < m; ++j) c.block(row, j * r, 1, r) = l(i, j) * realization.H;
  }
  return c;
}

Matrix output_matrix(const TemporalRealization& realization, const LocationSet& set) {
  std::vector<Eigen::Index> all(static_cast<std::size_t>(set.size()));
  for (Eigen::Index i = 0; i < set.size(); ++i) all[static_cast<std::size_t>(i)] = i;
  return output_matrix(realization, set, all);
}

DiscreteModel discretize(const TemporalRealization& realization, const LocationSet& set,
                         double step, std::span<const Eigen::Index> active,
                         std::span<const double> noise_variances) {
  if (!(step > 0.0)) throw InputError("discretize: step must be positive");
  if (noise_variances.size() != active.size()) {
    throw InputError("discretize: one noise variance per active location is required");
  }
  const DiscreteBlock block = discretize_block(realization, step);
  DiscreteModel out;
  out.step = step;
  out.A = kron_identity(set.size(), block.Phi);
  out.Q = kron_identity(set.size(), block.Qbar);
  out.C = output_matrix(realization, set, active);
  out.R = Matrix::Zero(static_cast<Eigen::Index>(active.size()),
                       static_cast<Eigen::Index>(active.size()));
  for (std::size_t i = 0; i < active.size(); ++i) {
    if (!(noise_variances[i] > 0.0)) throw InputError("discretize: noise variance must be positive");
    out.R(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = noise_variances[i];
  }
  return out;
}

DiscreteModel discretize(const TemporalRealization& realization, const LocationSet& set,
                         double step, std::span<const Eigen::Index> active,
                         double noise_variance) {
  const std::vector<double> noise(active.size(), noise_variance);
  return discretize(realization, set, step, active, noise);
}

std::pair<Vector, Matrix> stationary_prior(const TemporalRealization& realization,
                                           const LocationSet& set) {
  const Eigen::Index n = realization.order() * set.size();
  return {Vector::Zero(n), kron_identity(set.size(), realization.stationary_cov)};
}

Matrix simulate_outputs(const TemporalRealization& realization, const LocationSet& set,
                        const std::vector<double>& times, std::mt19937_64& rng) {
  const Eigen::Index m = set.size();
  const Eigen::Index r = realization.order();
  const auto k = static_cast<Eigen::Index>(times.size());
  Matrix out(m, k);
  if (m == 0 || k == 0) return out;
  std::normal_distribution<double> normal(0.0, 1.0);
  auto draw = [&](const Matrix& cov) {
    // Eigen-based root tolerates the singular Q̄ of short steps.
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(cov));
    const Matrix root = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    Matrix s(r, m);
    for (Eigen::Index j = 0; j < m; ++j) {
      Vector z(r);
      for (Eigen::Index i = 0; i < r; ++i) z(i) = normal(rng);
      s.col(j) = root * z;
    }
    return s;
  };
  Matrix s = draw(realization.stationary_cov);  // r × M, column j is location j
  const Matrix& l = set.sqrt_factor();
  for (Eigen::Index step = 0; step < k; ++step) {
    if (step > 0) {
      const double dt = times[static_cast<std::size_t>(step)] - times[static_cast<std::size_t>(step - 1)];
      if (dt < 0.0) throw InputError("simulate_outputs: times must be sorted");
      const DiscreteBlock b = discretize_block(realization, dt);
      s = b.Phi * s + draw(b.Qbar);
    }
    out.col(step) = l * (realization.H * s).transpose();
  }
  return out;
}

}  // namespace stgp
