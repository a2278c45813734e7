#include "stgp/representer.hpp"

#include <algorithm>

#include "stgp/error.hpp"

namespace stgp {

SpatialQuery::SpatialQuery(const LocationSet& set, std::vector<Location> points)
    : points_(std::move(points)) {
  for (const Location& p : points_) {
    if (!set.empty() && p.size() != set.dimension()) {
      throw InputError("spatial query: point dimension differs from the location set");
    }
  }
  cross_ = set.cross_kernel(points_);
  weights_ = set.solve(cross_.transpose());
  latent_ = set.solve_sqrt(cross_.transpose());
  self_.resize(size());
  for (Eigen::Index p = 0; p < size(); ++p) {
    const Location& x = points_[static_cast<std::size_t>(p)];
    self_(p) = set.kernel()(x, x);
  }
}

Vector extend_estimate(const Vector& f, const SpatialQuery& query) {
  if (f.size() != query.weights().rows()) throw InputError("extend_estimate: size mismatch");
  return query.weights().transpose() * f;
}

Vector extend_variance(const Matrix& sigma_f, double h0, const SpatialQuery& query) {
  const Matrix& w = query.weights();
  if (sigma_f.rows() != w.rows() || sigma_f.cols() != w.rows()) {
    throw InputError("extend_variance: size mismatch");
  }
  Vector out(query.size());
  const Matrix sw = sigma_f * w;
  for (Eigen::Index p = 0; p < query.size(); ++p) {
    const double explained = query.cross().row(p).dot(w.col(p));
    const double v = h0 * (query.self()(p) - explained) + w.col(p).dot(sw.col(p));
    out(p) = std::max(0.0, v);
  }
  return out;
}

Vector extend_estimate_latent(const Vector& g, const SpatialQuery& query) {
  if (g.size() != query.latent_weights().rows()) throw InputError("extend_estimate: size mismatch");
  return query.latent_weights().transpose() * g;
}

Vector extend_variance_latent(const Matrix& sigma_g, double h0, const SpatialQuery& query) {
  const Matrix& z = query.latent_weights();
  if (sigma_g.rows() != z.rows() || sigma_g.cols() != z.rows()) {
    throw InputError("extend_variance: size mismatch");
  }
  Vector out(query.size());
  const Matrix sz = sigma_g * z;
  for (Eigen::Index p = 0; p < query.size(); ++p) {
    const double v = h0 * (query.self()(p) - z.col(p).squaredNorm()) + z.col(p).dot(sz.col(p));
    out(p) = std::max(0.0, v);
  }
  return out;
}

Matrix joint_covariance(const Matrix& sigma_f, double h0, const LocationSet& set,
                        const Location& x) {
  const Eigen::Index m = set.size();
  if (sigma_f.rows() != m || sigma_f.cols() != m) {
    throw InputError("joint_covariance: size mismatch");
  }
  const SpatialQuery query(set, {x});
  const Vector w = query.weights().col(0);
  Matrix out(m + 1, m + 1);
  out.topLeftCorner(m, m) = sigma_f;
  const Vector cross = sigma_f * w;
  out.topRightCorner(m, 1) = cross;
  out.bottomLeftCorner(1, m) = cross.transpose();
  out(m, m) = extend_variance(sigma_f, h0, query)(0);
  return symmetrized(out);
}

}  // namespace stgp
