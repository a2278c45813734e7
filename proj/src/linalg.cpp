#include "stgp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <mutex>

#include <Eigen/Eigenvalues>

namespace stgp {

Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

double spectral_abscissa(const Matrix& a) {
  if (a.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().real().maxCoeff();
}

double min_eigenvalue(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

CovarianceAudit audit_covariance(const Matrix& a, double symmetry_tol, double psd_tol) {
  CovarianceAudit out;
  if (a.size() == 0) return out;
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  out.asymmetry = (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
  out.trace = a.trace();
  out.min_eigenvalue = min_eigenvalue(a);
  out.symmetric = out.asymmetry <= symmetry_tol;
  out.psd = out.min_eigenvalue >= -psd_tol * std::max(std::abs(out.trace), 1e-300);
  return out;
}

Matrix kron_identity(Eigen::Index n, const Matrix& block) {
  const Eigen::Index r = block.rows();
  const Eigen::Index c = block.cols();
  Matrix out = Matrix::Zero(n * r, n * c);
  for (Eigen::Index i = 0; i < n; ++i) out.block(i * r, i * c, r, c) = block;
  return out;
}

namespace {
std::mutex sink_mutex;
WarningSink& sink() {
  static WarningSink s = [](std::string_view m) { std::cerr << "warning: " << m << '\n'; };
  return s;
}
}  // namespace

void set_warning_sink(WarningSink s) {
  std::lock_guard lock(sink_mutex);
  sink() = s ? std::move(s) : [](std::string_view) {};
}

void warn(std::string_view message) {
  std::lock_guard lock(sink_mutex);
  sink()(message);
}

}  // namespace stgp
