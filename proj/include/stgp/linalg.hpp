#pragma once

#include <functional>
#include <string_view>

#include <Eigen/Core>

namespace stgp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Location = Eigen::VectorXd;

/// (A + Aᵀ)/2, returned by value.
Matrix symmetrized(const Matrix& a);

/// Largest real part among the eigenvalues of a square matrix.
double spectral_abscissa(const Matrix& a);

/// Smallest eigenvalue of a symmetric matrix (symmetric part is used).
double min_eigenvalue(const Matrix& a);

/// Result of auditing a covariance matrix for symmetry and positive
/// semidefiniteness.
struct CovarianceAudit {
  double asymmetry = 0.0;       // max |A_ij - A_ji| / max(1, max |A_ij|)
  double min_eigenvalue = 0.0;
  double trace = 0.0;
  bool symmetric = true;
  bool psd = true;
  bool ok() const { return symmetric && psd; }
};

/// Symmetry within `symmetry_tol` (relative to the largest entry, floored at 1)
/// and eigenvalue floor at -psd_tol * trace.
CovarianceAudit audit_covariance(const Matrix& a, double symmetry_tol = 1e-12,
                                 double psd_tol = 1e-9);

/// I_n ⊗ B materialized densely. Only used on small instances and in tests.
Matrix kron_identity(Eigen::Index n, const Matrix& block);

/// Destination for warnings emitted by the numerical core. Defaults to stderr.
using WarningSink = std::function<void(std::string_view)>;
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);

}  // namespace stgp
