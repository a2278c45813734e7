#include "stgp/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "stgp/error.hpp"

namespace stgp {

namespace {

Matrix gram(const Dataset& data, const SeparableKernel& kernel) {
  const auto n = static_cast<Eigen::Index>(data.size());
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Record& a = data.records[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j <= i; ++j) {
      const Record& b = data.records[static_cast<std::size_t>(j)];
      k(i, j) = k(j, i) = kernel(a.x, a.t, b.x, b.t);
    }
  }
  return k;
}

Eigen::LLT<Matrix> factor_system(const Dataset& data, const SeparableKernel& kernel) {
  Matrix k = gram(data, kernel);
  for (std::size_t i = 0; i < data.size(); ++i) {
    k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += data.records[i].noise_variance;
  }
  Eigen::LLT<Matrix> llt(k);
  if (llt.info() != Eigen::Success) {
    throw ConditioningError("batch GP: K + R is not positive definite");
  }
  return llt;
}

Vector observations(const Dataset& data) {
  Vector y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) y(static_cast<Eigen::Index>(i)) = data.records[i].y;
  return y;
}

/// Symmetric square root with negative eigenvalues clipped.
Matrix psd_sqrt(const Matrix& a) {
  if (a.size() == 0) return a;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(a));
  if (es.info() != Eigen::Success) throw ConditioningError("sample_process: eigensolver failed");
  const Vector ev = es.eigenvalues();
  const double scale = std::max(std::abs(ev.maxCoeff()), 1e-300);
  if (ev.minCoeff() < -1e-8 * scale) {
    throw ConditioningError("sample_process: kernel matrix is markedly indefinite");
  }
  const Matrix& v = es.eigenvectors();
  return v * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal() * v.transpose();
}

}  // namespace

void Dataset::validate() const {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Record& r = records[i];
    if (r.x.size() < 1 || r.x.size() != records.front().x.size()) {
      throw InputError("dataset: inconsistent location dimensions");
    }
    if (!r.x.allFinite() || !std::isfinite(r.t) || !std::isfinite(r.y)) {
      throw InputError("dataset: non-finite entry in record " + std::to_string(i));
    }
    if (!(r.noise_variance > 0.0) || !std::isfinite(r.noise_variance)) {
      throw InputError("dataset: noise variance must be positive in record " + std::to_string(i));
    }
    if (i > 0 && r.t < records[i - 1].t) {
      throw InputError("dataset: records must be ordered by time");
    }
  }
}

std::vector<double> Dataset::times() const {
  std::vector<double> out;
  for (const Record& r : records) out.push_back(r.t);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<Location> Dataset::locations() const {
  std::vector<Location> out;
  for (const Record& r : records) {
    const bool known = std::any_of(out.begin(), out.end(), [&](const Location& x) {
      return x.size() == r.x.size() && (x - r.x).squaredNorm() == 0.0;
    });
    if (!known) out.push_back(r.x);
  }
  return out;
}

BatchPrediction batch_gp(const Dataset& data, const SeparableKernel& kernel,
                         const std::vector<SpaceTimePoint>& queries, bool full_cov) {
  if (data.empty()) throw InputError("batch GP: dataset is empty");
  data.validate();
  const Eigen::LLT<Matrix> llt = factor_system(data, kernel);
  const Vector alpha = llt.solve(observations(data));

  const auto n = static_cast<Eigen::Index>(data.size());
  const auto p = static_cast<Eigen::Index>(queries.size());
  Matrix cross(n, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const SpaceTimePoint& q = queries[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < n; ++i) {
      const Record& r = data.records[static_cast<std::size_t>(i)];
      cross(i, j) = kernel(r.x, r.t, q.x, q.t);
    }
  }
  const Matrix v = llt.matrixL().solve(cross);

  BatchPrediction out;
  out.mean = cross.transpose() * alpha;
  out.variance.resize(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const SpaceTimePoint& q = queries[static_cast<std::size_t>(j)];
    out.variance(j) = std::max(0.0, kernel(q.x, q.t, q.x, q.t) - v.col(j).squaredNorm());
  }
  if (full_cov) {
    Matrix prior(p, p);
    for (Eigen::Index i = 0; i < p; ++i) {
      const SpaceTimePoint& a = queries[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j <= i; ++j) {
        const SpaceTimePoint& b = queries[static_cast<std::size_t>(j)];
        prior(i, j) = prior(j, i) = kernel(a.x, a.t, b.x, b.t);
      }
    }
    out.cov = symmetrized(prior - v.transpose() * v);
  }
  return out;
}

double batch_nll(const Dataset& data, const SeparableKernel& kernel) {
  if (data.empty()) return 0.0;
  data.validate();
  const Eigen::LLT<Matrix> llt = factor_system(data, kernel);
  const Vector z = llt.matrixL().solve(observations(data));
  const Matrix& l = llt.matrixLLT();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  const auto n = static_cast<double>(data.size());
  return 0.5 * (n * std::log(2.0 * std::numbers::pi) + log_det + z.squaredNorm());
}

std::vector<TruncatedStep> truncated_gp(const Dataset& data, const SeparableKernel& kernel,
                                        int buffer, const std::vector<Location>& query_locations) {
  if (buffer < 1) throw InputError("truncated GP: buffer must be at least 1");
  data.validate();
  const std::vector<double> times = data.times();
  std::vector<TruncatedStep> out;
  out.reserve(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const std::size_t first = k + 1 > static_cast<std::size_t>(buffer) ? k + 1 - buffer : 0;
    const double lo = times[first];
    const double hi = times[k];
    Dataset window;
    for (const Record& r : data.records) {
      if (r.t >= lo && r.t <= hi) window.records.push_back(r);
    }
    std::vector<SpaceTimePoint> queries;
    queries.reserve(query_locations.size());
    for (const Location& x : query_locations) queries.push_back({x, hi});
    BatchPrediction pred = batch_gp(window, kernel, queries);
    out.push_back({hi, std::move(pred.mean), std::move(pred.variance)});
  }
  return out;
}

double fit_percent(const Vector& estimate, const Vector& reference) {
  if (estimate.size() != reference.size()) throw InputError("fit: vectors differ in length");
  const double norm = reference.norm();
  if (!(norm > 0.0)) throw UndefinedFitError("fit: reference has zero norm");
  return (1.0 - (estimate - reference).norm() / norm) * 100.0;
}

SampledProcess sample_process(const SeparableKernel& kernel, const std::vector<Location>& locations,
                              const std::vector<double>& times, const NoiseModel& noise,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_process(kernel, locations, times, noise, rng);
}

SampledProcess sample_process(const SeparableKernel& kernel, const std::vector<Location>& locations,
                              const std::vector<double>& times, const NoiseModel& noise,
                              std::mt19937_64& rng) {
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (times[i] < times[i - 1]) throw InputError("sample_process: times must be sorted");
  }
  const auto m = static_cast<Eigen::Index>(locations.size());
  const auto k = static_cast<Eigen::Index>(times.size());
  SampledProcess out;
  out.locations = locations;
  out.times = times;
  out.field = Matrix::Zero(m, k);
  if (m == 0 || k == 0) return out;

  const Matrix ls = psd_sqrt(kernel.spatial().gram(locations, locations));
  Matrix kt(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = 0; j < k; ++j) {
      kt(i, j) = kernel.temporal()(times[static_cast<std::size_t>(i)] -
                                   times[static_cast<std::size_t>(j)]);
    }
  }
  const Matrix lt = psd_sqrt(kt);

  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(m, k);
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) z(i, j) = normal(rng);
  }
  out.field = ls * z * lt.transpose();

  out.dataset.records.reserve(static_cast<std::size_t>(m * k));
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index i = 0; i < m; ++i) {
      const double f = out.field(i, j);
      const double sd = noise.std_dev(f);
      out.dataset.records.push_back(
          {locations[static_cast<std::size_t>(i)], times[static_cast<std::size_t>(j)],
           f + sd * normal(rng), sd * sd});
    }
  }
  return out;
}

}  // namespace stgp
