#include "stgp/filter.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

#include "stgp/error.hpp"
#include "stgp/representer.hpp"

namespace stgp {

namespace {

constexpr std::size_t kMaxCachedBlocks = 64;

bool same_step(double a, double b) {
  return std::abs(a - b) <= 1e-12 * std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

void MeasurementBatch::validate(Eigen::Index m) const {
  if (!std::isfinite(t)) throw InputError("measurement batch: non-finite time");
  if (static_cast<std::size_t>(values.size()) != indices.size() ||
      static_cast<std::size_t>(noise_variances.size()) != indices.size()) {
    throw InputError("measurement batch: indices, values and noise variances differ in length");
  }
  std::set<Eigen::Index> seen;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const Eigen::Index idx = indices[i];
    if (idx < 0 || idx >= m) throw InputError("measurement batch: location index out of range");
    if (!seen.insert(idx).second) throw InputError("measurement batch: repeated location index");
    const auto e = static_cast<Eigen::Index>(i);
    if (!std::isfinite(values(e))) throw InputError("measurement batch: non-finite value");
    if (!(noise_variances(e) > 0.0) || !std::isfinite(noise_variances(e))) {
      throw InputError("measurement batch: noise variance must be positive and finite");
    }
  }
}

double nll_increment(const Vector& innovation, const Matrix& innovation_cov) {
  if (innovation_cov.rows() != innovation.size() || innovation_cov.cols() != innovation.size()) {
    throw InputError("nll_increment: size mismatch");
  }
  const Eigen::LLT<Matrix> llt(symmetrized(innovation_cov));
  if (llt.info() != Eigen::Success) {
    throw ConditioningError("innovation covariance is not positive definite");
  }
  const Matrix& l = llt.matrixLLT();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  const Vector z = llt.matrixL().solve(innovation);
  const auto m = static_cast<double>(innovation.size());
  return 0.5 * (m * std::log(2.0 * std::numbers::pi) + log_det + z.squaredNorm());
}

GridFilter::GridFilter(TemporalRealization realization, LocationSet locations,
                       FilterOptions options)
    : realization_(std::move(realization)),
      locations_(std::move(locations)),
      options_(options),
      h0_(realization_.output_variance()),
      blocks_(std::make_shared<BlockCache>()) {}

DiscreteBlock GridFilter::block(double step) const {
  std::lock_guard lock(blocks_->mutex);
  for (const DiscreteBlock& b : blocks_->blocks) {
    if (b.step == step) return b;
  }
  DiscreteBlock b = discretize_block(realization_, step);
  if (blocks_->blocks.size() >= kMaxCachedBlocks) blocks_->blocks.erase(blocks_->blocks.begin());
  blocks_->blocks.push_back(b);
  return b;
}

FilterState GridFilter::initial_state(double t) const {
  auto [mean, cov] = stationary_prior(realization_, locations_);
  FilterState s;
  s.t = t;
  s.mean = std::move(mean);
  s.cov = std::move(cov);
  return s;
}

Matrix GridFilter::apply_transition(const Matrix& phi, const Matrix& m) const {
  const Eigen::Index r = realization_.order();
  Matrix out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < locations_.size(); ++i) {
    out.middleRows(i * r, r).noalias() = phi * m.middleRows(i * r, r);
  }
  return out;
}

FilterState GridFilter::predict(const FilterState& state, double t) const {
  if (t < state.t) {
    std::ostringstream msg;
    msg << "predict: target time " << t << " precedes state time " << state.t;
    throw TimeOrderError(msg.str());
  }
  const double tau = t - state.t;
  if (tau == 0.0) return state;
  const DiscreteBlock b = block(tau);
  const Eigen::Index r = realization_.order();
  FilterState out = state;
  out.t = t;
  out.mean = apply_transition(b.Phi, state.mean);
  const Matrix left = apply_transition(b.Phi, state.cov);
  out.cov = apply_transition(b.Phi, left.transpose());
  for (Eigen::Index i = 0; i < locations_.size(); ++i) out.cov.block(i * r, i * r, r, r) += b.Qbar;
  out.cov = symmetrized(out.cov);
  return out;
}

FilterState GridFilter::update(const FilterState& state, const MeasurementBatch& batch,
                               UpdateDiagnostics* diagnostics) const {
  batch.validate(locations_.size());
  const double step = batch.t - state.t;
  FilterState pred = predict(state, batch.t);
  if (batch.empty()) return pred;

  const Matrix c = output_matrix(realization_, locations_, batch.indices);
  const Vector innovation = batch.values - c * pred.mean;
  const auto m = static_cast<double>(batch.size());
  const double log2pi = std::log(2.0 * std::numbers::pi);

  const std::shared_ptr<SteadyGainCache>& cached = state.cache;
  if (options_.cache_steady_gain && cached && cached->converged && same_step(cached->step, step) &&
      cached->indices == batch.indices && cached->noise_variances == batch.noise_variances) {
    FilterState out = std::move(pred);
    out.mean += cached->gain * innovation;
    out.cov = cached->posterior_cov;
    const Vector z = cached->innovation_llt.matrixL().solve(innovation);
    const double inc = 0.5 * (m * log2pi + cached->log_det + z.squaredNorm());
    out.nll += inc;
    out.updates += 1;
    if (diagnostics) {
      diagnostics->innovation = innovation;
      diagnostics->innovation_cov = cached->innovation_cov;
      diagnostics->gain = cached->gain;
      diagnostics->nll_increment = inc;
      diagnostics->used_cached_gain = true;
    }
    return out;
  }

  const Matrix pct = pred.cov * c.transpose();
  Matrix s = c * pct;
  for (Eigen::Index i = 0; i < s.rows(); ++i) s(i, i) += batch.noise_variances(i);
  s = symmetrized(s);
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) {
    throw ConditioningError("update: innovation covariance is not positive definite");
  }
  const Matrix gain = llt.solve(pct.transpose()).transpose();
  const Matrix lower = llt.matrixL();
  const double log_det = 2.0 * lower.diagonal().array().log().sum();
  const Vector z = llt.matrixL().solve(innovation);
  const double inc = 0.5 * (m * log2pi + log_det + z.squaredNorm());

  FilterState out = pred;
  out.mean += gain * innovation;
  if (options_.form == CovarianceForm::Joseph) {
    Matrix ikc = -gain * c;
    ikc.diagonal().array() += 1.0;
    out.cov = ikc * pred.cov * ikc.transpose() +
              gain * batch.noise_variances.asDiagonal() * gain.transpose();
  } else {
    out.cov = pred.cov - gain * pct.transpose();
  }
  out.cov = symmetrized(out.cov);
  out.nll += inc;
  out.updates += 1;

  if (options_.cache_steady_gain) {
    auto next = std::make_shared<SteadyGainCache>();
    next->step = step;
    next->indices = batch.indices;
    next->noise_variances = batch.noise_variances;
    next->gain = gain;
    next->posterior_cov = out.cov;
    next->innovation_cov = s;
    next->log_det = log_det;
    next->innovation_llt = llt;
    next->converged = cached && same_step(cached->step, step) && cached->indices == batch.indices &&
                      cached->noise_variances == batch.noise_variances &&
                      (cached->gain - gain).cwiseAbs().maxCoeff() <= options_.steady_tolerance;
    out.cache = std::move(next);
  }

  if (diagnostics) {
    diagnostics->innovation = innovation;
    diagnostics->innovation_cov = s;
    diagnostics->gain = gain;
    diagnostics->nll_increment = inc;
    diagnostics->used_cached_gain = false;
  }
  return out;
}

OutputEstimate GridFilter::output(const FilterState& state) const {
  const Eigen::Index m = locations_.size();
  const Eigen::Index r = realization_.order();
  const Matrix& h = realization_.H;
  Vector hs(m);
  for (Eigen::Index i = 0; i < m; ++i) hs(i) = (h * state.mean.segment(i * r, r))(0);
  Matrix hsh(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      hsh(i, j) = (h * state.cov.block(i * r, j * r, r, r) * h.transpose())(0, 0);
    }
  }
  const Matrix& l = locations_.sqrt_factor();
  OutputEstimate out;
  out.t = state.t;
  out.mean = l * hs;
  out.cov = symmetrized(l * hsh * l.transpose());
  out.latent_mean = std::move(hs);
  out.latent_cov = symmetrized(hsh);
  return out;
}

std::vector<TrajectoryPoint> run_stream(const GridFilter& filter,
                                        std::span<const MeasurementBatch> batches,
                                        std::span<const double> query_times,
                                        const std::vector<Location>& query_points,
                                        std::vector<double>* update_seconds) {
  for (std::size_t i = 1; i < batches.size(); ++i) {
    if (!(batches[i].t > batches[i - 1].t)) {
      throw TimeOrderError("run_stream: batch times must be strictly increasing");
    }
  }
  std::vector<double> queries(query_times.begin(), query_times.end());
  std::sort(queries.begin(), queries.end());

  double t0 = batches.empty() ? 0.0 : batches.front().t;
  if (!queries.empty()) t0 = std::min(t0, queries.front());
  FilterState state = filter.initial_state(t0);

  std::optional<SpatialQuery> spatial;
  if (!query_points.empty()) spatial.emplace(filter.locations(), query_points);

  std::vector<TrajectoryPoint> out;
  auto emit = [&](const FilterState& s, bool at_batch) {
    const OutputEstimate est = filter.output(s);
    TrajectoryPoint p;
    p.t = s.t;
    p.mean = est.mean;
    p.cov = est.cov;
    p.nll = s.nll;
    p.at_batch = at_batch;
    if (spatial) {
      p.query_mean = extend_estimate_latent(est.latent_mean, *spatial);
      p.query_var = extend_variance_latent(est.latent_cov, filter.prior_variance(), *spatial);
    }
    out.push_back(std::move(p));
  };

  std::size_t q = 0;
  for (const MeasurementBatch& batch : batches) {
    for (; q < queries.size() && queries[q] < batch.t; ++q) emit(filter.predict(state, queries[q]), false);
    const auto start = std::chrono::steady_clock::now();
    state = filter.update(state, batch);
    if (update_seconds) {
      update_seconds->push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    emit(state, true);
    while (q < queries.size() && queries[q] == batch.t) ++q;
  }
  for (; q < queries.size(); ++q) emit(filter.predict(state, queries[q]), false);
  return out;
}

}  // namespace stgp
