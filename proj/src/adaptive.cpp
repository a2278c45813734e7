#include "stgp/adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "stgp/error.hpp"
#include "stgp/representer.hpp"

namespace stgp {

namespace {

Vector erase_entry(const Vector& v, Eigen::Index i) {
  Vector out(v.size() - 1);
  out.head(i) = v.head(i);
  out.tail(v.size() - 1 - i) = v.tail(v.size() - 1 - i);
  return out;
}

Matrix erase_row_col(const Matrix& a, Eigen::Index i) {
  const Eigen::Index n = a.rows();
  const Eigen::Index tail = n - 1 - i;
  Matrix out(n - 1, n - 1);
  out.topLeftCorner(i, i) = a.topLeftCorner(i, i);
  out.topRightCorner(i, tail) = a.topRightCorner(i, tail);
  out.bottomLeftCorner(tail, i) = a.bottomLeftCorner(tail, i);
  out.bottomRightCorner(tail, tail) = a.bottomRightCorner(tail, tail);
  return out;
}

}  // namespace

std::optional<Matrix> virtual_measurement_noise(const Matrix& sigma_f, const Matrix& prior_f) {
  const Eigen::Index m = sigma_f.rows();
  if (prior_f.rows() != m || sigma_f.cols() != m || prior_f.cols() != m) {
    throw InputError("virtual_measurement_noise: size mismatch");
  }
  if (m == 0) return Matrix(0, 0);
  const double scale = std::max(prior_f.cwiseAbs().maxCoeff(), 1e-300);
  if ((prior_f - sigma_f).cwiseAbs().maxCoeff() <= 1e-14 * scale) return std::nullopt;

  const Eigen::LDLT<Matrix> post(symmetrized(sigma_f));
  const Eigen::LDLT<Matrix> prior(symmetrized(prior_f));
  if (post.info() != Eigen::Success || prior.info() != Eigen::Success) {
    throw ConditioningError("virtual_measurement_noise: covariance factorization failed");
  }
  const Matrix identity = Matrix::Identity(m, m);
  const Matrix precision = symmetrized(post.solve(identity) - prior.solve(identity));
  Eigen::SelfAdjointEigenSolver<Matrix> es(precision);
  Vector ev = es.eigenvalues();
  const double floor = 1e-10 * std::abs(precision.trace());
  if (ev.minCoeff() < floor) {
    std::ostringstream msg;
    msg << "virtual measurement precision has eigenvalue " << ev.minCoeff()
        << " below floor " << floor << "; flooring";
    warn(msg.str());
    ev = ev.cwiseMax(floor);
  }
  const Matrix& v = es.eigenvectors();
  return symmetrized(v * ev.cwiseInverse().asDiagonal() * v.transpose());
}

AdaptiveEstimator::AdaptiveEstimator(TemporalRealization realization, SpatialKernel kernel,
                                     AdaptiveOptions options)
    : realization_(std::move(realization)),
      kernel_(std::move(kernel)),
      options_(options),
      h0_(realization_.output_variance()) {
  if (options_.capacity < 1) throw InputError("adaptive capacity must be at least 1");
}

AdaptiveState AdaptiveEstimator::initial_state(double t, std::vector<Location> initial) const {
  AdaptiveState st{LocationSet(std::move(initial), kernel_, options_.sqrt_method)};
  if (static_cast<std::size_t>(st.set.size()) > options_.capacity) {
    throw InputError("adaptive initial location set exceeds capacity");
  }
  st.t = t;
  st.last_visit.assign(static_cast<std::size_t>(st.set.size()), t);
  auto [mean, cov] = stationary_prior(realization_, st.set);
  st.s = std::move(mean);
  st.sigma_s = std::move(cov);
  st.f = Vector::Zero(st.set.size());
  st.sigma_f = h0_ * st.set.gram();
  st.state_valid = true;
  return st;
}

AdaptiveState AdaptiveEstimator::step_old_locations(const AdaptiveState& state,
                                                    const MeasurementBatch& batch) const {
  if (!state.state_valid) {
    throw InputError("step_old_locations: state statistics must be reconstructed first");
  }
  if (batch.t < state.t) throw TimeOrderError("adaptive step: time goes backwards");
  AdaptiveState out = state;
  out.t = batch.t;
  if (state.set.empty()) {
    if (!batch.empty()) throw InputError("step_old_locations: no old locations to measure");
    return out;
  }
  const GridFilter filter(realization_, state.set, options_.filter);
  FilterState fs;
  fs.t = state.t;
  fs.mean = state.s;
  fs.cov = state.sigma_s;
  fs.nll = state.nll;
  fs = filter.update(fs, batch);
  const OutputEstimate est = filter.output(fs);
  out.s = std::move(fs.mean);
  out.sigma_s = std::move(fs.cov);
  out.nll = fs.nll;
  out.f = est.mean;
  out.sigma_f = est.cov;
  for (Eigen::Index idx : batch.indices) out.last_visit[static_cast<std::size_t>(idx)] = batch.t;
  return out;
}

AdaptiveState AdaptiveEstimator::expand(const AdaptiveState& state, const Location& x, double y,
                                        double noise_variance) const {
  if (state.set.find(x) >= 0) throw DuplicateLocationError("expand: location already in the set");
  if (!(noise_variance > 0.0)) throw InputError("expand: noise variance must be positive");
  const Eigen::Index m = state.set.size();
  const SpatialQuery query(state.set, {x});

  Vector fbar(m + 1);
  fbar.head(m) = state.f;
  fbar(m) = extend_estimate(state.f, query)(0);
  const Matrix sbar = joint_covariance(state.sigma_f, h0_, state.set, x);

  const double innov_var = sbar(m, m) + noise_variance;
  const double innov = y - fbar(m);
  const Vector gain = sbar.col(m) / innov_var;

  AdaptiveState out = state;
  out.set = state.set.with_appended(x);
  out.last_visit.push_back(state.t);
  out.f = fbar + gain * innov;
  Matrix ikc = Matrix::Identity(m + 1, m + 1);
  ikc.col(m) -= gain;
  out.sigma_f = symmetrized(ikc * sbar * ikc.transpose() +
                            noise_variance * gain * gain.transpose());
  out.nll += 0.5 * (std::log(2.0 * std::numbers::pi) + std::log(innov_var) +
                    innov * innov / innov_var);
  out.state_valid = false;
  return out;
}

AdaptiveState AdaptiveEstimator::contract(const AdaptiveState& state, Eigen::Index index) const {
  const Eigen::Index m = state.set.size();
  if (m <= 1) throw InputError("contract: cannot drop below one location");
  if (index < 0 || index >= m) throw InputError("contract: index out of range");
  AdaptiveState out = state;
  out.set = state.set.without(index);
  out.last_visit.erase(out.last_visit.begin() + index);
  out.f = erase_entry(state.f, index);
  out.sigma_f = erase_row_col(state.sigma_f, index);
  out.state_valid = false;
  return out;
}

AdaptiveState AdaptiveEstimator::reconstruct_state(const AdaptiveState& state) const {
  const Eigen::Index m = state.set.size();
  const Eigen::Index r = realization_.order();
  AdaptiveState out = state;
  auto [mean, prior] = stationary_prior(realization_, state.set);
  if (m == 0) {
    out.s = std::move(mean);
    out.sigma_s = std::move(prior);
    out.state_valid = true;
    return out;
  }
  // Gain Σˢ₀ Cᵀ (Σᶠ₀)⁻¹ with Σᶠ₀ = h0 L Lᵀ collapses to (1/h0)(I⊗Σ0Hᵀ) L⁻¹.
  const Matrix linv = state.set.solve_sqrt(Matrix::Identity(m, m));
  const Vector sh = realization_.stationary_cov * realization_.H.transpose() / h0_;
  Matrix gain(r * m, m);
  for (Eigen::Index i = 0; i < m; ++i) gain.middleRows(i * r, r) = sh * linv.row(i);

  // Σˢ₀ Cᵀ (Σᶠ₀ + Σ̌ᵛ)⁻¹ C Σˢ₀ = gain (Σᶠ₀ - Σ̃ᶠ) gainᵀ, so the virtual
  // noise itself is never inverted.
  const Matrix prior_f = h0_ * state.set.gram();
  out.s = gain * state.f;
  out.sigma_s = symmetrized(prior - gain * (prior_f - state.sigma_f) * gain.transpose());
  out.state_valid = true;
  return out;
}

Eigen::Index AdaptiveEstimator::choose_discard(const AdaptiveState& state) const {
  if (state.set.empty()) throw InputError("choose_discard: empty location set");
  const auto it = std::min_element(state.last_visit.begin(), state.last_visit.end());
  return static_cast<Eigen::Index>(it - state.last_visit.begin());
}

OutputEstimate AdaptiveEstimator::output_from_state(const AdaptiveState& state) const {
  const GridFilter filter(realization_, state.set, options_.filter);
  FilterState fs;
  fs.t = state.t;
  fs.mean = state.s;
  fs.cov = state.sigma_s;
  return filter.output(fs);
}

AdaptiveState AdaptiveEstimator::step(const AdaptiveState& state, const AdaptiveBatch& batch,
                                      AdaptiveStepReport* report) const {
  const bool frozen = options_.freeze_time && batch.t >= *options_.freeze_time;

  MeasurementBatch old;
  old.t = batch.t;
  std::vector<double> old_values;
  std::vector<double> old_noise;
  std::vector<const Visit*> fresh;
  for (const Visit& v : batch.visits) {
    const Eigen::Index idx = state.set.find(v.x);
    if (idx >= 0) {
      old.indices.push_back(idx);
      old_values.push_back(v.y);
      old_noise.push_back(v.noise_variance);
    } else if (frozen) {
      if (report) report->skipped.push_back(v.x);
    } else {
      for (const Visit* p : fresh) {
        if ((p->x - v.x).squaredNorm() == 0.0) {
          throw DuplicateLocationError("adaptive step: location visited twice in one instant");
        }
      }
      fresh.push_back(&v);
    }
  }
  old.values = Eigen::Map<const Vector>(old_values.data(), static_cast<Eigen::Index>(old_values.size()));
  old.noise_variances =
      Eigen::Map<const Vector>(old_noise.data(), static_cast<Eigen::Index>(old_noise.size()));

  AdaptiveState out = step_old_locations(state, old);
  out.steps = state.steps + 1;
  if (fresh.empty()) return out;

  for (const Visit* v : fresh) {
    out = expand(out, v->x, v->y, v->noise_variance);
    if (report) report->added.push_back(v->x);
  }
  while (static_cast<std::size_t>(out.set.size()) > options_.capacity) {
    const Eigen::Index drop = choose_discard(out);
    if (report) report->dropped.push_back(out.set.location(drop));
    out = contract(out, drop);
  }
  return reconstruct_state(out);
}

std::vector<AdaptiveTracePoint> run_adaptive(const AdaptiveEstimator& estimator,
                                             std::vector<Location> initial,
                                             const std::vector<AdaptiveBatch>& batches) {
  for (std::size_t i = 1; i < batches.size(); ++i) {
    if (!(batches[i].t > batches[i - 1].t)) {
      throw TimeOrderError("run_adaptive: batch times must be strictly increasing");
    }
  }
  std::vector<AdaptiveTracePoint> out;
  if (batches.empty()) return out;
  AdaptiveState state = estimator.initial_state(batches.front().t, std::move(initial));
  out.reserve(batches.size());
  for (const AdaptiveBatch& b : batches) {
    AdaptiveStepReport report;
    state = estimator.step(state, b, &report);
    AdaptiveTracePoint p;
    p.t = state.t;
    p.locations = state.set.locations();
    p.f = state.f;
    p.sigma_f = state.sigma_f;
    p.nll = state.nll;
    p.added = std::move(report.added);
    p.dropped = std::move(report.dropped);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PatrolStep> patrol_schedule(std::size_t candidates, std::size_t steps, double period,
                                        std::size_t capacity, std::optional<double> freeze_time,
                                        double persistence, std::mt19937_64& rng) {
  if (candidates < 1 || capacity < 1) throw InputError("patrol: need candidates and capacity");
  if (!(period > 0.0)) throw InputError("patrol: period must be positive");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<std::size_t> memory;  // most recent last
  std::vector<std::size_t> route(candidates);
  for (std::size_t i = 0; i < candidates; ++i) route[i] = i;
  std::size_t pos = static_cast<std::size_t>(unit(rng) * static_cast<double>(candidates)) % candidates;
  int heading = unit(rng) < 0.5 ? -1 : 1;
  bool frozen = false;

  std::vector<PatrolStep> out;
  out.reserve(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const double t = period * static_cast<double>(k + 1);
    if (!frozen && freeze_time && t >= *freeze_time && !memory.empty()) {
      frozen = true;
      const std::size_t here = route[pos];
      route = memory;
      std::sort(route.begin(), route.end());
      const auto it = std::lower_bound(route.begin(), route.end(), here);
      pos = it != route.end() && *it == here ? static_cast<std::size_t>(it - route.begin()) : 0;
    }
    if (k > 0 && route.size() > 1) {
      if (unit(rng) > persistence) heading = -heading;
      if (pos == 0) heading = 1;
      if (pos + 1 == route.size()) heading = -1;
      pos = heading > 0 ? pos + 1 : pos - 1;
    }
    const std::size_t c = route[pos];
    const auto seen = std::find(memory.begin(), memory.end(), c);
    PatrolStep step{t, c, seen == memory.end()};
    if (seen != memory.end()) memory.erase(seen);
    memory.push_back(c);
    if (memory.size() > capacity) memory.erase(memory.begin());
    out.push_back(step);
  }
  return out;
}

}  // namespace stgp
