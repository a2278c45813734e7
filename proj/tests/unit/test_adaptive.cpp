#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "instances.hpp"
#include "oracle.hpp"
#include "stgp/adaptive.hpp"
#include "stgp/error.hpp"
#include "stgp/filter.hpp"

using namespace stgp;

namespace {

struct Setup {
  oracle::Kernel ok;
  SeparableKernel kernel;
  TemporalRealization realization;
};

Setup setup(oracle::Time family) {
  oracle::Kernel ok;
  ok.sigma_s = 0.8;
  ok.amp = 1.2;
  ok.family = family;
  ok.lambda = 1.5;
  ok.sigma_t = 1.7;
  ok.freq = family == oracle::Time::PeriodicExponential ? 0.25 : 0.0;
  const SeparableKernel k = testing_support::lib_kernel(ok);
  return {ok, k, realize_exact(k.temporal())};
}

oracle::Posterior posterior_on(const std::vector<oracle::Obs>& obs, const oracle::Kernel& k,
                               const std::vector<Location>& set, double t) {
  std::vector<oracle::Query> q;
  for (const Location& x : set) q.push_back({x, t});
  return oracle::gp(obs, k, q);
}

}  // namespace

TEST_SUITE("adaptive") {

TEST_CASE("expanding from optimal statistics gives the enlarged-set posterior") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal;
  for (oracle::Time fam : {oracle::Time::Exponential, oracle::Time::PeriodicExponential}) {
    const Setup s = setup(fam);
    AdaptiveOptions opts;
    opts.capacity = 10;
    const AdaptiveEstimator est(s.realization, s.kernel.spatial(), opts);
    const std::vector<Location> old = {Location::Constant(1, 0.0), Location::Constant(1, 0.7),
                                       Location::Constant(1, 1.9)};
    std::vector<oracle::Obs> obs;
    AdaptiveState st = est.initial_state(0.0, old);
    double t = 0.0;
    for (int k = 0; k < 4; ++k) {
      t += 0.6;
      AdaptiveBatch b{t, {}};
      for (std::size_t i = 0; i < old.size(); ++i) {
        if ((k + i) % 3 == 0) continue;
        b.visits.push_back({old[i], normal(rng), 0.2});
        obs.push_back({old[i], t, b.visits.back().y, 0.2});
      }
      st = est.step(st, b);
    }
    t += 0.45;
    const Location fresh = Location::Constant(1, 1.2);
    AdaptiveBatch b{t, {{old[0], normal(rng), 0.3}, {fresh, normal(rng), 0.25}}};
    for (const Visit& v : b.visits) obs.push_back({v.x, t, v.y, v.noise_variance});
    AdaptiveStepReport report;
    st = est.step(st, b, &report);
    REQUIRE(report.added.size() == 1);
    REQUIRE(st.set.size() == 4);
    const oracle::Posterior ref = posterior_on(obs, s.ok, st.set.locations(), t);
    CHECK(oracle::rel_err(st.f, ref.mean) <= 1e-9);
    CHECK(oracle::rel_err(st.sigma_f, ref.cov) <= 1e-9);
    CHECK(st.nll == doctest::Approx(oracle::nll(obs, s.ok)).epsilon(1e-10));
    CHECK(audit_covariance(st.sigma_f).ok());
    CHECK(audit_covariance(st.sigma_s).ok());
  }
}

TEST_CASE("with a first-order kernel and no contraction the estimate stays optimal") {
  const Setup s = setup(oracle::Time::Exponential);
  AdaptiveOptions opts;
  opts.capacity = 50;
  const AdaptiveEstimator est(s.realization, s.kernel.spatial(), opts);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> normal;
  std::vector<oracle::Obs> obs;
  std::vector<AdaptiveBatch> batches;
  for (int k = 1; k <= 8; ++k) {
    const Location x = Location::Constant(1, 0.35 * (k % 5));
    batches.push_back({0.5 * k, {{x, normal(rng), 0.2}}});
    obs.push_back({x, 0.5 * k, batches.back().visits[0].y, 0.2});
  }
  const auto trace = run_adaptive(est, {}, batches);
  for (std::size_t k = 0; k < trace.size(); ++k) {
    std::vector<oracle::Obs> seen(obs.begin(), obs.begin() + static_cast<std::ptrdiff_t>(k + 1));
    const oracle::Posterior ref = posterior_on(seen, s.ok, trace[k].locations, trace[k].t);
    CHECK(oracle::rel_err(trace[k].f, ref.mean) <= 1e-9);
    CHECK(oracle::rel_err(trace[k].sigma_f, ref.cov) <= 1e-9);
  }
  CHECK(trace.back().nll == doctest::Approx(oracle::nll(obs, s.ok)).epsilon(1e-10));
}

TEST_CASE("contraction marginalizes the dropped location") {
  const Setup s = setup(oracle::Time::Exponential);
  const AdaptiveEstimator est(s.realization, s.kernel.spatial());
  AdaptiveState st = est.initial_state(0.0, {Location::Constant(1, 0.0), Location::Constant(1, 1.0),
                                             Location::Constant(1, 2.0)});
  st = est.step(st, {0.5, {{Location::Constant(1, 1.0), 0.7, 0.1}}});
  const AdaptiveState c = est.contract(st, 1);
  CHECK(c.set.size() == 2);
  CHECK(c.f(0) == st.f(0));
  CHECK(c.f(1) == st.f(2));
  CHECK(c.sigma_f(0, 1) == st.sigma_f(0, 2));
  CHECK(c.sigma_f(1, 1) == st.sigma_f(2, 2));
  CHECK_FALSE(c.state_valid);
  CHECK_THROWS_AS(est.step_old_locations(c, MeasurementBatch{1.0, {}, {}, {}}), InputError);
}

TEST_CASE("reconstructed state statistics map back to the output statistics") {
  const Setup s = setup(oracle::Time::PeriodicExponential);
  AdaptiveOptions opts;
  opts.capacity = 3;
  const AdaptiveEstimator est(s.realization, s.kernel.spatial(), opts);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal;
  AdaptiveState st = est.initial_state(0.0);
  for (int k = 1; k <= 12; ++k) {
    const Location x = Location::Constant(1, 0.4 * (k % 6));
    st = est.step(st, {0.3 * k, {{x, normal(rng), 0.3}}});
    REQUIRE(st.state_valid);
    const OutputEstimate back = est.output_from_state(st);
    CHECK(oracle::rel_err(back.mean, st.f) <= 1e-9);
    CHECK(oracle::rel_err(back.cov, st.sigma_f) <= 1e-9);
    CHECK(audit_covariance(st.sigma_s).ok());
    CHECK(static_cast<std::size_t>(st.set.size()) <= opts.capacity);
  }
}

TEST_CASE("the least recently visited location is discarded, ties to the earliest inserted") {
  const Setup s = setup(oracle::Time::Exponential);
  AdaptiveOptions opts;
  opts.capacity = 2;
  const AdaptiveEstimator est(s.realization, s.kernel.spatial(), opts);
  const Location a = Location::Constant(1, 0.0), b = Location::Constant(1, 1.0), c = Location::Constant(1, 2.0);
  AdaptiveState st = est.initial_state(0.0, {a, b});
  CHECK(est.choose_discard(st) == 0);
  st = est.step(st, {1.0, {{a, 0.1, 0.2}}});  // b is now the oldest visit
  AdaptiveStepReport report;
  st = est.step(st, {2.0, {{c, 0.3, 0.2}}}, &report);
  REQUIRE(report.dropped.size() == 1);
  CHECK(report.dropped[0] == b);
  CHECK(st.set.find(a) >= 0);
  CHECK(st.set.find(c) >= 0);
}

TEST_CASE("after the freeze time new locations are skipped") {
  const Setup s = setup(oracle::Time::Exponential);
  AdaptiveOptions opts;
  opts.freeze_time = 1.5;
  const AdaptiveEstimator est(s.realization, s.kernel.spatial(), opts);
  AdaptiveState st = est.initial_state(0.0);
  st = est.step(st, {1.0, {{Location::Constant(1, 0.0), 0.1, 0.2}}});
  AdaptiveStepReport report;
  st = est.step(st, {2.0, {{Location::Constant(1, 1.0), 0.1, 0.2}, {Location::Constant(1, 0.0), 0.3, 0.2}}}, &report);
  CHECK(report.skipped.size() == 1);
  CHECK(report.added.empty());
  CHECK(st.set.size() == 1);
}

TEST_CASE("several new locations in one instant are absorbed in order") {
  const Setup s = setup(oracle::Time::Exponential);
  const AdaptiveEstimator est(s.realization, s.kernel.spatial());
  AdaptiveState st = est.initial_state(0.0);
  std::vector<oracle::Obs> obs;
  AdaptiveBatch b{0.5, {{Location::Constant(1, 0.0), 0.4, 0.2}, {Location::Constant(1, 0.5), -0.2, 0.3},
                        {Location::Constant(1, 1.5), 0.9, 0.1}}};
  for (const Visit& v : b.visits) obs.push_back({v.x, b.t, v.y, v.noise_variance});
  st = est.step(st, b);
  const oracle::Posterior ref = posterior_on(obs, s.ok, st.set.locations(), 0.5);
  CHECK(oracle::rel_err(st.f, ref.mean) <= 1e-9);
  CHECK(oracle::rel_err(st.sigma_f, ref.cov) <= 1e-9);
  AdaptiveBatch dup{1.0, {{Location::Constant(1, 3.0), 0.1, 0.2}, {Location::Constant(1, 3.0), 0.2, 0.2}}};
  CHECK_THROWS_AS(est.step(st, dup), DuplicateLocationError);
}

TEST_CASE("without grid changes the estimator matches the grid filter bit for bit") {
  std::mt19937_64 rng(31);
  const auto inst = testing_support::random_instance(rng, 4, 2, 7);
  const SeparableKernel k = testing_support::lib_kernel(inst.kernel);
  const TemporalRealization real = realize_exact(k.temporal());
  const GridFilter filter(real, LocationSet(inst.locations, k.spatial()));
  const auto traj = run_stream(filter, inst.batches, {});
  AdaptiveOptions opts;
  opts.capacity = inst.locations.size();
  const AdaptiveEstimator est(real, k.spatial(), opts);
  std::vector<AdaptiveBatch> ab;
  for (const MeasurementBatch& b : inst.batches) {
    AdaptiveBatch a{b.t, {}};
    for (std::size_t i = 0; i < b.indices.size(); ++i) {
      a.visits.push_back({inst.locations[static_cast<std::size_t>(b.indices[i])], b.values(static_cast<Eigen::Index>(i)),
                          b.noise_variances(static_cast<Eigen::Index>(i))});
    }
    ab.push_back(a);
  }
  const auto trace = run_adaptive(est, inst.locations, ab);
  REQUIRE(trace.size() == traj.size());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    CHECK(trace[i].f == traj[i].mean);
    CHECK(trace[i].sigma_f == traj[i].cov);
    CHECK(trace[i].nll == traj[i].nll);
  }
}

TEST_CASE("virtual measurement noise is absent when nothing was learned") {
  Matrix prior(2, 2);
  prior << 1.0, 0.3, 0.3, 1.0;
  CHECK_FALSE(virtual_measurement_noise(prior, prior).has_value());
  const Matrix post = 0.5 * prior;
  const auto r = virtual_measurement_noise(post, prior);
  REQUIRE(r.has_value());
  // (Σᶠ⁻¹ - Σ_prior⁻¹)⁻¹ = prior when Σᶠ = prior/2.
  CHECK(oracle::rel_err(*r, prior) <= 1e-10);
}

TEST_CASE("patrol schedules are reproducible and stay on the frozen set") {
  std::mt19937_64 a(4), b(4);
  const auto p = patrol_schedule(50, 400, 1.0, 10, 150.0, 0.8, a);
  const auto q = patrol_schedule(50, 400, 1.0, 10, 150.0, 0.8, b);
  REQUIRE(p.size() == 400);
  std::set<std::size_t> before;
  for (std::size_t k = 0; k < p.size(); ++k) {
    CHECK(p[k].candidate == q[k].candidate);
    CHECK(p[k].t == doctest::Approx(static_cast<double>(k + 1)));
  }
  std::vector<std::size_t> memory;
  for (const PatrolStep& s : p) {
    if (s.t >= 150.0) break;
    const auto it = std::find(memory.begin(), memory.end(), s.candidate);
    if (it != memory.end()) memory.erase(it);
    memory.push_back(s.candidate);
    if (memory.size() > 10) memory.erase(memory.begin());
  }
  const std::set<std::size_t> frozen(memory.begin(), memory.end());
  for (const PatrolStep& s : p) {
    if (s.t >= 150.0) {
      CHECK(frozen.count(s.candidate) == 1);
      CHECK_FALSE(s.is_new);
    }
  }
}

}
