// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when a hard criterion fails. Criterion 8 is a timing check and is
// reported but never fails the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "instances.hpp"
#include "oracle.hpp"
#include "stgp/adaptive.hpp"
#include "stgp/baseline.hpp"
#include "stgp/config.hpp"
#include "stgp/filter.hpp"
#include "stgp/representer.hpp"
#include "stgp/spectral.hpp"
#include "stgp/statespace.hpp"

using namespace stgp;
using Clock = std::chrono::steady_clock;

namespace {

struct Result {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

double elapsed(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

// Covariance hygiene is tallied across every suite for criterion 9.
struct Hygiene {
  long audited = 0;
  long failed = 0;
  double worst_asymmetry = 0.0;
  double worst_floor = 1.0;  // min eigenvalue / trace
  void matrix(const Matrix& c) {
    if (c.size() == 0) return;
    const CovarianceAudit a = audit_covariance(c, 1e-12, 1e-9);
    ++audited;
    if (!a.ok()) ++failed;
    worst_asymmetry = std::max(worst_asymmetry, a.asymmetry);
    if (a.trace > 0) worst_floor = std::min(worst_floor, a.min_eigenvalue / a.trace);
  }
  void variances(const Vector& v) {
    if (v.size() == 0) return;
    ++audited;
    if (v.minCoeff() < -1e-9 * std::max(1e-300, v.sum())) ++failed;
  }
};
Hygiene hygiene;

std::vector<oracle::Obs> obs_until(const Dataset& d, double t) {
  std::vector<oracle::Obs> out;
  for (const Record& r : d.records) {
    if (r.t <= t) out.push_back({r.x, r.t, r.y, r.noise_variance});
  }
  return out;
}

// 1. Filter + representer against the batch posterior.
Result exactness() {
  std::mt19937_64 rng(101);
  const auto start = Clock::now();
  double worst = 0.0;
  int instances = 0, points = 0;
  for (; instances < 60; ++instances) {
    const int m = std::uniform_int_distribution<int>(1, 6)(rng);
    const int order = 1 + instances % 2;
    const int batches = std::uniform_int_distribution<int>(3, 15)(rng);
    const int dim = 1 + (instances % 3 == 2);
    const auto inst = testing_support::random_instance(rng, m, order, batches, dim);
    const SeparableKernel k = testing_support::lib_kernel(inst.kernel);
    const GridFilter filter(realize_exact(k.temporal()), LocationSet(inst.locations, k.spatial()));

    std::vector<Location> queries;
    for (int p = 0; p < 3; ++p) {
      Location x(dim);
      for (int d = 0; d < dim; ++d) x(d) = testing_support::uniform(rng, -0.5, 3.5);
      queries.push_back(x);
    }
    std::vector<double> qt;
    for (std::size_t b = 1; b < inst.batches.size(); ++b) {
      if (b % 2) qt.push_back(testing_support::uniform(rng, inst.batches[b - 1].t, inst.batches[b].t));
    }
    qt.push_back(inst.batches.back().t + testing_support::uniform(rng, 0.1, 2.0));
    qt.push_back(inst.batches.front().t - 0.3);

    const auto traj = run_stream(filter, inst.batches, qt, queries);
    for (const TrajectoryPoint& p : traj) {
      std::vector<oracle::Query> q;
      for (const Location& x : inst.locations) q.push_back({x, p.t});
      for (const Location& x : queries) q.push_back({x, p.t});
      const oracle::Posterior ref = oracle::gp(obs_until(inst.data, p.t), inst.kernel, q);
      const Vector ref_var = ref.cov.diagonal();
      const double e = std::max({oracle::rel_err(p.mean, ref.mean.head(m)),
                                 oracle::rel_err(p.cov, ref.cov.topLeftCorner(m, m)),
                                 oracle::rel_err(p.query_mean, ref.mean.tail(3)),
                                 oracle::rel_err(p.query_var, ref_var.tail(3))});
      worst = std::max(worst, e);
      hygiene.matrix(p.cov);
      hygiene.variances(p.query_var);
      ++points;
    }
  }
  const double secs = elapsed(start);
  return {worst <= 1e-8 && secs < 60.0,
          std::to_string(instances) + " instances, " + std::to_string(points) + " outputs, max rel err " +
              fmt("%.2e", worst) + ", " + fmt("%.2f", secs) + " s"};
}

// 2. First-order closed forms.
Result closed_forms() {
  double worst = 0.0;
  for (double lambda : {0.5, 1.0, 3.0}) {
    for (double st : {0.2, 1.0, 7.5, 100.0}) {
      const TemporalRealization r = realize_exact(TemporalKernel::exponential(lambda, st));
      worst = std::max({worst, std::abs(r.F(0, 0) + 1.0 / st), std::abs(r.G(0, 0) - 1.0),
                        std::abs(r.H(0, 0) - std::sqrt(2.0 * lambda / st)),
                        std::abs(r.stationary_cov(0, 0) - st / 2.0)});
      for (double t : {0.01, 0.2, 1.0, 30.0}) {
        const DiscreteBlock b = discretize_block(r, t);
        worst = std::max({worst, std::abs(b.Phi(0, 0) - std::exp(-t / st)),
                          std::abs(b.Qbar(0, 0) - st * (1.0 - std::exp(-2.0 * t / st)) / 2.0)});
      }
    }
  }
  return {worst <= 1e-12, "max abs error " + fmt("%.2e", worst)};
}

// Field samples on a regular grid with one measurement per node.
struct GridData {
  std::vector<Location> locations;
  std::vector<double> times;
  Dataset data;
};

GridData grid_data(const SeparableKernel& k, int m, int steps, double period, double sigma,
                   std::uint64_t seed) {
  GridData g;
  for (int i = 0; i < m; ++i) g.locations.push_back(Location::Constant(1, static_cast<double>(i)));
  for (int s = 1; s <= steps; ++s) g.times.push_back(period * s);
  std::mt19937_64 rng = substream(seed, "sampling");
  g.data = sample_process(k, g.locations, g.times, {sigma, 0.0}, rng).dataset;
  return g;
}

Vector end_reference(const GridData& g, const SeparableKernel& k, const Dataset& d) {
  std::vector<SpaceTimePoint> q;
  for (const Location& x : g.locations) q.push_back({x, g.times.back()});
  return batch_gp(d, k, q).mean;
}

Vector filter_end(const GridData& g, const SeparableKernel& k, const TemporalRealization& real) {
  const GridFilter f(real, LocationSet(g.locations, k.spatial()));
  const LocationSet& set = f.locations();
  FilterState s = f.initial_state(g.times.front());
  std::size_t next = 0;
  for (double t : g.times) {
    MeasurementBatch b;
    b.t = t;
    std::vector<double> v, n;
    for (; next < g.data.size() && g.data.records[next].t == t; ++next) {
      b.indices.push_back(set.find(g.data.records[next].x));
      v.push_back(g.data.records[next].y);
      n.push_back(g.data.records[next].noise_variance);
    }
    b.values = Eigen::Map<Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
    b.noise_variances = Eigen::Map<Vector>(n.data(), static_cast<Eigen::Index>(n.size()));
    s = f.update(s, b);
    hygiene.matrix(s.cov);
  }
  const OutputEstimate out = f.output(s);
  hygiene.matrix(out.cov);
  return out.mean;
}

// 3. Laplace temporal kernel: exact first-order filter vs full batch.
Result laplace_headline() {
  const SeparableKernel k(SpatialKernel(SpatialFamily::SquaredExponential, 5.0, 1.0),
                          TemporalKernel::exponential(1.0, 100.0));
  const TemporalRealization real = realize_exact(k.temporal());
  double worst = 100.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const GridData g = grid_data(k, 20, 50, 0.2, 1.0, seed);
    worst = std::min(worst, fit_percent(filter_end(g, k, real), end_reference(g, k, g.data)));
  }
  return {real.order() == 1 && worst >= 100.0 - 1e-4,
          "order " + std::to_string(real.order()) + ", worst fit over 3 seeds " + fmt("%.8f", worst)};
}

// Realization ladder 1..6 of the Gaussian temporal kernel, kept for criterion 8.
std::vector<TemporalRealization> gaussian_ladder;

// 4. Gaussian kernels: fit vs order and vs buffer length.
Result table_shape() {
  const SeparableKernel k(SpatialKernel(SpatialFamily::SquaredExponential, 5.0, 1.0),
                          TemporalKernel::squared_exponential(1.0, std::sqrt(2.0)));
  const int orders[] = {2, 4, 6};
  const int buffers[] = {5, 10, 20};
  const std::vector<int> ladder_orders = {1, 2, 3, 4, 5, 6};
  const std::vector<double> grid = default_frequency_grid(k.temporal());
  PsdApproximationOptions opts;
  opts.weighting = PsdWeighting::Uniform;

  const int seeds = 5;
  double fit_r[3] = {0, 0, 0}, fit_q[3] = {0, 0, 0};
  double worst_r6 = 100.0;
  int seeds_monotone_r = 0, seeds_monotone_q = 0;
  std::string per_seed;
  for (int seed = 1; seed <= seeds; ++seed) {
    std::mt19937_64 orng = substream(static_cast<std::uint64_t>(seed), "optimizer");
    const auto ladder = approximate_psd_ladder(k.temporal(), ladder_orders, grid, orng, opts);
    const GridData g = grid_data(k, 30, 50, 0.2, 1.0, static_cast<std::uint64_t>(seed));
    const Vector ref = end_reference(g, k, g.data);
    double r_fit[3], q_fit[3];
    for (int i = 0; i < 3; ++i) {
      const TemporalRealization real = realize(ladder[static_cast<std::size_t>(orders[i] - 1)].factor);
      if (seed == 1 && orders[i] == 6) {
        for (const auto& a : ladder) gaussian_ladder.push_back(realize(a.factor));
      }
      r_fit[i] = fit_percent(filter_end(g, k, real), ref);
      Dataset window;
      const double t_lo = g.times[g.times.size() - static_cast<std::size_t>(buffers[i])];
      for (const Record& r : g.data.records) {
        if (r.t >= t_lo) window.records.push_back(r);
      }
      q_fit[i] = fit_percent(end_reference(g, k, window), ref);
      fit_r[i] += r_fit[i] / seeds;
      fit_q[i] += q_fit[i] / seeds;
    }
    worst_r6 = std::min(worst_r6, r_fit[2]);
    seeds_monotone_r += r_fit[0] <= r_fit[1] && r_fit[1] <= r_fit[2];
    seeds_monotone_q += q_fit[0] <= q_fit[1] && q_fit[1] <= q_fit[2];
    char buf[200];
    std::snprintf(buf, sizeof buf, "\n    seed %d: r=2,4,6 -> %.3f %.3f %.3f | q=5,10,20 -> %.3f %.3f %.3f", seed,
                  r_fit[0], r_fit[1], r_fit[2], q_fit[0], q_fit[1], q_fit[2]);
    per_seed += buf;
  }
  const bool a = fit_r[0] <= fit_r[1] && fit_r[1] <= fit_r[2] && fit_r[2] >= 99.0 && worst_r6 >= 98.5;
  const bool b = fit_q[0] <= fit_q[1] && fit_q[1] <= fit_q[2];
  char buf[400];
  std::snprintf(buf, sizeof buf,
                "(a) mean fit r=2,4,6: %.3f %.3f %.3f, worst r=6 %.3f, monotone on %d/%d seeds; "
                "(b) mean fit q=5,10,20: %.3f %.3f %.3f, monotone on %d/%d seeds",
                fit_r[0], fit_r[1], fit_r[2], worst_r6, seeds_monotone_r, seeds, fit_q[0], fit_q[1],
                fit_q[2], seeds_monotone_q, seeds);
  return {a && b, std::string(buf) + per_seed};
}

// 5. Streamed NLL against the batch marginal likelihood.
Result nll_equivalence() {
  std::mt19937_64 rng(505);
  double worst = 0.0;
  const int n = 30;
  for (int i = 0; i < n; ++i) {
    const int m = std::uniform_int_distribution<int>(1, 6)(rng);
    const auto inst = testing_support::random_instance(rng, m, 1 + i % 2,
                                                       std::uniform_int_distribution<int>(2, 15)(rng), 1 + i % 2);
    const SeparableKernel k = testing_support::lib_kernel(inst.kernel);
    const GridFilter f(realize_exact(k.temporal()), LocationSet(inst.locations, k.spatial()));
    FilterState s = f.initial_state(inst.batches.front().t);
    for (const MeasurementBatch& b : inst.batches) {
      s = f.update(s, b);
      hygiene.matrix(s.cov);
    }
    worst = std::max(worst, std::abs(s.nll - oracle::nll(obs_until(inst.data, 1e300), inst.kernel)));
  }
  return {worst <= 1e-6, std::to_string(n) + " instances, max abs difference " + fmt("%.2e", worst)};
}

// 6. One expansion from optimal statistics.
Result expansion_optimality() {
  std::mt19937_64 rng(606);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  const int n = 25;
  for (int i = 0; i < n; ++i) {
    const int m_old = std::uniform_int_distribution<int>(1, 5)(rng);
    const auto inst = testing_support::random_instance(rng, m_old, 1 + i % 2,
                                                       std::uniform_int_distribution<int>(1, 6)(rng));
    const SeparableKernel k = testing_support::lib_kernel(inst.kernel);
    AdaptiveOptions opts;
    opts.capacity = 10;
    const AdaptiveEstimator est(realize_exact(k.temporal()), k.spatial(), opts);
    AdaptiveState st = est.initial_state(inst.batches.front().t - 0.1, inst.locations);
    for (const MeasurementBatch& b : inst.batches) st = est.step_old_locations(st, b);
    const double t = inst.batches.back().t + testing_support::uniform(rng, 0.05, 1.5);
    AdaptiveBatch batch{t, {}};
    for (int j = 0; j < m_old; ++j) {
      if (normal(rng) > 0.0) batch.visits.push_back({inst.locations[static_cast<std::size_t>(j)], normal(rng), 0.3});
    }
    Location fresh(1);
    fresh(0) = testing_support::uniform(rng, -0.5, 3.5);
    batch.visits.push_back({fresh, normal(rng), testing_support::uniform(rng, 0.05, 0.8)});
    st = est.step(st, batch);

    std::vector<oracle::Obs> obs = obs_until(inst.data, 1e300);
    for (const Visit& v : batch.visits) obs.push_back({v.x, t, v.y, v.noise_variance});
    std::vector<oracle::Query> q;
    for (const Location& x : st.set.locations()) q.push_back({x, t});
    const oracle::Posterior ref = oracle::gp(obs, inst.kernel, q);
    worst = std::max({worst, oracle::rel_err(st.f, ref.mean), oracle::rel_err(st.sigma_f, ref.cov)});
    hygiene.matrix(st.sigma_f);
    hygiene.matrix(st.sigma_s);
  }
  return {worst <= 1e-8, std::to_string(n) + " scenarios, max rel err " + fmt("%.2e", worst)};
}

// 7. Gap between the frozen adaptive estimate and the full-information
// filter over all candidates.
Result asymptotic_optimality() {
  const SeparableKernel k(SpatialKernel(SpatialFamily::SquaredExponential, 0.005, 1.0),
                          TemporalKernel::exponential(1.0, 100.0));
  const TemporalRealization real = realize_exact(k.temporal());
  const double sigma_t = 100.0, freeze = 50.0, noise_var = 0.01;
  const std::size_t candidates = 50, capacity = 10;
  const std::size_t steps = static_cast<std::size_t>(freeze + 10.0 * sigma_t);
  const double signal = std::sqrt(real.output_variance() * k.spatial().amplitude());

  std::vector<Location> cand;
  for (std::size_t i = 0; i < candidates; ++i) cand.push_back(Location::Constant(1, static_cast<double>(i) / 49.0));
  const GridFilter full(real, LocationSet(cand, k.spatial()));
  AdaptiveOptions opts;
  opts.capacity = capacity;
  opts.freeze_time = freeze;
  const AdaptiveEstimator est(real, k.spatial(), opts);

  int passing = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    std::mt19937_64 srng = substream(seed, "schedule");
    const auto patrol = patrol_schedule(candidates, steps, 1.0, capacity, freeze, 0.8, srng);
    std::vector<double> times;
    for (const PatrolStep& p : patrol) times.push_back(p.t);
    std::mt19937_64 frng = substream(seed, "sampling");
    const Matrix field = simulate_outputs(real, full.locations(), times, frng);
    std::normal_distribution<double> normal;

    FilterState fs = full.initial_state(times.front());
    AdaptiveState as = est.initial_state(times.front());
    std::vector<double> gap_t, log_gap;
    double final_gap = 0.0;
    for (std::size_t s = 0; s < patrol.size(); ++s) {
      const std::size_t c = patrol[s].candidate;
      const double y = field(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(s)) + 0.1 * normal(frng);
      MeasurementBatch b;
      b.t = times[s];
      b.indices = {static_cast<Eigen::Index>(c)};
      b.values = Vector::Constant(1, y);
      b.noise_variances = Vector::Constant(1, noise_var);
      fs = full.update(fs, b);
      as = est.step(as, {times[s], {{cand[c], y, noise_var}}});
      hygiene.matrix(as.sigma_f);
      if (times[s] < freeze) continue;
      const OutputEstimate opt = full.output(fs);
      double gap = 0.0;
      for (Eigen::Index i = 0; i < as.set.size(); ++i) {
        const Eigen::Index j = full.locations().find(as.set.location(i));
        gap = std::max(gap, std::abs(as.f(i) - opt.mean(j)));
      }
      gap /= signal;
      final_gap = gap;
      if (gap > 1e-13) {
        gap_t.push_back(times[s]);
        log_gap.push_back(std::log(gap));
      }
    }
    hygiene.matrix(fs.cov);
    double slope = 0.0;
    if (gap_t.size() >= 2) {
      const double mt = std::accumulate(gap_t.begin(), gap_t.end(), 0.0) / gap_t.size();
      const double ml = std::accumulate(log_gap.begin(), log_gap.end(), 0.0) / log_gap.size();
      double sxy = 0.0, sxx = 0.0;
      for (std::size_t i = 0; i < gap_t.size(); ++i) {
        sxy += (gap_t[i] - mt) * (log_gap[i] - ml);
        sxx += (gap_t[i] - mt) * (gap_t[i] - mt);
      }
      slope = sxy / sxx;
    }
    const bool ok = final_gap < 1e-6 && slope < 0.0;
    passing += ok;
    char buf[160];
    std::snprintf(buf, sizeof buf, "\n    seed %llu: gap at t=%.0f is %.2e, log-gap slope %.3e /s%s",
                  static_cast<unsigned long long>(seed), times.back(), final_gap, slope, ok ? "" : " (fail)");
    detail += buf;
  }
  return {passing >= 3, std::to_string(passing) + "/5 seeds converge" + detail};
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// 8. Per-iteration cost: constant for the filter, growing for the batch GP.
Result complexity() {
  const SeparableKernel k(SpatialKernel(SpatialFamily::SquaredExponential, 5.0, 1.0),
                          TemporalKernel::squared_exponential(1.0, std::sqrt(2.0)));
  const TemporalRealization real = gaussian_ladder.size() >= 6 ? gaussian_ladder[5]
                                                                 : realize_exact(TemporalKernel::exponential(1.0, 1.0));
  const int m = 30, active = 5, iters = 200;
  std::vector<Location> locs;
  for (int i = 0; i < m; ++i) locs.push_back(Location::Constant(1, static_cast<double>(i)));
  std::mt19937_64 rng(808);
  std::normal_distribution<double> normal;
  Dataset data;
  std::vector<MeasurementBatch> batches;
  const LocationSet set(locs, k.spatial());
  for (int it = 1; it <= iters; ++it) {
    std::vector<Eigen::Index> idx(m);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(active);
    std::sort(idx.begin(), idx.end());
    MeasurementBatch b;
    b.t = 0.2 * it;
    b.indices = idx;
    b.values.resize(active);
    b.noise_variances = Vector::Ones(active);
    for (int a = 0; a < active; ++a) {
      b.values(a) = normal(rng);
      data.records.push_back({locs[static_cast<std::size_t>(idx[static_cast<std::size_t>(a)])], b.t, b.values(a), 1.0});
    }
    batches.push_back(b);
  }
  const GridFilter f(real, set);
  std::vector<double> ft(iters);
  FilterState s = f.initial_state(batches.front().t);
  for (int it = 0; it < iters; ++it) {
    const auto start = Clock::now();
    s = f.update(s, batches[static_cast<std::size_t>(it)]);
    ft[static_cast<std::size_t>(it)] = elapsed(start);
  }
  const double early = median(std::vector<double>(ft.begin(), ft.begin() + 50));
  const double late = median(std::vector<double>(ft.end() - 50, ft.end()));

  auto batch_time = [&](int it) {
    Dataset upto;
    upto.records.assign(data.records.begin(), data.records.begin() + static_cast<std::ptrdiff_t>(it) * active);
    std::vector<SpaceTimePoint> q;
    for (const Location& x : locs) q.push_back({x, 0.2 * it});
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
      const auto start = Clock::now();
      const BatchPrediction p = batch_gp(upto, k, q);
      best = std::min(best, elapsed(start));
      hygiene.variances(p.variance);
    }
    return best;
  };
  const double b20 = batch_time(20), b200 = batch_time(200);
  const bool flat = late <= 1.5 * early;
  const bool grows = b200 >= 10.0 * b20;
  char buf[300];
  std::snprintf(buf, sizeof buf,
                "filter median update %.3g ms (k<=50) vs %.3g ms (k>150); batch GP %.3g ms at k=20 vs %.3g ms "
                "at k=200 (x%.1f)",
                early * 1e3, late * 1e3, b20 * 1e3, b200 * 1e3, b200 / b20);
  return {flat && grows, buf};
}

}  // namespace

int main() {
  set_warning_sink([](std::string_view) {});
  int hard_failures = 0;
  auto report = [&](int n, const Result& r, bool soft = false) {
    std::printf("criterion %d%s: %s | %s\n", n, soft ? " (soft)" : "", r.pass ? "PASS" : "FAIL", r.detail.c_str());
    std::fflush(stdout);
    if (!r.pass && !soft) ++hard_failures;
  };
  report(1, exactness());
  report(2, closed_forms());
  report(3, laplace_headline());
  report(4, table_shape());
  report(5, nll_equivalence());
  report(6, expansion_optimality());
  report(7, asymptotic_optimality());
  report(8, complexity(), true);
  char buf[200];
  std::snprintf(buf, sizeof buf, "%ld covariance outputs audited, %ld failed, worst asymmetry %.2e, worst floor %.2e",
                hygiene.audited, hygiene.failed, hygiene.worst_asymmetry, hygiene.worst_floor);
  report(9, {hygiene.failed == 0 && hygiene.audited > 0, buf});
  std::printf("%s\n", hard_failures == 0 ? "all hard criteria passed" : "some hard criteria failed");
  return hard_failures == 0 ? 0 : 1;
}
