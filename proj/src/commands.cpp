#include "stgp/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <ostream>
#include <sstream>
#include <thread>

#include "stgp/error.hpp"

namespace stgp {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Grids longer than this are drawn through the state-space model instead of
// the dense temporal Gram matrix.
constexpr std::size_t kDenseTimeLimit = 1500;

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw InputError("cannot write " + path.string());
  f << std::setprecision(17);
  return f;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f = open_out(path);
  f << text;
}

NoiseModel noise_model(const ExperimentConfig& config) {
  return {config.noise.sigma, config.noise.relative};
}

// Exact field on locations × times. Long horizons use the exact discrete
// state-space recursion, which needs a rational temporal kernel.
Matrix draw_field(const ExperimentConfig& config, const std::vector<Location>& locations,
                  const std::vector<double>& times, std::mt19937_64& rng) {
  const SeparableKernel kernel = config.kernel();
  if (times.size() <= kDenseTimeLimit || !kernel.temporal().has_rational_psd()) {
    return sample_process(kernel, locations, times, noise_model(config), rng).field;
  }
  const LocationSet set(locations, kernel.spatial());
  return simulate_outputs(realize_exact(kernel.temporal()), set, times, rng);
}

double draw_measurement(const NoiseModel& noise, double f, std::mt19937_64& rng, double* sigma) {
  std::normal_distribution<double> normal(0.0, 1.0);
  *sigma = noise.std_dev(f);
  return f + *sigma * normal(rng);
}

struct Summary {
  std::vector<std::pair<std::string, std::string>> rows;
  void add(const std::string& key, const std::string& value) { rows.emplace_back(key, value); }
  void add(const std::string& key, double value) { add(key, format_double(value)); }
  void write(const fs::path& path) const {
    std::ofstream f = open_out(path);
    f << "metric,value\n";
    for (const auto& [k, v] : rows) f << k << ',' << v << '\n';
  }
};

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Batch posterior mean at (x, t) for every x; the reference estimate.
Vector reference_mean(const Dataset& data, const SeparableKernel& kernel,
                      const std::vector<Location>& locations, double t) {
  std::vector<SpaceTimePoint> q;
  q.reserve(locations.size());
  for (const Location& x : locations) q.push_back({x, t});
  return batch_gp(data, kernel, q).mean;
}

void try_fit(Summary& summary, const std::string& key, const Vector& estimate,
             const Vector& reference, std::ostream& log) {
  try {
    const double fit = fit_percent(estimate, reference);
    summary.add(key, fit);
    log << key << " = " << std::fixed << std::setprecision(3) << fit << std::defaultfloat << '\n';
  } catch (const UndefinedFitError& e) {
    warn(std::string(key) + ": " + e.what());
    summary.add(key, "nan");
  }
}

Dataset input_dataset(const ExperimentConfig& config) {
  if (!config.data.dataset.empty()) return load_dataset(config.data.dataset);
  return generate_dataset(config).dataset;
}

std::vector<Location> filter_locations(const ExperimentConfig& config, const Dataset& data) {
  if (config.data.dataset.empty()) return config.location_list();
  return data.locations();
}

// Largest dataset the end-of-run batch reference is computed for.
constexpr std::size_t kReferenceLimit = 6000;

void run_filter_mode(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  const Dataset data = input_dataset(config);
  data.validate();
  const SeparableKernel kernel = config.kernel();
  std::mt19937_64 opt_rng = substream(config.seed, "optimizer");
  auto start = Clock::now();
  const TemporalRealization realization = config.make_realization(opt_rng);
  const double realize_seconds = seconds_since(start);

  const std::vector<Location> locations = filter_locations(config, data);
  const GridFilter filter(realization, LocationSet(locations, kernel.spatial()));
  const std::vector<MeasurementBatch> batches = group_batches(data, filter.locations());
  std::vector<double> update_seconds;
  start = Clock::now();
  const auto traj = run_stream(filter, batches, config.queries.times, config.queries.points,
                               &update_seconds);
  const double run_seconds = seconds_since(start);
  {
    std::ofstream f = open_out(out / "trajectory.jsonl");
    write_trajectory_jsonl(f, traj);
  }

  Summary summary;
  summary.add("mode", "filter");
  summary.add("locations", std::to_string(locations.size()));
  summary.add("records", std::to_string(data.size()));
  summary.add("batches", std::to_string(batches.size()));
  summary.add("state_dimension", std::to_string(filter.state_dimension()));
  summary.add("realization_order", std::to_string(realization.order()));
  summary.add("realization_seconds", realize_seconds);
  summary.add("run_seconds", run_seconds);
  summary.add("mean_update_seconds", mean_of(update_seconds));
  const double nll = batches.empty() ? 0.0 : traj.back().nll;
  summary.add("nll", nll);
  log << "filter: " << batches.size() << " batches over " << locations.size()
      << " locations, nll = " << std::setprecision(10) << nll << '\n';

  if (!batches.empty() && data.size() <= kReferenceLimit) {
    const double t_end = batches.back().t;
    auto it = std::find_if(traj.begin(), traj.end(),
                           [&](const TrajectoryPoint& p) { return p.at_batch && p.t == t_end; });
    const Vector ref = reference_mean(data, kernel, locations, t_end);
    try_fit(summary, "fit_vs_batch", it->mean, ref, log);
  }
  summary.write(out / "summary.csv");
}

void run_baseline_mode(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  const Dataset data = input_dataset(config);
  data.validate();
  const SeparableKernel kernel = config.kernel();
  const std::vector<Location> locations = filter_locations(config, data);
  const auto start = Clock::now();
  const auto steps = truncated_gp(data, kernel, config.baseline.buffer, locations);
  const double run_seconds = seconds_since(start);
  {
    std::ofstream f = open_out(out / "trajectory.jsonl");
    write_truncated_jsonl(f, steps);
  }
  Summary summary;
  summary.add("mode", "baseline");
  summary.add("buffer", std::to_string(config.baseline.buffer));
  summary.add("records", std::to_string(data.size()));
  summary.add("run_seconds", run_seconds);
  summary.add("mean_step_seconds", steps.empty() ? 0.0 : run_seconds / static_cast<double>(steps.size()));
  log << "baseline: " << steps.size() << " steps, buffer " << config.baseline.buffer << '\n';
  if (!steps.empty() && data.size() <= kReferenceLimit) {
    const Vector ref = reference_mean(data, kernel, locations, steps.back().t);
    try_fit(summary, "fit_vs_batch", steps.back().mean, ref, log);
  }
  summary.write(out / "summary.csv");
}

void run_adaptive_mode(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  std::vector<ScenarioRow> rows = config.data.scenario.empty() ? generate_scenario(config).rows
                                                               : load_scenario(config.data.scenario);
  const std::vector<AdaptiveBatch> batches = scenario_batches(rows);
  const SeparableKernel kernel = config.kernel();
  std::mt19937_64 opt_rng = substream(config.seed, "optimizer");
  const TemporalRealization realization = config.make_realization(opt_rng);

  AdaptiveOptions options;
  options.capacity = static_cast<std::size_t>(config.adaptive.capacity);
  options.freeze_time = config.adaptive.freeze_time;
  const AdaptiveEstimator estimator(realization, kernel.spatial(), options);

  // Replayed here rather than through run_adaptive to compare the advisory
  // is_new flags with the estimator's own membership decisions.
  std::size_t disagreements = 0;
  std::size_t row = 0;
  std::vector<AdaptiveTracePoint> trace;
  std::vector<double> step_seconds;
  AdaptiveState state = estimator.initial_state(batches.empty() ? 0.0 : batches.front().t);
  for (const AdaptiveBatch& batch : batches) {
    for (const Visit& v : batch.visits) {
      const bool member = state.set.find(v.x) >= 0;
      if (rows[row++].is_new == member) ++disagreements;
    }
    AdaptiveStepReport report;
    const auto start = Clock::now();
    state = estimator.step(state, batch, &report);
    step_seconds.push_back(seconds_since(start));
    AdaptiveTracePoint p;
    p.t = state.t;
    p.locations = state.set.locations();
    p.f = state.f;
    p.sigma_f = state.sigma_f;
    p.nll = state.nll;
    p.added = report.added;
    p.dropped = report.dropped;
    trace.push_back(std::move(p));
  }
  if (disagreements > 0) {
    warn("adaptive: " + std::to_string(disagreements) +
         " scenario rows have an is_new flag that disagrees with the estimator");
  }
  {
    std::ofstream f = open_out(out / "trajectory.jsonl");
    write_adaptive_jsonl(f, trace);
  }
  Summary summary;
  summary.add("mode", "adaptive");
  summary.add("steps", std::to_string(batches.size()));
  summary.add("capacity", std::to_string(config.adaptive.capacity));
  summary.add("final_locations", std::to_string(state.set.size()));
  summary.add("nll", state.nll);
  summary.add("mean_step_seconds", mean_of(step_seconds));
  summary.add("flag_disagreements", std::to_string(disagreements));
  log << "adaptive: " << batches.size() << " steps, final set of " << state.set.size()
      << ", nll = " << std::setprecision(10) << state.nll << '\n';
  summary.write(out / "summary.csv");
}

}  // namespace

GeneratedData generate_dataset(const ExperimentConfig& config) {
  GeneratedData g;
  g.locations = config.location_list();
  g.times = config.sample_times();
  if (g.times.empty()) {
    warn("generate: schedule horizon yields no sampling instants; dataset is empty");
    g.field = Matrix(static_cast<Eigen::Index>(g.locations.size()), 0);
    return g;
  }
  std::mt19937_64 rng = substream(config.seed, "sampling");
  g.field = draw_field(config, g.locations, g.times, rng);
  const NoiseModel noise = noise_model(config);
  const std::size_t m = g.locations.size();
  const std::size_t active = config.schedule.active > 0
                                 ? std::min<std::size_t>(static_cast<std::size_t>(config.schedule.active), m)
                                 : m;
  std::mt19937_64 schedule_rng = substream(config.seed, "schedule");
  std::vector<std::size_t> order(m);
  for (std::size_t k = 0; k < g.times.size(); ++k) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (active < m) {
      std::shuffle(order.begin(), order.end(), schedule_rng);
      std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(active));
    }
    for (std::size_t a = 0; a < active; ++a) {
      const std::size_t i = order[a];
      const double f = g.field(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
      double sigma = 0.0;
      const double y = draw_measurement(noise, f, rng, &sigma);
      g.dataset.records.push_back({g.locations[i], g.times[k], y, sigma * sigma});
    }
  }
  return g;
}

GeneratedScenario generate_scenario(const ExperimentConfig& config) {
  GeneratedScenario g;
  g.candidates = config.location_list();
  g.times = config.sample_times();
  if (g.times.empty()) {
    warn("generate: schedule horizon yields no sampling instants; scenario is empty");
    g.field = Matrix(static_cast<Eigen::Index>(g.candidates.size()), 0);
    return g;
  }
  std::mt19937_64 schedule_rng = substream(config.seed, "schedule");
  const auto patrol = patrol_schedule(g.candidates.size(), g.times.size(), config.schedule.step,
                                      static_cast<std::size_t>(config.adaptive.capacity),
                                      config.adaptive.freeze_time, config.adaptive.persistence,
                                      schedule_rng);
  std::mt19937_64 rng = substream(config.seed, "sampling");
  g.field = draw_field(config, g.candidates, g.times, rng);
  const NoiseModel noise = noise_model(config);
  for (std::size_t k = 0; k < patrol.size(); ++k) {
    const PatrolStep& p = patrol[k];
    const double f = g.field(static_cast<Eigen::Index>(p.candidate), static_cast<Eigen::Index>(k));
    double sigma = 0.0;
    const double y = draw_measurement(noise, f, rng, &sigma);
    g.rows.push_back({{g.candidates[p.candidate], g.times[k], y, sigma * sigma}, p.is_new});
  }
  return g;
}

void set_parameter(ExperimentConfig& config, const std::string& name, double value) {
  if (name == "spatial.length_scale") config.spatial.length_scale = value;
  else if (name == "temporal.scale") config.temporal.scale = value;
  else if (name == "temporal.decay") config.temporal.decay = value;
  else if (name == "temporal.frequency") config.temporal.frequency = value;
  else if (name == "noise.sigma") config.noise.sigma = value;
  else throw InputError("unknown sweep parameter '" + name + "'");
}

std::vector<SweepCell> run_sweep(const ExperimentConfig& config, const Dataset& data) {
  const auto& axes = config.sweep.axes;
  std::size_t total = 1;
  for (const SweepAxis& a : axes) total *= a.values.size();
  if (axes.empty()) total = 0;

  std::vector<SweepCell> cells(total);
  for (std::size_t c = 0; c < total; ++c) {
    std::size_t rem = c;
    for (std::size_t a = axes.size(); a-- > 0;) {
      cells[c].values.insert(cells[c].values.begin(), axes[a].values[rem % axes[a].values.size()]);
      rem /= axes[a].values.size();
    }
  }

  const std::vector<Location> locations = filter_locations(config, data);
  auto evaluate = [&](SweepCell& cell) {
    try {
      ExperimentConfig local = config;
      for (std::size_t a = 0; a < axes.size(); ++a) set_parameter(local, axes[a].parameter, cell.values[a]);
      Dataset d = data;
      if (std::find_if(axes.begin(), axes.end(), [](const SweepAxis& a) {
            return a.parameter == "noise.sigma";
          }) != axes.end()) {
        for (Record& r : d.records) r.noise_variance = local.noise.sigma * local.noise.sigma;
      }
      std::mt19937_64 rng = substream(config.seed, "optimizer");
      const SeparableKernel kernel = local.kernel();
      const GridFilter filter(local.make_realization(rng), LocationSet(locations, kernel.spatial()));
      const auto batches = group_batches(d, filter.locations());
      FilterState s = filter.initial_state(batches.empty() ? 0.0 : batches.front().t);
      for (const MeasurementBatch& b : batches) s = filter.update(s, b);
      cell.nll = s.nll;
      cell.ok = std::isfinite(s.nll);
      if (!cell.ok) cell.error = "non-finite nll";
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
  };

  unsigned workers = config.sweep.workers > 0 ? static_cast<unsigned>(config.sweep.workers)
                                              : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(total, 1)));
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t c; (c = next.fetch_add(1)) < total;) evaluate(cells[c]);
    });
  }
  for (std::thread& t : pool) t.join();
  return cells;
}

void cmd_generate(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  fs::create_directories(out);
  if (config.mode == Mode::Adaptive) {
    const GeneratedScenario g = generate_scenario(config);
    save_scenario(out / "scenario.csv", g.rows);
    std::ofstream f = open_out(out / "truth.csv");
    write_field_csv(f, g.candidates, g.times, g.field);
    log << "generate: " << g.rows.size() << " patrol visits over " << g.candidates.size()
        << " candidates\n";
  } else {
    const GeneratedData g = generate_dataset(config);
    save_dataset(out / "dataset.csv", g.dataset);
    std::ofstream f = open_out(out / "truth.csv");
    write_field_csv(f, g.locations, g.times, g.field);
    log << "generate: " << g.dataset.size() << " records at " << g.times.size() << " instants\n";
  }
  write_text(out / "run_metadata.json", to_json(config));
}

void cmd_run(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  fs::create_directories(out);
  write_text(out / "run_metadata.json", to_json(config));
  switch (config.mode) {
    case Mode::Filter: run_filter_mode(config, out, log); break;
    case Mode::Baseline: run_baseline_mode(config, out, log); break;
    case Mode::Adaptive: run_adaptive_mode(config, out, log); break;
    case Mode::Sweep: cmd_sweep(config, out, log); break;
  }
}

void cmd_sweep(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  fs::create_directories(out);
  if (config.sweep.axes.empty()) throw InputError("sweep: no axes configured");
  const Dataset data = input_dataset(config);
  data.validate();
  const auto start = Clock::now();
  const std::vector<SweepCell> cells = run_sweep(config, data);
  const double seconds = seconds_since(start);

  std::ofstream f = open_out(out / "sweep.csv");
  for (const SweepAxis& a : config.sweep.axes) f << a.parameter << ',';
  f << "nll,status\n";
  const SweepCell* best = nullptr;
  std::size_t failed = 0;
  for (const SweepCell& c : cells) {
    for (double v : c.values) f << format_double(v) << ',';
    if (c.ok) {
      f << format_double(c.nll) << ",ok\n";
      if (!best || c.nll < best->nll) best = &c;
    } else {
      ++failed;
      std::string msg = c.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      f << "nan,failed: " << msg << '\n';
    }
  }
  write_text(out / "run_metadata.json", to_json(config));
  log << "sweep: " << cells.size() << " cells (" << failed << " failed) in " << std::setprecision(4)
      << seconds << " s\n";
  if (best) {
    log << "minimum nll " << std::setprecision(10) << best->nll << " at";
    for (std::size_t a = 0; a < config.sweep.axes.size(); ++a) {
      log << ' ' << config.sweep.axes[a].parameter << '=' << best->values[a];
    }
    log << '\n';
  }
}

void cmd_approx_psd(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  fs::create_directories(out);
  const TemporalKernel target = config.kernel().temporal();
  std::vector<int> orders = config.realization.ladder;
  if (orders.empty()) {
    for (int r = 1; r <= config.realization.order; ++r) orders.push_back(r);
  }
  std::sort(orders.begin(), orders.end());
  orders.erase(std::unique(orders.begin(), orders.end()), orders.end());
  const std::vector<double> grid = default_frequency_grid(target, config.realization.grid_points,
                                                          config.realization.grid_lo,
                                                          config.realization.grid_hi);
  std::mt19937_64 rng = substream(config.seed, "optimizer");
  const auto start = Clock::now();
  const auto ladder = approximate_psd_ladder(target, orders, grid, rng, config.approximation_options());
  const double seconds = seconds_since(start);

  std::ofstream table = open_out(out / "psd_fit.csv");
  table << "order,objective,h0,h0_target,max_autocov_error,starts,evaluations\n";
  const double h0 = target(0.0);
  const double span = 5.0 * target.decay();
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    const TemporalRealization real = realize(ladder[i].factor);
    double err = 0.0;
    for (int j = 0; j <= 200; ++j) {
      const double tau = span * j / 200.0;
      err = std::max(err, std::abs(real.autocovariance(tau) - target(tau)));
    }
    table << orders[i] << ',' << format_double(ladder[i].objective) << ','
          << format_double(real.output_variance()) << ',' << format_double(h0) << ','
          << format_double(err) << ',' << ladder[i].starts << ',' << ladder[i].evaluations << '\n';
    write_text(out / ("factor_r" + std::to_string(orders[i]) + ".json"), factor_to_json(ladder[i].factor));
    log << "order " << orders[i] << ": objective " << std::setprecision(6) << ladder[i].objective
        << ", max |h_r - h| " << err << '\n';
  }
  log << "fitted " << ladder.size() << " orders in " << std::setprecision(4) << seconds << " s\n";
  write_text(out / "run_metadata.json", to_json(config));
}

void cmd_compare(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  fs::create_directories(out);
  const Dataset data = input_dataset(config);
  data.validate();
  if (data.empty()) throw InputError("compare: dataset is empty");
  const SeparableKernel kernel = config.kernel();
  const std::vector<Location> locations = filter_locations(config, data);
  const double t_end = data.times().back();
  const Vector ref = reference_mean(data, kernel, locations, t_end);

  std::ofstream table = open_out(out / "compare.csv");
  table << "method,parameter,fit_percent,seconds\n";
  auto report = [&](const std::string& method, int parameter, const Vector& estimate, double secs) {
    double fit = std::numeric_limits<double>::quiet_NaN();
    try {
      fit = fit_percent(estimate, ref);
    } catch (const UndefinedFitError& e) {
      warn(std::string("compare: ") + e.what());
    }
    table << method << ',' << parameter << ',' << format_double(fit) << ',' << format_double(secs) << '\n';
    log << std::left << std::setw(12) << method << std::setw(6) << parameter << std::fixed
        << std::setprecision(3) << fit << std::defaultfloat << '\n';
  };

  const LocationSet set(locations, kernel.spatial());
  const auto batches = group_batches(data, set);
  auto filter_estimate = [&](const TemporalRealization& real) {
    const GridFilter filter(real, set);
    FilterState s = filter.initial_state(batches.front().t);
    for (const MeasurementBatch& b : batches) s = filter.update(s, b);
    return filter.output(s).mean;
  };

  std::vector<int> orders = config.compare.orders;
  std::sort(orders.begin(), orders.end());
  orders.erase(std::unique(orders.begin(), orders.end()), orders.end());
  if (!orders.empty()) {
    const TemporalKernel target = kernel.temporal();
    const std::vector<double> grid = default_frequency_grid(target, config.realization.grid_points,
                                                            config.realization.grid_lo,
                                                            config.realization.grid_hi);
    std::vector<int> ladder_orders;
    for (int r = 1; r <= orders.back(); ++r) ladder_orders.push_back(r);
    std::mt19937_64 rng = substream(config.seed, "optimizer");
    const auto ladder =
        approximate_psd_ladder(target, ladder_orders, grid, rng, config.approximation_options());
    for (int r : orders) {
      const auto start = Clock::now();
      const Vector est = filter_estimate(realize(ladder[static_cast<std::size_t>(r - 1)].factor));
      report("filter", r, est, seconds_since(start));
    }
  }
  if (kernel.temporal().has_rational_psd()) {
    const auto start = Clock::now();
    const TemporalRealization real = realize_exact(kernel.temporal());
    const Vector est = filter_estimate(real);
    report("exact", real.order(), est, seconds_since(start));
  }
  const std::vector<double> times = data.times();
  for (int q : config.compare.buffers) {
    const auto start = Clock::now();
    const double t_lo = times[times.size() - std::min<std::size_t>(static_cast<std::size_t>(q), times.size())];
    Dataset window;
    for (const Record& r : data.records) {
      if (r.t >= t_lo) window.records.push_back(r);
    }
    const Vector est = reference_mean(window, kernel, locations, t_end);
    report("truncated", q, est, seconds_since(start));
  }
  write_text(out / "run_metadata.json", to_json(config));
}

}  // namespace stgp
