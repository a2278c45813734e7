#include "stgp/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include "json.hpp"
#include "stgp/error.hpp"

namespace stgp {

namespace {

using json = nlohmann::json;

/// Key-checked view of one JSON object; every lookup is recorded so that
/// leftover keys can be rejected.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("must be an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json* get(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  Section child(const char* key) {
    const json* v = get(key);
    static const json empty = json::object();
    return Section(v ? *v : empty, name(key));
  }

  double number(const char* key, double fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number()) fail(key, "must be a number");
    return v->get<double>();
  }

  int integer(const char* key, int fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_number_integer()) fail(key, "must be an integer");
    return v->get<int>();
  }

  std::string text(const char* key, const std::string& fallback) {
    const json* v = get(key);
    if (!v) return fallback;
    if (!v->is_string()) fail(key, "must be a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(const char* key) {
    std::vector<double> out;
    const json* v = get(key);
    if (!v) return out;
    if (!v->is_array()) fail(key, "must be an array of numbers");
    for (const json& e : *v) {
      if (!e.is_number()) fail(key, "must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<int> integers(const char* key) {
    std::vector<int> out;
    const json* v = get(key);
    if (!v) return out;
    if (!v->is_array()) fail(key, "must be an array of integers");
    for (const json& e : *v) {
      if (!e.is_number_integer()) fail(key, "must be an array of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }

  std::vector<Location> points(const char* key) {
    std::vector<Location> out;
    const json* v = get(key);
    if (!v) return out;
    if (!v->is_array()) fail(key, "must be an array of coordinate arrays");
    for (const json& p : *v) {
      if (!p.is_array() || p.empty()) fail(key, "must be an array of coordinate arrays");
      Location x(static_cast<Eigen::Index>(p.size()));
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (!p[i].is_number()) fail(key, "coordinates must be numbers");
        x(static_cast<Eigen::Index>(i)) = p[i].get<double>();
      }
      out.push_back(std::move(x));
    }
    return out;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(it.key(), "is not a recognized key");
    }
  }

  [[noreturn]] void fail(const std::string& what) const { throw ParseError("config: " + path_ + " " + what); }
  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ParseError("config: " + name(key) + " " + what);
  }

 private:
  std::string name(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ParseError("config: " + what);
}

int line_of(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) line += text[i] == '\n';
  return line;
}

PsdWeighting parse_weighting(const std::string& s) {
  if (s == "uniform") return PsdWeighting::Uniform;
  if (s == "spectrum") return PsdWeighting::Spectrum;
  throw ParseError("config: realization.weighting must be 'uniform' or 'spectrum'");
}

std::string_view weighting_name(PsdWeighting w) {
  return w == PsdWeighting::Uniform ? "uniform" : "spectrum";
}

json points_json(const std::vector<Location>& xs) {
  json a = json::array();
  for (const Location& x : xs) {
    json p = json::array();
    for (Eigen::Index i = 0; i < x.size(); ++i) p.push_back(x(i));
    a.push_back(p);
  }
  return a;
}

void validate(const ExperimentConfig& c) {
  require(c.spatial.length_scale > 0.0 && std::isfinite(c.spatial.length_scale),
          "spatial.length_scale must be positive");
  require(c.spatial.amplitude > 0.0, "spatial.amplitude must be positive");
  require(c.temporal.scale >= 0.0 && std::isfinite(c.temporal.scale),
          "temporal.scale must be nonnegative");
  require(c.temporal.decay > 0.0 && std::isfinite(c.temporal.decay),
          "temporal.decay must be positive");
  require(c.temporal.frequency >= 0.0, "temporal.frequency must be nonnegative");
  require(c.realization.order >= 1, "realization.order must be at least 1");
  for (int r : c.realization.ladder) require(r >= 1, "realization.ladder orders must be positive");
  require(c.realization.grid_points >= 2, "realization.grid_points must be at least 2");
  require(c.realization.grid_lo > 0.0 && c.realization.grid_hi > c.realization.grid_lo,
          "realization grid needs 0 < grid_lo < grid_hi");
  require(c.realization.restarts >= 0, "realization.restarts must be nonnegative");
  require(c.realization.max_evaluations >= 1, "realization.max_evaluations must be positive");
  require(c.approximate_or_rational(), "temporal kernel has no exact realization; set "
                                        "realization.source to 'approximate'");

  const LocationSpec& l = c.locations;
  if (l.points.empty()) {
    require(!l.count.empty(), "locations needs 'points' or a 'grid'");
    require(l.lower.size() == l.count.size() && l.upper.size() == l.count.size(),
            "locations.grid lower, upper and count must have the same length");
    for (int n : l.count) require(n >= 1, "locations.grid.count entries must be positive");
  } else {
    require(l.count.empty(), "locations takes either 'points' or 'grid', not both");
    for (const Location& x : l.points) {
      require(x.size() == l.points.front().size(), "locations.points must share one dimension");
    }
  }
  require(c.schedule.step > 0.0, "schedule.step must be positive");
  require(c.schedule.horizon >= 0.0, "schedule.horizon must be nonnegative");
  require(c.schedule.active >= 0, "schedule.active must be nonnegative");
  require(c.noise.sigma >= 0.0 && c.noise.relative >= 0.0, "noise terms must be nonnegative");
  require(c.noise.sigma > 0.0 || c.noise.relative > 0.0, "noise must have a positive component");
  require(c.adaptive.capacity >= 1, "adaptive.capacity must be at least 1");
  require(c.adaptive.persistence >= 0.0 && c.adaptive.persistence <= 1.0,
          "adaptive.persistence must lie in [0, 1]");
  require(c.baseline.buffer >= 1, "baseline.buffer must be at least 1");
  static const std::set<std::string> sweepable = {"spatial.length_scale", "temporal.scale",
                                                  "temporal.decay", "temporal.frequency",
                                                  "noise.sigma"};
  for (const SweepAxis& a : c.sweep.axes) {
    require(sweepable.count(a.parameter) == 1, "sweep parameter '" + a.parameter + "' is not sweepable");
    require(!a.values.empty(), "sweep axis '" + a.parameter + "' has no values");
  }
  require(c.sweep.workers >= 0, "sweep.workers must be nonnegative");
  for (int r : c.compare.orders) require(r >= 1, "compare.orders must be positive");
  for (int q : c.compare.buffers) require(q >= 1, "compare.buffers must be positive");
}

}  // namespace

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Filter: return "filter";
    case Mode::Adaptive: return "adaptive";
    case Mode::Baseline: return "baseline";
    case Mode::Sweep: return "sweep";
  }
  return "?";
}

Mode parse_mode(std::string_view name) {
  if (name == "filter") return Mode::Filter;
  if (name == "adaptive") return Mode::Adaptive;
  if (name == "baseline") return Mode::Baseline;
  if (name == "sweep") return Mode::Sweep;
  throw ParseError("unknown mode '" + std::string(name) + "'");
}

bool ExperimentConfig::approximate_or_rational() const {
  return realization.approximate || temporal.family != TemporalFamily::SquaredExponential;
}

SeparableKernel ExperimentConfig::kernel() const {
  SpatialKernel s(spatial.family, spatial.length_scale, spatial.amplitude);
  switch (temporal.family) {
    case TemporalFamily::Exponential:
      return {s, TemporalKernel::exponential(temporal.scale, temporal.decay)};
    case TemporalFamily::PeriodicExponential:
      return {s, TemporalKernel::periodic_exponential(temporal.scale, temporal.decay,
                                                      temporal.frequency)};
    case TemporalFamily::SquaredExponential:
      return {s, TemporalKernel::squared_exponential(temporal.scale, temporal.decay)};
  }
  throw InputError("unknown temporal family");
}

std::vector<Location> ExperimentConfig::location_list() const {
  if (!locations.points.empty()) return locations.points;
  const std::size_t dim = locations.count.size();
  std::vector<Location> out;
  std::vector<int> idx(dim, 0);
  for (;;) {
    Location x(static_cast<Eigen::Index>(dim));
    for (std::size_t d = 0; d < dim; ++d) {
      const int n = locations.count[d];
      const double frac = n > 1 ? static_cast<double>(idx[d]) / (n - 1) : 0.0;
      x(static_cast<Eigen::Index>(d)) = locations.lower[d] + frac * (locations.upper[d] - locations.lower[d]);
    }
    out.push_back(std::move(x));
    std::size_t d = 0;
    for (; d < dim; ++d) {
      if (++idx[d] < locations.count[d]) break;
      idx[d] = 0;
    }
    if (d == dim) break;
  }
  return out;
}

std::vector<double> ExperimentConfig::sample_times() const {
  const auto n = static_cast<long>(std::floor(schedule.horizon / schedule.step * (1.0 + 1e-12)));
  std::vector<double> out;
  for (long k = 1; k <= n; ++k) out.push_back(schedule.step * static_cast<double>(k));
  return out;
}

PsdApproximationOptions ExperimentConfig::approximation_options() const {
  PsdApproximationOptions o;
  o.weighting = realization.weighting;
  o.restarts = realization.restarts;
  o.max_evaluations = realization.max_evaluations;
  return o;
}

TemporalRealization ExperimentConfig::make_realization(std::mt19937_64& rng) const {
  const TemporalKernel target = kernel().temporal();
  if (!realization.approximate) return realize_exact(target);
  const std::vector<double> grid = default_frequency_grid(target, realization.grid_points,
                                                          realization.grid_lo, realization.grid_hi);
  std::vector<int> orders;
  for (int r = 1; r <= realization.order; ++r) orders.push_back(r);
  const auto ladder = approximate_psd_ladder(target, orders, grid, rng, approximation_options());
  return realize(ladder.back().factor);
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: malformed JSON: ") + e.what(),
                     e.byte > 0 ? line_of(text, e.byte - 1) : 0);
  }
  ExperimentConfig c;
  Section root(j, "");
  require(root.has("version"), "missing 'version'");
  c.version = root.integer("version", 0);
  require(c.version == kConfigVersion, "unsupported version " + std::to_string(c.version));
  {
    const json* seed = root.get("seed");
    if (seed) {
      if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<long long>() >= 0)) {
        root.fail("seed", "must be a nonnegative integer");
      }
      c.seed = seed->get<std::uint64_t>();
    }
  }
  c.mode = parse_mode(root.text("mode", "filter"));
  c.output = root.text("output", c.output);

  {
    Section kernel = root.child("kernel");
    Section s = kernel.child("spatial");
    try {
      c.spatial.family = parse_spatial_family(s.text("family", "squared_exponential"));
    } catch (const InputError& e) {
      throw ParseError(std::string("config: ") + e.what());
    }
    c.spatial.length_scale = s.number("length_scale", c.spatial.length_scale);
    c.spatial.amplitude = s.number("amplitude", c.spatial.amplitude);
    s.finish();
    Section t = kernel.child("temporal");
    try {
      c.temporal.family = parse_temporal_family(t.text("family", "exponential"));
    } catch (const InputError& e) {
      throw ParseError(std::string("config: ") + e.what());
    }
    c.temporal.scale = t.number("scale", c.temporal.scale);
    c.temporal.decay = t.number("decay", c.temporal.decay);
    c.temporal.frequency = t.number("frequency", c.temporal.frequency);
    t.finish();
    kernel.finish();
  }
  {
    Section r = root.child("realization");
    const std::string source = r.text("source", "exact");
    require(source == "exact" || source == "approximate",
            "realization.source must be 'exact' or 'approximate'");
    c.realization.approximate = source == "approximate";
    c.realization.order = r.integer("order", c.realization.order);
    c.realization.ladder = r.integers("ladder");
    c.realization.grid_points = r.integer("grid_points", c.realization.grid_points);
    c.realization.grid_lo = r.number("grid_lo", c.realization.grid_lo);
    c.realization.grid_hi = r.number("grid_hi", c.realization.grid_hi);
    c.realization.restarts = r.integer("restarts", c.realization.restarts);
    c.realization.max_evaluations = r.integer("max_evaluations", c.realization.max_evaluations);
    c.realization.weighting = parse_weighting(r.text("weighting", "uniform"));
    r.finish();
  }
  {
    Section l = root.child("locations");
    c.locations.points = l.points("points");
    if (l.has("grid")) {
      Section g = l.child("grid");
      c.locations.lower = g.numbers("lower");
      c.locations.upper = g.numbers("upper");
      c.locations.count = g.integers("count");
      g.finish();
    } else {
      l.get("grid");
    }
    l.finish();
  }
  {
    Section s = root.child("schedule");
    c.schedule.step = s.number("step", c.schedule.step);
    c.schedule.horizon = s.number("horizon", c.schedule.horizon);
    c.schedule.active = s.integer("active", c.schedule.active);
    s.finish();
  }
  {
    Section n = root.child("noise");
    c.noise.sigma = n.number("sigma", c.noise.sigma);
    c.noise.relative = n.number("relative", c.noise.relative);
    n.finish();
  }
  {
    Section q = root.child("queries");
    c.queries.points = q.points("points");
    c.queries.times = q.numbers("times");
    q.finish();
  }
  {
    Section a = root.child("adaptive");
    c.adaptive.capacity = a.integer("capacity", c.adaptive.capacity);
    const json* freeze = a.get("freeze_time");
    if (freeze && !freeze->is_null()) {
      if (!freeze->is_number()) a.fail("freeze_time", "must be a number or null");
      c.adaptive.freeze_time = freeze->get<double>();
    }
    c.adaptive.persistence = a.number("persistence", c.adaptive.persistence);
    a.finish();
  }
  {
    Section b = root.child("baseline");
    c.baseline.buffer = b.integer("buffer", c.baseline.buffer);
    b.finish();
  }
  {
    Section s = root.child("sweep");
    c.sweep.workers = s.integer("workers", c.sweep.workers);
    const json* axes = s.get("axes");
    if (axes) {
      if (!axes->is_array()) s.fail("axes", "must be an array");
      for (std::size_t i = 0; i < axes->size(); ++i) {
        Section a((*axes)[i], "sweep.axes[" + std::to_string(i) + "]");
        SweepAxis axis;
        axis.parameter = a.text("parameter", "");
        axis.values = a.numbers("values");
        a.finish();
        c.sweep.axes.push_back(std::move(axis));
      }
    }
    s.finish();
  }
  {
    Section s = root.child("compare");
    c.compare.orders = s.integers("orders");
    c.compare.buffers = s.integers("buffers");
    s.finish();
  }
  {
    Section d = root.child("data");
    c.data.dataset = d.text("dataset", "");
    c.data.scenario = d.text("scenario", "");
    d.finish();
  }
  root.finish();
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("config: cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string to_json(const ExperimentConfig& c) {
  json j;
  j["version"] = c.version;
  j["seed"] = c.seed;
  j["mode"] = std::string(to_string(c.mode));
  j["output"] = c.output;
  j["kernel"]["spatial"] = {{"family", std::string(to_string(c.spatial.family))},
                            {"length_scale", c.spatial.length_scale},
                            {"amplitude", c.spatial.amplitude}};
  j["kernel"]["temporal"] = {{"family", std::string(to_string(c.temporal.family))},
                             {"scale", c.temporal.scale},
                             {"decay", c.temporal.decay},
                             {"frequency", c.temporal.frequency}};
  j["realization"] = {{"source", c.realization.approximate ? "approximate" : "exact"},
                      {"order", c.realization.order},
                      {"ladder", c.realization.ladder},
                      {"grid_points", c.realization.grid_points},
                      {"grid_lo", c.realization.grid_lo},
                      {"grid_hi", c.realization.grid_hi},
                      {"restarts", c.realization.restarts},
                      {"max_evaluations", c.realization.max_evaluations},
                      {"weighting", std::string(weighting_name(c.realization.weighting))}};
  if (!c.locations.points.empty()) {
    j["locations"]["points"] = points_json(c.locations.points);
  } else {
    j["locations"]["grid"] = {{"lower", c.locations.lower},
                              {"upper", c.locations.upper},
                              {"count", c.locations.count}};
  }
  j["schedule"] = {{"step", c.schedule.step},
                   {"horizon", c.schedule.horizon},
                   {"active", c.schedule.active}};
  j["noise"] = {{"sigma", c.noise.sigma}, {"relative", c.noise.relative}};
  j["queries"] = {{"points", points_json(c.queries.points)}, {"times", c.queries.times}};
  j["adaptive"] = {{"capacity", c.adaptive.capacity},
                   {"freeze_time", c.adaptive.freeze_time ? json(*c.adaptive.freeze_time) : json()},
                   {"persistence", c.adaptive.persistence}};
  j["baseline"] = {{"buffer", c.baseline.buffer}};
  json axes = json::array();
  for (const SweepAxis& a : c.sweep.axes) axes.push_back({{"parameter", a.parameter}, {"values", a.values}});
  j["sweep"] = {{"axes", axes}, {"workers", c.sweep.workers}};
  j["compare"] = {{"orders", c.compare.orders}, {"buffers", c.compare.buffers}};
  j["data"] = {{"dataset", c.data.dataset}, {"scenario", c.data.scenario}};
  return j.dump(2);
}

std::mt19937_64 substream(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (const unsigned char ch : name) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace stgp
