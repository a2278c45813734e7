#include <string>

#include "doctest.h"
#include "stgp/config.hpp"
#include "stgp/error.hpp"

using namespace stgp;

namespace {

const char* kFull = R"({
  "version": 1,
  "seed": 42,
  "mode": "adaptive",
  "output": "runs/a",
  "kernel": {
    "spatial": {"family": "squared_exponential", "length_scale": 0.005, "amplitude": 1},
    "temporal": {"family": "periodic_exponential", "scale": 2, "decay": 3, "frequency": 0.1}
  },
  "realization": {"source": "approximate", "order": 4, "ladder": [2, 4], "weighting": "spectrum"},
  "locations": {"grid": {"lower": [0, 0], "upper": [1, 2], "count": [3, 2]}},
  "schedule": {"step": 0.5, "horizon": 3, "active": 2},
  "noise": {"sigma": 0.1, "relative": 0.05},
  "queries": {"points": [[0.5, 0.5]], "times": [1.25]},
  "adaptive": {"capacity": 4, "freeze_time": 2, "persistence": 0.5},
  "baseline": {"buffer": 3},
  "sweep": {"axes": [{"parameter": "temporal.decay", "values": [1, 2]}], "workers": 2},
  "compare": {"orders": [2, 4], "buffers": [1, 3]}
})";

int error_line(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ParseError& e) {
    return e.line();
  }
  return -1;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("every field is read") {
  const ExperimentConfig c = parse_config(kFull);
  CHECK(c.seed == 42);
  CHECK(c.mode == Mode::Adaptive);
  CHECK(c.spatial.length_scale == 0.005);
  CHECK(c.temporal.family == TemporalFamily::PeriodicExponential);
  CHECK(c.temporal.frequency == 0.1);
  CHECK(c.realization.approximate);
  CHECK(c.realization.ladder == std::vector<int>{2, 4});
  CHECK(c.realization.weighting == PsdWeighting::Spectrum);
  CHECK(c.location_list().size() == 6);
  CHECK(c.schedule.active == 2);
  CHECK(c.noise.relative == 0.05);
  CHECK(c.queries.times == std::vector<double>{1.25});
  REQUIRE(c.adaptive.freeze_time.has_value());
  CHECK(*c.adaptive.freeze_time == 2.0);
  CHECK(c.sweep.axes.size() == 1);
  CHECK(c.compare.buffers == std::vector<int>{1, 3});
  CHECK(c.sample_times() == std::vector<double>{0.5, 1.0, 1.5, 2.0, 2.5, 3.0});
}

TEST_CASE("canonical JSON round-trips") {
  const ExperimentConfig c = parse_config(kFull);
  const std::string once = to_json(c);
  const std::string twice = to_json(parse_config(once));
  CHECK(once == twice);
}

TEST_CASE("grid locations run over the first axis fastest") {
  const auto pts = parse_config(kFull).location_list();
  CHECK(pts[1](0) == 0.5);
  CHECK(pts[1](1) == 0.0);
  CHECK(pts[3](1) == 2.0);
}

TEST_CASE("strict parsing") {
  auto with = [](const std::string& from, const std::string& to) {
    std::string s = kFull;
    s.replace(s.find(from), from.size(), to);
    return s;
  };
  CHECK_THROWS_AS(parse_config(with("\"version\": 1", "\"version\": 2")), ParseError);
  CHECK_THROWS_AS(parse_config(with("\"buffer\": 3", "\"bufer\": 3")), ParseError);
  CHECK_THROWS_AS(parse_config(with("\"seed\": 42", "\"seed\": \"x\"")), ParseError);
  CHECK_THROWS_AS(parse_config(with("\"mode\": \"adaptive\"", "\"mode\": \"online\"")), ParseError);
  CHECK_THROWS_AS(parse_config(with("\"step\": 0.5", "\"step\": 0")), ParseError);
  CHECK_THROWS_AS(parse_config(with("\"temporal.decay\"", "\"temporal.lambda\"")), ParseError);
  CHECK(error_line(with("\"baseline\": {\"buffer\": 3},", "\"baseline\": {\"buffer\": 3,,")) == 16);
}

TEST_CASE("a Gaussian temporal kernel needs an approximate realization") {
  std::string s = kFull;
  const std::string from = "\"family\": \"periodic_exponential\"";
  s.replace(s.find(from), from.size(), "\"family\": \"squared_exponential\"");
  CHECK_NOTHROW(parse_config(s));
  const std::string src = "\"source\": \"approximate\"";
  s.replace(s.find(src), src.size(), "\"source\": \"exact\"");
  CHECK_THROWS_AS(parse_config(s), ParseError);
}

TEST_CASE("named substreams are reproducible and distinct") {
  auto a = substream(9, "sampling"), b = substream(9, "sampling"), c = substream(9, "optimizer"),
       d = substream(10, "sampling");
  const auto x = a();
  CHECK(x == b());
  CHECK(x != c());
  CHECK(x != d());
}

}
