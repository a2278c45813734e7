#include "stgp/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "stgp/error.hpp"

namespace stgp {

namespace {

using json = nlohmann::json;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& cell, int line, const char* column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last) {
    throw ParseError(std::string("invalid number '") + cell + "' in column " + column, line);
  }
  return v;
}

/// Checks `t,x1..xd,y,sigma[,extra]` and returns d.
Eigen::Index parse_header(const std::string& line, bool with_flag) {
  const std::vector<std::string> cols = split(line);
  const std::size_t fixed = with_flag ? 4 : 3;
  if (cols.size() < fixed + 1 || cols.front() != "t") {
    throw ParseError(with_flag ? "scenario header must be t,x1[,x2,...],y,sigma,is_new"
                               : "dataset header must be t,x1[,x2,...],y,sigma",
                     1);
  }
  const std::size_t dim = cols.size() - fixed;
  for (std::size_t i = 0; i < dim; ++i) {
    if (cols[1 + i] != "x" + std::to_string(i + 1)) {
      throw ParseError("unexpected header column '" + cols[1 + i] + "'", 1);
    }
  }
  if (cols[1 + dim] != "y" || cols[2 + dim] != "sigma" || (with_flag && cols[3 + dim] != "is_new")) {
    throw ParseError("header must end with y,sigma" + std::string(with_flag ? ",is_new" : ""), 1);
  }
  return static_cast<Eigen::Index>(dim);
}

template <typename Row, typename Emit>
void read_rows(std::istream& in, bool with_flag, Emit emit) {
  std::string line;
  int number = 0;
  Eigen::Index dim = -1;
  double last_t = -std::numeric_limits<double>::infinity();
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    if (dim < 0) {
      if (number != 1) throw ParseError("header must be the first line", number);
      dim = parse_header(line, with_flag);
      continue;
    }
    const std::vector<std::string> cells = split(line);
    const std::size_t expected = static_cast<std::size_t>(dim) + (with_flag ? 4 : 3);
    if (cells.size() != expected) {
      throw ParseError("expected " + std::to_string(expected) + " columns, found " +
                           std::to_string(cells.size()),
                       number);
    }
    Row row;
    Record& r = row.record;
    r.t = parse_number(cells[0], number, "t");
    r.x.resize(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      r.x(i) = parse_number(cells[static_cast<std::size_t>(1 + i)], number, "x");
    }
    r.y = parse_number(cells[static_cast<std::size_t>(1 + dim)], number, "y");
    const double sigma = parse_number(cells[static_cast<std::size_t>(2 + dim)], number, "sigma");
    if (!std::isfinite(r.t) || !r.x.allFinite() || !std::isfinite(r.y)) {
      throw ParseError("non-finite value", number);
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      throw ParseError("sigma must be positive and finite", number);
    }
    if (r.t < last_t) throw ParseError("rows must be ordered by time", number);
    last_t = r.t;
    r.noise_variance = sigma * sigma;
    if (with_flag) {
      const std::string& flag = cells[static_cast<std::size_t>(3 + dim)];
      if (flag != "0" && flag != "1") throw ParseError("is_new must be 0 or 1", number);
      row.is_new = flag == "1";
    }
    emit(std::move(row));
  }
  if (dim < 0) throw ParseError("missing header", 1);
}

struct PlainRow {
  Record record;
  bool is_new = false;
};

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  return out;
}

void write_header(std::ostream& out, Eigen::Index dim, bool with_flag) {
  out << "t";
  for (Eigen::Index i = 0; i < dim; ++i) out << ",x" << (i + 1);
  out << ",y,sigma" << (with_flag ? ",is_new" : "") << '\n';
}

void write_record(std::ostream& out, const Record& r) {
  out << format_double(r.t);
  for (Eigen::Index i = 0; i < r.x.size(); ++i) out << ',' << format_double(r.x(i));
  out << ',' << format_double(r.y) << ',' << format_double(std::sqrt(r.noise_variance));
}

json to_array(const Vector& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json locations_array(const std::vector<Location>& xs) {
  json a = json::array();
  for (const Location& x : xs) a.push_back(to_array(x));
  return a;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Dataset read_dataset_csv(std::istream& in) {
  Dataset out;
  read_rows<PlainRow>(in, false, [&](PlainRow&& row) { out.records.push_back(std::move(row.record)); });
  return out;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  return read_dataset_csv(in);
}

void write_dataset_csv(std::ostream& out, const Dataset& data) {
  const Eigen::Index dim = data.empty() ? 1 : data.records.front().x.size();
  write_header(out, dim, false);
  for (const Record& r : data.records) {
    write_record(out, r);
    out << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out = open_output(path);
  write_dataset_csv(out, data);
}

std::vector<ScenarioRow> read_scenario_csv(std::istream& in) {
  std::vector<ScenarioRow> out;
  read_rows<PlainRow>(in, true, [&](PlainRow&& row) {
    out.push_back({std::move(row.record), row.is_new});
  });
  return out;
}

std::vector<ScenarioRow> load_scenario(const std::filesystem::path& path) {
  std::ifstream in = open_input(path);
  return read_scenario_csv(in);
}

void write_scenario_csv(std::ostream& out, const std::vector<ScenarioRow>& rows) {
  const Eigen::Index dim = rows.empty() ? 1 : rows.front().record.x.size();
  write_header(out, dim, true);
  for (const ScenarioRow& row : rows) {
    write_record(out, row.record);
    out << ',' << (row.is_new ? 1 : 0) << '\n';
  }
}

void save_scenario(const std::filesystem::path& path, const std::vector<ScenarioRow>& rows) {
  std::ofstream out = open_output(path);
  write_scenario_csv(out, rows);
}

std::vector<AdaptiveBatch> scenario_batches(const std::vector<ScenarioRow>& rows) {
  std::vector<AdaptiveBatch> out;
  for (const ScenarioRow& row : rows) {
    if (out.empty() || out.back().t != row.record.t) out.push_back({row.record.t, {}});
    out.back().visits.push_back({row.record.x, row.record.y, row.record.noise_variance});
  }
  return out;
}

std::vector<MeasurementBatch> group_batches(const Dataset& data, const LocationSet& set) {
  std::vector<MeasurementBatch> out;
  std::size_t i = 0;
  while (i < data.records.size()) {
    const double t = data.records[i].t;
    std::vector<std::pair<Eigen::Index, std::size_t>> members;
    for (; i < data.records.size() && data.records[i].t == t; ++i) {
      const Eigen::Index idx = set.find(data.records[i].x);
      if (idx < 0) throw InputError("dataset record at t=" + format_double(t) + " is off the location set");
      members.emplace_back(idx, i);
    }
    std::sort(members.begin(), members.end());
    MeasurementBatch b;
    b.t = t;
    b.values.resize(static_cast<Eigen::Index>(members.size()));
    b.noise_variances.resize(static_cast<Eigen::Index>(members.size()));
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (k > 0 && members[k].first == members[k - 1].first) {
        throw InputError("dataset measures one location twice at t=" + format_double(t));
      }
      const Record& r = data.records[members[k].second];
      b.indices.push_back(members[k].first);
      b.values(static_cast<Eigen::Index>(k)) = r.y;
      b.noise_variances(static_cast<Eigen::Index>(k)) = r.noise_variance;
    }
    out.push_back(std::move(b));
  }
  return out;
}

void write_field_csv(std::ostream& out, const std::vector<Location>& locations,
                     const std::vector<double>& times, const Matrix& field) {
  const Eigen::Index dim = locations.empty() ? 1 : locations.front().size();
  out << "t";
  for (Eigen::Index i = 0; i < dim; ++i) out << ",x" << (i + 1);
  out << ",f\n";
  for (std::size_t k = 0; k < times.size(); ++k) {
    for (std::size_t i = 0; i < locations.size(); ++i) {
      out << format_double(times[k]);
      for (Eigen::Index d = 0; d < dim; ++d) out << ',' << format_double(locations[i](d));
      out << ',' << format_double(field(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)))
          << '\n';
    }
  }
}

void write_trajectory_jsonl(std::ostream& out, const std::vector<TrajectoryPoint>& points) {
  for (const TrajectoryPoint& p : points) {
    json j;
    j["t"] = p.t;
    j["f"] = to_array(p.mean);
    j["var"] = to_array(p.cov.diagonal());
    j["nll"] = p.nll;
    j["at_batch"] = p.at_batch;
    if (p.query_mean.size() > 0) {
      j["query_f"] = to_array(p.query_mean);
      j["query_var"] = to_array(p.query_var);
    }
    out << j.dump() << '\n';
  }
}

void write_adaptive_jsonl(std::ostream& out, const std::vector<AdaptiveTracePoint>& points) {
  for (const AdaptiveTracePoint& p : points) {
    json j;
    j["t"] = p.t;
    j["locations"] = locations_array(p.locations);
    j["f"] = to_array(p.f);
    j["var"] = to_array(p.sigma_f.diagonal());
    j["nll"] = p.nll;
    j["added"] = locations_array(p.added);
    j["dropped"] = locations_array(p.dropped);
    out << j.dump() << '\n';
  }
}

void write_truncated_jsonl(std::ostream& out, const std::vector<TruncatedStep>& steps) {
  for (const TruncatedStep& s : steps) {
    json j;
    j["t"] = s.t;
    j["f"] = to_array(s.mean);
    j["var"] = to_array(s.variance);
    out << j.dump() << '\n';
  }
}

std::string factor_to_json(const SpectralFactor& factor) {
  json j;
  j["numerator"] = to_array(factor.numerator);
  j["denominator"] = to_array(factor.denominator);
  return j.dump(2);
}

SpectralFactor factor_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("spectral factor JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("numerator") || !j.contains("denominator") || j.size() != 2) {
    throw ParseError("spectral factor JSON needs exactly 'numerator' and 'denominator'");
  }
  auto read = [](const json& a, const char* name) {
    if (!a.is_array()) throw ParseError(std::string("spectral factor: '") + name + "' must be an array");
    Vector v(static_cast<Eigen::Index>(a.size()));
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!a[i].is_number()) throw ParseError(std::string("spectral factor: non-numeric ") + name);
      v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
    }
    return v;
  };
  SpectralFactor f{read(j["numerator"], "numerator"), read(j["denominator"], "denominator")};
  if (f.numerator.size() != f.denominator.size() || f.order() < 1) {
    throw ParseError("spectral factor: numerator and denominator need the same nonzero length");
  }
  return f;
}

}  // namespace stgp
