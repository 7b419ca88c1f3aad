#include "batchrl/mdp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "batchrl/errors.hpp"

namespace batchrl {

TimeFeature TimeFeature::advanced(int quarters) const {
  // zero-based arithmetic, then back to 1-based
  long q0 = quarter - 1 + static_cast<long>(quarters);
  long day_shift = q0 >= 0 ? q0 / kQuartersPerDay : -((-q0 + kQuartersPerDay - 1) / kQuartersPerDay);
  q0 -= day_shift * kQuartersPerDay;
  long d0 = ((day - 1 + day_shift) % kDaysPerWeek + kDaysPerWeek) % kDaysPerWeek;
  return TimeFeature{static_cast<int>(q0) + 1, static_cast<int>(d0) + 1};
}

bool TimeFeature::valid() const {
  return quarter >= 1 && quarter <= kQuartersPerDay && day >= 1 && day <= kDaysPerWeek;
}

Schema Schema::heat_pump() { return Schema{"heatpump", 2, 2}; }
Schema Schema::water_heater() { return Schema{"waterheater", 1, 0}; }

std::optional<Schema> known_schema(const std::string& name) {
  if (name == "heatpump") return Schema::heat_pump();
  if (name == "waterheater") return Schema::water_heater();
  return std::nullopt;
}

ActionSet::ActionSet(std::vector<double> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw std::invalid_argument("action set must not be empty");
  if (!std::is_sorted(levels_.begin(), levels_.end()) ||
      std::adjacent_find(levels_.begin(), levels_.end()) != levels_.end()) {
    throw std::invalid_argument("action levels must be strictly ascending");
  }
}

ActionSet ActionSet::heat_pump(double u_max_kw, int steps) {
  if (steps < 2) throw std::invalid_argument("heat pump needs at least two levels");
  std::vector<double> levels(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i) levels[i] = u_max_kw * i / (steps - 1);
  return ActionSet(std::move(levels));
}

ActionSet ActionSet::water_heater(double u_max_kw) { return ActionSet({0.0, u_max_kw}); }

bool ActionSet::contains(Action a, double tol) const {
  return std::any_of(levels_.begin(), levels_.end(),
                     [&](double l) { return std::abs(l - a.kw) <= tol; });
}

Action ActionSet::nearest(double kw) const {
  std::size_t best = 0;
  double best_dist = std::abs(levels_[0] - kw);
  for (std::size_t i = 1; i < levels_.size(); ++i) {
    double d = std::abs(levels_[i] - kw);
    if (d < best_dist) {
      best = i;
      best_dist = d;
    }
  }
  return Action{levels_[best]};
}

namespace {

void check_state(const State& s, const Schema& schema, const char* which) {
  if (s.schema != schema.name) {
    throw SchemaError(std::string(which) + " has schema '" + s.schema + "', batch expects '" +
                      schema.name + "'");
  }
  if (s.physical.size() != schema.physical_dim || s.exo.size() != schema.exo_dim) {
    throw SchemaError(std::string(which) + " dimensions do not match schema '" + schema.name + "'");
  }
  if (!s.time.valid()) throw SchemaError(std::string(which) + " has an invalid time feature");
}

}  // namespace

void Batch::append(Transition t) {
  check_state(t.x, schema_, "state");
  check_state(t.x_next, schema_, "next state");
  if (t.x_next.time != t.x.time.advanced()) {
    throw SchemaError("next state time must be one quarter after state time");
  }
  t.x.soc.reset();
  t.x_next.soc.reset();
  transitions_.push_back(std::move(t));
}

void Batch::append(const Batch& other) {
  if (other.schema_ != schema_) throw SchemaError("cannot merge batches with different schemas");
  transitions_.insert(transitions_.end(), other.transitions_.begin(), other.transitions_.end());
}

std::size_t feature_dim(const Schema& schema, const FeatureOptions& opts) {
  return (opts.include_quarter ? 1 : 0) + (opts.include_day ? 1 : 0) + schema.physical_dim +
         schema.exo_dim;
}

void append_features(const State& s, const FeatureOptions& opts, std::vector<double>& out) {
  if (opts.include_quarter) out.push_back(s.time.quarter);
  if (opts.include_day) out.push_back(s.time.day);
  out.insert(out.end(), s.physical.begin(), s.physical.end());
  out.insert(out.end(), s.exo.begin(), s.exo.end());
}

std::vector<double> features(const State& s, const FeatureOptions& opts) {
  std::vector<double> out;
  out.reserve(2 + s.physical.size() + s.exo.size());
  append_features(s, opts, out);
  return out;
}

double cost_dynamic(Action u_ph, double price, double dt_hours) {
  return u_ph.kw * price * dt_hours;
}

double cost_dayahead(Action planned, Action u_ph, double price, double dt_hours, double alpha) {
  return planned.kw * price * dt_hours + alpha * std::abs(planned.kw * dt_hours - u_ph.kw * dt_hours);
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (text.empty()) throw std::invalid_argument("empty numeric field");
  if (text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  }
  return v;
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

void write_state(std::ostream& out, const State& s) {
  out << s.time.quarter << ',' << s.time.day;
  for (double v : s.physical) out << ',' << format_double(v);
  for (double v : s.exo) out << ',' << format_double(v);
}

int parse_int_field(std::string_view f, std::size_t line) {
  double v = 0.0;
  try {
    v = parse_double(f);
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what(), line);
  }
  if (v != std::floor(v)) throw ParseError("expected an integer, got '" + std::string(f) + "'", line);
  return static_cast<int>(v);
}

State read_state(const std::vector<std::string_view>& f, std::size_t& pos, const Schema& schema,
                 std::size_t line) {
  State s;
  s.schema = schema.name;
  s.time.quarter = parse_int_field(f[pos++], line);
  s.time.day = parse_int_field(f[pos++], line);
  if (!s.time.valid()) throw ParseError("time feature out of range", line);
  auto read = [&](std::vector<double>& dst, std::size_t n) {
    dst.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      try {
        dst[i] = parse_double(f[pos++]);
      } catch (const std::invalid_argument& e) {
        throw ParseError(e.what(), line);
      }
    }
  };
  read(s.physical, schema.physical_dim);
  read(s.exo, schema.exo_dim);
  return s;
}

Schema parse_header(const std::string& header, std::size_t line) {
  std::string name;
  std::string version;
  std::optional<std::size_t> phys, exo;
  for (auto field : split_commas(header)) {
    auto eq = field.find('=');
    if (eq == std::string_view::npos) throw ParseError("malformed header field", line);
    auto key = field.substr(0, eq);
    auto val = std::string(field.substr(eq + 1));
    if (key == "schema") {
      name = val;
    } else if (key == "version") {
      version = val;
    } else if (key == "physical") {
      phys = static_cast<std::size_t>(parse_int_field(val, line));
    } else if (key == "exo") {
      exo = static_cast<std::size_t>(parse_int_field(val, line));
    } else {
      throw ParseError("unknown header key '" + std::string(key) + "'", line);
    }
  }
  if (name.empty()) throw ParseError("header lacks schema", line);
  if (version != "1") throw ParseError("unsupported batch version '" + version + "'", line);
  if (auto known = known_schema(name)) {
    if ((phys && *phys != known->physical_dim) || (exo && *exo != known->exo_dim)) {
      throw SchemaError("header dimensions contradict built-in schema '" + name + "'");
    }
    return *known;
  }
  if (!phys || !exo) throw ParseError("custom schema '" + name + "' needs physical= and exo=", line);
  return Schema{name, *phys, *exo};
}

}  // namespace

void save_batch(const Batch& batch, std::ostream& out) {
  const Schema& s = batch.schema();
  out << "schema=" << s.name << ",version=1";
  if (!known_schema(s.name)) out << ",physical=" << s.physical_dim << ",exo=" << s.exo_dim;
  out << '\n';
  for (const auto& t : batch.transitions()) {
    write_state(out, t.x);
    out << ',' << format_double(t.u.kw) << ',';
    write_state(out, t.x_next);
    out << ',' << format_double(t.u_ph.kw) << '\n';
  }
}

void save_batch(const Batch& batch, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  save_batch(batch, out);
}

Batch load_batch(std::istream& in, const std::optional<std::string>& expected) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("missing batch header", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  Schema schema = parse_header(line, line_no);
  if (expected && *expected != schema.name) {
    throw SchemaError("batch schema '" + schema.name + "' does not match expected '" + *expected + "'");
  }
  const std::size_t state_cols = 2 + schema.physical_dim + schema.exo_dim;
  const std::size_t cols = 2 * state_cols + 2;

  Batch batch(schema);
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto f = split_commas(line);
    if (f.size() != cols) {
      throw ParseError("expected " + std::to_string(cols) + " fields, got " + std::to_string(f.size()),
                       line_no);
    }
    std::size_t pos = 0;
    Transition t;
    t.x = read_state(f, pos, schema, line_no);
    try {
      t.u.kw = parse_double(f[pos++]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), line_no);
    }
    t.x_next = read_state(f, pos, schema, line_no);
    try {
      t.u_ph.kw = parse_double(f[pos++]);
    } catch (const std::invalid_argument& e) {
      throw ParseError(e.what(), line_no);
    }
    try {
      batch.append(std::move(t));
    } catch (const SchemaError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return batch;
}

Batch load_batch(const std::filesystem::path& path, const std::optional<std::string>& expected) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load_batch(in, expected);
}

}  // namespace batchrl
