#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace batchrl {

inline constexpr int kQuartersPerDay = 96;
inline constexpr int kDaysPerWeek = 7;
inline constexpr double kDtHours = 0.25;
inline constexpr double kDtSeconds = 900.0;

/// Quarter of the day (1..96) and day of the week (1..7).
struct TimeFeature {
  int quarter = 1;
  int day = 1;

  /// Advances by `quarters` control periods; crossing midnight rolls the
  /// day of week modulo 7.
  TimeFeature advanced(int quarters = 1) const;
  bool valid() const;

  bool operator==(const TimeFeature&) const = default;
};

/// Device schema: a name plus the length of the physical and exogenous parts
/// of the state. All states of one batch share a schema.
struct Schema {
  std::string name;
  std::size_t physical_dim = 0;
  std::size_t exo_dim = 0;

  /// (T_in, running mean of past T_in) physical; (T_out, solar) exogenous.
  static Schema heat_pump();
  /// Mean tank sensor temperature; no exogenous part.
  static Schema water_heater();

  bool operator==(const Schema&) const = default;
};

/// Returns the built-in schema with this name, if any.
std::optional<Schema> known_schema(const std::string& name);

struct State {
  TimeFeature time;
  std::vector<double> physical;
  std::vector<double> exo;
  std::string schema;
  // Water-heater state of charge as seen by the backup controller. Never
  // persisted and never part of the learner's features.
  std::optional<double> soc;

  bool operator==(const State&) const = default;
};

struct Action {
  double kw = 0.0;

  auto operator<=>(const Action&) const = default;
};

/// Discrete, ascending set of power levels a controller may request.
class ActionSet {
 public:
  ActionSet() = default;
  explicit ActionSet(std::vector<double> levels);

  /// {0, u_max/(steps-1), ..., u_max}; ten levels by default.
  static ActionSet heat_pump(double u_max_kw = 3.0, int steps = 10);
  /// {0, u_max}.
  static ActionSet water_heater(double u_max_kw = 2.3);

  std::span<const double> levels() const { return levels_; }
  std::size_t size() const { return levels_.size(); }
  Action operator[](std::size_t i) const { return Action{levels_[i]}; }
  double max_kw() const { return levels_.back(); }

  bool contains(Action a, double tol = 1e-12) const;
  /// Nearest legal level; an exact midpoint goes to the lower level.
  Action nearest(double kw) const;

  bool operator==(const ActionSet&) const = default;

 private:
  std::vector<double> levels_;
};

struct Transition {
  State x;
  Action u;
  State x_next;
  Action u_ph;

  bool operator==(const Transition&) const = default;
};

/// Append-only ordered list of transitions sharing one schema. Index order is
/// significant: the Monte Carlo planner breaks ties by lowest index.
class Batch {
 public:
  explicit Batch(Schema schema) : schema_(std::move(schema)) {}

  /// Validates dimensions and time advance, strips the backup-only soc
  /// reading, and appends.
  void append(Transition t);
  void append(const Batch& other);

  const Schema& schema() const { return schema_; }
  const std::vector<Transition>& transitions() const { return transitions_; }
  const Transition& operator[](std::size_t i) const { return transitions_[i]; }
  std::size_t size() const { return transitions_.size(); }
  bool empty() const { return transitions_.empty(); }

  bool operator==(const Batch&) const = default;

 private:
  Schema schema_;
  std::vector<Transition> transitions_;
};

/// Which state components feed the regressors.
struct FeatureOptions {
  bool include_quarter = true;
  bool include_day = false;

  bool operator==(const FeatureOptions&) const = default;
};

std::size_t feature_dim(const Schema& schema, const FeatureOptions& opts);
void append_features(const State& s, const FeatureOptions& opts, std::vector<double>& out);
std::vector<double> features(const State& s, const FeatureOptions& opts);

/// Dynamic-pricing cost of one control period: u_ph * price * dt.
double cost_dynamic(Action u_ph, double price, double dt_hours = kDtHours);

/// Day-ahead cost: planned energy at the day-ahead price plus alpha times the
/// absolute deviation between planned and realized energy.
double cost_dayahead(Action planned, Action u_ph, double price, double dt_hours, double alpha);

/// Shortest decimal text that parses back to the identical double.
std::string format_double(double v);
/// Strict full-string parse; throws std::invalid_argument on failure.
double parse_double(std::string_view text);

/// Batch file: header `schema=<name>,version=1`, then one CSV row per
/// transition: quarter,day,phys...,exo...,u,quarter',day',phys'...,exo'...,u_ph.
void save_batch(const Batch& batch, std::ostream& out);
void save_batch(const Batch& batch, const std::filesystem::path& path);

/// Throws ParseError (with line number) on malformed rows and SchemaError when
/// the header names a different schema than `expected`.
Batch load_batch(std::istream& in, const std::optional<std::string>& expected = std::nullopt);
Batch load_batch(const std::filesystem::path& path,
                 const std::optional<std::string>& expected = std::nullopt);

}  // namespace batchrl
