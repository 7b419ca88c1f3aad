#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "batchrl/baselines.hpp"
#include "batchrl/devices.hpp"
#include "batchrl/exogenous.hpp"
#include "batchrl/fqi.hpp"
#include "batchrl/mfmc.hpp"
#include "batchrl/policy_adjust.hpp"

namespace batchrl {

enum class ExperimentKind { kSimulate, kExp1, kExp2, kExp3 };

struct PriceSource {
  std::string source = "wholesale";  // wholesale | sinusoid | csv
  std::string path;
  double mean = 0.10;                // sinusoid
  double amplitude = 0.05;           // sinusoid
  double noise_sd = 0.0;             // sinusoid
  WholesalePriceParams wholesale;
};

struct WeatherSource {
  std::string source = "synthetic";  // synthetic | csv
  std::string path;
  WeatherParams params;
};

struct ForecastSettings {
  std::string mode = "perfect";  // perfect | noisy
  double t_out_sd = 1.0;         // noisy: additive error on T_out, degC
  double solar_rel_sd = 0.2;     // noisy: relative error on irradiance
};

struct FqiSettings {
  std::string variant = "both";  // both | standard | extended
  ForestParams forest{25, 0, 10};
  FeatureOptions features;
};

struct WaterHeaterSettings {
  WaterHeaterConfig device;
  double mean_draw_l_per_day = 120.0;
  double event_mean_l = 10.0;
};

struct PolicyAdjustSettings {
  bool enabled = true;
  int n_g = 11;
  std::string monotone = "1:-1";  // dim:sign over (quarter, physical...)
};

struct MfmcSettings {
  int p = 4;
  double xi = 1e-3;
  double alpha = 1e3;
};

struct DpSettings {
  DpOptions options;
  int lookahead_days = 2;  // exp1 optimal arm plans this many days, executes the first
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kExp1;
  std::string device = "heatpump";  // heatpump | waterheater
  int days = 30;
  std::uint64_t seed = 1;
  std::string output_dir;
  std::string thermal_preset = "high";  // high | low
  std::string controller = "random";    // simulate: random | default
  HouseConfig house;
  WaterHeaterSettings water_heater;
  PriceSource price;
  WeatherSource weather;
  ForecastSettings forecast;
  FqiSettings fqi;
  double eps0 = 1.0;
  double hysteresis_on_below = 19.0;
  double hysteresis_off_at = 20.0;
  PolicyAdjustSettings policy_adjust;
  MfmcSettings mfmc;
  DpSettings dp;

  /// Throws ConfigError on any inconsistency, including missing input files.
  void validate() const;
};

/// Defaults appropriate for each experiment (device, price source, ...).
ExperimentConfig default_config(ExperimentKind kind);
/// Applies a JSON document on top of the defaults of `kind`. Unknown keys
/// and wrongly typed values raise ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentKind kind);
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentKind kind);

struct Exp1Day {
  int day = 0;
  double c_default = 0, c_optimal = 0, c_standard = 0, c_extended = 0;
  std::optional<double> m_standard, m_extended;
};
struct Exp1Result {
  std::vector<Exp1Day> days;
  double cum_default = 0, cum_optimal = 0, cum_standard = 0, cum_extended = 0;
  /// Mean daily M over days where it is defined (NaN if none).
  double mean_m_standard = 0, mean_m_extended = 0;
  std::vector<std::string> files;
};

struct Exp2Snapshot {
  int day = 0;
  double mean_abs_difference = 0;  // |original - adjusted| over the policy grid, kW
  double max_violation = 0;        // monotonicity of the adjusted weights
  FuzzyPolicy adjusted;
};
struct Exp2Result {
  std::vector<double> cost_original, cost_adjusted;  // daily
  double cum_original = 0, cum_adjusted = 0;
  std::vector<Exp2Snapshot> snapshots;
  std::optional<FuzzyPolicy> last_adjusted;
  std::vector<int> directions;
  std::vector<std::string> files;
};

struct Exp3Day {
  int day = 0;
  bool exploration = false;
  double c_mfmc = 0, c_oc = 0, deviation_kwh = 0, energy_kwh = 0;
  std::optional<double> m_ratio;
};
/// Everything needed to replay one planning day: the batch at that time is
/// the first `batch_size` tuples of Exp3Result::batch.
struct Exp3Planning {
  int day = 0;
  std::size_t batch_size = 0;
  State x1;
  std::optional<Forecast> forecast;  // set when the extended variant planned
  MfmcConfig config;
  MfmcResult result;
};

struct Exp3Result {
  std::vector<Exp3Day> days;
  std::vector<Exp3Planning> planning;  // one per planning (non-exploration) day
  Batch batch{Schema::heat_pump()};    // every tuple logged during the run
  std::vector<std::string> files;
};

struct SimulateResult {
  Batch batch{Schema::heat_pump()};
  double cost = 0;
  std::vector<std::string> files;
};

/// Runs the configured device for cfg.days under random or default control
/// and writes the logged batch plus the exogenous series.
SimulateResult run_simulate(const ExperimentConfig& cfg);
/// Heat pump: default, optimal, standard-FQI and extended-FQI arms on shared
/// weather, prices and exploration draws.
Exp1Result run_experiment1(const ExperimentConfig& cfg);
/// Water heater: FQI policy with and without monotone adjustment.
Exp2Result run_experiment2(const ExperimentConfig& cfg);
/// Heat pump day-ahead planning with the Monte Carlo planner.
Exp3Result run_experiment3(const ExperimentConfig& cfg);

/// Synthetic or file-backed exogenous inputs for `days` days.
WeatherSeries make_weather(const ExperimentConfig& cfg, int days);
PriceSeries make_prices(const ExperimentConfig& cfg, int days);
/// Forecast of day `day` (0-based) under the configured forecast mode.
Forecast make_forecast(const ExperimentConfig& cfg, const WeatherSeries& w, int day);

}  // namespace batchrl
