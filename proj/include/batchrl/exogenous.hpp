#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <random>
#include <span>
#include <variant>
#include <vector>

#include "batchrl/mdp.hpp"

namespace batchrl {

using Rng = std::mt19937_64;

/// Electricity price per quarter in EUR/kWh. Length is a multiple of 96.
struct PriceSeries {
  std::vector<double> values;

  int days() const { return static_cast<int>(values.size()) / kQuartersPerDay; }
  /// The 96 prices of day `d` (0-based).
  std::span<const double> day(int d) const;
  void validate() const;
};

/// Per-quarter weather. Internal gains are simulator-only.
struct WeatherSeries {
  std::vector<double> t_out;           // degC
  std::vector<double> solar;           // W/m2
  std::vector<double> internal_gains;  // W

  std::size_t size() const { return t_out.size(); }
  int days() const { return static_cast<int>(size()) / kQuartersPerDay; }
  void validate() const;
};

/// Exogenous forecast for the next 96 quarters, index 0 = quarter 1.
struct Forecast {
  std::vector<double> t_out_hat;
  std::vector<double> solar_hat;

  /// (T_out, solar) forecast for a 1-based quarter of day.
  std::vector<double> exo_at(int quarter) const;
  void validate() const;
};

enum class CsvKind { kPrice, kWeather };

/// prices: `quarter_index,price_eur_per_kwh`
/// weather: `quarter_index,t_out_c,solar_wm2,internal_gain_w`
/// One row per quarter after the header; row count must be a multiple of 96.
PriceSeries load_price_csv(std::istream& in);
PriceSeries load_price_csv(const std::filesystem::path& path);
WeatherSeries load_weather_csv(std::istream& in);
WeatherSeries load_weather_csv(const std::filesystem::path& path);
std::variant<PriceSeries, WeatherSeries> load_csv(const std::filesystem::path& path, CsvKind kind);

void save_price_csv(const PriceSeries& p, std::ostream& out);
void save_weather_csv(const WeatherSeries& w, std::ostream& out);

/// lambda_k = mean + amplitude * sin(2 pi k / 96) (+ optional Gaussian noise).
PriceSeries synth_price_sinusoid(int days, double mean, double amplitude, std::uint64_t seed,
                                 double noise_sd = 0.0);

/// Wholesale-like profile: night trough, morning and evening peaks, a random
/// day level and per-quarter noise, floored at `floor`.
struct WholesalePriceParams {
  double base = 0.045;
  double morning_peak = 0.020;
  double evening_peak = 0.030;
  double night_dip = 0.015;
  double day_level_sd = 0.008;
  double noise_sd = 0.003;
  double floor = 0.005;
};
PriceSeries synth_price_wholesale(int days, std::uint64_t seed, const WholesalePriceParams& p = {});

struct WeatherParams {
  double mean_t_out = 5.0;
  double diurnal_amplitude = 3.0;  // half the mean daily swing of the sinusoidal part
  double ar_phi = 0.9;             // per-quarter autocorrelation of the fast noise
  double ar_sd = 1.0;              // stationary standard deviation of the fast noise
  double day_phi = 0.6;            // day-to-day autocorrelation of the daily level
  double day_sd = 3.0;             // stationary standard deviation of the daily level
  double solar_peak = 350.0;       // clear-sky noon irradiance, W/m2
  double cloud_min = 0.15;         // daily clearness factor drawn in [cloud_min, 1]
  double gains_base = 200.0;
  double gains_peak = 400.0;
  bool periodic = false;           // repeat the first day
};

/// Stationary AR(1) sequence with lag-1 coefficient phi and marginal sd.
std::vector<double> ar1_series(std::size_t n, double phi, double stationary_sd, Rng& rng);

WeatherSeries synth_weather(int days, std::uint64_t seed, const WeatherParams& p = {});

/// The realized (T_out, solar) of day `day` (0-based).
Forecast perfect_forecast(const WeatherSeries& w, int day);

/// Relative tapping weight per quarter of day, index 0 = quarter 1. Peaks at
/// quarters 28-36 and 72-84.
std::vector<double> draw_profile();

/// Hot-water draws in litres per quarter.
std::vector<double> synth_draws(int days, double mean_l_per_day, std::uint64_t seed,
                                double event_mean_l = 10.0, double day_spread = 0.3);

}  // namespace batchrl
