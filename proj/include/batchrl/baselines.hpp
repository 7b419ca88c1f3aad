#pragma once

#include <optional>
#include <span>
#include <vector>

#include "batchrl/devices.hpp"
#include "batchrl/thermal.hpp"

namespace batchrl {

/// Thermostat: heats at full power once T_in drops below `on_below` and
/// keeps heating until T_in reaches `off_at`.
class HysteresisController {
 public:
  explicit HysteresisController(double on_below = 19.0, double off_at = 20.0, double u_max_kw = 3.0);

  Action act(double t_in);
  bool heating() const { return heating_; }
  void reset(bool heating = false) { heating_ = heating; }

 private:
  double on_below_, off_at_, u_max_;
  bool heating_ = false;
};

/// Exogenous inputs of one day, index 0 = quarter 1.
struct DayInputs {
  std::vector<double> t_out;
  std::vector<double> solar_w;     // solar gain already multiplied by the aperture
  std::vector<double> internal_w;
  std::vector<double> prices;

  std::size_t size() const { return prices.size(); }
  /// Slices `quarters` quarters starting at quarter index k0 of the series.
  static DayInputs from_series(const WeatherSeries& w, std::span<const double> prices, int k0,
                               double solar_aperture_m2, int quarters = kQuartersPerDay);
};

struct DpOptions {
  double resolution = 0.1;   // grid step in degC on both temperature axes
  double air_margin = 2.0;   // grid spans [t_low - margin, t_high + margin] for the air node
  double mass_margin = 3.0;  // and this margin around band and start for the mass node
  int action_levels = 10;    // evenly spaced levels from 0 to u_max
};

struct OptimalResult {
  std::vector<Action> actions;          // realized (backup-filtered) actions
  std::vector<EtpHouseState> states;    // size + 1 states, starting at the initial one
  std::vector<double> quarter_costs;
  double cost = 0.0;
  int comfort_violations = 0;           // quarters ending outside the band
};

/// Clairvoyant controller: backward induction on a (T_air, T_mass) grid with
/// bilinear value interpolation, dynamic-price cost and zero terminal value.
/// Actions are restricted to what the backup would let through. The returned
/// rollout runs on the exact model with one-step lookahead on the DP values.
OptimalResult optimal_controller(const HouseConfig& house, const EtpHouseState& start, const DayInputs& inputs,
                                 const DpOptions& opts = {});

/// (c - c_dc) / (c_oc - c_dc); undefined when |c_oc - c_dc| < 1e-9.
std::optional<double> metric_m(double c, double c_dc, double c_oc);
/// c_mfmc / c_oc; undefined when |c_oc| < 1e-12.
std::optional<double> metric_m_ratio(double c_mfmc, double c_oc);

}  // namespace batchrl
