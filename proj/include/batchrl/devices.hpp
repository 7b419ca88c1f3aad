#pragma once

#include <deque>
#include <vector>

#include "batchrl/backup.hpp"
#include "batchrl/exogenous.hpp"
#include "batchrl/mdp.hpp"
#include "batchrl/thermal.hpp"

namespace batchrl {

/// Time feature of the k-th quarter of a run (k = 0 is day 1, quarter 1).
TimeFeature time_of(int k);

struct HouseConfig {
  EtpParameters etp;
  ComfortBand band;
  double u_max_kw = 3.0;
  int action_steps = 10;
  double solar_aperture_m2 = 6.0;  // converts irradiance to solar gain in W
  EtpHouseState initial{21.0, 21.0};

  ActionSet actions() const { return ActionSet::heat_pump(u_max_kw, action_steps); }
};

/// Heat-pump house driven by a weather series. Each step applies the backup
/// controller to the request, integrates one quarter and records the tuple.
class HeatPumpHouse {
 public:
  HeatPumpHouse(HouseConfig cfg, const WeatherSeries& weather, int start_quarter = 0);

  /// Controller-facing observation at the current quarter.
  State observe() const;
  /// Applies backup and physics; returns the logged transition.
  Transition step(Action requested);

  int quarter_index() const { return k_; }
  const EtpHouseState& physical() const { return s_; }
  const HouseConfig& config() const { return cfg_; }
  double t_out() const;
  double solar() const;
  double internal_gains() const;

 private:
  HouseConfig cfg_;
  const WeatherSeries* weather_;
  int k_;
  EtpHouseState s_;
  std::deque<double> history_;  // previous indoor temperatures, oldest first
};

struct WaterHeaterConfig {
  TankParameters tank;
  double t_inlet = 10.0;
  double t_initial = 55.0;

  ActionSet actions() const { return ActionSet::water_heater(tank.u_max_kw); }
};

/// Electric water heater driven by a series of hot-water draws (litres per
/// quarter). The backup acts on the state of charge.
class WaterHeater {
 public:
  WaterHeater(WaterHeaterConfig cfg, const std::vector<double>& draws, int start_quarter = 0);

  State observe() const;
  Transition step(Action requested);

  int quarter_index() const { return k_; }
  const TankState& physical() const { return s_; }
  const WaterHeaterConfig& config() const { return cfg_; }
  const TankStepReport& last_report() const { return report_; }

 private:
  WaterHeaterConfig cfg_;
  const std::vector<double>* draws_;
  int k_;
  TankState s_;
  TankStepReport report_;
};

}  // namespace batchrl
