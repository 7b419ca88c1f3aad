#pragma once

#include <span>
#include <vector>

#include "batchrl/mdp.hpp"

namespace batchrl {

/// Second-order equivalent thermal parameters of a house heated by a heat
/// pump. Capacities in J/degC, conductances in W/degC.
struct EtpParameters {
  double ua = 272.0;         // envelope conductance
  double hm = 6863.0;        // air-mass coupling
  double ca = 2.441e6;       // air capacitance
  double cm = 9.896e6;       // mass capacitance
  double solar_to_air = 0.5; // fraction of solar gain delivered to the air node
  double gains_to_air = 0.5; // fraction of internal gain delivered to the air node
  double cop = 3.0;          // thermal watts per electric watt

  static EtpParameters low_integrity();
  static EtpParameters high_integrity();
  /// Reads the published capacity entries "2,441" / "9,896" as thousands
  /// separators (GJ scale) instead of decimal commas.
  static EtpParameters thousands_reading(bool high_integrity);

  void validate() const;
};

struct EtpHouseState {
  double t_air = 20.0;
  double t_mass = 20.0;

  bool operator==(const EtpHouseState&) const = default;
};

inline constexpr double kEtpMaxSubstepSeconds = 60.0;

/// Integrates the ETP model over `dt_s` seconds with explicit Euler substeps
/// of at most 60 s. Heat-pump thermal output is cop * u_ph.
EtpHouseState etp_step(const EtpHouseState& s, const EtpParameters& p, Action u_ph, double t_out,
                       double q_solar_w, double q_internal_w, double dt_s);

/// Same integrator with the heat inputs already split over the two nodes.
/// etp_step is this with q_air = a*Qs + b*Qi + cop*u*1000 and
/// q_mass = (1-a)*Qs + (1-b)*Qi.
EtpHouseState etp_step_split(const EtpHouseState& s, const EtpParameters& p, double t_out,
                             double q_air_w, double q_mass_w, double dt_s);

inline constexpr int kRunningMeanLength = 3;

/// Controller-facing heat-pump state: (T_in, mean of the previous n_r indoor
/// temperatures) physical and (T_out, solar) exogenous. `past_t_in` holds the
/// most recent samples last; missing samples are padded with the current T_in.
State house_observe(const EtpHouseState& s, std::span<const double> past_t_in, double t_out,
                    double solar_wm2, TimeFeature time, int n_r = kRunningMeanLength);

/// Simplified stratified tank. Layer 0 is the bottom.
struct TankParameters {
  double volume_l = 200.0;
  int n_layers = 50;
  int n_heat = 10;             // bottom layers the element heats
  double loss_w_per_c = 1.5;   // whole tank, spread evenly over layers
  double t_min_use = 45.0;
  double t_max = 65.0;
  double t_max_safety = 95.0;
  double t_ambient = 20.0;
  double u_max_kw = 2.3;

  double layer_volume_l() const { return volume_l / n_layers; }
  double layer_capacity_j_per_c() const;
  void validate() const;
};

inline constexpr double kWaterHeatCapacity = 4186.0;  // J/(kg degC), 1 kg per litre
inline constexpr int kTankSensors = 8;

struct TankState {
  std::vector<double> layers;

  static TankState uniform(const TankParameters& p, double t);
  bool operator==(const TankState&) const = default;
};

/// Energy flows of one tank step, for bookkeeping checks.
struct TankStepReport {
  double drawn_l = 0.0;
  bool draw_clamped = false;
  double electrical_j = 0.0;   // energy actually delivered by the element
  double loss_j = 0.0;         // conduction loss to ambient (negative when gaining)
  double draw_deficit_j = 0.0; // enthalpy leaving at the top minus enthalpy entering at the bottom
};

/// One step: plug-flow draw, bottom heating, conduction loss, buoyancy re-sort.
/// A draw larger than the tank volume is clamped and flagged in the report.
TankState tank_step(const TankState& s, const TankParameters& p, Action u_ph, double draw_l,
                    double t_inlet, double dt_s, TankStepReport* report = nullptr);

/// Layer indices floor((i + 0.5) * n_layers / 8), i = 0..7.
std::vector<int> tank_sensor_layers(int n_layers);
/// The eight sensor temperatures, bottom to top.
std::vector<double> tank_full_state(const TankState& s);
/// Reduced water-heater state (quarter, mean sensor temperature) with the
/// state of charge attached for the backup controller.
State tank_observe(const TankState& s, const TankParameters& p, TimeFeature time);
/// Energy above t_min_use relative to a tank entirely at t_max, in [0, 1].
double soc(const TankState& s, const TankParameters& p);
/// Total enthalpy relative to 0 degC.
double tank_enthalpy_j(const TankState& s, const TankParameters& p);

}  // namespace batchrl
