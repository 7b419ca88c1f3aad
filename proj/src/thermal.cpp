#include "batchrl/thermal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace batchrl {

EtpParameters EtpParameters::low_integrity() {
  EtpParameters p;
  p.ua = 1154.0;
  return p;
}

EtpParameters EtpParameters::high_integrity() { return EtpParameters{}; }

EtpParameters EtpParameters::thousands_reading(bool high_integrity) {
  EtpParameters p = high_integrity ? EtpParameters::high_integrity() : EtpParameters::low_integrity();
  p.ca = 2441e6;
  p.cm = 9896e6;
  return p;
}

void EtpParameters::validate() const {
  if (!(ua > 0 && hm > 0 && ca > 0 && cm > 0)) {
    throw std::invalid_argument("ETP conductances and capacitances must be positive");
  }
  if (!(solar_to_air >= 0 && solar_to_air <= 1 && gains_to_air >= 0 && gains_to_air <= 1)) {
    throw std::invalid_argument("ETP gain splits must lie in [0, 1]");
  }
  if (!(cop > 0)) throw std::invalid_argument("COP must be positive");
}

EtpHouseState etp_step_split(const EtpHouseState& s, const EtpParameters& p, double t_out,
                             double q_air_w, double q_mass_w, double dt_s) {
  if (!(dt_s > 0)) throw std::invalid_argument("etp_step: dt must be positive");
  if (!std::isfinite(s.t_air) || !std::isfinite(s.t_mass) || !std::isfinite(t_out) ||
      !std::isfinite(q_air_w) || !std::isfinite(q_mass_w) || !std::isfinite(dt_s)) {
    throw std::invalid_argument("etp_step: non-finite input");
  }
  const int n = static_cast<int>(std::ceil(dt_s / kEtpMaxSubstepSeconds - 1e-12));
  const double h = dt_s / n;
  double ta = s.t_air;
  double tm = s.t_mass;
  for (int i = 0; i < n; ++i) {
    double dta = (tm * p.hm - ta * (p.ua + p.hm) + q_air_w + t_out * p.ua) / p.ca;
    double dtm = (p.hm * (ta - tm) + q_mass_w) / p.cm;
    ta += h * dta;
    tm += h * dtm;
  }
  return EtpHouseState{ta, tm};
}

EtpHouseState etp_step(const EtpHouseState& s, const EtpParameters& p, Action u_ph, double t_out,
                       double q_solar_w, double q_internal_w, double dt_s) {
  double q_air = p.solar_to_air * q_solar_w + p.gains_to_air * q_internal_w + p.cop * u_ph.kw * 1000.0;
  double q_mass = (1.0 - p.solar_to_air) * q_solar_w + (1.0 - p.gains_to_air) * q_internal_w;
  return etp_step_split(s, p, t_out, q_air, q_mass, dt_s);
}

State house_observe(const EtpHouseState& s, std::span<const double> past_t_in, double t_out,
                    double solar_wm2, TimeFeature time, int n_r) {
  if (n_r < 1) throw std::invalid_argument("running mean length must be positive");
  double sum = 0.0;
  const std::size_t have = std::min<std::size_t>(past_t_in.size(), static_cast<std::size_t>(n_r));
  for (std::size_t i = past_t_in.size() - have; i < past_t_in.size(); ++i) sum += past_t_in[i];
  sum += static_cast<double>(static_cast<std::size_t>(n_r) - have) * s.t_air;

  State x;
  x.time = time;
  x.schema = "heatpump";
  x.physical = {s.t_air, sum / n_r};
  x.exo = {t_out, solar_wm2};
  return x;
}

double TankParameters::layer_capacity_j_per_c() const {
  return layer_volume_l() * kWaterHeatCapacity;
}

void TankParameters::validate() const {
  if (!(volume_l > 0) || n_layers < kTankSensors || n_heat < 1 || n_heat > n_layers) {
    throw std::invalid_argument("invalid tank geometry");
  }
  if (!(loss_w_per_c >= 0)) throw std::invalid_argument("tank loss coefficient must be >= 0");
  if (!(t_max > t_min_use)) throw std::invalid_argument("tank t_max must exceed t_min_use");
  if (!(t_max_safety >= t_max)) throw std::invalid_argument("tank safety limit below t_max");
}

TankState TankState::uniform(const TankParameters& p, double t) {
  return TankState{std::vector<double>(static_cast<std::size_t>(p.n_layers), t)};
}

namespace {

// Integral of the pre-draw profile over [lo, hi) in layer units; positions
// below zero hold inlet water.
double profile_integral(const std::vector<double>& layers, double lo, double hi, double t_inlet) {
  double acc = 0.0;
  if (lo < 0.0) {
    double top = std::min(hi, 0.0);
    acc += (top - lo) * t_inlet;
    lo = top;
  }
  const double n = static_cast<double>(layers.size());
  hi = std::min(hi, n);
  while (lo < hi) {
    std::size_t idx = static_cast<std::size_t>(std::floor(lo));
    double edge = std::min(hi, static_cast<double>(idx + 1));
    acc += (edge - lo) * layers[idx];
    lo = edge;
  }
  return acc;
}

}  // namespace

TankState tank_step(const TankState& s, const TankParameters& p, Action u_ph, double draw_l,
                    double t_inlet, double dt_s, TankStepReport* report) {
  if (!(draw_l >= 0)) throw std::invalid_argument("tank_step: draw must be non-negative");
  if (!(dt_s > 0)) throw std::invalid_argument("tank_step: dt must be positive");
  if (s.layers.size() != static_cast<std::size_t>(p.n_layers)) {
    throw std::invalid_argument("tank_step: layer count does not match parameters");
  }
  if (p.t_ambient < t_inlet) throw std::invalid_argument("tank_step: ambient below inlet temperature");

  TankStepReport rep;
  const double cap = p.layer_capacity_j_per_c();
  const double n = static_cast<double>(p.n_layers);

  // (1) plug-flow draw
  double drawn = draw_l;
  if (drawn > p.volume_l) {
    drawn = p.volume_l;
    rep.draw_clamped = true;
  }
  rep.drawn_l = drawn;
  const double shift = drawn / p.layer_volume_l();
  std::vector<double> t = s.layers;
  if (shift > 0.0) {
    for (int i = 0; i < p.n_layers; ++i) {
      t[i] = profile_integral(s.layers, i - shift, i + 1 - shift, t_inlet);
    }
    double out = profile_integral(s.layers, n - shift, n, t_inlet);
    rep.draw_deficit_j = cap * (out - shift * t_inlet);
  }

  // (2) heating of the bottom layers, capped at the safety limit
  const double e_layer = u_ph.kw * 1000.0 * dt_s / p.n_heat;
  for (int i = 0; i < p.n_heat; ++i) {
    double dT = std::min(e_layer / cap, std::max(0.0, p.t_max_safety - t[i]));
    t[i] += dT;
    rep.electrical_j += dT * cap;
  }

  // (3) conduction loss, exact exponential relaxation toward ambient per layer
  const double decay = std::exp(-(p.loss_w_per_c / n) * dt_s / cap);
  for (auto& ti : t) {
    double next = p.t_ambient + (ti - p.t_ambient) * decay;
    rep.loss_j += cap * (ti - next);
    ti = next;
  }

  // (4) buoyancy
  std::sort(t.begin(), t.end());

  if (report) *report = rep;
  return TankState{std::move(t)};
}

std::vector<int> tank_sensor_layers(int n_layers) {
  std::vector<int> idx(kTankSensors);
  for (int i = 0; i < kTankSensors; ++i) {
    idx[i] = static_cast<int>(std::floor((i + 0.5) * n_layers / kTankSensors));
  }
  return idx;
}

std::vector<double> tank_full_state(const TankState& s) {
  std::vector<double> out;
  out.reserve(kTankSensors);
  for (int i : tank_sensor_layers(static_cast<int>(s.layers.size()))) out.push_back(s.layers[i]);
  return out;
}

State tank_observe(const TankState& s, const TankParameters& p, TimeFeature time) {
  auto sensors = tank_full_state(s);
  double mean = 0.0;
  for (double v : sensors) mean += v;
  mean /= static_cast<double>(sensors.size());

  State x;
  x.time = time;
  x.schema = "waterheater";
  x.physical = {mean};
  x.soc = soc(s, p);
  return x;
}

double soc(const TankState& s, const TankParameters& p) {
  double excess = 0.0;
  for (double v : s.layers) excess += std::max(v - p.t_min_use, 0.0);
  double frac = excess / (static_cast<double>(s.layers.size()) * (p.t_max - p.t_min_use));
  return std::clamp(frac, 0.0, 1.0);
}

double tank_enthalpy_j(const TankState& s, const TankParameters& p) {
  double sum = 0.0;
  for (double v : s.layers) sum += v;
  return sum * p.layer_capacity_j_per_c();
}

}  // namespace batchrl
