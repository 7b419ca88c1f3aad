#include "batchrl/devices.hpp"

#include <stdexcept>

namespace batchrl {

TimeFeature time_of(int k) {
  if (k < 0) throw std::invalid_argument("time_of: negative quarter index");
  return TimeFeature{k % kQuartersPerDay + 1, (k / kQuartersPerDay) % kDaysPerWeek + 1};
}

HeatPumpHouse::HeatPumpHouse(HouseConfig cfg, const WeatherSeries& weather, int start_quarter)
    : cfg_(std::move(cfg)), weather_(&weather), k_(start_quarter), s_(cfg_.initial) {
  cfg_.etp.validate();
  cfg_.band.validate();
  weather.validate();
  if (start_quarter < 0 || static_cast<std::size_t>(start_quarter) >= weather.size()) {
    throw std::invalid_argument("house: start quarter outside the weather series");
  }
}

double HeatPumpHouse::t_out() const { return weather_->t_out.at(static_cast<std::size_t>(k_)); }
double HeatPumpHouse::solar() const { return weather_->solar.at(static_cast<std::size_t>(k_)); }
double HeatPumpHouse::internal_gains() const { return weather_->internal_gains.at(static_cast<std::size_t>(k_)); }

State HeatPumpHouse::observe() const {
  std::vector<double> past(history_.begin(), history_.end());
  return house_observe(s_, past, t_out(), solar(), time_of(k_));
}

Transition HeatPumpHouse::step(Action requested) {
  if (static_cast<std::size_t>(k_) + 1 >= weather_->size()) {
    throw std::out_of_range("house: weather series exhausted");
  }
  Transition t;
  t.x = observe();
  t.u = requested;
  t.u_ph = backup_hp(t.x, requested, cfg_.band, cfg_.u_max_kw);
  const double q_solar = cfg_.solar_aperture_m2 * solar();
  s_ = etp_step(s_, cfg_.etp, t.u_ph, t_out(), q_solar, internal_gains(), kDtSeconds);
  history_.push_back(t.x.physical[0]);
  while (history_.size() > static_cast<std::size_t>(kRunningMeanLength)) history_.pop_front();
  ++k_;
  t.x_next = observe();
  return t;
}

WaterHeater::WaterHeater(WaterHeaterConfig cfg, const std::vector<double>& draws, int start_quarter)
    : cfg_(std::move(cfg)), draws_(&draws), k_(start_quarter), s_(TankState::uniform(cfg_.tank, cfg_.t_initial)) {
  cfg_.tank.validate();
  if (start_quarter < 0 || static_cast<std::size_t>(start_quarter) >= draws.size()) {
    throw std::invalid_argument("water heater: start quarter outside the draw series");
  }
}

State WaterHeater::observe() const { return tank_observe(s_, cfg_.tank, time_of(k_)); }

Transition WaterHeater::step(Action requested) {
  if (static_cast<std::size_t>(k_) >= draws_->size()) throw std::out_of_range("water heater: draw series exhausted");
  Transition t;
  t.x = observe();
  t.u = requested;
  t.u_ph = backup_ewh(t.x, requested, cfg_.tank.u_max_kw);
  s_ = tank_step(s_, cfg_.tank, t.u_ph, (*draws_)[static_cast<std::size_t>(k_)], cfg_.t_inlet, kDtSeconds, &report_);
  ++k_;
  t.x_next = observe();
  return t;
}

}  // namespace batchrl
