#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "batchrl/baselines.hpp"

using namespace batchrl;

namespace {

// Exhaustive search over every backup-feasible action sequence on the exact
// model. Exponential, so only for a handful of quarters.
double brute_force(const HouseConfig& house, EtpHouseState s, const DayInputs& in, const ActionSet& acts,
                   std::size_t k = 0) {
  if (k == in.size()) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < acts.size(); ++a) {
    Action u = acts[a];
    if (s.t_air <= house.band.t_low && u.kw != acts.max_kw()) continue;
    if (s.t_air >= house.band.t_high && u.kw != 0.0) continue;
    auto n = etp_step(s, house.etp, u, in.t_out[k], in.solar_w[k], in.internal_w[k], kDtSeconds);
    best = std::min(best, cost_dynamic(u, in.prices[k]) + brute_force(house, n, in, acts, k + 1));
  }
  return best;
}

DayInputs short_day(int quarters, double t_out) {
  DayInputs in;
  for (int k = 0; k < quarters; ++k) {
    in.t_out.push_back(t_out);
    in.solar_w.push_back(0.0);
    in.internal_w.push_back(300.0);
    in.prices.push_back(k % 3 == 0 ? 0.30 : 0.05 + 0.01 * k);
  }
  return in;
}

}  // namespace

TEST(Hysteresis, SwitchesWithDeadband) {
  HysteresisController c(19.0, 20.0, 3.0);
  EXPECT_EQ(c.act(19.5).kw, 0.0);
  EXPECT_EQ(c.act(18.9).kw, 3.0);
  EXPECT_TRUE(c.heating());
  EXPECT_EQ(c.act(19.5).kw, 3.0);  // keeps heating inside the deadband
  EXPECT_EQ(c.act(20.0).kw, 0.0);
  EXPECT_EQ(c.act(19.5).kw, 0.0);
  c.reset(true);
  EXPECT_EQ(c.act(19.5).kw, 3.0);
  EXPECT_THROW(HysteresisController(20.0, 19.0), std::invalid_argument);
}

TEST(MetricM, Values) {
  EXPECT_DOUBLE_EQ(*metric_m(1.0, 1.0, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(*metric_m(0.5, 1.0, 0.5), 1.0);
  EXPECT_DOUBLE_EQ(*metric_m(0.75, 1.0, 0.5), 0.5);
  EXPECT_FALSE(metric_m(0.7, 1.0, 1.0).has_value());
  EXPECT_DOUBLE_EQ(*metric_m_ratio(1.02, 1.0), 1.02);
  EXPECT_FALSE(metric_m_ratio(1.0, 0.0).has_value());
}

TEST(DayInputsTest, SlicesAndScalesSolar) {
  auto w = synth_weather(2, 1);
  std::vector<double> prices(192);
  for (int i = 0; i < 192; ++i) prices[i] = i;
  auto in = DayInputs::from_series(w, prices, 96, 6.0);
  ASSERT_EQ(in.size(), 96u);
  EXPECT_EQ(in.prices[0], 96.0);
  EXPECT_EQ(in.solar_w[50], w.solar[146] * 6.0);
  EXPECT_EQ(in.t_out[3], w.t_out[99]);
  EXPECT_THROW(DayInputs::from_series(w, prices, 100, 6.0), std::out_of_range);
}

TEST(OptimalController, MatchesExhaustiveSearchOnShortHorizon) {
  HouseConfig house;
  house.etp = EtpParameters::low_integrity();
  DpOptions opts;
  opts.action_levels = 3;
  opts.resolution = 0.02;
  ActionSet acts = ActionSet::heat_pump(house.u_max_kw, opts.action_levels);
  for (double t0 : {19.2, 20.0, 22.5}) {
    for (double t_out : {-5.0, 5.0}) {
      auto in = short_day(6, t_out);
      EtpHouseState start{t0, t0 - 0.5};
      double exact = brute_force(house, start, in, acts);
      auto res = optimal_controller(house, start, in, opts);
      EXPECT_GE(res.cost, exact - 1e-12);
      EXPECT_NEAR(res.cost, exact, 0.02 * exact + 1e-3) << "t0=" << t0 << " t_out=" << t_out;
    }
  }
}

TEST(OptimalController, RolloutIsConsistent) {
  HouseConfig house;
  auto w = synth_weather(1, 4);
  auto prices = synth_price_wholesale(1, 4);
  auto in = DayInputs::from_series(w, prices.values, 0, house.solar_aperture_m2);
  auto res = optimal_controller(house, house.initial, in);
  ASSERT_EQ(res.actions.size(), 96u);
  ASSERT_EQ(res.states.size(), 97u);
  double sum = 0;
  EtpHouseState s = house.initial;
  for (std::size_t k = 0; k < 96; ++k) {
    if (s.t_air <= house.band.t_low) {
      EXPECT_EQ(res.actions[k].kw, house.u_max_kw);
    }
    if (s.t_air >= house.band.t_high) {
      EXPECT_EQ(res.actions[k].kw, 0.0);
    }
    s = etp_step(s, house.etp, res.actions[k], in.t_out[k], in.solar_w[k], in.internal_w[k], kDtSeconds);
    EXPECT_EQ(s, res.states[k + 1]);
    EXPECT_DOUBLE_EQ(res.quarter_costs[k], cost_dynamic(res.actions[k], in.prices[k]));
    sum += res.quarter_costs[k];
  }
  EXPECT_NEAR(res.cost, sum, 1e-12);
}

TEST(OptimalController, BeatsThermostatOnSameDay) {
  HouseConfig house;
  auto w = synth_weather(1, 12);
  auto prices = synth_price_wholesale(1, 12);
  auto in = DayInputs::from_series(w, prices.values, 0, house.solar_aperture_m2);
  auto opt = optimal_controller(house, house.initial, in);

  HysteresisController thermostat;
  EtpHouseState s = house.initial;
  double cost = 0;
  for (std::size_t k = 0; k < 96; ++k) {
    State x{{static_cast<int>(k) + 1, 1}, {s.t_air, s.t_air}, {0, 0}, "heatpump", std::nullopt};
    Action u = backup_hp(x, thermostat.act(s.t_air), house.band, house.u_max_kw);
    cost += cost_dynamic(u, in.prices[k]);
    s = etp_step(s, house.etp, u, in.t_out[k], in.solar_w[k], in.internal_w[k], kDtSeconds);
  }
  EXPECT_LE(opt.cost, cost * 1.001);
}

TEST(OptimalController, RejectsBadInputs) {
  HouseConfig house;
  DayInputs empty;
  EXPECT_THROW(optimal_controller(house, house.initial, empty), std::invalid_argument);
  auto in = short_day(4, 0.0);
  DpOptions bad;
  bad.resolution = 0;
  EXPECT_THROW(optimal_controller(house, house.initial, in, bad), std::invalid_argument);
}
