#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

#include "batchrl/thermal.hpp"

using namespace batchrl;

namespace {

// Independent oracle: the two-node model written as x' = A x + b and
// integrated with the same explicit Euler substep rule.
Eigen::Vector2d euler_oracle(const EtpParameters& p, Eigen::Vector2d x, double t_out, double q_air,
                             double q_mass, double dt, double max_h) {
  Eigen::Matrix2d a;
  a << -(p.ua + p.hm) / p.ca, p.hm / p.ca, p.hm / p.cm, -p.hm / p.cm;
  Eigen::Vector2d b(( q_air + p.ua * t_out) / p.ca, q_mass / p.cm);
  int n = static_cast<int>(std::ceil(dt / max_h - 1e-12));
  double h = dt / n;
  for (int i = 0; i < n; ++i) x = x + h * (a * x + b);
  return x;
}

// Equilibrium of the continuous model for constant inputs.
Eigen::Vector2d steady_state(const EtpParameters& p, double t_out, double q_air, double q_mass) {
  double ta = t_out + (q_air + q_mass) / p.ua;
  double tm = ta + q_mass / p.hm;
  return {ta, tm};
}

}  // namespace

TEST(Etp, PresetsDifferOnlyInEnvelopeConductance) {
  auto lo = EtpParameters::low_integrity();
  auto hi = EtpParameters::high_integrity();
  EXPECT_EQ(lo.ua, 1154.0);
  EXPECT_EQ(hi.ua, 272.0);
  EXPECT_EQ(lo.ca, hi.ca);
  EXPECT_EQ(lo.cm, hi.cm);
  EXPECT_EQ(hi.ca, 2.441e6);
  EXPECT_EQ(hi.cm, 9.896e6);
  EXPECT_EQ(EtpParameters::thousands_reading(true).ca, 2441e6);
}

TEST(Etp, ValidateRejectsNonPhysical) {
  auto p = EtpParameters::high_integrity();
  p.ca = 0;
  EXPECT_THROW(p.validate(), std::invalid_argument);
  p = EtpParameters::high_integrity();
  p.solar_to_air = 1.5;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Etp, MatchesMatrixOracleOnRandomInputs) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> temp(-10, 30), heat(0, 3000);
  for (bool high : {false, true}) {
    auto p = high ? EtpParameters::high_integrity() : EtpParameters::low_integrity();
    for (int i = 0; i < 200; ++i) {
      EtpHouseState s{temp(rng), temp(rng)};
      double t_out = temp(rng), qs = heat(rng), qi = heat(rng), u = heat(rng) / 1000.0;
      auto got = etp_step(s, p, Action{u}, t_out, qs, qi, kDtSeconds);
      double q_air = p.solar_to_air * qs + p.gains_to_air * qi + p.cop * u * 1000.0;
      double q_mass = (1 - p.solar_to_air) * qs + (1 - p.gains_to_air) * qi;
      auto want = euler_oracle(p, {s.t_air, s.t_mass}, t_out, q_air, q_mass, kDtSeconds, 60.0);
      EXPECT_NEAR(got.t_air, want(0), 1e-9);
      EXPECT_NEAR(got.t_mass, want(1), 1e-9);
    }
  }
}

TEST(Etp, EulerStaysCloseToExactSolution) {
  // Exact solution via the matrix exponential; 60 s substeps are well below
  // the fastest time constant, so the discretisation error stays small.
  auto p = EtpParameters::low_integrity();
  Eigen::Matrix2d a;
  a << -(p.ua + p.hm) / p.ca, p.hm / p.ca, p.hm / p.cm, -p.hm / p.cm;
  double t_out = 0.0, q_air = 6000.0, q_mass = 0.0;
  Eigen::Vector2d xs = steady_state(p, t_out, q_air, q_mass);
  Eigen::Vector2d x0(18.0, 20.0);
  Eigen::EigenSolver<Eigen::Matrix2d> es(a);
  Eigen::Matrix2d v = es.eigenvectors().real();
  Eigen::Vector2d lam = es.eigenvalues().real();
  Eigen::Matrix2d e = Eigen::Matrix2d::Zero();
  e(0, 0) = std::exp(lam(0) * kDtSeconds);
  e(1, 1) = std::exp(lam(1) * kDtSeconds);
  Eigen::Vector2d exact = xs + v * e * v.inverse() * (x0 - xs);
  auto got = etp_step_split({x0(0), x0(1)}, p, t_out, q_air, q_mass, kDtSeconds);
  EXPECT_NEAR(got.t_air, exact(0), 0.05);
  EXPECT_NEAR(got.t_mass, exact(1), 0.05);
}

TEST(Etp, SuperpositionOfStatesAndInputs) {
  // The step is linear in (initial state, t_out, heat inputs) jointly.
  auto p = EtpParameters::high_integrity();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> t(-10, 30), q(0, 2000), u(0, 3);
  for (int i = 0; i < 50; ++i) {
    EtpHouseState s1{t(rng), t(rng)}, s2{t(rng), t(rng)};
    double to1 = t(rng), to2 = t(rng), qs1 = q(rng), qs2 = q(rng), qi1 = q(rng), qi2 = q(rng);
    double u1 = u(rng), u2 = u(rng);
    auto a = etp_step(s1, p, Action{u1}, to1, qs1, qi1, kDtSeconds);
    auto b = etp_step(s2, p, Action{u2}, to2, qs2, qi2, kDtSeconds);
    auto c = etp_step({s1.t_air + s2.t_air, s1.t_mass + s2.t_mass}, p, Action{u1 + u2}, to1 + to2, qs1 + qs2,
                      qi1 + qi2, kDtSeconds);
    EXPECT_NEAR(c.t_air, a.t_air + b.t_air, 1e-9);
    EXPECT_NEAR(c.t_mass, a.t_mass + b.t_mass, 1e-9);
  }
}

TEST(Etp, EquilibriumIsAFixedPoint) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> temp(-10, 15), heat(0, 5000);
  for (int i = 0; i < 100; ++i) {
    auto p = i % 2 ? EtpParameters::high_integrity() : EtpParameters::low_integrity();
    double t_out = temp(rng), qa = heat(rng), qm = heat(rng);
    auto xs = steady_state(p, t_out, qa, qm);
    auto got = etp_step_split({xs(0), xs(1)}, p, t_out, qa, qm, kDtSeconds);
    EXPECT_NEAR(got.t_air, xs(0), 1e-9);
    EXPECT_NEAR(got.t_mass, xs(1), 1e-9);
  }
}

TEST(Etp, MoreHeatNeverCools) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> temp(-10, 25), u(0, 3);
  auto p = EtpParameters::high_integrity();
  for (int i = 0; i < 500; ++i) {
    EtpHouseState s{temp(rng), temp(rng)};
    double t_out = temp(rng), a = u(rng), b = u(rng);
    auto lo = etp_step(s, p, Action{std::min(a, b)}, t_out, 100, 300, kDtSeconds);
    auto hi = etp_step(s, p, Action{std::max(a, b)}, t_out, 100, 300, kDtSeconds);
    EXPECT_GE(hi.t_air, lo.t_air);
    EXPECT_GE(hi.t_mass, lo.t_mass);
  }
}

TEST(Etp, LeakierHouseCoolsFaster) {
  EtpHouseState s{21, 21};
  auto lo = etp_step(s, EtpParameters::low_integrity(), Action{0}, 0.0, 0, 0, kDtSeconds);
  auto hi = etp_step(s, EtpParameters::high_integrity(), Action{0}, 0.0, 0, 0, kDtSeconds);
  EXPECT_LT(lo.t_air, hi.t_air);
  EXPECT_LT(hi.t_air, 21.0);
}

TEST(Etp, RejectsBadInputs) {
  auto p = EtpParameters::high_integrity();
  EXPECT_THROW(etp_step({20, 20}, p, Action{0}, NAN, 0, 0, 900), std::invalid_argument);
  EXPECT_THROW(etp_step({20, 20}, p, Action{0}, 0, 0, 0, 0), std::invalid_argument);
}

TEST(HouseObserve, RunningMeanPadsWithCurrentTemperature) {
  std::vector<double> none;
  auto x = house_observe({21.0, 20.0}, none, 3.0, 50.0, {4, 2});
  EXPECT_EQ(x.physical, (std::vector<double>{21.0, 21.0}));
  EXPECT_EQ(x.exo, (std::vector<double>{3.0, 50.0}));
  std::vector<double> past{19.0, 20.0, 21.0, 22.0};
  auto y = house_observe({23.0, 20.0}, past, 3.0, 50.0, {4, 2});
  EXPECT_DOUBLE_EQ(y.physical[1], (20.0 + 21.0 + 22.0) / 3.0);
  std::vector<double> one{18.0};
  auto z = house_observe({21.0, 20.0}, one, 3.0, 50.0, {4, 2});
  EXPECT_DOUBLE_EQ(z.physical[1], (18.0 + 21.0 + 21.0) / 3.0);
}

TEST(Tank, SensorLayers) {
  EXPECT_EQ(tank_sensor_layers(50), (std::vector<int>{3, 9, 15, 21, 28, 34, 40, 46}));
  EXPECT_EQ(tank_sensor_layers(8), (std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7}));
}

TEST(Tank, EnergyBalanceCloses) {
  TankParameters p;
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> t(15, 70), draw(0, 60);
  for (int i = 0; i < 300; ++i) {
    TankState s;
    for (int l = 0; l < p.n_layers; ++l) s.layers.push_back(t(rng));
    std::sort(s.layers.begin(), s.layers.end());
    TankStepReport rep;
    double u = (i % 2) ? p.u_max_kw : 0.0;
    auto next = tank_step(s, p, Action{u}, draw(rng), 10.0, kDtSeconds, &rep);
    double delta = tank_enthalpy_j(next, p) - tank_enthalpy_j(s, p);
    double budget = rep.electrical_j - rep.loss_j - rep.draw_deficit_j;
    EXPECT_NEAR(delta, budget, 1e-6 * std::max(1.0, std::abs(budget)));
    EXPECT_TRUE(std::is_sorted(next.layers.begin(), next.layers.end()));
  }
}

TEST(Tank, HeatingAddsNominalEnergyBelowSafetyLimit) {
  TankParameters p;
  p.loss_w_per_c = 0.0;
  auto s = TankState::uniform(p, 40.0);
  TankStepReport rep;
  auto next = tank_step(s, p, Action{2.3}, 0.0, 10.0, kDtSeconds, &rep);
  EXPECT_NEAR(rep.electrical_j, 2300.0 * kDtSeconds, 1e-6);
  EXPECT_NEAR(tank_enthalpy_j(next, p) - tank_enthalpy_j(s, p), 2300.0 * kDtSeconds, 1e-6);
}

TEST(Tank, SafetyLimitCapsHeating) {
  TankParameters p;
  auto s = TankState::uniform(p, 94.9);
  auto next = tank_step(s, p, Action{2.3}, 0.0, 10.0, kDtSeconds);
  for (double v : next.layers) EXPECT_LE(v, p.t_max_safety + 1e-12);
}

TEST(Tank, DrawPushesInletWaterIn) {
  TankParameters p;
  p.loss_w_per_c = 0.0;
  auto s = TankState::uniform(p, 60.0);
  // exactly one layer volume drawn: the bottom layer becomes inlet water
  TankStepReport rep;
  auto next = tank_step(s, p, Action{0}, p.layer_volume_l(), 10.0, kDtSeconds, &rep);
  EXPECT_DOUBLE_EQ(next.layers.front(), 10.0);
  EXPECT_DOUBLE_EQ(next.layers[1], 60.0);
  EXPECT_NEAR(rep.draw_deficit_j, p.layer_capacity_j_per_c() * 50.0, 1e-6);
}

TEST(Tank, OversizedDrawIsClampedAndFlagged) {
  TankParameters p;
  p.loss_w_per_c = 0.0;
  auto s = TankState::uniform(p, 60.0);
  TankStepReport rep;
  auto next = tank_step(s, p, Action{0}, 500.0, 10.0, kDtSeconds, &rep);
  EXPECT_TRUE(rep.draw_clamped);
  EXPECT_EQ(rep.drawn_l, p.volume_l);
  for (double v : next.layers) EXPECT_NEAR(v, 10.0, 0.01);
}

TEST(Tank, LossesRelaxTowardAmbient) {
  TankParameters p;
  auto s = TankState::uniform(p, 60.0);
  for (int i = 0; i < 96; ++i) {
    auto n = tank_step(s, p, Action{0}, 0.0, 10.0, kDtSeconds);
    EXPECT_LT(n.layers[0], s.layers[0]);
    EXPECT_GT(n.layers[0], p.t_ambient);
    s = n;
  }
}

TEST(Tank, SocBoundsAndObservation) {
  TankParameters p;
  EXPECT_EQ(soc(TankState::uniform(p, 30.0), p), 0.0);
  EXPECT_EQ(soc(TankState::uniform(p, 70.0), p), 1.0);
  EXPECT_DOUBLE_EQ(soc(TankState::uniform(p, 55.0), p), 0.5);
  auto s = TankState::uniform(p, 55.0);
  s.layers[3] = 40.0;
  auto x = tank_observe(s, p, {12, 1});
  EXPECT_EQ(x.schema, "waterheater");
  ASSERT_EQ(x.physical.size(), 1u);
  EXPECT_DOUBLE_EQ(x.physical[0], (7 * 55.0 + 40.0) / 8.0);
  ASSERT_TRUE(x.soc.has_value());
  EXPECT_TRUE(x.exo.empty());
}

TEST(Tank, RejectsBadInputs) {
  TankParameters p;
  auto s = TankState::uniform(p, 50.0);
  EXPECT_THROW(tank_step(s, p, Action{0}, -1.0, 10.0, 900), std::invalid_argument);
  TankState wrong{{50.0, 50.0}};
  EXPECT_THROW(tank_step(wrong, p, Action{0}, 0.0, 10.0, 900), std::invalid_argument);
  p.n_layers = 4;
  EXPECT_THROW(p.validate(), std::invalid_argument);
}
