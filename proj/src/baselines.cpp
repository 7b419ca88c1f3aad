#include "batchrl/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace batchrl {

HysteresisController::HysteresisController(double on_below, double off_at, double u_max_kw)
    : on_below_(on_below), off_at_(off_at), u_max_(u_max_kw) {
  if (!(off_at_ >= on_below_)) throw std::invalid_argument("hysteresis: off threshold below on threshold");
}

Action HysteresisController::act(double t_in) {
  if (heating_) {
    if (t_in >= off_at_) heating_ = false;
  } else if (t_in < on_below_) {
    heating_ = true;
  }
  return Action{heating_ ? u_max_ : 0.0};
}

DayInputs DayInputs::from_series(const WeatherSeries& w, std::span<const double> prices, int k0,
                                 double solar_aperture_m2, int quarters) {
  if (k0 < 0 || quarters < 1 || static_cast<std::size_t>(k0 + quarters) > w.size() ||
      static_cast<std::size_t>(k0 + quarters) > prices.size()) {
    throw std::out_of_range("DayInputs: slice outside the series");
  }
  DayInputs in;
  for (int k = k0; k < k0 + quarters; ++k) {
    const auto i = static_cast<std::size_t>(k);
    in.t_out.push_back(w.t_out[i]);
    in.solar_w.push_back(w.solar[i] * solar_aperture_m2);
    in.internal_w.push_back(w.internal_gains[i]);
    in.prices.push_back(prices[i]);
  }
  return in;
}

namespace {

// One quarter of the exact ETP integrator is affine in (T_air, T_mass, u).
struct AffineStep {
  double a00, a01, a10, a11, b0, b1, c0, c1;

  EtpHouseState apply(double ta, double tm, double u) const {
    return {a00 * ta + a01 * tm + b0 + c0 * u, a10 * ta + a11 * tm + b1 + c1 * u};
  }
};

AffineStep affine_step(const EtpParameters& p, double t_out, double solar_w, double internal_w) {
  auto f = [&](double ta, double tm, double u) {
    return etp_step({ta, tm}, p, Action{u}, t_out, solar_w, internal_w, kDtSeconds);
  };
  const EtpHouseState b = f(0, 0, 0);
  const EtpHouseState ea = f(1, 0, 0);
  const EtpHouseState em = f(0, 1, 0);
  const EtpHouseState eu = f(0, 0, 1);
  return {ea.t_air - b.t_air, em.t_air - b.t_air, ea.t_mass - b.t_mass, em.t_mass - b.t_mass,
          b.t_air,            b.t_mass,            eu.t_air - b.t_air,   eu.t_mass - b.t_mass};
}

struct Grid {
  double a0, m0, h;
  int na, nm;

  double interp(const std::vector<double>& v, double ta, double tm) const {
    double x = std::clamp((ta - a0) / h, 0.0, static_cast<double>(na - 1));
    double y = std::clamp((tm - m0) / h, 0.0, static_cast<double>(nm - 1));
    int i = std::min(static_cast<int>(x), na - 2);
    int j = std::min(static_cast<int>(y), nm - 2);
    double fx = x - i, fy = y - j;
    auto at = [&](int ii, int jj) { return v[static_cast<std::size_t>(ii) * nm + jj]; };
    return (1 - fx) * (1 - fy) * at(i, j) + fx * (1 - fy) * at(i + 1, j) + (1 - fx) * fy * at(i, j + 1) +
           fx * fy * at(i + 1, j + 1);
  }
};

}  // namespace

OptimalResult optimal_controller(const HouseConfig& house, const EtpHouseState& start, const DayInputs& in,
                                 const DpOptions& opts) {
  house.etp.validate();
  house.band.validate();
  const std::size_t T = in.size();
  if (T == 0 || in.t_out.size() != T || in.solar_w.size() != T || in.internal_w.size() != T) {
    throw std::invalid_argument("optimal_controller: inconsistent day inputs");
  }
  if (!(opts.resolution > 0) || opts.action_levels < 2) throw std::invalid_argument("optimal_controller: bad options");

  const ActionSet actions = ActionSet::heat_pump(house.u_max_kw, opts.action_levels);
  const ComfortBand& band = house.band;
  auto allowed = [&](double ta) -> std::pair<std::size_t, std::size_t> {
    if (ta <= band.t_low) return {actions.size() - 1, actions.size()};
    if (ta >= band.t_high) return {0, 1};
    return {0, actions.size()};
  };

  const double h = opts.resolution;
  const double a_lo = std::min(band.t_low, start.t_air) - opts.air_margin;
  const double a_hi = std::max(band.t_high, start.t_air) + opts.air_margin;
  const double m_lo = std::min(band.t_low, start.t_mass) - opts.mass_margin;
  const double m_hi = std::max(band.t_high, start.t_mass) + opts.mass_margin;
  Grid g{a_lo, m_lo, h, static_cast<int>(std::ceil((a_hi - a_lo) / h)) + 1,
         static_cast<int>(std::ceil((m_hi - m_lo) / h)) + 1};

  std::vector<AffineStep> steps(T);
  for (std::size_t k = 0; k < T; ++k) steps[k] = affine_step(house.etp, in.t_out[k], in.solar_w[k], in.internal_w[k]);

  // values[k] is the cost-to-go from quarter k; values[T] = 0.
  const std::size_t nodes = static_cast<std::size_t>(g.na) * g.nm;
  std::vector<std::vector<double>> values(T + 1, std::vector<double>(nodes, 0.0));
  for (std::size_t k = T; k-- > 0;) {
    const auto& next = values[k + 1];
    auto& cur = values[k];
    const AffineStep& st = steps[k];
    for (int i = 0; i < g.na; ++i) {
      const double ta = g.a0 + i * h;
      const auto [lo, hi] = allowed(ta);
      for (int j = 0; j < g.nm; ++j) {
        const double tm = g.m0 + j * h;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = lo; a < hi; ++a) {
          const double u = actions.levels()[a];
          const EtpHouseState s = st.apply(ta, tm, u);
          best = std::min(best, cost_dynamic(Action{u}, in.prices[k]) + g.interp(next, s.t_air, s.t_mass));
        }
        cur[static_cast<std::size_t>(i) * g.nm + j] = best;
      }
    }
  }

  OptimalResult res;
  res.states.push_back(start);
  EtpHouseState s = start;
  for (std::size_t k = 0; k < T; ++k) {
    const auto [lo, hi] = allowed(s.t_air);
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_a = lo;
    for (std::size_t a = lo; a < hi; ++a) {
      const Action u = actions[a];
      const EtpHouseState n = etp_step(s, house.etp, u, in.t_out[k], in.solar_w[k], in.internal_w[k], kDtSeconds);
      const double v = cost_dynamic(u, in.prices[k]) + g.interp(values[k + 1], n.t_air, n.t_mass);
      if (v < best) {
        best = v;
        best_a = a;
      }
    }
    const Action u = actions[best_a];
    s = etp_step(s, house.etp, u, in.t_out[k], in.solar_w[k], in.internal_w[k], kDtSeconds);
    const double c = cost_dynamic(u, in.prices[k]);
    res.actions.push_back(u);
    res.states.push_back(s);
    res.quarter_costs.push_back(c);
    res.cost += c;
    if (s.t_air < band.t_low || s.t_air > band.t_high) ++res.comfort_violations;
  }
  return res;
}

std::optional<double> metric_m(double c, double c_dc, double c_oc) {
  if (std::abs(c_oc - c_dc) < 1e-9) return std::nullopt;
  return (c - c_dc) / (c_oc - c_dc);
}

std::optional<double> metric_m_ratio(double c_mfmc, double c_oc) {
  if (std::abs(c_oc) < 1e-12) return std::nullopt;
  return c_mfmc / c_oc;
}

}  // namespace batchrl
