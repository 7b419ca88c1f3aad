#include "batchrl/mfmc.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace batchrl {

std::vector<double> mfmc_standardize(const State& x, const FeatureOptions& opts, std::span<const double> mean,
                                     std::span<const double> sd) {
  auto f = features(x, opts);
  if (f.size() != mean.size() || f.size() != sd.size()) throw std::invalid_argument("mfmc: feature size mismatch");
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = (f[i] - mean[i]) / sd[i];
  return f;
}

namespace {

std::size_t argmin_lower(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < v.size(); ++a) {
    if (v[a] < v[best]) best = a;
  }
  return best;
}

}  // namespace

MfmcResult mfmc(const Batch& batch, const Forecast* forecast, std::span<const double> day_prices,
                const CostFunction& cost, const ActionSet& actions, const State& x1, const MfmcConfig& cfg) {
  const int T = cfg.fqi.horizon;
  if (cfg.p < 2) throw std::invalid_argument("mfmc: p must be greater than 1");
  if (!(cfg.xi >= 0)) throw std::invalid_argument("mfmc: xi must be >= 0");
  if (T < 1) throw std::invalid_argument("mfmc: horizon must be positive");
  const std::size_t need = static_cast<std::size_t>(cfg.p) * static_cast<std::size_t>(T - 1);
  if (batch.size() < need) {
    throw std::invalid_argument("mfmc: batch holds " + std::to_string(batch.size()) + " tuples, need p*(T-1) = " +
                                std::to_string(need));
  }
  if (x1.schema != batch.schema().name) throw std::invalid_argument("mfmc: x1 schema differs from the batch");

  const bool substitute = forecast != nullptr && batch.schema().exo_dim > 0;
  if (substitute) forecast->validate();

  MfmcResult res;
  res.q = forecast ? fqi_extended(batch, *forecast, day_prices, cost, actions, cfg.fqi)
                   : fqi_standard(batch, day_prices, cost, actions, cfg.fqi);

  const std::size_t n = batch.size();
  const std::size_t na = actions.size();
  const FeatureOptions& fo = cfg.fqi.features;

  // Q*(x_l, u) for every tuple and action.
  std::vector<double> qtab(n * na);
  for (std::size_t l = 0; l < n; ++l) {
    auto v = res.q.values(batch[l].x);
    std::copy(v.begin(), v.end(), qtab.begin() + static_cast<std::ptrdiff_t>(l * na));
  }

  // z-scoring statistics of the batch states.
  const std::size_t fd = feature_dim(batch.schema(), fo);
  res.feature_mean.assign(fd, 0.0);
  res.feature_sd.assign(fd, 0.0);
  std::vector<std::vector<double>> feats(n);
  for (std::size_t l = 0; l < n; ++l) {
    feats[l] = features(batch[l].x, fo);
    for (std::size_t i = 0; i < fd; ++i) res.feature_mean[i] += feats[l][i];
  }
  for (auto& m : res.feature_mean) m /= static_cast<double>(n);
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t i = 0; i < fd; ++i) {
      const double d = feats[l][i] - res.feature_mean[i];
      res.feature_sd[i] += d * d;
    }
  }
  for (auto& s : res.feature_sd) {
    s = std::sqrt(s / static_cast<double>(n));
    if (!(s > 0)) s = 1.0;
  }
  for (auto& f : feats) {
    for (std::size_t i = 0; i < fd; ++i) f[i] = (f[i] - res.feature_mean[i]) / res.feature_sd[i];
  }

  auto prepare = [&](State x) {
    if (substitute) x.exo = forecast->exo_at(x.time.quarter);
    return x;
  };

  std::vector<char> used(n, 0);
  for (int i = 0; i < cfg.p; ++i) {
    ArtificialTrajectory traj;
    State x = prepare(x1);
    for (int k = 1; k <= T; ++k) {
      const auto qx = res.q.values(x);
      const std::size_t a = argmin_lower(qx);
      traj.actions.push_back(actions[a]);
      traj.states.push_back(x);
      if (k == T) break;

      const auto zx = mfmc_standardize(x, fo, res.feature_mean, res.feature_sd);
      double best = std::numeric_limits<double>::infinity();
      std::size_t chosen = n;
      for (std::size_t l = 0; l < n; ++l) {
        if (used[l]) continue;
        double dist2 = 0.0;
        for (std::size_t j = 0; j < fd; ++j) {
          const double diff = zx[j] - feats[l][j];
          dist2 += diff * diff;
        }
        const double m = std::abs(qx[a] - qtab[l * na + a]) + cfg.xi * std::sqrt(dist2);
        if (m < best) {
          best = m;
          chosen = l;
        }
      }
      if (chosen == n) {
        throw std::runtime_error("mfmc: batch exhausted in trajectory " + std::to_string(i + 1) + " at step " +
                                 std::to_string(k));
      }
      used[chosen] = 1;
      traj.consumed.push_back(chosen);
      res.trace.push_back(MfmcStep{i, k, x, a, qx[a], chosen, best});
      x = prepare(batch[chosen].x_next);
    }
    res.trajectories.push_back(std::move(traj));
  }
  return res;
}

DayAheadPlan make_plan(const std::vector<ArtificialTrajectory>& trajectories) {
  if (trajectories.empty()) throw std::invalid_argument("make_plan: no trajectories");
  const std::size_t T = trajectories.front().actions.size();
  DayAheadPlan plan;
  plan.u_plan.assign(T, 0.0);
  for (const auto& tr : trajectories) {
    if (tr.actions.size() != T) throw std::invalid_argument("make_plan: trajectories differ in length");
    for (std::size_t k = 0; k < T; ++k) plan.u_plan[k] += tr.actions[k].kw;
  }
  for (auto& u : plan.u_plan) u /= static_cast<double>(trajectories.size());
  plan.provenance = trajectories;
  return plan;
}

PlanOutcome evaluate_plan(const DayAheadPlan& plan, const std::function<Transition(Action)>& step,
                          std::span<const double> day_prices, double alpha) {
  if (day_prices.size() < plan.u_plan.size()) throw std::invalid_argument("evaluate_plan: too few prices");
  PlanOutcome out;
  for (std::size_t k = 0; k < plan.u_plan.size(); ++k) {
    const Action planned{plan.u_plan[k]};
    Transition t = step(planned);
    const double c = cost_dayahead(planned, t.u_ph, day_prices[k], kDtHours, alpha);
    out.quarter_costs.push_back(c);
    out.cost += c;
    out.deviation_kwh += std::abs(planned.kw - t.u_ph.kw) * kDtHours;
    out.energy_kwh += t.u_ph.kw * kDtHours;
    out.transitions.push_back(std::move(t));
  }
  return out;
}

}  // namespace batchrl
