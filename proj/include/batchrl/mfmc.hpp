#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "batchrl/exogenous.hpp"
#include "batchrl/fqi.hpp"
#include "batchrl/mdp.hpp"

namespace batchrl {

struct MfmcConfig {
  int p = 4;          // number of artificial trajectories, > 1
  double xi = 1e-3;   // weight of the standardized state distance
  FqiConfig fqi;      // horizon T is fqi.horizon
};

struct ArtificialTrajectory {
  std::vector<Action> actions;        // length T
  std::vector<State> states;          // length T, states[0] == x1
  std::vector<std::size_t> consumed;  // length T-1 batch indices
};

/// One tuple selection, logged for audit.
struct MfmcStep {
  int trajectory = 0;
  int step = 0;                 // 1-based position k in the trajectory
  State x;                      // x_k (after any forecast substitution)
  std::size_t action_index = 0; // u_k as an index into the action set
  double q_xk = 0.0;            // Q*(x_k, u_k)
  std::size_t chosen = 0;       // selected batch index
  double metric = 0.0;          // metric value of the selected tuple
};

struct MfmcResult {
  std::vector<ArtificialTrajectory> trajectories;
  std::vector<MfmcStep> trace;
  QFunction q;                      // Q* used for actions and the metric
  std::vector<double> feature_mean; // z-scoring statistics of batch states
  std::vector<double> feature_sd;
};

/// Standardized features used by the state-distance term.
std::vector<double> mfmc_standardize(const State& x, const FeatureOptions& opts, std::span<const double> mean,
                                     std::span<const double> sd);

/// Synthesizes p trajectories of length T from the batch. Q* comes from
/// extended FQI when a forecast is given (standard FQI otherwise), seeded
/// with cfg.fqi.seed. At step k the action is argmin_u Q*(x_k, u); the next
/// state is x_l' of the unused tuple minimising
///   |Q*(x_k, u_k) - Q*(x_l, u_k)| + xi * |z(x_k) - z(x_l)|,
/// lowest index on ties; the tuple is then removed. With a forecast, the
/// exogenous part of every x_k is replaced by the forecast for its quarter.
MfmcResult mfmc(const Batch& batch, const Forecast* forecast, std::span<const double> day_prices,
                const CostFunction& cost, const ActionSet& actions, const State& x1, const MfmcConfig& cfg);

struct DayAheadPlan {
  std::vector<double> u_plan;  // kW per quarter
  std::vector<ArtificialTrajectory> provenance;
};

/// Per-quarter mean of the trajectories' actions.
DayAheadPlan make_plan(const std::vector<ArtificialTrajectory>& trajectories);

struct PlanOutcome {
  double cost = 0.0;           // day-ahead cost summed over the day
  double deviation_kwh = 0.0;  // sum of |planned - realized| * dt
  double energy_kwh = 0.0;     // realized consumption
  std::vector<Transition> transitions;
  std::vector<double> quarter_costs;
};

/// Requests the planned power every quarter through `step` (which applies
/// the device's backup) and accumulates day-ahead cost and deviation.
PlanOutcome evaluate_plan(const DayAheadPlan& plan, const std::function<Transition(Action)>& step,
                          std::span<const double> day_prices, double alpha);

}  // namespace batchrl
