#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <json.hpp>

#include "batchrl/exogenous.hpp"
#include "batchrl/forest.hpp"
#include "batchrl/mdp.hpp"

namespace batchrl {

/// Cost of one logged transition given the price of the quarter of its start
/// state. Implementations read the realized power u_ph.
using CostFunction = std::function<double(const Transition&, double price)>;

/// u_ph * price * dt.
CostFunction dynamic_price_cost();

/// Day-ahead cost of a tuple whose requested action is the planned power:
/// u * price * dt + alpha * |u * dt - u_ph * dt|. Requests the backup would
/// overrule are penalized, so the greedy policy learns realizable plans.
CostFunction day_ahead_cost(double alpha);

struct FqiConfig {
  ForestParams forest;
  int horizon = kQuartersPerDay;  // number of iterations T
  std::uint64_t seed = 0;
  FeatureOptions features;
};

/// Tree-ensemble approximation of the T-step cost-to-go Q(x, u).
class QFunction {
 public:
  QFunction() = default;
  QFunction(Forest forest, ActionSet actions, Schema schema, FeatureOptions features, int horizon,
            int iterations);

  double value(const State& x, Action u) const;
  /// Q(x, u) for every action of the set, in action order.
  std::vector<double> values(const State& x) const;
  /// Q for every action at an explicit feature vector (may be off-lattice,
  /// e.g. a fractional quarter).
  std::vector<double> values_at(std::span<const double> features) const;

  const Forest& forest() const { return forest_; }
  const ActionSet& actions() const { return actions_; }
  const Schema& schema() const { return schema_; }
  const FeatureOptions& features() const { return features_; }
  int horizon() const { return horizon_; }
  int iterations() const { return iterations_; }

  nlohmann::json to_json() const;
  static QFunction from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static QFunction load(const std::filesystem::path& path);

 private:
  Forest forest_;
  ActionSet actions_;
  Schema schema_;
  FeatureOptions features_;
  int horizon_ = 0;
  int iterations_ = 0;
};

/// Fitted Q-iteration on `batch`. Costs use `day_prices[quarter(x) - 1]`.
/// When `next_exo` is given it replaces, tuple by tuple, the exogenous part
/// of the next state before the minimisation over actions.
QFunction fqi(const Batch& batch, std::span<const double> day_prices, const CostFunction& cost,
              const ActionSet& actions, const FqiConfig& cfg,
              const std::vector<std::vector<double>>* next_exo = nullptr);

/// Next states keep their observed exogenous values.
QFunction fqi_standard(const Batch& batch, std::span<const double> day_prices, const CostFunction& cost,
                       const ActionSet& actions, const FqiConfig& cfg);

/// Next states take the forecast (T_out, solar) for their quarter. Devices
/// without exogenous state reduce to fqi_standard.
QFunction fqi_extended(const Batch& batch, const Forecast& forecast, std::span<const double> day_prices,
                       const CostFunction& cost, const ActionSet& actions, const FqiConfig& cfg);

/// argmin_u Q(x, u); ties go to the lower power.
Action greedy_action(const QFunction& q, const State& x);

/// Harmonic exploration rate min(1, eps0 / d) for 1-based day index d.
double exploration_rate(int day, double eps0 = 1.0);

/// With probability exploration_rate(day, eps0) a uniformly random action,
/// otherwise the greedy one. Always consumes the same number of draws from
/// `rng` so arms sharing a seed stay aligned.
Action epsilon_greedy(const QFunction& q, const State& x, int day, Rng& rng, double eps0 = 1.0);

}  // namespace batchrl
