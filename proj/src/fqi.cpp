#include "batchrl/fqi.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "batchrl/errors.hpp"

namespace batchrl {

CostFunction dynamic_price_cost() {
  return [](const Transition& t, double price) { return cost_dynamic(t.u_ph, price); };
}

CostFunction day_ahead_cost(double alpha) {
  if (!(alpha >= 0)) throw std::invalid_argument("day_ahead_cost: alpha must be >= 0");
  return [alpha](const Transition& t, double price) { return cost_dayahead(t.u, t.u_ph, price, kDtHours, alpha); };
}

QFunction::QFunction(Forest forest, ActionSet actions, Schema schema, FeatureOptions features,
                     int horizon, int iterations)
    : forest_(std::move(forest)),
      actions_(std::move(actions)),
      schema_(std::move(schema)),
      features_(features),
      horizon_(horizon),
      iterations_(iterations) {}

double QFunction::value(const State& x, Action u) const {
  std::vector<double> row;
  row.reserve(forest_.dim());
  append_features(x, features_, row);
  row.push_back(u.kw);
  return forest_.predict(row);
}

std::vector<double> QFunction::values(const State& x) const {
  std::vector<double> row;
  row.reserve(forest_.dim());
  append_features(x, features_, row);
  return values_at(row);
}

std::vector<double> QFunction::values_at(std::span<const double> feats) const {
  if (feats.size() + 1 != forest_.dim()) throw std::invalid_argument("Q-function: feature dimension mismatch");
  std::vector<double> out(actions_.size());
  forest_.predict_last_levels(feats, actions_.levels(), out);
  return out;
}

nlohmann::json QFunction::to_json() const {
  std::vector<double> levels(actions_.levels().begin(), actions_.levels().end());
  return {{"schema", {{"name", schema_.name}, {"physical", schema_.physical_dim}, {"exo", schema_.exo_dim}}},
          {"actions", levels},
          {"features", {{"quarter", features_.include_quarter}, {"day", features_.include_day}}},
          {"horizon", horizon_},
          {"iterations", iterations_},
          {"forest", forest_.to_json()}};
}

QFunction QFunction::from_json(const nlohmann::json& j) {
  Schema schema{j.at("schema").at("name").get<std::string>(), j.at("schema").at("physical").get<std::size_t>(),
                j.at("schema").at("exo").get<std::size_t>()};
  FeatureOptions f{j.at("features").at("quarter").get<bool>(), j.at("features").at("day").get<bool>()};
  Forest forest = Forest::from_json(j.at("forest"));
  if (forest.dim() != feature_dim(schema, f) + 1) {
    throw std::invalid_argument("serialized Q-function: forest dimension does not match its schema");
  }
  return QFunction(std::move(forest), ActionSet(j.at("actions").get<std::vector<double>>()), schema, f,
                   j.at("horizon").get<int>(), j.at("iterations").get<int>());
}

void QFunction::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json().dump();
}

QFunction QFunction::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

QFunction fqi(const Batch& batch, std::span<const double> day_prices, const CostFunction& cost,
              const ActionSet& actions, const FqiConfig& cfg,
              const std::vector<std::vector<double>>* next_exo) {
  if (batch.empty()) throw std::invalid_argument("fqi: empty batch");
  if (cfg.horizon < 1) throw std::invalid_argument("fqi: horizon must be at least 1");
  if (day_prices.size() != static_cast<std::size_t>(kQuartersPerDay)) {
    throw std::invalid_argument("fqi: expected 96 prices for the target day");
  }
  if (actions.size() == 0) throw std::invalid_argument("fqi: empty action set");
  if (!cost) throw std::invalid_argument("fqi: missing cost function");
  cfg.forest.validate();
  const std::size_t n = batch.size();
  if (next_exo && next_exo->size() != n) throw std::invalid_argument("fqi: next-state override size mismatch");

  const Schema& schema = batch.schema();
  const std::size_t d = feature_dim(schema, cfg.features) + 1;
  const std::size_t na = actions.size();

  // Regression inputs (x_l, u_l) and immediate costs.
  TrainingSet ts(d);
  ts.reserve(n);
  std::vector<double> costs(n);
  std::vector<double> row;
  for (std::size_t l = 0; l < n; ++l) {
    const Transition& t = batch[l];
    row.clear();
    append_features(t.x, cfg.features, row);
    row.push_back(t.u.kw);
    ts.add(row, 0.0);
    costs[l] = cost(t, day_prices[static_cast<std::size_t>(t.x.time.quarter - 1)]);
  }

  // Next-state features x_l'; the action is appended inside the forest walk.
  const std::size_t fd = d - 1;
  std::vector<double> next_rows;
  next_rows.reserve(n * fd);
  for (std::size_t l = 0; l < n; ++l) {
    const Transition& t = batch[l];
    const State* nx = &t.x_next;
    State substituted;
    if (next_exo) {
      if ((*next_exo)[l].size() != schema.exo_dim) {
        throw std::invalid_argument("fqi: next-state exogenous override has the wrong length");
      }
      substituted = t.x_next;
      substituted.exo = (*next_exo)[l];
      nx = &substituted;
    }
    append_features(*nx, cfg.features, next_rows);
  }

  Forest forest;
  std::vector<double> next_q(na);
  auto& targets = ts.mutable_targets();
  const std::span<const double> all_next(next_rows);
  for (int it = 1; it <= cfg.horizon; ++it) {
    if (it == 1) {
      targets = costs;  // Q_0 is zero everywhere
    } else {
      for (std::size_t l = 0; l < n; ++l) {
        forest.predict_last_levels(all_next.subspan(l * fd, fd), actions.levels(), next_q);
        targets[l] = costs[l] + *std::min_element(next_q.begin(), next_q.end());
      }
    }
    forest = Forest::fit(ts, cfg.forest, derive_seed(cfg.seed, static_cast<std::uint64_t>(it)));
  }
  return QFunction(std::move(forest), actions, schema, cfg.features, cfg.horizon, cfg.horizon);
}

QFunction fqi_standard(const Batch& batch, std::span<const double> day_prices, const CostFunction& cost,
                       const ActionSet& actions, const FqiConfig& cfg) {
  return fqi(batch, day_prices, cost, actions, cfg, nullptr);
}

QFunction fqi_extended(const Batch& batch, const Forecast& forecast, std::span<const double> day_prices,
                       const CostFunction& cost, const ActionSet& actions, const FqiConfig& cfg) {
  if (batch.schema().exo_dim == 0) return fqi_standard(batch, day_prices, cost, actions, cfg);
  forecast.validate();
  if (batch.schema().exo_dim != 2) {
    throw std::invalid_argument("fqi_extended: forecast provides (T_out, solar) but the schema has " +
                                std::to_string(batch.schema().exo_dim) + " exogenous components");
  }
  std::vector<std::vector<double>> next_exo;
  next_exo.reserve(batch.size());
  for (const auto& t : batch.transitions()) next_exo.push_back(forecast.exo_at(t.x_next.time.quarter));
  return fqi(batch, day_prices, cost, actions, cfg, &next_exo);
}

Action greedy_action(const QFunction& q, const State& x) {
  auto v = q.values(x);
  std::size_t best = 0;
  for (std::size_t a = 1; a < v.size(); ++a) {
    if (v[a] < v[best]) best = a;
  }
  return q.actions()[best];
}

double exploration_rate(int day, double eps0) {
  if (day < 1) throw std::invalid_argument("exploration_rate: day index is 1-based");
  if (!(eps0 >= 0)) throw std::invalid_argument("exploration_rate: eps0 must be >= 0");
  return std::min(1.0, eps0 / day);
}

Action epsilon_greedy(const QFunction& q, const State& x, int day, Rng& rng, double eps0) {
  const double eps = exploration_rate(day, eps0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, q.actions().size() - 1);
  const double c = coin(rng);
  const std::size_t r = pick(rng);
  if (c < eps) return q.actions()[r];
  return greedy_action(q, x);
}

}  // namespace batchrl
