#include "batchrl/experiment.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "batchrl/errors.hpp"

namespace batchrl {

namespace {

// Independent random streams derived from the run seed.
enum Stream : std::uint64_t {
  kWeatherStream = 1,
  kPriceStream = 2,
  kDrawStream = 3,
  kExplorationStream = 4,
  kFqiStream = 5,
  kForecastStream = 6,
};

// ---------------------------------------------------------------- config

class JsonObject {
 public:
  JsonObject(const nlohmann::json& j, std::string ctx) : j_(j), ctx_(std::move(ctx)) {
    if (!j_.is_object()) throw ConfigError(where() + "expected an object");
  }

  std::string where(const std::string& key = "") const {
    return "config: " + ctx_ + (key.empty() ? "" : (ctx_.empty() ? "" : ".") + key) + ": ";
  }

  const nlohmann::json* find(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    seen_.insert(key);
    return &*it;
  }

  void num(const std::string& key, double& out) {
    if (auto* v = find(key)) {
      if (!v->is_number()) throw ConfigError(where(key) + "expected a number");
      out = v->get<double>();
    }
  }
  void integer(const std::string& key, int& out) {
    if (auto* v = find(key)) {
      if (!v->is_number_integer()) throw ConfigError(where(key) + "expected an integer");
      out = v->get<int>();
    }
  }
  void seed(const std::string& key, std::uint64_t& out) {
    if (auto* v = find(key)) {
      if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<long long>() >= 0)) {
        throw ConfigError(where(key) + "expected a non-negative integer");
      }
      out = v->get<std::uint64_t>();
    }
  }
  void boolean(const std::string& key, bool& out) {
    if (auto* v = find(key)) {
      if (!v->is_boolean()) throw ConfigError(where(key) + "expected true or false");
      out = v->get<bool>();
    }
  }
  void str(const std::string& key, std::string& out) {
    if (auto* v = find(key)) {
      if (!v->is_string()) throw ConfigError(where(key) + "expected a string");
      out = v->get<std::string>();
    }
  }
  std::optional<JsonObject> object(const std::string& key) {
    if (auto* v = find(key)) return JsonObject(*v, ctx_.empty() ? key : ctx_ + "." + key);
    return std::nullopt;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError(where(it.key()) + "unknown key");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string ctx_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& msg) {
  if (!ok) throw ConfigError("config: " + msg);
}

int required_weather_days(const ExperimentConfig& cfg) {
  return cfg.days + std::max(1, cfg.kind == ExperimentKind::kExp1 ? cfg.dp.lookahead_days : 1);
}

// ---------------------------------------------------------------- output

std::string num(double v) { return format_double(v); }
std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

class CsvFile {
 public:
  CsvFile() = default;
  CsvFile(const std::filesystem::path& path, const std::string& header, std::vector<std::string>& registry) {
    out_.open(path);
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << header << '\n';
    registry.push_back(path.string());
  }
  bool open() const { return out_.is_open(); }
  void row(std::initializer_list<std::string> fields) {
    if (!out_.is_open()) return;
    bool first = true;
    for (const auto& f : fields) {
      if (!first) out_ << ',';
      out_ << f;
      first = false;
    }
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

std::optional<std::filesystem::path> output_dir(const ExperimentConfig& cfg) {
  if (cfg.output_dir.empty()) return std::nullopt;
  std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

CsvFile open_csv(const std::optional<std::filesystem::path>& dir, const std::string& name, const std::string& header,
                 std::vector<std::string>& registry) {
  if (!dir) return CsvFile();
  return CsvFile(*dir / name, header, registry);
}

// ---------------------------------------------------------------- helpers

/// Exploration decision with a fixed number of draws per call.
template <class Greedy>
Action explore_or(Greedy&& greedy, bool have_policy, const ActionSet& actions, int day, double eps0, Rng& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, actions.size() - 1);
  const double c = coin(rng);
  const std::size_t r = pick(rng);
  if (!have_policy || c < exploration_rate(day, eps0)) return actions[r];
  return greedy();
}

FqiConfig fqi_config(const ExperimentConfig& cfg, int day) {
  FqiConfig f;
  f.forest = cfg.fqi.forest;
  f.features = cfg.fqi.features;
  f.horizon = kQuartersPerDay;
  f.seed = derive_seed(derive_seed(cfg.seed, kFqiStream), static_cast<std::uint64_t>(day));
  return f;
}

HouseConfig house_config(const ExperimentConfig& cfg) {
  HouseConfig h = cfg.house;
  const EtpParameters preset =
      cfg.thermal_preset == "low" ? EtpParameters::low_integrity() : EtpParameters::high_integrity();
  h.etp.ua = preset.ua;
  return h;
}

std::size_t greedy_index(const std::vector<double>& q) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < q.size(); ++a) {
    if (q[a] < q[best]) best = a;
  }
  return best;
}

}  // namespace

// ---------------------------------------------------------------- config API

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::kSimulate:
    case ExperimentKind::kExp1:
      c.device = "heatpump";
      c.price.source = "wholesale";
      break;
    case ExperimentKind::kExp2:
      c.device = "waterheater";
      c.price.source = "sinusoid";
      break;
    case ExperimentKind::kExp3:
      c.device = "heatpump";
      c.price.source = "wholesale";
      c.fqi.variant = "extended";
      c.dp.options.action_levels = 37;
      c.dp.lookahead_days = 1;
      break;
  }
  return c;
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentKind kind) {
  ExperimentConfig c = default_config(kind);
  JsonObject root(j, "");
  if (auto* e = root.find("experiment")) {
    static const char* names[] = {"simulate", "exp1", "exp2", "exp3"};
    if (!e->is_string() || e->get<std::string>() != names[static_cast<int>(kind)]) {
      throw ConfigError(std::string("config: experiment: file is for a different subcommand than ") +
                        names[static_cast<int>(kind)]);
    }
  }
  root.str("device", c.device);
  root.integer("days", c.days);
  root.seed("seed", c.seed);
  root.str("output_dir", c.output_dir);
  root.str("thermal_preset", c.thermal_preset);
  root.str("controller", c.controller);
  root.num("eps0", c.eps0);

  if (auto h = root.object("house")) {
    h->num("solar_aperture_m2", c.house.solar_aperture_m2);
    h->num("u_max_kw", c.house.u_max_kw);
    h->integer("action_steps", c.house.action_steps);
    h->num("t_air_initial", c.house.initial.t_air);
    h->num("t_mass_initial", c.house.initial.t_mass);
    h->num("comfort_low", c.house.band.t_low);
    h->num("comfort_high", c.house.band.t_high);
    h->finish();
  }
  if (auto w = root.object("water_heater")) {
    w->num("volume_l", c.water_heater.device.tank.volume_l);
    w->num("loss_w_per_c", c.water_heater.device.tank.loss_w_per_c);
    w->num("u_max_kw", c.water_heater.device.tank.u_max_kw);
    w->num("t_inlet", c.water_heater.device.t_inlet);
    w->num("t_initial", c.water_heater.device.t_initial);
    w->num("mean_draw_l_per_day", c.water_heater.mean_draw_l_per_day);
    w->num("event_mean_l", c.water_heater.event_mean_l);
    w->finish();
  }
  if (auto p = root.object("price")) {
    p->str("source", c.price.source);
    p->str("path", c.price.path);
    p->num("mean", c.price.mean);
    p->num("amplitude", c.price.amplitude);
    p->num("noise_sd", c.price.noise_sd);
    p->num("base", c.price.wholesale.base);
    p->num("morning_peak", c.price.wholesale.morning_peak);
    p->num("evening_peak", c.price.wholesale.evening_peak);
    p->num("night_dip", c.price.wholesale.night_dip);
    p->num("day_level_sd", c.price.wholesale.day_level_sd);
    p->num("quarter_noise_sd", c.price.wholesale.noise_sd);
    p->num("floor", c.price.wholesale.floor);
    p->finish();
  }
  if (auto w = root.object("weather")) {
    w->str("source", c.weather.source);
    w->str("path", c.weather.path);
    w->num("mean_t_out", c.weather.params.mean_t_out);
    w->num("diurnal_amplitude", c.weather.params.diurnal_amplitude);
    w->num("day_sd", c.weather.params.day_sd);
    w->num("noise_sd", c.weather.params.ar_sd);
    w->num("solar_peak", c.weather.params.solar_peak);
    w->boolean("periodic", c.weather.params.periodic);
    w->finish();
  }
  if (auto f = root.object("forecast")) {
    f->str("mode", c.forecast.mode);
    f->num("t_out_sd", c.forecast.t_out_sd);
    f->num("solar_rel_sd", c.forecast.solar_rel_sd);
    f->finish();
  }
  if (auto f = root.object("fqi")) {
    f->str("variant", c.fqi.variant);
    f->integer("n_trees", c.fqi.forest.n_trees);
    f->integer("k_split", c.fqi.forest.k_split);
    f->integer("n_min", c.fqi.forest.n_min);
    f->boolean("include_quarter", c.fqi.features.include_quarter);
    f->boolean("include_day", c.fqi.features.include_day);
    f->finish();
  }
  if (auto e = root.object("exploration")) {
    e->num("eps0", c.eps0);
    e->finish();
  }
  if (auto d = root.object("default_controller")) {
    d->num("on_below", c.hysteresis_on_below);
    d->num("off_at", c.hysteresis_off_at);
    d->finish();
  }
  if (auto p = root.object("policy_adjust")) {
    p->boolean("enabled", c.policy_adjust.enabled);
    p->integer("n_g", c.policy_adjust.n_g);
    p->str("monotone", c.policy_adjust.monotone);
    p->finish();
  }
  if (auto m = root.object("mfmc")) {
    m->integer("p", c.mfmc.p);
    m->num("xi", c.mfmc.xi);
    m->num("alpha", c.mfmc.alpha);
    m->finish();
  }
  if (auto d = root.object("dp")) {
    d->num("resolution", c.dp.options.resolution);
    d->integer("action_levels", c.dp.options.action_levels);
    d->num("air_margin", c.dp.options.air_margin);
    d->num("mass_margin", c.dp.options.mass_margin);
    d->integer("lookahead_days", c.dp.lookahead_days);
    d->finish();
  }
  root.finish();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentKind kind) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  ExperimentConfig c = config_from_json(j, kind);
  // Relative input paths are resolved against the config file's directory.
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (path.parent_path() / p).string();
  };
  resolve(c.price.path);
  resolve(c.weather.path);
  return c;
}

void ExperimentConfig::validate() const {
  require(days >= 1, "days must be >= 1");
  require(device == "heatpump" || device == "waterheater", "device must be heatpump or waterheater");
  if (kind == ExperimentKind::kExp1 || kind == ExperimentKind::kExp3) {
    require(device == "heatpump", "experiments 1 and 3 use the heatpump device");
  }
  if (kind == ExperimentKind::kExp2) require(device == "waterheater", "experiment 2 uses the waterheater device");
  require(thermal_preset == "high" || thermal_preset == "low", "thermal_preset must be high or low");
  require(controller == "random" || controller == "default", "controller must be random or default");
  require(eps0 >= 0 && std::isfinite(eps0), "eps0 must be >= 0");

  require(house.u_max_kw > 0, "house.u_max_kw must be positive");
  require(house.action_steps >= 2, "house.action_steps must be >= 2");
  require(house.solar_aperture_m2 >= 0, "house.solar_aperture_m2 must be >= 0");
  require(house.band.t_low < house.band.t_high, "house comfort band must satisfy low < high");
  require(hysteresis_on_below <= hysteresis_off_at, "default_controller.on_below must not exceed off_at");

  try {
    water_heater.device.tank.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: water_heater: ") + e.what());
  }
  require(water_heater.device.t_inlet <= water_heater.device.tank.t_ambient,
          "water_heater.t_inlet must not exceed the ambient temperature");
  require(water_heater.mean_draw_l_per_day >= 0, "water_heater.mean_draw_l_per_day must be >= 0");
  require(water_heater.event_mean_l > 0, "water_heater.event_mean_l must be positive");

  require(price.source == "wholesale" || price.source == "sinusoid" || price.source == "csv",
          "price.source must be wholesale, sinusoid or csv");
  require(weather.source == "synthetic" || weather.source == "csv", "weather.source must be synthetic or csv");
  require(forecast.mode == "perfect" || forecast.mode == "noisy", "forecast.mode must be perfect or noisy");
  require(forecast.t_out_sd >= 0 && forecast.solar_rel_sd >= 0, "forecast noise levels must be >= 0");
  require(fqi.variant == "both" || fqi.variant == "standard" || fqi.variant == "extended",
          "fqi.variant must be both, standard or extended");
  if (kind == ExperimentKind::kExp3) require(fqi.variant != "both", "experiment 3 needs fqi.variant standard or extended");
  try {
    fqi.forest.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: fqi: ") + e.what());
  }
  require(policy_adjust.n_g >= 2, "policy_adjust.n_g must be >= 2");
  if (kind == ExperimentKind::kExp2) {
    try {
      parse_monotone_spec(policy_adjust.monotone, feature_dim(Schema::water_heater(), fqi.features));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config: policy_adjust.monotone: ") + e.what());
    }
  }
  require(mfmc.p >= 2, "mfmc.p must be greater than 1");
  require(mfmc.xi >= 0, "mfmc.xi must be >= 0");
  require(mfmc.alpha >= 0, "mfmc.alpha must be >= 0");
  require(dp.options.resolution > 0, "dp.resolution must be positive");
  require(dp.options.action_levels >= 2, "dp.action_levels must be >= 2");
  require(dp.lookahead_days >= 1, "dp.lookahead_days must be >= 1");

  const int need = required_weather_days(*this);
  if (price.source == "csv") {
    require(!price.path.empty(), "price.path is required for csv prices");
    require(std::filesystem::exists(price.path), "price file not found: " + price.path);
    try {
      auto p = load_price_csv(std::filesystem::path(price.path));
      require(p.days() >= need, "price file covers " + std::to_string(p.days()) + " days, need " + std::to_string(need));
    } catch (const ParseError& e) {
      throw ConfigError(std::string("config: price file: ") + e.what());
    }
  }
  if (weather.source == "csv") {
    require(!weather.path.empty(), "weather.path is required for csv weather");
    require(std::filesystem::exists(weather.path), "weather file not found: " + weather.path);
    try {
      auto w = load_weather_csv(std::filesystem::path(weather.path));
      require(w.days() >= need, "weather file covers " + std::to_string(w.days()) + " days, need " + std::to_string(need));
    } catch (const ParseError& e) {
      throw ConfigError(std::string("config: weather file: ") + e.what());
    }
  }
}

WeatherSeries make_weather(const ExperimentConfig& cfg, int days) {
  if (cfg.weather.source == "csv") {
    WeatherSeries w = load_weather_csv(std::filesystem::path(cfg.weather.path));
    const std::size_t n = static_cast<std::size_t>(days) * kQuartersPerDay;
    if (w.size() < n) throw std::runtime_error("weather file too short");
    w.t_out.resize(n);
    w.solar.resize(n);
    w.internal_gains.resize(n);
    return w;
  }
  return synth_weather(days, derive_seed(cfg.seed, kWeatherStream), cfg.weather.params);
}

PriceSeries make_prices(const ExperimentConfig& cfg, int days) {
  if (cfg.price.source == "csv") {
    PriceSeries p = load_price_csv(std::filesystem::path(cfg.price.path));
    const std::size_t n = static_cast<std::size_t>(days) * kQuartersPerDay;
    if (p.values.size() < n) throw std::runtime_error("price file too short");
    p.values.resize(n);
    return p;
  }
  if (cfg.price.source == "sinusoid") {
    return synth_price_sinusoid(days, cfg.price.mean, cfg.price.amplitude, derive_seed(cfg.seed, kPriceStream),
                                cfg.price.noise_sd);
  }
  return synth_price_wholesale(days, derive_seed(cfg.seed, kPriceStream), cfg.price.wholesale);
}

Forecast make_forecast(const ExperimentConfig& cfg, const WeatherSeries& w, int day) {
  Forecast f = perfect_forecast(w, day);
  if (cfg.forecast.mode == "noisy") {
    Rng rng(derive_seed(derive_seed(cfg.seed, kForecastStream), static_cast<std::uint64_t>(day)));
    std::normal_distribution<double> n01(0.0, 1.0);
    for (std::size_t q = 0; q < f.t_out_hat.size(); ++q) {
      f.t_out_hat[q] += cfg.forecast.t_out_sd * n01(rng);
      f.solar_hat[q] = std::max(0.0, f.solar_hat[q] * (1.0 + cfg.forecast.solar_rel_sd * n01(rng)));
    }
  }
  return f;
}

// ---------------------------------------------------------------- simulate

SimulateResult run_simulate(const ExperimentConfig& cfg) {
  cfg.validate();
  SimulateResult res;
  const auto dir = output_dir(cfg);
  const int days = cfg.days;
  PriceSeries prices = make_prices(cfg, days + 1);
  Rng rng(derive_seed(cfg.seed, kExplorationStream));
  const CostFunction cost = dynamic_price_cost();

  if (cfg.device == "heatpump") {
    WeatherSeries weather = make_weather(cfg, days + 1);
    HouseConfig hc = house_config(cfg);
    HeatPumpHouse house(hc, weather);
    HysteresisController hyst(cfg.hysteresis_on_below, cfg.hysteresis_off_at, hc.u_max_kw);
    const ActionSet actions = hc.actions();
    res.batch = Batch(Schema::heat_pump());
    for (int k = 0; k < days * kQuartersPerDay; ++k) {
      State x = house.observe();
      std::uniform_int_distribution<std::size_t> pick(0, actions.size() - 1);
      Action a = cfg.controller == "default" ? hyst.act(x.physical[0]) : actions[pick(rng)];
      Transition t = house.step(a);
      res.cost += cost(t, prices.values[static_cast<std::size_t>(k)]);
      res.batch.append(std::move(t));
    }
    if (dir) {
      std::ofstream w(*dir / "weather.csv");
      save_weather_csv(weather, w);
      res.files.push_back((*dir / "weather.csv").string());
    }
  } else {
    auto draws = synth_draws(days + 1, cfg.water_heater.mean_draw_l_per_day, derive_seed(cfg.seed, kDrawStream),
                             cfg.water_heater.event_mean_l);
    WaterHeater ewh(cfg.water_heater.device, draws);
    const ActionSet actions = cfg.water_heater.device.actions();
    res.batch = Batch(Schema::water_heater());
    for (int k = 0; k < days * kQuartersPerDay; ++k) {
      std::uniform_int_distribution<std::size_t> pick(0, actions.size() - 1);
      Action a = actions[pick(rng)];
      if (cfg.controller == "default") {
        // thermostat on the mean sensor temperature: keep the tank above 55 degC
        a = ewh.observe().physical[0] < 55.0 ? Action{actions.max_kw()} : Action{0.0};
      }
      Transition t = ewh.step(a);
      res.cost += cost(t, prices.values[static_cast<std::size_t>(k)]);
      res.batch.append(std::move(t));
    }
  }
  if (dir) {
    save_batch(res.batch, *dir / "batch.csv");
    res.files.push_back((*dir / "batch.csv").string());
    std::ofstream p(*dir / "prices.csv");
    save_price_csv(prices, p);
    res.files.push_back((*dir / "prices.csv").string());
  }
  return res;
}

// ---------------------------------------------------------------- experiment 1

Exp1Result run_experiment1(const ExperimentConfig& cfg) {
  cfg.validate();
  Exp1Result res;
  const auto dir = output_dir(cfg);
  const int D = cfg.days;
  const int L = cfg.dp.lookahead_days;
  const WeatherSeries weather = make_weather(cfg, required_weather_days(cfg));
  const PriceSeries prices = make_prices(cfg, required_weather_days(cfg));
  const HouseConfig hc = house_config(cfg);
  const ActionSet actions = hc.actions();
  const CostFunction cost = dynamic_price_cost();

  struct FqiArm {
    std::string name;
    bool extended;
    bool enabled;
    HeatPumpHouse house;
    Batch batch{Schema::heat_pump()};
    Rng rng;
    double day_cost = 0, cum = 0, energy = 0;
  };
  const std::uint64_t explore_seed = derive_seed(cfg.seed, kExplorationStream);
  std::vector<FqiArm> arms;
  arms.push_back({"standard", false, cfg.fqi.variant != "extended", HeatPumpHouse(hc, weather), Batch(Schema::heat_pump()),
                  Rng(explore_seed)});
  arms.push_back({"extended", true, cfg.fqi.variant != "standard", HeatPumpHouse(hc, weather), Batch(Schema::heat_pump()),
                  Rng(explore_seed)});
  HeatPumpHouse house_default(hc, weather), house_optimal(hc, weather);
  HysteresisController hyst(cfg.hysteresis_on_below, cfg.hysteresis_off_at, hc.u_max_kw);
  double energy_default = 0, energy_optimal = 0;

  CsvFile daily = open_csv(dir, "exp1_daily.csv",
                           "day,c_default,c_optimal,c_standard,c_extended,m_standard,m_extended,cum_default,"
                           "cum_optimal,cum_standard,cum_extended,energy_default,energy_optimal,energy_standard,"
                           "energy_extended",
                           res.files);
  CsvFile quarters = open_csv(dir, "exp1_quarters.csv", "day,quarter,arm,t_in,u_request,u_realized,price,cost",
                              res.files);
  auto log_q = [&](int day, int q, const char* arm, const Transition& t, double price, double c) {
    quarters.row({std::to_string(day), std::to_string(q), arm, num(t.x.physical[0]), num(t.u.kw), num(t.u_ph.kw),
                  num(price), num(c)});
  };

  std::vector<double> m_std, m_ext;
  for (int d = 1; d <= D; ++d) {
    const int k0 = (d - 1) * kQuartersPerDay;
    const auto day_prices = prices.day(d - 1);
    const FqiConfig fcfg = fqi_config(cfg, d);
    const Forecast forecast = make_forecast(cfg, weather, d - 1);

    std::vector<std::optional<QFunction>> q(arms.size());
    for (std::size_t i = 0; i < arms.size(); ++i) {
      if (!arms[i].enabled || arms[i].batch.empty()) continue;
      q[i] = arms[i].extended ? fqi_extended(arms[i].batch, forecast, day_prices, cost, actions, fcfg)
                              : fqi_standard(arms[i].batch, day_prices, cost, actions, fcfg);
    }
    const DayInputs inputs =
        DayInputs::from_series(weather, prices.values, k0, hc.solar_aperture_m2, L * kQuartersPerDay);
    const OptimalResult plan = optimal_controller(hc, house_optimal.physical(), inputs, cfg.dp.options);

    double c_def = 0, c_opt = 0;
    for (auto& a : arms) a.day_cost = 0;
    for (int qi = 0; qi < kQuartersPerDay; ++qi) {
      const double price = day_prices[static_cast<std::size_t>(qi)];
      {
        Transition t = house_default.step(hyst.act(house_default.observe().physical[0]));
        const double c = cost(t, price);
        c_def += c;
        energy_default += t.u_ph.kw * kDtHours;
        log_q(d, qi + 1, "default", t, price, c);
      }
      {
        Transition t = house_optimal.step(plan.actions[static_cast<std::size_t>(qi)]);
        const double c = cost(t, price);
        c_opt += c;
        energy_optimal += t.u_ph.kw * kDtHours;
        log_q(d, qi + 1, "optimal", t, price, c);
      }
      for (std::size_t i = 0; i < arms.size(); ++i) {
        auto& arm = arms[i];
        if (!arm.enabled) continue;
        const State x = arm.house.observe();
        const Action u = explore_or([&] { return greedy_action(*q[i], x); }, q[i].has_value(), actions, d, cfg.eps0,
                                    arm.rng);
        Transition t = arm.house.step(u);
        const double c = cost(t, price);
        arm.day_cost += c;
        arm.energy += t.u_ph.kw * kDtHours;
        log_q(d, qi + 1, arm.name.c_str(), t, price, c);
        arm.batch.append(std::move(t));
      }
    }

    Exp1Day day;
    day.day = d;
    day.c_default = c_def;
    day.c_optimal = c_opt;
    day.c_standard = arms[0].day_cost;
    day.c_extended = arms[1].day_cost;
    if (arms[0].enabled) day.m_standard = metric_m(day.c_standard, c_def, c_opt);
    if (arms[1].enabled) day.m_extended = metric_m(day.c_extended, c_def, c_opt);
    if (day.m_standard) m_std.push_back(*day.m_standard);
    if (day.m_extended) m_ext.push_back(*day.m_extended);
    res.cum_default += c_def;
    res.cum_optimal += c_opt;
    for (auto& a : arms) a.cum += a.day_cost;
    res.cum_standard = arms[0].cum;
    res.cum_extended = arms[1].cum;
    res.days.push_back(day);
    auto arm_field = [&](std::size_t i, double v) { return arms[i].enabled ? num(v) : std::string(); };
    daily.row({std::to_string(d), num(c_def), num(c_opt), arm_field(0, day.c_standard), arm_field(1, day.c_extended),
               opt(day.m_standard), opt(day.m_extended), num(res.cum_default), num(res.cum_optimal),
               arm_field(0, arms[0].cum), arm_field(1, arms[1].cum), num(energy_default), num(energy_optimal),
               arm_field(0, arms[0].energy), arm_field(1, arms[1].energy)});
  }
  auto mean = [](const std::vector<double>& v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  res.mean_m_standard = mean(m_std);
  res.mean_m_extended = mean(m_ext);
  return res;
}

// ---------------------------------------------------------------- experiment 2

Exp2Result run_experiment2(const ExperimentConfig& cfg) {
  cfg.validate();
  Exp2Result res;
  const auto dir = output_dir(cfg);
  const int D = cfg.days;
  const PriceSeries prices = make_prices(cfg, D + 1);
  const auto draws = synth_draws(D + 1, cfg.water_heater.mean_draw_l_per_day, derive_seed(cfg.seed, kDrawStream),
                                 cfg.water_heater.event_mean_l);
  const WaterHeaterConfig wcfg = cfg.water_heater.device;
  const ActionSet actions = wcfg.actions();
  const CostFunction cost = dynamic_price_cost();
  const FeatureOptions fo = cfg.fqi.features;
  const std::size_t dims = feature_dim(Schema::water_heater(), fo);
  res.directions = parse_monotone_spec(cfg.policy_adjust.monotone, dims);

  struct Arm {
    std::string name;
    bool adjusted;
    WaterHeater ewh;
    Batch batch{Schema::water_heater()};
    Rng rng;
    double day_cost = 0, cum = 0, energy = 0;
  };
  const std::uint64_t explore_seed = derive_seed(cfg.seed, kExplorationStream);
  std::vector<Arm> arms;
  arms.push_back({"original", false, WaterHeater(wcfg, draws), Batch(Schema::water_heater()), Rng(explore_seed)});
  arms.push_back({"adjusted", cfg.policy_adjust.enabled, WaterHeater(wcfg, draws), Batch(Schema::water_heater()),
                  Rng(explore_seed)});

  CsvFile daily = open_csv(dir, "exp2_daily.csv",
                           "day,cost_original,cost_adjusted,cum_original,cum_adjusted,energy_original,energy_adjusted",
                           res.files);
  CsvFile quarters =
      open_csv(dir, "exp2_quarters.csv", "day,quarter,arm,t_mean,soc,u_request,u_realized,price,cost", res.files);
  CsvFile policies =
      open_csv(dir, "exp2_policies.csv", "day,quarter,temperature,original_kw,adjusted_kw", res.files);
  CsvFile snaps = open_csv(dir, "exp2_snapshots.csv", "day,mean_abs_difference,max_violation", res.files);

  std::set<int> snapshot_days{7, 14, 21, D};
  for (int d = 1; d <= D; ++d) {
    const auto day_prices = prices.day(d - 1);
    const FqiConfig fcfg = fqi_config(cfg, d);

    std::vector<std::optional<QFunction>> q(arms.size());
    std::optional<FuzzyPolicy> fuzzy;
    for (std::size_t i = 0; i < arms.size(); ++i) {
      if (arms[i].batch.empty()) continue;
      q[i] = fqi_standard(arms[i].batch, day_prices, cost, actions, fcfg);
    }
    if (arms[1].adjusted && q[1]) {
      // Box over the observed states; samples are the greedy policy at every
      // batch state plus every grid node.
      std::vector<double> lo(dims, std::numeric_limits<double>::infinity());
      std::vector<double> hi(dims, -std::numeric_limits<double>::infinity());
      std::vector<std::vector<double>> coords;
      for (const auto& t : arms[1].batch.transitions()) {
        coords.push_back(policy_coordinates(t.x, fo));
        for (std::size_t k = 0; k < dims; ++k) {
          lo[k] = std::min(lo[k], coords.back()[k]);
          hi[k] = std::max(hi[k], coords.back()[k]);
        }
      }
      if (fo.include_quarter) {
        lo[0] = 1;
        hi[0] = kQuartersPerDay;
      }
      for (std::size_t k = 0; k < dims; ++k) {
        if (!(hi[k] - lo[k] > 1e-6)) {
          lo[k] -= 0.5;
          hi[k] += 0.5;
        }
      }
      FuzzyGrid grid(lo, hi, cfg.policy_adjust.n_g);
      std::vector<PolicySample> samples;
      samples.reserve(coords.size() + grid.nodes());
      for (auto& c : coords) {
        const double a = actions.levels()[greedy_index(q[1]->values_at(c))];
        samples.push_back({std::move(c), a});
      }
      for (std::size_t j = 0; j < grid.nodes(); ++j) {
        auto c = grid.node(j);
        const double a = actions.levels()[greedy_index(q[1]->values_at(c))];
        samples.push_back({std::move(c), a});
      }
      fuzzy = fit_monotone(samples, grid, res.directions, nullptr, fo);
      res.last_adjusted = fuzzy;

      if (snapshot_days.count(d)) {
        Exp2Snapshot snap;
        snap.day = d;
        snap.adjusted = *fuzzy;
        snap.max_violation = monotonicity_violation(*fuzzy, res.directions);
        const int nt = 31;
        double mad = 0;
        int count = 0;
        const std::size_t tdim = fo.include_quarter ? 1 : 0;
        for (int qq = 1; qq <= kQuartersPerDay; ++qq) {
          for (int i = 0; i < nt; ++i) {
            std::vector<double> c = lo;
            for (std::size_t k = 0; k < dims; ++k) c[k] = 0.5 * (lo[k] + hi[k]);
            if (fo.include_quarter) c[0] = qq;
            const double temp = lo[tdim] + (hi[tdim] - lo[tdim]) * i / (nt - 1);
            c[tdim] = temp;
            const double orig = actions.levels()[greedy_index(q[1]->values_at(c))];
            const double adj = evaluate(*fuzzy, c, actions).kw;
            mad += std::abs(orig - adj);
            ++count;
            policies.row({std::to_string(d), std::to_string(qq), num(temp), num(orig), num(adj)});
          }
          if (!fo.include_quarter) break;
        }
        snap.mean_abs_difference = mad / count;
        snaps.row({std::to_string(d), num(snap.mean_abs_difference), num(snap.max_violation)});
        res.snapshots.push_back(std::move(snap));
      }
    }

    for (auto& a : arms) a.day_cost = 0;
    for (int qi = 0; qi < kQuartersPerDay; ++qi) {
      const double price = day_prices[static_cast<std::size_t>(qi)];
      for (std::size_t i = 0; i < arms.size(); ++i) {
        auto& arm = arms[i];
        const State x = arm.ewh.observe();
        auto greedy = [&] {
          if (arm.adjusted && fuzzy) return evaluate(*fuzzy, x, actions);
          return greedy_action(*q[i], x);
        };
        const Action u = explore_or(greedy, q[i].has_value(), actions, d, cfg.eps0, arm.rng);
        Transition t = arm.ewh.step(u);
        const double c = cost(t, price);
        arm.day_cost += c;
        arm.energy += t.u_ph.kw * kDtHours;
        quarters.row({std::to_string(d), std::to_string(qi + 1), arm.name, num(t.x.physical[0]), num(*t.x.soc),
                      num(t.u.kw), num(t.u_ph.kw), num(price), num(c)});
        arm.batch.append(std::move(t));
      }
    }
    for (auto& a : arms) a.cum += a.day_cost;
    res.cost_original.push_back(arms[0].day_cost);
    res.cost_adjusted.push_back(arms[1].day_cost);
    daily.row({std::to_string(d), num(arms[0].day_cost), num(arms[1].day_cost), num(arms[0].cum), num(arms[1].cum),
               num(arms[0].energy), num(arms[1].energy)});
  }
  res.cum_original = arms[0].cum;
  res.cum_adjusted = arms[1].cum;
  return res;
}

// ---------------------------------------------------------------- experiment 3

Exp3Result run_experiment3(const ExperimentConfig& cfg) {
  cfg.validate();
  Exp3Result res;
  const auto dir = output_dir(cfg);
  const int D = cfg.days;
  const WeatherSeries weather = make_weather(cfg, required_weather_days(cfg));
  const PriceSeries prices = make_prices(cfg, required_weather_days(cfg));
  const HouseConfig hc = house_config(cfg);
  const ActionSet actions = hc.actions();
  const CostFunction cost = day_ahead_cost(cfg.mfmc.alpha);
  HeatPumpHouse house(hc, weather);
  Batch batch(Schema::heat_pump());
  Rng rng(derive_seed(cfg.seed, kExplorationStream));
  const std::size_t need = static_cast<std::size_t>(cfg.mfmc.p) * (kQuartersPerDay - 1);

  CsvFile daily = open_csv(dir, "exp3_daily.csv", "day,phase,c_mfmc,c_oc,m_ratio,deviation_kwh,energy_kwh", res.files);
  CsvFile plans = open_csv(dir, "exp3_plans.csv", "day,quarter,planned_kw,realized_kw,price,cost", res.files);

  for (int d = 1; d <= D; ++d) {
    const int k0 = (d - 1) * kQuartersPerDay;
    const auto day_prices = prices.day(d - 1);
    Exp3Day day;
    day.day = d;

    DayAheadPlan plan;
    if (batch.size() < need) {
      day.exploration = true;
      std::uniform_int_distribution<std::size_t> pick(0, actions.size() - 1);
      for (int qi = 0; qi < kQuartersPerDay; ++qi) plan.u_plan.push_back(actions.levels()[pick(rng)]);
    } else {
      MfmcConfig mc;
      mc.p = cfg.mfmc.p;
      mc.xi = cfg.mfmc.xi;
      mc.fqi = fqi_config(cfg, d);
      const Forecast forecast = make_forecast(cfg, weather, d - 1);
      const bool extended = cfg.fqi.variant == "extended";
      Exp3Planning pl;
      pl.day = d;
      pl.batch_size = batch.size();
      pl.x1 = house.observe();
      if (extended) pl.forecast = forecast;
      pl.config = mc;
      pl.result = mfmc(batch, extended ? &forecast : nullptr, day_prices, cost, actions, pl.x1, mc);
      plan = make_plan(pl.result.trajectories);
      res.planning.push_back(std::move(pl));
    }

    const DayInputs inputs = DayInputs::from_series(weather, prices.values, k0, hc.solar_aperture_m2);
    const OptimalResult oc = optimal_controller(hc, house.physical(), inputs, cfg.dp.options);
    day.c_oc = oc.cost;

    PlanOutcome out = evaluate_plan(plan, [&](Action a) { return house.step(a); }, day_prices, cfg.mfmc.alpha);
    day.c_mfmc = out.cost;
    day.deviation_kwh = out.deviation_kwh;
    day.energy_kwh = out.energy_kwh;
    day.m_ratio = metric_m_ratio(day.c_mfmc, day.c_oc);
    for (int qi = 0; qi < kQuartersPerDay; ++qi) {
      const auto i = static_cast<std::size_t>(qi);
      plans.row({std::to_string(d), std::to_string(qi + 1), num(plan.u_plan[i]), num(out.transitions[i].u_ph.kw),
                 num(day_prices[i]), num(out.quarter_costs[i])});
    }
    for (auto& t : out.transitions) batch.append(std::move(t));
    daily.row({std::to_string(d), day.exploration ? "explore" : "plan", num(day.c_mfmc), num(day.c_oc),
               opt(day.m_ratio), num(day.deviation_kwh), num(day.energy_kwh)});
    res.days.push_back(day);
  }
  res.batch = std::move(batch);
  return res;
}

}  // namespace batchrl
