#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "batchrl/errors.hpp"
#include "batchrl/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> days;
  std::string out;
};

void add_common(CLI::App* app, CommonFlags& f, bool with_days = true) {
  app->add_option("--config", f.config, "JSON configuration file");
  app->add_option("--seed", f.seed, "Override the configured seed");
  if (with_days) app->add_option("--days", f.days, "Override the number of simulated days");
  app->add_option("--out", f.out, "Output directory (or file for train)");
}

batchrl::ExperimentConfig resolve(const CommonFlags& f, batchrl::ExperimentKind kind) {
  batchrl::ExperimentConfig cfg =
      f.config.empty() ? batchrl::default_config(kind) : batchrl::load_config(f.config, kind);
  if (f.seed) cfg.seed = *f.seed;
  if (f.days) cfg.days = *f.days;
  if (!f.out.empty()) cfg.output_dir = f.out;
  return cfg;
}

void print_files(const std::vector<std::string>& files) {
  for (const auto& f : files) std::cout << "wrote " << f << '\n';
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batch reinforcement learning for residential demand response"};
  app.require_subcommand(1);

  CommonFlags sim_f, e1_f, e2_f, e3_f, train_f, plan_f;
  auto* sim = app.add_subcommand("simulate", "Simulate a device and log a transition batch");
  add_common(sim, sim_f);
  auto* e1 = app.add_subcommand("exp1", "Heat pump: standard vs extended fitted Q-iteration");
  add_common(e1, e1_f);
  auto* e2 = app.add_subcommand("exp2", "Water heater: policy with and without monotone adjustment");
  add_common(e2, e2_f);
  std::string monotone;
  e2->add_option("--monotone", monotone, "Monotonicity directions dim:sign,... over (quarter, temperature)");
  auto* e3 = app.add_subcommand("exp3", "Heat pump: day-ahead planning with the Monte Carlo planner");
  add_common(e3, e3_f);

  std::string batch_path, prices_path, forecast_path, variant = "standard";
  int price_day = 1, forecast_day = 1;
  auto* train = app.add_subcommand("train", "Fit a Q-function on a batch file");
  add_common(train, train_f, false);
  train->add_option("--batch", batch_path, "Batch file")->required();
  train->add_option("--prices", prices_path, "Price CSV")->required();
  train->add_option("--price-day", price_day, "1-based day of the price file used for costs");
  train->add_option("--forecast", forecast_path, "Weather CSV whose day --forecast-day serves as forecast");
  train->add_option("--forecast-day", forecast_day, "1-based day of the forecast file");
  train->add_option("--variant", variant, "standard or extended")->check(CLI::IsMember({"standard", "extended"}));

  auto* plan = app.add_subcommand("plan", "Build a day-ahead plan from a batch file");
  add_common(plan, plan_f, false);
  plan->add_option("--batch", batch_path, "Batch file")->required();
  plan->add_option("--prices", prices_path, "Price CSV")->required();
  plan->add_option("--price-day", price_day, "1-based day of the price file to plan for");
  plan->add_option("--forecast", forecast_path, "Weather CSV whose day --forecast-day serves as forecast");
  plan->add_option("--forecast-day", forecast_day, "1-based day of the forecast file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  using batchrl::ExperimentKind;
  try {
    if (*sim) {
      auto cfg = resolve(sim_f, ExperimentKind::kSimulate);
      auto res = batchrl::run_simulate(cfg);
      std::cout << "simulated " << res.batch.size() << " transitions, cost " << batchrl::format_double(res.cost)
                << " EUR\n";
      print_files(res.files);
    } else if (*e1) {
      auto cfg = resolve(e1_f, ExperimentKind::kExp1);
      auto res = batchrl::run_experiment1(cfg);
      std::cout << "mean M standard " << batchrl::format_double(res.mean_m_standard) << ", extended "
                << batchrl::format_double(res.mean_m_extended) << '\n';
      print_files(res.files);
    } else if (*e2) {
      auto cfg = resolve(e2_f, ExperimentKind::kExp2);
      if (!monotone.empty()) cfg.policy_adjust.monotone = monotone;
      auto res = batchrl::run_experiment2(cfg);
      std::cout << "cumulative cost original " << batchrl::format_double(res.cum_original) << ", adjusted "
                << batchrl::format_double(res.cum_adjusted) << '\n';
      print_files(res.files);
    } else if (*e3) {
      auto cfg = resolve(e3_f, ExperimentKind::kExp3);
      auto res = batchrl::run_experiment3(cfg);
      std::vector<double> ratios;
      for (const auto& d : res.days) {
        if (d.m_ratio) ratios.push_back(*d.m_ratio);
      }
      if (auto m = mean_of(ratios)) std::cout << "mean M ratio " << batchrl::format_double(*m) << '\n';
      print_files(res.files);
    } else if (*train || *plan) {
      const bool is_plan = static_cast<bool>(*plan);
      const CommonFlags& f = is_plan ? plan_f : train_f;
      CommonFlags cf = f;
      cf.out.clear();
      auto cfg = resolve(cf, is_plan ? ExperimentKind::kExp3 : ExperimentKind::kExp1);
      cfg.validate();
      if (f.out.empty()) throw batchrl::ConfigError("--out is required");
      const batchrl::Batch batch = batchrl::load_batch(std::filesystem::path(batch_path));
      const batchrl::PriceSeries prices = batchrl::load_price_csv(std::filesystem::path(prices_path));
      if (price_day < 1 || price_day > prices.days()) throw batchrl::ConfigError("--price-day outside the price file");
      const auto day_prices = prices.day(price_day - 1);
      std::optional<batchrl::Forecast> forecast;
      if (!forecast_path.empty()) {
        const auto w = batchrl::load_weather_csv(std::filesystem::path(forecast_path));
        if (forecast_day < 1 || forecast_day > w.days()) {
          throw batchrl::ConfigError("--forecast-day outside the weather file");
        }
        forecast = batchrl::make_forecast(cfg, w, forecast_day - 1);
      }
      const batchrl::ActionSet actions = batch.schema().name == "waterheater"
                                             ? cfg.water_heater.device.actions()
                                             : cfg.house.actions();
      batchrl::FqiConfig fcfg;
      fcfg.forest = cfg.fqi.forest;
      fcfg.features = cfg.fqi.features;
      fcfg.seed = cfg.seed;
      const auto cost = is_plan ? batchrl::day_ahead_cost(cfg.mfmc.alpha) : batchrl::dynamic_price_cost();

      if (!is_plan) {
        if (variant == "extended" && !forecast) throw batchrl::ConfigError("--variant extended needs --forecast");
        auto q = variant == "extended" ? batchrl::fqi_extended(batch, *forecast, day_prices, cost, actions, fcfg)
                                       : batchrl::fqi_standard(batch, day_prices, cost, actions, fcfg);
        q.save(f.out);
        std::cout << "wrote " << f.out << '\n';
      } else {
        if (batch.empty()) throw std::runtime_error("empty batch");
        // Start state: last observed state with time rolled to quarter 1.
        batchrl::State x1 = batch.transitions().back().x_next;
        if (x1.time.quarter != 1) x1.time = batchrl::TimeFeature{1, x1.time.day % batchrl::kDaysPerWeek + 1};
        batchrl::MfmcConfig mc;
        mc.p = cfg.mfmc.p;
        mc.xi = cfg.mfmc.xi;
        mc.fqi = fcfg;
        auto res = batchrl::mfmc(batch, forecast ? &*forecast : nullptr, day_prices, cost, actions, x1, mc);
        auto dayplan = batchrl::make_plan(res.trajectories);
        std::filesystem::create_directories(f.out);
        const auto dir = std::filesystem::path(f.out);
        std::ofstream csv(dir / "plan.csv");
        csv << "quarter,planned_kw\n";
        for (std::size_t k = 0; k < dayplan.u_plan.size(); ++k) {
          csv << k + 1 << ',' << batchrl::format_double(dayplan.u_plan[k]) << '\n';
        }
        nlohmann::json prov;
        prov["p"] = mc.p;
        prov["xi"] = mc.xi;
        prov["trajectories"] = nlohmann::json::array();
        for (const auto& t : res.trajectories) {
          std::vector<double> kw;
          for (auto a : t.actions) kw.push_back(a.kw);
          prov["trajectories"].push_back({{"actions_kw", kw}, {"consumed", t.consumed}});
        }
        std::ofstream js(dir / "provenance.json");
        js << prov.dump(2) << '\n';
        std::cout << "wrote " << (dir / "plan.csv").string() << "\nwrote " << (dir / "provenance.json").string()
                  << '\n';
      }
    }
  } catch (const batchrl::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
