#include "batchrl/exogenous.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "batchrl/errors.hpp"

namespace batchrl {

std::span<const double> PriceSeries::day(int d) const {
  if (d < 0 || d >= days()) throw std::out_of_range("price day out of range");
  return std::span<const double>(values).subspan(static_cast<std::size_t>(d) * kQuartersPerDay,
                                                 kQuartersPerDay);
}

void PriceSeries::validate() const {
  if (values.empty() || values.size() % kQuartersPerDay != 0) {
    throw std::invalid_argument("price series length must be a positive multiple of 96");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("price series holds a non-finite value");
  }
}

void WeatherSeries::validate() const {
  if (t_out.empty() || t_out.size() % kQuartersPerDay != 0) {
    throw std::invalid_argument("weather series length must be a positive multiple of 96");
  }
  if (solar.size() != t_out.size() || internal_gains.size() != t_out.size()) {
    throw std::invalid_argument("weather columns differ in length");
  }
  for (std::size_t i = 0; i < t_out.size(); ++i) {
    if (!std::isfinite(t_out[i]) || !(solar[i] >= 0) || !(internal_gains[i] >= 0)) {
      throw std::invalid_argument("weather row " + std::to_string(i) + " out of range");
    }
  }
}

std::vector<double> Forecast::exo_at(int quarter) const {
  return {t_out_hat.at(static_cast<std::size_t>(quarter - 1)),
          solar_hat.at(static_cast<std::size_t>(quarter - 1))};
}

void Forecast::validate() const {
  if (t_out_hat.size() != kQuartersPerDay || solar_hat.size() != kQuartersPerDay) {
    throw std::invalid_argument("forecast must cover exactly 96 quarters");
  }
}

namespace {

std::vector<std::vector<double>> read_numeric_csv(std::istream& in, const std::vector<std::string>& header) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw ParseError("empty CSV, expected a header", 1);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    if (cols != header) {
      std::string want;
      for (const auto& h : header) want += (want.empty() ? "" : ",") + h;
      throw ParseError("expected header '" + want + "'", 1);
    }
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t row = rows.size();
    std::vector<double> vals;
    std::size_t start = 0;
    while (true) {
      std::size_t pos = line.find(',', start);
      std::string_view cell = std::string_view(line).substr(
          start, pos == std::string::npos ? std::string::npos : pos - start);
      try {
        vals.push_back(parse_double(cell));
      } catch (const std::invalid_argument& e) {
        throw ParseError("row " + std::to_string(row) + ", column " + std::to_string(vals.size() + 1) +
                             ": " + e.what(),
                         line_no);
      }
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (vals.size() != header.size()) {
      throw ParseError("row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                           " columns, got " + std::to_string(vals.size()),
                       line_no);
    }
    if (vals[0] != static_cast<double>(row)) {
      throw ParseError("row " + std::to_string(row) + ": quarter_index out of sequence", line_no);
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty() || rows.size() % kQuartersPerDay != 0) {
    throw ParseError("series length " + std::to_string(rows.size()) + " is not a positive multiple of 96", 0);
  }
  return rows;
}

}  // namespace

PriceSeries load_price_csv(std::istream& in) {
  auto rows = read_numeric_csv(in, {"quarter_index", "price_eur_per_kwh"});
  PriceSeries p;
  p.values.reserve(rows.size());
  for (const auto& r : rows) p.values.push_back(r[1]);
  p.validate();
  return p;
}

PriceSeries load_price_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load_price_csv(in);
}

WeatherSeries load_weather_csv(std::istream& in) {
  auto rows = read_numeric_csv(in, {"quarter_index", "t_out_c", "solar_wm2", "internal_gain_w"});
  WeatherSeries w;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r[2] < 0 || r[3] < 0) {
      throw ParseError("row " + std::to_string(i) + ": solar and internal gains must be >= 0", i + 2);
    }
    w.t_out.push_back(r[1]);
    w.solar.push_back(r[2]);
    w.internal_gains.push_back(r[3]);
  }
  w.validate();
  return w;
}

WeatherSeries load_weather_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load_weather_csv(in);
}

std::variant<PriceSeries, WeatherSeries> load_csv(const std::filesystem::path& path, CsvKind kind) {
  if (kind == CsvKind::kPrice) return load_price_csv(path);
  return load_weather_csv(path);
}

void save_price_csv(const PriceSeries& p, std::ostream& out) {
  out << "quarter_index,price_eur_per_kwh\n";
  for (std::size_t i = 0; i < p.values.size(); ++i) out << i << ',' << format_double(p.values[i]) << '\n';
}

void save_weather_csv(const WeatherSeries& w, std::ostream& out) {
  out << "quarter_index,t_out_c,solar_wm2,internal_gain_w\n";
  for (std::size_t i = 0; i < w.size(); ++i) {
    out << i << ',' << format_double(w.t_out[i]) << ',' << format_double(w.solar[i]) << ','
        << format_double(w.internal_gains[i]) << '\n';
  }
}

PriceSeries synth_price_sinusoid(int days, double mean, double amplitude, std::uint64_t seed,
                                 double noise_sd) {
  if (days < 1) throw std::invalid_argument("days must be >= 1");
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  PriceSeries p;
  const std::size_t n = static_cast<std::size_t>(days) * kQuartersPerDay;
  p.values.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    // phase taken within the day so lambda_k == lambda_{k+96} holds exactly
    double phase = 2.0 * std::numbers::pi * static_cast<double>(k % kQuartersPerDay) / kQuartersPerDay;
    p.values[k] = mean + amplitude * std::sin(phase);
    if (noise_sd > 0) p.values[k] += noise_sd * noise(rng);
  }
  return p;
}

PriceSeries synth_price_wholesale(int days, std::uint64_t seed, const WholesalePriceParams& prm) {
  if (days < 1) throw std::invalid_argument("days must be >= 1");
  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  auto bump = [](double q, double centre, double width) {
    double z = (q - centre) / width;
    return std::exp(-0.5 * z * z);
  };
  PriceSeries p;
  p.values.reserve(static_cast<std::size_t>(days) * kQuartersPerDay);
  for (int d = 0; d < days; ++d) {
    double level = prm.day_level_sd * gauss(rng);
    double evening_scale = 1.0 + 0.3 * gauss(rng);
    for (int q = 1; q <= kQuartersPerDay; ++q) {
      double v = prm.base + level + prm.morning_peak * bump(q, 34, 6) +
                 prm.evening_peak * evening_scale * bump(q, 76, 7) - prm.night_dip * bump(q, 16, 10) +
                 prm.noise_sd * gauss(rng);
      p.values.push_back(std::max(v, prm.floor));
    }
  }
  return p;
}

std::vector<double> ar1_series(std::size_t n, double phi, double stationary_sd, Rng& rng) {
  if (!(std::abs(phi) < 1.0)) throw std::invalid_argument("AR(1) requires |phi| < 1");
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double innov = stationary_sd * std::sqrt(1.0 - phi * phi);
  std::vector<double> out(n);
  double x = stationary_sd * gauss(rng);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = x;
    x = phi * x + innov * gauss(rng);
  }
  return out;
}

WeatherSeries synth_weather(int days, std::uint64_t seed, const WeatherParams& p) {
  if (days < 1) throw std::invalid_argument("days must be >= 1");
  Rng rng(seed);
  const int gen_days = p.periodic ? 1 : days;
  const std::size_t n = static_cast<std::size_t>(gen_days) * kQuartersPerDay;

  // daily level, interpolated between consecutive noons
  auto level = ar1_series(static_cast<std::size_t>(gen_days) + 2, p.day_phi, p.day_sd, rng);
  auto fast = ar1_series(n, p.ar_phi, p.ar_sd, rng);
  std::uniform_real_distribution<double> clear(p.cloud_min, 1.0);
  std::vector<double> clearness(static_cast<std::size_t>(gen_days));
  for (auto& c : clearness) c = clear(rng);
  std::normal_distribution<double> gauss(0.0, 1.0);

  WeatherSeries w;
  w.t_out.resize(n);
  w.solar.resize(n);
  w.internal_gains.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const int d = static_cast<int>(k / kQuartersPerDay);
    const double q = static_cast<double>(k % kQuartersPerDay) + 1.0;
    // position relative to noon of day d, in days
    double rel = (q - 48.0) / kQuartersPerDay;
    double lv = rel >= 0 ? (1 - rel) * level[d + 1] + rel * level[d + 2]
                         : (-rel) * level[d] + (1 + rel) * level[d + 1];
    double diurnal = p.diurnal_amplitude * std::sin(2.0 * std::numbers::pi * (q - 36.0) / kQuartersPerDay);
    w.t_out[k] = p.mean_t_out + lv + diurnal + fast[k];

    double sun = 0.0;
    if (q > 32.0 && q < 68.0) sun = std::sin(std::numbers::pi * (q - 32.0) / 36.0);
    w.solar[k] = p.solar_peak * clearness[d] * sun;

    double occupancy = 0.0;
    if (q >= 26 && q <= 34) occupancy = 1.0;
    if (q >= 70 && q <= 90) occupancy = 1.0;
    w.internal_gains[k] = std::max(0.0, p.gains_base + p.gains_peak * occupancy + 40.0 * gauss(rng));
  }

  if (p.periodic && days > 1) {
    WeatherSeries rep;
    for (int d = 0; d < days; ++d) {
      rep.t_out.insert(rep.t_out.end(), w.t_out.begin(), w.t_out.end());
      rep.solar.insert(rep.solar.end(), w.solar.begin(), w.solar.end());
      rep.internal_gains.insert(rep.internal_gains.end(), w.internal_gains.begin(), w.internal_gains.end());
    }
    return rep;
  }
  return w;
}

Forecast perfect_forecast(const WeatherSeries& w, int day) {
  if (day < 0 || day >= w.days()) throw std::out_of_range("forecast day outside weather series");
  const auto begin = static_cast<std::ptrdiff_t>(day) * kQuartersPerDay;
  Forecast f;
  f.t_out_hat.assign(w.t_out.begin() + begin, w.t_out.begin() + begin + kQuartersPerDay);
  f.solar_hat.assign(w.solar.begin() + begin, w.solar.begin() + begin + kQuartersPerDay);
  return f;
}

std::vector<double> draw_profile() {
  std::vector<double> wts(kQuartersPerDay, 0.02);
  for (int q = 1; q <= kQuartersPerDay; ++q) {
    double& v = wts[static_cast<std::size_t>(q - 1)];
    if (q >= 28 && q <= 84) v = 0.2;
    if (q >= 28 && q <= 36) v = 1.0;
    if (q >= 72 && q <= 84) v = 1.0;
  }
  return wts;
}

std::vector<double> synth_draws(int days, double mean_l_per_day, std::uint64_t seed,
                                double event_mean_l, double day_spread) {
  if (days < 1) throw std::invalid_argument("days must be >= 1");
  if (!(mean_l_per_day >= 0)) throw std::invalid_argument("mean draw must be >= 0");
  std::vector<double> out(static_cast<std::size_t>(days) * kQuartersPerDay, 0.0);
  if (mean_l_per_day == 0.0) return out;

  Rng rng(seed);
  auto profile = draw_profile();
  std::discrete_distribution<int> when(profile.begin(), profile.end());
  std::uniform_real_distribution<double> spread(1.0 - day_spread, 1.0 + day_spread);
  std::exponential_distribution<double> split(1.0);
  const int events = std::max(1, static_cast<int>(std::lround(mean_l_per_day / event_mean_l)));

  std::vector<double> share(static_cast<std::size_t>(events));
  for (int d = 0; d < days; ++d) {
    double total = mean_l_per_day * spread(rng);
    double norm = 0.0;
    for (auto& s : share) norm += (s = split(rng));
    for (int e = 0; e < events; ++e) {
      int q = when(rng);
      out[static_cast<std::size_t>(d) * kQuartersPerDay + q] += total * share[e] / norm;
    }
  }
  return out;
}

}  // namespace batchrl
