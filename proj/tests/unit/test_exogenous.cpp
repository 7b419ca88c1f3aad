#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "batchrl/errors.hpp"
#include "batchrl/exogenous.hpp"

using namespace batchrl;

namespace {

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

std::string price_csv(int rows, int skip_at = -1) {
  std::ostringstream o;
  o << "quarter_index,price_eur_per_kwh\n";
  for (int i = 0; i < rows; ++i) o << (i == skip_at ? i + 1 : i) << ",0.1\n";
  return o.str();
}

}  // namespace

TEST(Prices, SinusoidMatchesFormulaAndIsDailyPeriodic) {
  auto p = synth_price_sinusoid(3, 0.2, 0.05, 1);
  ASSERT_EQ(p.values.size(), 288u);
  for (int k = 0; k < 96; ++k) {
    EXPECT_NEAR(p.values[k], 0.2 + 0.05 * std::sin(2 * std::numbers::pi * k / 96.0), 1e-15);
    EXPECT_EQ(p.values[k], p.values[k + 96]);
    EXPECT_EQ(p.values[k], p.values[k + 192]);
  }
  EXPECT_EQ(p.days(), 3);
  EXPECT_EQ(p.day(1).size(), 96u);
  EXPECT_THROW(p.day(3), std::out_of_range);
}

TEST(Prices, WholesaleIsFlooredAndSeeded) {
  auto a = synth_price_wholesale(20, 4);
  auto b = synth_price_wholesale(20, 4);
  auto c = synth_price_wholesale(20, 5);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, c.values);
  for (double v : a.values) EXPECT_GE(v, WholesalePriceParams{}.floor);
  // evening peak above the night trough on average
  double eve = 0, night = 0;
  for (int d = 0; d < 20; ++d) {
    eve += a.values[d * 96 + 75];
    night += a.values[d * 96 + 15];
  }
  EXPECT_GT(eve, night);
}

TEST(PriceCsv, RoundTrip) {
  auto p = synth_price_wholesale(2, 8);
  std::stringstream ss;
  save_price_csv(p, ss);
  auto r = load_price_csv(ss);
  EXPECT_EQ(r.values, p.values);
}

TEST(PriceCsv, RejectsPartialDay) {
  std::stringstream ss(price_csv(95));
  EXPECT_THROW(load_price_csv(ss), ParseError);
}

TEST(PriceCsv, RejectsOutOfSequenceIndexWithLine) {
  std::stringstream ss(price_csv(96, 10));
  try {
    load_price_csv(ss);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 12u);
  }
}

TEST(PriceCsv, RejectsWrongHeaderAndBadCell) {
  std::stringstream h("idx,price\n");
  EXPECT_THROW(load_price_csv(h), ParseError);
  std::string s = price_csv(96);
  s.replace(s.find("0.1"), 3, "x.1");
  std::stringstream b(s);
  try {
    load_price_csv(b);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(WeatherCsv, RoundTripAndNegativeSolarRejected) {
  auto w = synth_weather(2, 3);
  std::stringstream ss;
  save_weather_csv(w, ss);
  auto r = load_weather_csv(ss);
  EXPECT_EQ(r.t_out, w.t_out);
  EXPECT_EQ(r.solar, w.solar);
  EXPECT_EQ(r.internal_gains, w.internal_gains);

  std::ostringstream bad;
  bad << "quarter_index,t_out_c,solar_wm2,internal_gain_w\n";
  for (int i = 0; i < 96; ++i) bad << i << ",5," << (i == 3 ? -1 : 0) << ",100\n";
  std::stringstream bs(bad.str());
  EXPECT_THROW(load_weather_csv(bs), ParseError);
}

TEST(Ar1, StationaryMomentsMatch) {
  Rng rng(42);
  const double phi = 0.9, sd = 2.0;
  auto x = ar1_series(200000, phi, sd, rng);
  double m = mean(x);
  double var = 0, cov = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    var += (x[i] - m) * (x[i] - m);
    if (i) cov += (x[i] - m) * (x[i - 1] - m);
  }
  var /= x.size();
  cov /= (x.size() - 1);
  EXPECT_NEAR(m, 0.0, 0.1);
  EXPECT_NEAR(std::sqrt(var), sd, 0.05 * sd);
  EXPECT_NEAR(cov / var, phi, 0.01);
  EXPECT_THROW(ar1_series(10, 1.0, 1.0, rng), std::invalid_argument);
}

TEST(Weather, PhysicalRangesAndDeterminism) {
  auto w = synth_weather(30, 11);
  EXPECT_NO_THROW(w.validate());
  EXPECT_EQ(w.days(), 30);
  auto v = synth_weather(30, 11);
  EXPECT_EQ(w.t_out, v.t_out);
  for (std::size_t k = 0; k < w.size(); ++k) {
    int q = static_cast<int>(k % 96) + 1;
    if (q <= 16 || q >= 84) {
      EXPECT_EQ(w.solar[k], 0.0) << "solar at night, quarter " << q;
    }
    EXPECT_LE(w.solar[k], WeatherParams{}.solar_peak + 1e-9);
  }
  EXPECT_NEAR(mean(w.t_out), WeatherParams{}.mean_t_out, 4.0);
}

TEST(Weather, PeriodicRepeatsFirstDay) {
  WeatherParams p;
  p.periodic = true;
  auto w = synth_weather(4, 2, p);
  for (std::size_t k = 96; k < w.size(); ++k) {
    EXPECT_EQ(w.t_out[k], w.t_out[k % 96]);
    EXPECT_EQ(w.solar[k], w.solar[k % 96]);
    EXPECT_EQ(w.internal_gains[k], w.internal_gains[k % 96]);
  }
}

TEST(Forecast, PerfectForecastIsRealizedDay) {
  auto w = synth_weather(3, 5);
  auto f = perfect_forecast(w, 2);
  EXPECT_NO_THROW(f.validate());
  for (int q = 1; q <= 96; ++q) {
    EXPECT_EQ(f.exo_at(q), (std::vector<double>{w.t_out[192 + q - 1], w.solar[192 + q - 1]}));
  }
  EXPECT_THROW(perfect_forecast(w, 3), std::out_of_range);
  EXPECT_THROW(f.exo_at(97), std::out_of_range);
}

TEST(Draws, ProfileAndVolume) {
  auto prof = draw_profile();
  ASSERT_EQ(prof.size(), 96u);
  for (int q = 28; q <= 36; ++q) EXPECT_EQ(prof[q - 1], 1.0);
  for (int q = 72; q <= 84; ++q) EXPECT_EQ(prof[q - 1], 1.0);
  EXPECT_LT(prof[0], 0.1);

  auto d = synth_draws(200, 120, 9);
  ASSERT_EQ(d.size(), 200u * 96);
  double total = std::accumulate(d.begin(), d.end(), 0.0);
  EXPECT_NEAR(total / 200.0, 120.0, 6.0);
  for (double v : d) EXPECT_GE(v, 0.0);
  // most of the volume falls in the peak windows
  double peak = 0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    int q = static_cast<int>(k % 96) + 1;
    if ((q >= 28 && q <= 36) || (q >= 72 && q <= 84)) peak += d[k];
  }
  EXPECT_GT(peak / total, 0.5);
  auto zero = synth_draws(2, 0, 1);
  EXPECT_EQ(std::accumulate(zero.begin(), zero.end(), 0.0), 0.0);
}
