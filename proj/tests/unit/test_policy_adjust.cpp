#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "batchrl/policy_adjust.hpp"

using namespace batchrl;

namespace {

// Independent tensor-product triangular membership.
double membership_oracle(const FuzzyGrid& g, std::size_t j, std::span<const double> x) {
  auto idx = g.multi_index(j);
  double w = 1.0;
  for (std::size_t d = 0; d < g.dims(); ++d) {
    double h = (g.hi()[d] - g.lo()[d]) / (g.per_dim() - 1);
    double xd = std::clamp(x[d], g.lo()[d], g.hi()[d]);
    w *= std::max(0.0, 1.0 - std::abs(xd - g.center(d, idx[d])) / h);
  }
  return w;
}

// Weighted pool-adjacent-violators: the exact non-decreasing least-squares fit.
std::vector<double> pava(const std::vector<double>& y, const std::vector<double>& w) {
  struct Block {
    double sum, weight;
    int len;
  };
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < y.size(); ++i) {
    blocks.push_back({y[i] * w[i], w[i], 1});
    while (blocks.size() > 1) {
      auto& b = blocks[blocks.size() - 1];
      auto& a = blocks[blocks.size() - 2];
      if (a.sum / a.weight <= b.sum / b.weight) break;
      a.sum += b.sum;
      a.weight += b.weight;
      a.len += b.len;
      blocks.pop_back();
    }
  }
  std::vector<double> out;
  for (const auto& b : blocks) out.insert(out.end(), b.len, b.sum / b.weight);
  return out;
}

}  // namespace

TEST(FuzzyGridTest, IndexingRoundTrip) {
  FuzzyGrid g({0, 0, 0}, {1, 2, 3}, 4);
  EXPECT_EQ(g.nodes(), 64u);
  for (std::size_t j = 0; j < g.nodes(); ++j) {
    auto idx = g.multi_index(j);
    EXPECT_EQ(g.flat_index(idx), j);
    EXPECT_EQ(j, static_cast<std::size_t>(idx[0] + 4 * idx[1] + 16 * idx[2]));
  }
  EXPECT_DOUBLE_EQ(g.center(1, 3), 2.0);
  EXPECT_EQ(g.node(g.nodes() - 1), (std::vector<double>{1, 2, 3}));
}

TEST(FuzzyGridTest, RejectsDegenerateBox) {
  EXPECT_THROW(FuzzyGrid({0}, {0}, 5), std::invalid_argument);
  EXPECT_THROW(FuzzyGrid({0}, {1}, 1), std::invalid_argument);
  EXPECT_THROW(FuzzyGrid({0, 0}, {1}, 5), std::invalid_argument);
}

TEST(FuzzyGridTest, MembershipsMatchOracleAndSumToOne) {
  FuzzyGrid g({1, 40}, {96, 70}, 11);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> q(-5, 100), t(35, 75);
  std::vector<std::pair<std::size_t, double>> m;
  for (int i = 0; i < 500; ++i) {
    std::vector<double> x{q(rng), t(rng)};
    bool clamped = false;
    g.memberships(x, m, &clamped);
    bool outside = x[0] < 1 || x[0] > 96 || x[1] < 40 || x[1] > 70;
    EXPECT_EQ(clamped, outside);
    EXPECT_LE(m.size(), 4u);
    double s = 0;
    for (auto [j, w] : m) {
      EXPECT_NEAR(w, membership_oracle(g, j, x), 1e-12);
      s += w;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    auto dense = g.dense_memberships(x);
    EXPECT_NEAR(std::accumulate(dense.begin(), dense.end(), 0.0), 1.0, 1e-12);
    for (std::size_t j = 0; j < g.nodes(); ++j) EXPECT_NEAR(dense[j], membership_oracle(g, j, x), 1e-12);
  }
}

TEST(FuzzyGridTest, NodesHaveUnitMembership) {
  FuzzyGrid g({0, 0}, {1, 1}, 5);
  for (std::size_t j = 0; j < g.nodes(); ++j) {
    auto dense = g.dense_memberships(g.node(j));
    EXPECT_NEAR(dense[j], 1.0, 1e-12);
  }
}

TEST(FuzzyPolicyTest, ReproducesAffineFunctionsExactly) {
  FuzzyGrid g({0, -1}, {10, 1}, 6);
  std::vector<double> theta(g.nodes());
  auto f = [](double a, double b) { return 0.3 * a - 2.0 * b + 1.0; };
  for (std::size_t j = 0; j < g.nodes(); ++j) {
    auto c = g.node(j);
    theta[j] = f(c[0], c[1]);
  }
  FuzzyPolicy p(g, theta);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> a(0, 10), b(-1, 1);
  for (int i = 0; i < 300; ++i) {
    std::vector<double> x{a(rng), b(rng)};
    EXPECT_NEAR(p.interpolate(x), f(x[0], x[1]), 1e-12);
  }
}

TEST(FitUnconstrained, RecoversGridWeights) {
  FuzzyGrid g({0, 0}, {1, 1}, 5);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 1), w(-2, 2);
  std::vector<double> truth(g.nodes());
  for (auto& v : truth) v = w(rng);
  FuzzyPolicy ref(g, truth);
  std::vector<PolicySample> samples;
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> x{u(rng), u(rng)};
    samples.push_back({x, ref.interpolate(x)});
  }
  FitReport rep;
  auto p = fit_unconstrained(samples, g, &rep);
  for (std::size_t j = 0; j < g.nodes(); ++j) EXPECT_NEAR(p.theta()[j], truth[j], 1e-8);
  EXPECT_NEAR(rep.objective, 0.0, 1e-12);
  EXPECT_EQ(rep.clamped_samples, 0u);
}

TEST(FitUnconstrained, UnsupportedNodesCopyNearestSupported) {
  FuzzyGrid g({0}, {4}, 5);
  std::vector<PolicySample> samples{{{0.0}, 1.0}, {{1.0}, 2.0}};
  auto p = fit_unconstrained(samples, g);
  EXPECT_NEAR(p.theta()[0], 1.0, 1e-12);
  EXPECT_NEAR(p.theta()[1], 2.0, 1e-12);
  for (std::size_t j = 2; j < 5; ++j) EXPECT_NEAR(p.theta()[j], 2.0, 1e-12);
}

TEST(FitMonotone, OneDimensionMatchesIsotonicRegression) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> y(0, 1);
  std::uniform_int_distribution<int> reps(1, 4);
  for (int trial = 0; trial < 30; ++trial) {
    FuzzyGrid g({0}, {10}, 11);
    std::vector<PolicySample> samples;
    std::vector<double> sums(11, 0.0), counts(11, 0.0);
    for (int i = 0; i < 11; ++i) {
      int r = reps(rng);
      for (int k = 0; k < r; ++k) {
        double v = y(rng);
        samples.push_back({{double(i)}, v});
        sums[i] += v;
        counts[i] += 1;
      }
    }
    std::vector<double> means(11);
    for (int i = 0; i < 11; ++i) means[i] = sums[i] / counts[i];

    auto up = fit_monotone(samples, g, {+1});
    auto want_up = pava(means, counts);
    for (int i = 0; i < 11; ++i) EXPECT_NEAR(up.theta()[i], want_up[i], 1e-7);

    // non-increasing fit is the reversed non-decreasing fit
    std::vector<double> rm(means.rbegin(), means.rend()), rc(counts.rbegin(), counts.rend());
    auto want_down = pava(rm, rc);
    std::reverse(want_down.begin(), want_down.end());
    FitReport rep;
    auto down = fit_monotone(samples, g, {-1}, &rep);
    for (int i = 0; i < 11; ++i) EXPECT_NEAR(down.theta()[i], want_down[i], 1e-7);
    EXPECT_LE(rep.max_violation, 1e-9);
    EXPECT_EQ(rep.constraints, 10u);
  }
}

TEST(FitMonotone, TwoDimensionsDecomposeIntoRows) {
  // Constraint only along dimension 1 with samples on nodes: each column
  // along dimension 0 is an independent isotonic problem.
  FuzzyGrid g({0, 0}, {4, 6}, 5);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> y(-1, 1);
  std::vector<PolicySample> samples;
  std::vector<double> vals(g.nodes());
  for (std::size_t j = 0; j < g.nodes(); ++j) {
    vals[j] = y(rng);
    samples.push_back({g.node(j), vals[j]});
  }
  FitReport rep;
  auto p = fit_monotone(samples, g, {0, -1}, &rep);
  for (int i0 = 0; i0 < 5; ++i0) {
    std::vector<double> col, w(5, 1.0);
    for (int i1 = 4; i1 >= 0; --i1) col.push_back(vals[i0 + 5 * i1]);
    auto iso = pava(col, w);
    std::reverse(iso.begin(), iso.end());
    for (int i1 = 0; i1 < 5; ++i1) EXPECT_NEAR(p.theta()[i0 + 5 * i1], iso[i1], 1e-7);
  }
  EXPECT_LE(monotonicity_violation(p, {0, -1}), 1e-9);
}

TEST(FitMonotone, FeasibleUnconstrainedFitIsReturnedUnchanged) {
  FuzzyGrid g({0, 0}, {1, 1}, 4);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<PolicySample> samples;
  for (int i = 0; i < 500; ++i) {
    std::vector<double> x{u(rng), u(rng)};
    samples.push_back({x, 2.0 - x[1] + 0.3 * x[0]});
  }
  auto a = fit_unconstrained(samples, g);
  auto b = fit_monotone(samples, g, {0, -1});
  EXPECT_EQ(a.theta(), b.theta());
}

TEST(FitMonotone, PropertiesOnRandomData) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> q(1, 96), t(40, 70), a(0, 1);
  for (int trial = 0; trial < 5; ++trial) {
    FuzzyGrid g({1, 40}, {96, 70}, 11);
    std::vector<PolicySample> samples;
    for (int i = 0; i < 800; ++i) samples.push_back({{q(rng), t(rng)}, a(rng) < 0.5 ? 0.0 : 2.3});
    FitReport ru, rm;
    auto pu = fit_unconstrained(samples, g, &ru);
    auto pm = fit_monotone(samples, g, {0, -1}, &rm);
    EXPECT_LE(rm.max_violation, 1e-8);
    EXPECT_LE(monotonicity_violation(pm, {0, -1}), 1e-8);
    EXPECT_GE(rm.objective, ru.objective - 1e-9);
    // interpolation of monotone weights is monotone in temperature
    for (int i = 0; i < 500; ++i) {
      double qq = q(rng), t1 = t(rng), t2 = t(rng);
      if (t1 > t2) std::swap(t1, t2);
      std::vector<double> x1{qq, t1}, x2{qq, t2};
      EXPECT_GE(pm.interpolate(x1), pm.interpolate(x2) - 1e-9);
    }
  }
}

TEST(FitMonotone, NoConstraintsFallsBackToLeastSquares) {
  FuzzyGrid g({0}, {1}, 3);
  std::vector<PolicySample> samples{{{0.0}, 1.0}, {{0.5}, 0.0}, {{1.0}, 1.0}};
  auto a = fit_unconstrained(samples, g);
  auto b = fit_monotone(samples, g, {0});
  EXPECT_EQ(a.theta(), b.theta());
}

TEST(Evaluate, SnapsToActionSet) {
  FuzzyGrid g({0}, {1}, 2);
  FuzzyPolicy p(g, {0.0, 2.3});
  ActionSet acts = ActionSet::water_heater();
  std::vector<double> lo{0.4}, hi{0.6};
  EXPECT_EQ(evaluate(p, lo, acts).kw, 0.0);
  EXPECT_EQ(evaluate(p, hi, acts).kw, 2.3);
}

TEST(FuzzyPolicyTest, JsonRoundTrip) {
  FuzzyGrid g({1, 40}, {96, 70}, 5);
  std::vector<double> theta(g.nodes());
  std::iota(theta.begin(), theta.end(), 0.0);
  FuzzyPolicy p(g, theta);
  auto r = FuzzyPolicy::from_json(nlohmann::json::parse(p.to_json().dump()));
  EXPECT_EQ(r.grid(), p.grid());
  EXPECT_EQ(r.theta(), p.theta());
}

TEST(MonotoneSpec, Parsing) {
  EXPECT_EQ(parse_monotone_spec("1:-1", 2), (std::vector<int>{0, -1}));
  EXPECT_EQ(parse_monotone_spec("0:1,1:-1", 2), (std::vector<int>{1, -1}));
  EXPECT_EQ(parse_monotone_spec("", 2), (std::vector<int>{0, 0}));
  EXPECT_THROW(parse_monotone_spec("2:1", 2), std::invalid_argument);
  EXPECT_THROW(parse_monotone_spec("1:2", 2), std::invalid_argument);
  EXPECT_THROW(parse_monotone_spec("x", 2), std::invalid_argument);
}
