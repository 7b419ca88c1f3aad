#include "batchrl/policy_adjust.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <Eigen/Dense>

namespace batchrl {

FuzzyGrid::FuzzyGrid(std::vector<double> lo, std::vector<double> hi, int n_g)
    : lo_(std::move(lo)), hi_(std::move(hi)), n_g_(n_g) {
  if (lo_.empty() || lo_.size() != hi_.size()) throw std::invalid_argument("fuzzy grid: bad box dimensions");
  if (n_g_ < 2) throw std::invalid_argument("fuzzy grid: need at least two centers per dimension");
  for (std::size_t d = 0; d < lo_.size(); ++d) {
    if (!(std::isfinite(lo_[d]) && std::isfinite(hi_[d]) && lo_[d] < hi_[d])) {
      throw std::invalid_argument("fuzzy grid: every dimension needs lo < hi");
    }
  }
  n_nodes_ = 1;
  for (std::size_t d = 0; d < lo_.size(); ++d) {
    n_nodes_ *= static_cast<std::size_t>(n_g_);
    if (n_nodes_ > 10'000'000) throw std::invalid_argument("fuzzy grid: too many nodes");
  }
}

double FuzzyGrid::center(std::size_t dim, int i) const {
  return lo_[dim] + (hi_[dim] - lo_[dim]) * static_cast<double>(i) / static_cast<double>(n_g_ - 1);
}

std::vector<int> FuzzyGrid::multi_index(std::size_t j) const {
  std::vector<int> idx(dims());
  for (std::size_t d = 0; d < dims(); ++d) {
    idx[d] = static_cast<int>(j % static_cast<std::size_t>(n_g_));
    j /= static_cast<std::size_t>(n_g_);
  }
  return idx;
}

std::size_t FuzzyGrid::flat_index(std::span<const int> idx) const {
  std::size_t j = 0;
  for (std::size_t d = dims(); d-- > 0;) j = j * static_cast<std::size_t>(n_g_) + static_cast<std::size_t>(idx[d]);
  return j;
}

std::vector<double> FuzzyGrid::node(std::size_t j) const {
  auto idx = multi_index(j);
  std::vector<double> x(dims());
  for (std::size_t d = 0; d < dims(); ++d) x[d] = center(d, idx[d]);
  return x;
}

void FuzzyGrid::memberships(std::span<const double> x, std::vector<std::pair<std::size_t, double>>& out,
                            bool* clamped) const {
  if (x.size() != dims()) throw std::invalid_argument("fuzzy grid: point dimension mismatch");
  const std::size_t nd = dims();
  std::vector<std::size_t> base(nd);
  std::vector<double> frac(nd);
  bool outside = false;
  for (std::size_t d = 0; d < nd; ++d) {
    double t = (x[d] - lo_[d]) / (hi_[d] - lo_[d]) * (n_g_ - 1);
    if (!(t >= 0.0)) {  // also catches NaN
      outside = outside || !(x[d] >= lo_[d]);
      t = 0.0;
    }
    if (t > n_g_ - 1) {
      outside = true;
      t = n_g_ - 1;
    }
    std::size_t i0 = std::min(static_cast<std::size_t>(std::floor(t)), static_cast<std::size_t>(n_g_ - 2));
    base[d] = i0;
    frac[d] = t - static_cast<double>(i0);
  }
  if (clamped) *clamped = outside;

  out.clear();
  const std::size_t corners = std::size_t{1} << nd;
  for (std::size_t c = 0; c < corners; ++c) {
    double w = 1.0;
    std::size_t j = 0;
    for (std::size_t d = nd; d-- > 0;) {
      const bool up = (c >> d) & 1U;
      w *= up ? frac[d] : 1.0 - frac[d];
      j = j * static_cast<std::size_t>(n_g_) + base[d] + (up ? 1 : 0);
    }
    if (w != 0.0) out.emplace_back(j, w);
  }
}

std::vector<double> FuzzyGrid::dense_memberships(std::span<const double> x) const {
  std::vector<std::pair<std::size_t, double>> sparse;
  memberships(x, sparse);
  std::vector<double> out(nodes(), 0.0);
  for (auto [j, w] : sparse) out[j] += w;
  return out;
}

std::vector<double> policy_coordinates(const State& s, const FeatureOptions& opts) { return features(s, opts); }

FuzzyPolicy::FuzzyPolicy(FuzzyGrid grid, std::vector<double> theta, FeatureOptions features)
    : grid_(std::move(grid)), theta_(std::move(theta)), features_(features) {
  if (theta_.size() != grid_.nodes()) throw std::invalid_argument("fuzzy policy: weight count != node count");
}

double FuzzyPolicy::interpolate(std::span<const double> x) const {
  std::vector<std::pair<std::size_t, double>> m;
  grid_.memberships(x, m);
  double v = 0.0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (auto [j, w] : m) {
    v += w * theta_[j];
    lo = std::min(lo, theta_[j]);
    hi = std::max(hi, theta_[j]);
  }
  return std::clamp(v, lo, hi);
}

nlohmann::json FuzzyPolicy::to_json() const {
  return {{"lo", grid_.lo()},
          {"hi", grid_.hi()},
          {"n_g", grid_.per_dim()},
          {"theta", theta_},
          {"features", {{"quarter", features_.include_quarter}, {"day", features_.include_day}}}};
}

FuzzyPolicy FuzzyPolicy::from_json(const nlohmann::json& j) {
  FuzzyGrid g(j.at("lo").get<std::vector<double>>(), j.at("hi").get<std::vector<double>>(), j.at("n_g").get<int>());
  FeatureOptions f{j.at("features").at("quarter").get<bool>(), j.at("features").at("day").get<bool>()};
  return FuzzyPolicy(std::move(g), j.at("theta").get<std::vector<double>>(), f);
}

namespace {

struct Design {
  Eigen::MatrixXd phi;
  Eigen::VectorXd y;
  std::size_t clamped = 0;
};

Design build_design(const std::vector<PolicySample>& samples, const FuzzyGrid& grid) {
  if (samples.empty()) throw std::invalid_argument("policy fit: no samples");
  Design d;
  d.phi = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(samples.size()), static_cast<Eigen::Index>(grid.nodes()));
  d.y.resize(static_cast<Eigen::Index>(samples.size()));
  std::vector<std::pair<std::size_t, double>> m;
  for (std::size_t l = 0; l < samples.size(); ++l) {
    bool clamped = false;
    grid.memberships(samples[l].x, m, &clamped);
    if (clamped) ++d.clamped;
    for (auto [j, w] : m) d.phi(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(j)) += w;
    d.y(static_cast<Eigen::Index>(l)) = samples[l].action;
  }
  return d;
}

double objective(const Design& d, const Eigen::VectorXd& theta) { return (d.phi * theta - d.y).squaredNorm(); }

Eigen::VectorXd solve_unconstrained(const Design& d, const FuzzyGrid& grid) {
  const Eigen::Index J = d.phi.cols();
  Eigen::VectorXd support = d.phi.colwise().sum().transpose();
  std::vector<Eigen::Index> supported;
  for (Eigen::Index j = 0; j < J; ++j) {
    if (support(j) > 0.0) supported.push_back(j);
  }
  if (supported.empty()) throw std::invalid_argument("policy fit: no sample lies inside the grid");

  Eigen::MatrixXd sub(d.phi.rows(), static_cast<Eigen::Index>(supported.size()));
  for (std::size_t c = 0; c < supported.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = d.phi.col(supported[c]);
  Eigen::VectorXd w = sub.completeOrthogonalDecomposition().solve(d.y);

  Eigen::VectorXd theta(J);
  std::vector<std::vector<int>> sup_idx;
  sup_idx.reserve(supported.size());
  for (std::size_t c = 0; c < supported.size(); ++c) {
    theta(supported[c]) = w(static_cast<Eigen::Index>(c));
    sup_idx.push_back(grid.multi_index(static_cast<std::size_t>(supported[c])));
  }
  std::size_t c = 0;
  for (Eigen::Index j = 0; j < J; ++j) {
    if (c < supported.size() && supported[c] == j) {
      ++c;
      continue;
    }
    auto idx = grid.multi_index(static_cast<std::size_t>(j));
    long best = std::numeric_limits<long>::max();
    std::size_t best_c = 0;
    for (std::size_t s = 0; s < supported.size(); ++s) {
      long dist = 0;
      for (std::size_t k = 0; k < idx.size(); ++k) {
        long diff = idx[k] - sup_idx[s][k];
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        best_c = s;
      }
    }
    theta(j) = w(static_cast<Eigen::Index>(best_c));
  }
  return theta;
}

// Constraint k: delta * (theta[first] - theta[second]) <= 0.
struct Pair {
  std::size_t first, second;
  double delta;
};

std::vector<Pair> monotone_pairs(const FuzzyGrid& grid, const std::vector<int>& directions) {
  if (directions.size() != grid.dims()) throw std::invalid_argument("monotone fit: one direction per dimension");
  std::vector<Pair> pairs;
  std::size_t stride = 1;
  for (std::size_t d = 0; d < grid.dims(); ++d) {
    const int s = directions[d];
    if (s < -1 || s > 1) throw std::invalid_argument("monotone fit: directions must be -1, 0 or +1");
    if (s != 0) {
      for (std::size_t j = 0; j < grid.nodes(); ++j) {
        if (grid.multi_index(j)[d] < grid.per_dim() - 1) pairs.push_back({j, j + stride, static_cast<double>(s)});
      }
    }
    stride *= static_cast<std::size_t>(grid.per_dim());
  }
  return pairs;
}

double max_violation(const std::vector<Pair>& pairs, const Eigen::VectorXd& theta) {
  double v = -std::numeric_limits<double>::infinity();
  for (const auto& p : pairs) {
    v = std::max(v, p.delta * (theta(static_cast<Eigen::Index>(p.first)) - theta(static_cast<Eigen::Index>(p.second))));
  }
  return pairs.empty() ? 0.0 : v;
}

}  // namespace

FuzzyPolicy fit_unconstrained(const std::vector<PolicySample>& samples, const FuzzyGrid& grid, FitReport* report,
                              const FeatureOptions& features) {
  Design d = build_design(samples, grid);
  Eigen::VectorXd theta = solve_unconstrained(d, grid);
  if (report) {
    *report = FitReport{};
    report->objective = objective(d, theta);
    report->clamped_samples = d.clamped;
  }
  return FuzzyPolicy(grid, std::vector<double>(theta.data(), theta.data() + theta.size()), features);
}

FuzzyPolicy fit_monotone(const std::vector<PolicySample>& samples, const FuzzyGrid& grid,
                         const std::vector<int>& directions, FitReport* report, const FeatureOptions& features,
                         double tol) {
  const auto pairs = monotone_pairs(grid, directions);
  if (pairs.empty()) return fit_unconstrained(samples, grid, report, features);

  Design d = build_design(samples, grid);
  const Eigen::VectorXd theta_unc = solve_unconstrained(d, grid);
  FitReport rep;
  rep.clamped_samples = d.clamped;
  rep.constraints = pairs.size();
  auto finish = [&](const Eigen::VectorXd& theta) {
    rep.objective = objective(d, theta);
    rep.max_violation = max_violation(pairs, theta);
    if (report) *report = rep;
    return FuzzyPolicy(grid, std::vector<double>(theta.data(), theta.data() + theta.size()), features);
  };

  const double scale = std::max(1.0, theta_unc.cwiseAbs().maxCoeff());
  if (max_violation(pairs, theta_unc) <= 0.0) return finish(theta_unc);

  // Strictly convex objective: a tiny ridge toward the unconstrained solution
  // pins nodes the samples do not determine.
  const Eigen::Index J = d.phi.cols();
  const Eigen::Index K = static_cast<Eigen::Index>(pairs.size());
  Eigen::MatrixXd H = d.phi.transpose() * d.phi;
  const double eps = 1e-10 * std::max(1.0, H.diagonal().mean());
  H.diagonal().array() += eps;
  const Eigen::VectorXd g = d.phi.transpose() * d.y + eps * theta_unc;
  Eigen::LLT<Eigen::MatrixXd> llt(H);
  if (llt.info() != Eigen::Success) throw std::runtime_error("monotone fit: normal matrix not positive definite");

  Eigen::MatrixXd At = Eigen::MatrixXd::Zero(J, K);
  for (Eigen::Index k = 0; k < K; ++k) {
    At(static_cast<Eigen::Index>(pairs[k].first), k) = pairs[k].delta;
    At(static_cast<Eigen::Index>(pairs[k].second), k) = -pairs[k].delta;
  }
  const Eigen::MatrixXd W = llt.solve(At);
  Eigen::VectorXd m_diag(K);
  for (Eigen::Index k = 0; k < K; ++k) m_diag(k) = At.col(k).dot(W.col(k));

  // Hildreth's dual coordinate ascent on mu >= 0 with theta = H^-1 (g - A^T mu).
  Eigen::VectorXd theta = llt.solve(g);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(K);
  const int max_sweeps = 200000;
  const double stop = tol * scale;
  for (rep.sweeps = 1; rep.sweeps <= max_sweeps; ++rep.sweeps) {
    for (Eigen::Index k = 0; k < K; ++k) {
      const auto& p = pairs[static_cast<std::size_t>(k)];
      const double r = p.delta * (theta(static_cast<Eigen::Index>(p.first)) - theta(static_cast<Eigen::Index>(p.second)));
      const double next = std::max(0.0, mu(k) + r / m_diag(k));
      const double step = next - mu(k);
      if (step != 0.0) {
        theta.noalias() -= step * W.col(k);
        mu(k) = next;
      }
    }
    double viol = 0.0, comp = 0.0;
    for (Eigen::Index k = 0; k < K; ++k) {
      const auto& p = pairs[static_cast<std::size_t>(k)];
      const double r = p.delta * (theta(static_cast<Eigen::Index>(p.first)) - theta(static_cast<Eigen::Index>(p.second)));
      viol = std::max(viol, r);
      comp = std::max(comp, mu(k) * std::abs(r) / std::max(1.0, m_diag(k)));
    }
    if (viol <= stop && comp <= stop) break;
  }
  rep.sweeps = std::min(rep.sweeps, max_sweeps);

  // Polish: solve the equality-constrained problem on the detected active set
  // and keep it when it satisfies the KKT conditions.
  std::vector<Eigen::Index> active;
  for (Eigen::Index k = 0; k < K; ++k) {
    if (mu(k) > 0.0) active.push_back(k);
  }
  rep.active_constraints = active.size();
  if (!active.empty()) {
    const Eigen::Index na = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(J + na, J + na);
    kkt.topLeftCorner(J, J) = H;
    for (Eigen::Index c = 0; c < na; ++c) {
      kkt.block(0, J + c, J, 1) = At.col(active[static_cast<std::size_t>(c)]);
      kkt.block(J + c, 0, 1, J) = At.col(active[static_cast<std::size_t>(c)]).transpose();
    }
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(J + na);
    rhs.head(J) = g;
    Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
    Eigen::VectorXd polished = sol.head(J);
    const bool feasible = max_violation(pairs, polished) <= stop;
    const bool dual_ok = (sol.tail(na).array() >= -stop).all();
    if (feasible && dual_ok && (kkt * sol - rhs).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, rhs.cwiseAbs().maxCoeff())) {
      theta = polished;
    }
  }
  return finish(theta);
}

Action evaluate(const FuzzyPolicy& p, std::span<const double> x, const ActionSet& actions) {
  return actions.nearest(p.interpolate(x));
}

Action evaluate(const FuzzyPolicy& p, const State& x, const ActionSet& actions) {
  return evaluate(p, policy_coordinates(x, p.features()), actions);
}

double monotonicity_violation(const FuzzyPolicy& p, const std::vector<int>& directions) {
  const auto pairs = monotone_pairs(p.grid(), directions);
  Eigen::Map<const Eigen::VectorXd> theta(p.theta().data(), static_cast<Eigen::Index>(p.theta().size()));
  return max_violation(pairs, theta);
}

std::vector<int> parse_monotone_spec(const std::string& spec, std::size_t dims) {
  std::vector<int> dirs(dims, 0);
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto colon = item.find(':');
    if (colon == std::string::npos) throw std::invalid_argument("monotone spec entry needs dim:sign: " + item);
    int dim = 0, sign = 0;
    try {
      std::size_t used = 0;
      dim = std::stoi(item.substr(0, colon), &used);
      if (used != colon) throw std::invalid_argument("");
      std::string s = item.substr(colon + 1);
      sign = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      throw std::invalid_argument("malformed monotone spec entry: " + item);
    }
    if (dim < 0 || static_cast<std::size_t>(dim) >= dims) throw std::invalid_argument("monotone spec dimension out of range: " + item);
    if (sign < -1 || sign > 1) throw std::invalid_argument("monotone spec sign must be -1, 0 or +1: " + item);
    dirs[static_cast<std::size_t>(dim)] = sign;
  }
  return dirs;
}

}  // namespace batchrl
