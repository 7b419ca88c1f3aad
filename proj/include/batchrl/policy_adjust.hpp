#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "batchrl/mdp.hpp"

namespace batchrl {

/// Equidistant triangular membership functions, n_g centers per dimension over
/// the box [lo, hi]. Node j has multi-index (i_0, ..., i_{d-1}) with
/// j = i_0 + n_g * i_1 + n_g^2 * i_2 + ...
class FuzzyGrid {
 public:
  FuzzyGrid() = default;
  FuzzyGrid(std::vector<double> lo, std::vector<double> hi, int n_g = 11);

  std::size_t dims() const { return lo_.size(); }
  int per_dim() const { return n_g_; }
  std::size_t nodes() const { return n_nodes_; }
  const std::vector<double>& lo() const { return lo_; }
  const std::vector<double>& hi() const { return hi_; }

  double center(std::size_t dim, int i) const;
  std::vector<int> multi_index(std::size_t j) const;
  std::size_t flat_index(std::span<const int> idx) const;
  std::vector<double> node(std::size_t j) const;

  /// Non-zero memberships (node, weight) at x; at most 2^d entries. Points
  /// outside the box are clamped onto it and reported through `clamped`.
  void memberships(std::span<const double> x, std::vector<std::pair<std::size_t, double>>& out,
                   bool* clamped = nullptr) const;
  /// All n_g^d memberships at x.
  std::vector<double> dense_memberships(std::span<const double> x) const;

  bool operator==(const FuzzyGrid&) const = default;

 private:
  std::vector<double> lo_, hi_;
  int n_g_ = 0;
  std::size_t n_nodes_ = 0;
};

struct PolicySample {
  std::vector<double> x;  // policy coordinates
  double action = 0.0;    // kW requested by the policy being approximated
};

/// Policy coordinates of a state: the learner's features with the quarter.
std::vector<double> policy_coordinates(const State& s, const FeatureOptions& opts = {});

class FuzzyPolicy {
 public:
  FuzzyPolicy() = default;
  FuzzyPolicy(FuzzyGrid grid, std::vector<double> theta, FeatureOptions features = {});

  /// sum_j phi_j(x) theta_j, kept inside the hull of the weights involved.
  double interpolate(std::span<const double> x) const;

  const FuzzyGrid& grid() const { return grid_; }
  const std::vector<double>& theta() const { return theta_; }
  const FeatureOptions& features() const { return features_; }

  nlohmann::json to_json() const;
  static FuzzyPolicy from_json(const nlohmann::json& j);

 private:
  FuzzyGrid grid_;
  std::vector<double> theta_;
  FeatureOptions features_;
};

struct FitReport {
  double objective = 0.0;          // sum of squared residuals at the samples
  std::size_t clamped_samples = 0; // samples that fell outside the grid box
  std::size_t constraints = 0;
  std::size_t active_constraints = 0;
  int sweeps = 0;                  // dual coordinate sweeps (monotone fit)
  double max_violation = 0.0;      // max over constraints of delta * (theta_j - theta_j')
};

/// Least-squares weights. Nodes without sample support take the value of the
/// nearest supported node (grid-index distance, lowest index on ties).
FuzzyPolicy fit_unconstrained(const std::vector<PolicySample>& samples, const FuzzyGrid& grid,
                              FitReport* report = nullptr, const FeatureOptions& features = {});

/// Least squares subject to axis monotonicity: for every pair of nodes
/// adjacent along dimension d with delta_d != 0, delta_d * theta_j <=
/// delta_d * theta_j' where j' is the successor of j along d.
FuzzyPolicy fit_monotone(const std::vector<PolicySample>& samples, const FuzzyGrid& grid,
                         const std::vector<int>& directions, FitReport* report = nullptr,
                         const FeatureOptions& features = {}, double tol = 1e-10);

/// Interpolated request snapped to the nearest legal action.
Action evaluate(const FuzzyPolicy& p, std::span<const double> x, const ActionSet& actions);
Action evaluate(const FuzzyPolicy& p, const State& x, const ActionSet& actions);

/// Largest delta_d * (theta_j - theta_j') over the adjacent pairs; <= 0 when
/// the weights are monotone.
double monotonicity_violation(const FuzzyPolicy& p, const std::vector<int>& directions);

/// Parses "dim:sign,dim:sign" (0-based dims, sign in {-1, 0, +1}) into a
/// direction vector of length `dims`.
std::vector<int> parse_monotone_spec(const std::string& spec, std::size_t dims);

}  // namespace batchrl
