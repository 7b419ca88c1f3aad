#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <json.hpp>

namespace batchrl {

/// Regression inputs stored row-major with a fixed dimension.
class TrainingSet {
 public:
  explicit TrainingSet(std::size_t dim) : dim_(dim) {}
  TrainingSet(const std::vector<std::vector<double>>& inputs, std::vector<double> targets);

  void add(std::span<const double> x, double y);
  void reserve(std::size_t n);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return targets_.size(); }
  bool empty() const { return targets_.empty(); }
  std::span<const double> row(std::size_t i) const { return {inputs_.data() + i * dim_, dim_}; }
  const std::vector<double>& inputs() const { return inputs_; }
  const std::vector<double>& targets() const { return targets_; }
  std::vector<double>& mutable_targets() { return targets_; }

 private:
  std::size_t dim_;
  std::vector<double> inputs_;
  std::vector<double> targets_;
};

struct ForestParams {
  int n_trees = 50;
  int k_split = 0;  // candidate features per node; 0 means the full input dimension
  int n_min = 5;    // nodes with at most this many samples become leaves

  void validate() const;
  bool operator==(const ForestParams&) const = default;
};

/// Extremely randomized trees ensemble. Immutable once fitted.
class Forest {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;     // samples with x[feature] < threshold
    int right = -1;
    double value = 0.0;
  };
  using Tree = std::vector<Node>;

  Forest() = default;

  /// Fits every tree on the full set. At each node k_split candidate features
  /// (among those not constant in the node) get one uniform cut point between
  /// the node-local min and max; the best variance reduction wins, ties to the
  /// lowest feature index. Deterministic in `seed`; per-tree seeds are derived
  /// from it so trees may be grown on several threads.
  static Forest fit(const TrainingSet& ts, const ForestParams& params, std::uint64_t seed);

  /// Mean of the leaf values reached in every tree.
  double predict(std::span<const double> x) const;
  /// predict() over consecutive rows of a row-major matrix.
  void predict_rows(std::span<const double> rows, std::vector<double>& out) const;
  /// predict() at (prefix, levels[a]) for every a, where the last input is
  /// the varying one and `levels` is ascending. Bit-identical to calling
  /// predict() per level, but walks each tree once.
  void predict_last_levels(std::span<const double> prefix, std::span<const double> levels,
                           std::span<double> out) const;

  std::size_t dim() const { return dim_; }
  const ForestParams& params() const { return params_; }
  std::uint64_t seed() const { return seed_; }
  const std::vector<Tree>& trees() const { return trees_; }

  nlohmann::json to_json() const;
  static Forest from_json(const nlohmann::json& j);

 private:
  std::size_t dim_ = 0;
  ForestParams params_;
  std::uint64_t seed_ = 0;
  std::vector<Tree> trees_;
};

/// Stable 64-bit mixing of a seed with a stream index (splitmix64).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace batchrl
