#include "batchrl/forest.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

namespace batchrl {

TrainingSet::TrainingSet(const std::vector<std::vector<double>>& inputs, std::vector<double> targets)
    : dim_(inputs.empty() ? 0 : inputs.front().size()) {
  if (inputs.size() != targets.size()) throw std::invalid_argument("inputs and targets differ in length");
  inputs_.reserve(inputs.size() * dim_);
  for (const auto& x : inputs) {
    if (x.size() != dim_) throw std::invalid_argument("inconsistent input dimension");
    inputs_.insert(inputs_.end(), x.begin(), x.end());
  }
  targets_ = std::move(targets);
}

void TrainingSet::add(std::span<const double> x, double y) {
  if (x.size() != dim_) throw std::invalid_argument("input dimension mismatch");
  inputs_.insert(inputs_.end(), x.begin(), x.end());
  targets_.push_back(y);
}

void TrainingSet::reserve(std::size_t n) {
  inputs_.reserve(n * dim_);
  targets_.reserve(n);
}

void ForestParams::validate() const {
  if (n_trees < 1) throw std::invalid_argument("forest needs at least one tree");
  if (k_split < 0) throw std::invalid_argument("k_split must be >= 0");
  if (n_min < 1) throw std::invalid_argument("n_min must be >= 1");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

Forest::Tree grow_tree(const TrainingSet& ts, const ForestParams& params, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::size_t n = ts.size();
  const std::size_t d = ts.dim();
  const double* X = ts.inputs().data();
  const double* Y = ts.targets().data();
  const std::size_t k_max = params.k_split == 0 ? d : std::min<std::size_t>(params.k_split, d);

  std::vector<std::uint32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0U);
  std::vector<double> lo(d), hi(d);
  std::vector<std::size_t> varying;
  varying.reserve(d);

  Forest::Tree tree;
  tree.reserve(2 * n / static_cast<std::size_t>(params.n_min) + 1);
  tree.emplace_back();

  struct Task {
    int node;
    std::size_t begin, end;
  };
  std::vector<Task> stack{{0, 0, n}};

  while (!stack.empty()) {
    const Task t = stack.back();
    stack.pop_back();
    const std::size_t cnt = t.end - t.begin;

    double sum = 0.0;
    double y_lo = Y[idx[t.begin]], y_hi = y_lo;
    for (std::size_t i = t.begin; i < t.end; ++i) {
      double y = Y[idx[i]];
      sum += y;
      y_lo = std::min(y_lo, y);
      y_hi = std::max(y_hi, y);
    }
    auto make_leaf = [&] {
      tree[t.node].feature = -1;
      tree[t.node].value = y_lo == y_hi ? y_lo : std::clamp(sum / cnt, y_lo, y_hi);
    };
    if (cnt <= static_cast<std::size_t>(params.n_min) || y_lo == y_hi) {
      make_leaf();
      continue;
    }

    std::fill(lo.begin(), lo.end(), std::numeric_limits<double>::infinity());
    std::fill(hi.begin(), hi.end(), -std::numeric_limits<double>::infinity());
    for (std::size_t i = t.begin; i < t.end; ++i) {
      const double* row = X + static_cast<std::size_t>(idx[i]) * d;
      for (std::size_t f = 0; f < d; ++f) {
        lo[f] = std::min(lo[f], row[f]);
        hi[f] = std::max(hi[f], row[f]);
      }
    }
    varying.clear();
    for (std::size_t f = 0; f < d; ++f) {
      if (lo[f] < hi[f]) varying.push_back(f);
    }
    if (varying.empty()) {
      make_leaf();
      continue;
    }

    const std::size_t k = std::min(k_max, varying.size());
    for (std::size_t j = 0; j < k; ++j) {
      std::uniform_int_distribution<std::size_t> pick(j, varying.size() - 1);
      std::swap(varying[j], varying[pick(rng)]);
    }
    std::sort(varying.begin(), varying.begin() + static_cast<std::ptrdiff_t>(k));

    int best_f = -1;
    double best_thr = 0.0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t f = varying[j];
      double thr = lo[f] + unit(rng) * (hi[f] - lo[f]);
      if (!(thr > lo[f] && thr < hi[f])) thr = 0.5 * (lo[f] + hi[f]);
      if (!(thr > lo[f] && thr < hi[f])) continue;  // adjacent doubles, no cut exists
      double sl = 0.0;
      std::size_t nl = 0;
      for (std::size_t i = t.begin; i < t.end; ++i) {
        const std::size_t r = idx[i];
        if (X[r * d + f] < thr) {
          sl += Y[r];
          ++nl;
        }
      }
      const std::size_t nr = cnt - nl;
      const double sr = sum - sl;
      // SSE reduction up to the constant sum^2 / cnt
      const double score = sl * sl / static_cast<double>(nl) + sr * sr / static_cast<double>(nr);
      if (score > best_score) {
        best_score = score;
        best_f = static_cast<int>(f);
        best_thr = thr;
      }
    }
    if (best_f < 0) {
      make_leaf();
      continue;
    }

    auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(t.begin),
                              idx.begin() + static_cast<std::ptrdiff_t>(t.end),
                              [&](std::uint32_t r) { return X[static_cast<std::size_t>(r) * d + best_f] < best_thr; });
    const std::size_t split = static_cast<std::size_t>(mid - idx.begin());

    const int left = static_cast<int>(tree.size());
    tree.emplace_back();
    const int right = static_cast<int>(tree.size());
    tree.emplace_back();
    Forest::Node& node = tree[t.node];
    node.feature = best_f;
    node.threshold = best_thr;
    node.left = left;
    node.right = right;
    node.value = sum / cnt;
    stack.push_back({right, split, t.end});
    stack.push_back({left, t.begin, split});
  }
  return tree;
}

double leaf_value(const Forest::Tree& tree, const double* x) {
  const Forest::Node* node = &tree[0];
  while (node->feature >= 0) {
    node = &tree[x[node->feature] < node->threshold ? node->left : node->right];
  }
  return node->value;
}

}  // namespace

Forest Forest::fit(const TrainingSet& ts, const ForestParams& params, std::uint64_t seed) {
  params.validate();
  if (ts.empty()) throw std::invalid_argument("cannot fit a forest on an empty training set");
  if (ts.dim() == 0) throw std::invalid_argument("training inputs have zero dimension");

  Forest forest;
  forest.dim_ = ts.dim();
  forest.params_ = params;
  forest.seed_ = seed;
  forest.trees_.resize(static_cast<std::size_t>(params.n_trees));

  const unsigned hw = std::max(1U, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(hw, static_cast<unsigned>(params.n_trees));
  auto work = [&](unsigned w) {
    for (std::size_t t = w; t < forest.trees_.size(); t += workers) {
      forest.trees_[t] = grow_tree(ts, params, derive_seed(seed, t));
    }
  };
  if (workers <= 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  return forest;
}

double Forest::predict(std::span<const double> x) const {
  if (x.size() != dim_) throw std::invalid_argument("prediction input dimension mismatch");
  double sum = 0.0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& tree : trees_) {
    double v = leaf_value(tree, x.data());
    sum += v;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return std::clamp(sum / static_cast<double>(trees_.size()), lo, hi);
}

void Forest::predict_rows(std::span<const double> rows, std::vector<double>& out) const {
  if (dim_ == 0 || rows.size() % dim_ != 0) throw std::invalid_argument("row matrix dimension mismatch");
  const std::size_t n = rows.size() / dim_;
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = predict(rows.subspan(i * dim_, dim_));
}

void Forest::predict_last_levels(std::span<const double> prefix, std::span<const double> levels,
                                 std::span<double> out) const {
  if (prefix.size() + 1 != dim_) throw std::invalid_argument("prediction prefix dimension mismatch");
  if (out.size() != levels.size()) throw std::invalid_argument("prediction output size mismatch");
  const std::size_t na = levels.size();
  const int last = static_cast<int>(dim_ - 1);
  thread_local std::vector<double> sum, lo, hi;
  sum.assign(na, 0.0);
  lo.assign(na, std::numeric_limits<double>::infinity());
  hi.assign(na, -std::numeric_limits<double>::infinity());
  struct Frame {
    int node;
    std::size_t a0, a1;
  };
  thread_local std::vector<Frame> stack;
  for (const auto& tree : trees_) {
    stack.clear();
    stack.push_back({0, 0, na});
    while (!stack.empty()) {
      Frame f = stack.back();
      stack.pop_back();
      const Node* node = &tree[f.node];
      while (node->feature >= 0 && node->feature != last) {
        node = &tree[prefix[node->feature] < node->threshold ? node->left : node->right];
      }
      if (node->feature < 0) {
        for (std::size_t a = f.a0; a < f.a1; ++a) {
          sum[a] += node->value;
          lo[a] = std::min(lo[a], node->value);
          hi[a] = std::max(hi[a], node->value);
        }
        continue;
      }
      // Levels are ascending, so the cut splits the range into a prefix
      // going left and a suffix going right.
      std::size_t m = f.a0;
      while (m < f.a1 && levels[m] < node->threshold) ++m;
      if (m < f.a1) stack.push_back({node->right, m, f.a1});
      if (f.a0 < m) stack.push_back({node->left, f.a0, m});
    }
  }
  for (std::size_t a = 0; a < na; ++a) {
    out[a] = std::clamp(sum[a] / static_cast<double>(trees_.size()), lo[a], hi[a]);
  }
}

nlohmann::json Forest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : trees_) {
    std::vector<int> feature, left, right;
    std::vector<double> threshold, value;
    for (const auto& n : tree) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    trees.push_back({{"feature", feature},
                     {"threshold", threshold},
                     {"left", left},
                     {"right", right},
                     {"value", value}});
  }
  return {{"dim", dim_},
          {"seed", seed_},
          {"params", {{"n_trees", params_.n_trees}, {"k_split", params_.k_split}, {"n_min", params_.n_min}}},
          {"trees", trees}};
}

Forest Forest::from_json(const nlohmann::json& j) {
  Forest f;
  f.dim_ = j.at("dim").get<std::size_t>();
  f.seed_ = j.at("seed").get<std::uint64_t>();
  const auto& p = j.at("params");
  f.params_.n_trees = p.at("n_trees").get<int>();
  f.params_.k_split = p.at("k_split").get<int>();
  f.params_.n_min = p.at("n_min").get<int>();
  for (const auto& jt : j.at("trees")) {
    auto feature = jt.at("feature").get<std::vector<int>>();
    auto threshold = jt.at("threshold").get<std::vector<double>>();
    auto left = jt.at("left").get<std::vector<int>>();
    auto right = jt.at("right").get<std::vector<int>>();
    auto value = jt.at("value").get<std::vector<double>>();
    const std::size_t n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n || n == 0) {
      throw std::invalid_argument("malformed serialized tree");
    }
    Tree tree(n);
    for (std::size_t i = 0; i < n; ++i) {
      tree[i] = Node{feature[i], threshold[i], left[i], right[i], value[i]};
      if (feature[i] >= 0) {
        if (static_cast<std::size_t>(feature[i]) >= f.dim_ || left[i] <= 0 || right[i] <= 0 ||
            static_cast<std::size_t>(left[i]) >= n || static_cast<std::size_t>(right[i]) >= n) {
          throw std::invalid_argument("serialized tree has dangling node references");
        }
      }
    }
    f.trees_.push_back(std::move(tree));
  }
  if (f.trees_.size() != static_cast<std::size_t>(f.params_.n_trees)) {
    throw std::invalid_argument("serialized forest tree count mismatch");
  }
  return f;
}

}  // namespace batchrl
