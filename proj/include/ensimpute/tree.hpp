#pragma once

// Gain-ratio decision tree with binary numeric splits that trains and
// predicts on records with missing values. A record whose split attribute is
// unobserved descends into both children with its weight scaled by the
// node's branch weights (the fraction of known-valued weight sent each way).
// No pruning.

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ensimpute/data.hpp"

namespace ensimpute {

struct TreeConfig {
  double min_leaf_weight = 2.0;
  int max_depth = -1;  // -1: unlimited
  double min_split_gain = 1e-9;
};

inline void validate(const TreeConfig& c) {
  if (!(c.min_leaf_weight >= 1.0)) throw ValidationError("tree min_leaf_weight must be >= 1");
  if (!(c.min_split_gain >= 0.0)) throw ValidationError("tree min_split_gain must be >= 0");
}

struct TreeNode {
  bool leaf = true;
  std::vector<double> class_weights;  // leaves only
  int attr = -1;
  double threshold = 0.0;  // value <= threshold goes left
  int left = -1;
  int right = -1;
  double weight_left = 0.5;
  double weight_right = 0.5;
};

/// Nodes are stored flat; index 0 is the root.
struct DecisionTree {
  std::vector<TreeNode> nodes;
  std::size_t n_classes = 0;
  std::size_t n_features = 0;
};

struct WeightedRecord {
  std::size_t index;
  double weight;
};

/// Gains within this distance are treated as equal; earlier candidates
/// (lower attribute, then lower threshold) win ties.
inline constexpr double kGainTieEps = 1e-12;

namespace detail {

inline double entropy(const std::vector<double>& w, double total) {
  if (total <= 0.0) return 0.0;
  double h = 0.0;
  for (double x : w)
    if (x > 0.0) {
      const double p = x / total;
      h -= p * std::log2(p);
    }
  return h;
}

inline double split_gain_ratio(const std::vector<double>& left, double wl, const std::vector<double>& right,
                               double wr, double unknown, double parent_known_entropy) {
  const double known = wl + wr;
  const double total = known + unknown;
  if (known <= 0.0 || total <= 0.0) return 0.0;
  const double cond = (wl / known) * entropy(left, wl) + (wr / known) * entropy(right, wr);
  const double gain = (known / total) * (parent_known_entropy - cond);
  double split_info = 0.0;
  for (double w : {wl, wr, unknown})
    if (w > 0.0) {
      const double p = w / total;
      split_info -= p * std::log2(p);
    }
  if (split_info <= 0.0) return 0.0;
  return gain / split_info;
}

}  // namespace detail

/// C4.5-style gain ratio of splitting `records` on attr <= threshold.
/// Gain is computed over records with the attribute observed and scaled by
/// their weight fraction; split information includes the unknown-weight branch.
inline double gain_ratio(const Dataset& data, const std::vector<WeightedRecord>& records, std::size_t attr,
                         double threshold) {
  const std::size_t k = data.n_classes();
  std::vector<double> left(k, 0.0), right(k, 0.0), known(k, 0.0);
  double wl = 0.0, wr = 0.0, wu = 0.0;
  for (const auto& rec : records) {
    const auto y = static_cast<std::size_t>(data.labels[rec.index]);
    if (!data.observed(rec.index, attr)) {
      wu += rec.weight;
      continue;
    }
    known[y] += rec.weight;
    if (data.value(rec.index, attr) <= threshold) {
      left[y] += rec.weight;
      wl += rec.weight;
    } else {
      right[y] += rec.weight;
      wr += rec.weight;
    }
  }
  return detail::split_gain_ratio(left, wl, right, wr, wu, detail::entropy(known, wl + wr));
}

namespace detail {

struct SplitChoice {
  bool found = false;
  std::size_t attr = 0;
  double threshold = 0.0;
  double gain_ratio = 0.0;
};

inline SplitChoice best_split(const Dataset& data, const std::vector<WeightedRecord>& records,
                              const TreeConfig& cfg) {
  const std::size_t k = data.n_classes();
  SplitChoice best;
  std::vector<std::pair<double, std::size_t>> sorted;  // (value, position in records)
  for (std::size_t a = 0; a < data.cols(); ++a) {
    sorted.clear();
    std::vector<double> known(k, 0.0);
    double wk = 0.0, wu = 0.0;
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto& rec = records[i];
      if (!data.observed(rec.index, a)) {
        wu += rec.weight;
        continue;
      }
      sorted.emplace_back(data.value(rec.index, a), i);
      known[static_cast<std::size_t>(data.labels[rec.index])] += rec.weight;
      wk += rec.weight;
    }
    if (sorted.size() < 2) continue;
    std::stable_sort(sorted.begin(), sorted.end(),
                     [](const auto& x, const auto& y) { return x.first < y.first; });
    const double parent_h = entropy(known, wk);
    std::vector<double> left(k, 0.0), right = known;
    double wl = 0.0;
    for (std::size_t j = 0; j + 1 < sorted.size(); ++j) {
      const auto& rec = records[sorted[j].second];
      const auto y = static_cast<std::size_t>(data.labels[rec.index]);
      left[y] += rec.weight;
      right[y] -= rec.weight;
      wl += rec.weight;
      if (!(sorted[j].first < sorted[j + 1].first)) continue;
      const double wr = wk - wl;
      if (wl < cfg.min_leaf_weight || wr < cfg.min_leaf_weight) continue;
      const double gr = split_gain_ratio(left, wl, right, wr, wu, parent_h);
      if (!best.found || gr > best.gain_ratio + kGainTieEps) {
        best.found = true;
        best.attr = a;
        best.threshold = 0.5 * (sorted[j].first + sorted[j + 1].first);
        best.gain_ratio = gr;
      }
    }
  }
  return best;
}

inline int grow(DecisionTree& tree, const Dataset& data, const std::vector<WeightedRecord>& records,
                const TreeConfig& cfg, int depth) {
  const std::size_t k = data.n_classes();
  std::vector<double> dist(k, 0.0);
  double total = 0.0;
  for (const auto& rec : records) {
    dist[static_cast<std::size_t>(data.labels[rec.index])] += rec.weight;
    total += rec.weight;
  }
  const int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  tree.nodes[static_cast<std::size_t>(id)].class_weights = dist;

  const auto nonzero = std::count_if(dist.begin(), dist.end(), [](double w) { return w > 0.0; });
  if (nonzero <= 1 || total < 2.0 * cfg.min_leaf_weight || (cfg.max_depth >= 0 && depth >= cfg.max_depth))
    return id;

  const SplitChoice s = best_split(data, records, cfg);
  if (!s.found || s.gain_ratio <= cfg.min_split_gain) return id;

  double wl = 0.0, wr = 0.0;
  for (const auto& rec : records) {
    if (!data.observed(rec.index, s.attr)) continue;
    (data.value(rec.index, s.attr) <= s.threshold ? wl : wr) += rec.weight;
  }
  const double fl = wl / (wl + wr);
  const double fr = wr / (wl + wr);

  std::vector<WeightedRecord> left, right;
  for (const auto& rec : records) {
    if (!data.observed(rec.index, s.attr)) {
      left.push_back({rec.index, rec.weight * fl});
      right.push_back({rec.index, rec.weight * fr});
    } else if (data.value(rec.index, s.attr) <= s.threshold) {
      left.push_back(rec);
    } else {
      right.push_back(rec);
    }
  }
  const int l = grow(tree, data, left, cfg, depth + 1);
  const int r = grow(tree, data, right, cfg, depth + 1);
  TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
  node.leaf = false;
  node.class_weights.clear();
  node.attr = static_cast<int>(s.attr);
  node.threshold = s.threshold;
  node.left = l;
  node.right = r;
  node.weight_left = fl;
  node.weight_right = fr;
  return id;
}

}  // namespace detail

/// Trains on `data` (which may be incomplete). `weights`, when non-empty,
/// gives a per-record instance weight.
inline DecisionTree train_tree(const Dataset& data, const TreeConfig& cfg = {},
                               const std::vector<double>& weights = {}) {
  validate(cfg);
  if (data.rows() == 0) throw ValidationError("train_tree: empty training set");
  if (!weights.empty() && weights.size() != data.rows())
    throw ValidationError("train_tree: weight count does not match record count");
  std::vector<WeightedRecord> records;
  records.reserve(data.rows());
  for (std::size_t i = 0; i < data.rows(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w > 0.0) records.push_back({i, w});
  }
  if (records.empty()) throw ValidationError("train_tree: no positive-weight records");
  DecisionTree tree;
  tree.n_classes = data.n_classes();
  tree.n_features = data.cols();
  detail::grow(tree, data, records, cfg, 0);
  return tree;
}

/// Class probabilities for one record. `observed[c]` false marks a missing cell.
template <class Values, class Observed>
std::vector<double> predict_dist(const DecisionTree& tree, const Values& values, const Observed& observed) {
  std::vector<double> out(tree.n_classes, 0.0);
  struct Frame {
    int node;
    double weight;
  };
  std::vector<Frame> stack{{0, 1.0}};
  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    const TreeNode& n = tree.nodes[static_cast<std::size_t>(f.node)];
    if (n.leaf) {
      double total = 0.0;
      for (double w : n.class_weights) total += w;
      for (std::size_t k = 0; k < out.size(); ++k) out[k] += f.weight * n.class_weights[k] / total;
      continue;
    }
    const auto a = static_cast<std::size_t>(n.attr);
    if (!observed[a]) {
      if (n.weight_right > 0.0) stack.push_back({n.right, f.weight * n.weight_right});
      if (n.weight_left > 0.0) stack.push_back({n.left, f.weight * n.weight_left});
    } else {
      stack.push_back({values[a] <= n.threshold ? n.left : n.right, f.weight});
    }
  }
  double total = 0.0;
  for (double p : out) total += p;
  for (double& p : out) p /= total;
  return out;
}

inline std::vector<double> predict_dist(const DecisionTree& tree, const Dataset& data, std::size_t row) {
  std::vector<double> v(data.cols());
  std::vector<bool> m(data.cols());
  for (std::size_t c = 0; c < data.cols(); ++c) {
    v[c] = data.value(row, c);
    m[c] = data.observed(row, c);
  }
  return predict_dist(tree, v, m);
}

/// Index of the largest entry; ties go to the lowest index.
inline int argmax(const std::vector<double>& p) {
  int best = 0;
  for (std::size_t k = 1; k < p.size(); ++k)
    if (p[k] > p[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  return best;
}

inline std::size_t leaf_count(const DecisionTree& t) {
  return static_cast<std::size_t>(std::count_if(t.nodes.begin(), t.nodes.end(), [](const TreeNode& n) { return n.leaf; }));
}

inline void dump_tree(const DecisionTree& tree, std::ostream& out, const std::vector<std::string>& feature_names = {},
                      const std::vector<std::string>& class_names = {}) {
  auto feat = [&](int a) {
    return static_cast<std::size_t>(a) < feature_names.size() ? feature_names[static_cast<std::size_t>(a)]
                                                              : "x" + std::to_string(a);
  };
  auto cls = [&](std::size_t k) { return k < class_names.size() ? class_names[k] : std::to_string(k); };
  struct Item {
    int node;
    int depth;
    std::string prefix;
  };
  std::vector<Item> stack{{0, 0, ""}};
  while (!stack.empty()) {
    const Item it = stack.back();
    stack.pop_back();
    const TreeNode& n = tree.nodes[static_cast<std::size_t>(it.node)];
    const std::string indent(static_cast<std::size_t>(2 * it.depth), ' ');
    if (n.leaf) {
      out << indent << it.prefix << "leaf [";
      for (std::size_t k = 0; k < n.class_weights.size(); ++k)
        out << (k ? ", " : "") << cls(k) << ": " << n.class_weights[k];
      out << "]\n";
      continue;
    }
    out << indent << it.prefix << feat(n.attr) << " <= " << n.threshold << " (branch weights " << n.weight_left
        << " / " << n.weight_right << ")\n";
    stack.push_back({n.right, it.depth + 1, "else: "});
    stack.push_back({n.left, it.depth + 1, "then: "});
  }
}

}  // namespace ensimpute
