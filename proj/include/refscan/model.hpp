#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "refscan/error.hpp"
#include "refscan/io.hpp"
#include "refscan/pipeline.hpp"
#include "refscan/random.hpp"

namespace refscan {

/// Read-only access to one feature vector, either a transformed sparse row
/// (textual indices below `vocab`, then numeric values) or a dense span.
class FeatureView {
 public:
  FeatureView(const FeatureRow& row, std::size_t vocab)
      : text_(row.textual), numeric_(row.numeric), vocab_(vocab), width_(vocab + row.numeric.size()) {}

  explicit FeatureView(std::span<const double> dense)
      : numeric_(dense), width_(dense.size()) {}

  std::size_t width() const { return width_; }

  double operator[](std::size_t j) const {
    if (j < vocab_) {
      return std::binary_search(text_.begin(), text_.end(), static_cast<std::uint32_t>(j)) ? 1.0 : 0.0;
    }
    return numeric_[j - vocab_];
  }

  /// Calls fn(index, value) for every nonzero entry in index order.
  template <class Fn>
  void for_each_nonzero(Fn&& fn) const {
    for (auto t : text_) fn(static_cast<std::size_t>(t), 1.0);
    for (std::size_t i = 0; i < numeric_.size(); ++i) {
      if (numeric_[i] != 0.0) fn(vocab_ + i, numeric_[i]);
    }
  }

 private:
  std::span<const std::uint32_t> text_;
  std::span<const double> numeric_;
  std::size_t vocab_ = 0;
  std::size_t width_ = 0;
};

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Common interface of the primary model and the baselines. Class 1 is
/// refactoring.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::string_view kind() const = 0;
  virtual std::size_t width() const = 0;
  virtual double score(const FeatureView& x) const = 0;
  virtual Json to_json() const = 0;

  std::string schema_hash;

  double predict_proba(const FeatureView& x) const {
    if (x.width() != width()) {
      throw Error(ErrorCode::kWidthMismatch, "row width " + std::to_string(x.width()) +
                                                 " != model width " + std::to_string(width()));
    }
    return score(x);
  }

  double predict_proba(std::span<const double> dense) const { return predict_proba(FeatureView(dense)); }

  std::vector<double> predict_all(const FeatureMatrix& m) const {
    std::vector<double> out;
    out.reserve(m.rows.size());
    for (const auto& r : m.rows) out.push_back(predict_proba(FeatureView(r, m.vocab_size)));
    return out;
  }
};

inline constexpr int kModelVersion = 1;

inline void require_both_classes(const FeatureMatrix& m) {
  bool pos = false;
  bool neg = false;
  for (const auto& r : m.rows) (r.label == 1 ? pos : neg) = true;
  if (!pos || !neg) throw Error(ErrorCode::kSingleClassInput, "training data has a single class");
}

// ---------------------------------------------------------------------------
// Gradient-boosted trees
// ---------------------------------------------------------------------------

struct GbdtParams {
  std::size_t n_trees = 200;
  double learning_rate = 0.1;
  std::size_t max_leaves = 31;
  std::size_t min_samples_leaf = 20;
  std::size_t n_bins = 256;
  double subsample = 1.0;
  std::uint64_t seed = 0;

  friend bool operator==(const GbdtParams&, const GbdtParams&) = default;
};

inline Json to_json(const GbdtParams& p) {
  return Json{{"n_trees", p.n_trees},
              {"learning_rate", p.learning_rate},
              {"max_leaves", p.max_leaves},
              {"min_samples_leaf", p.min_samples_leaf},
              {"n_bins", p.n_bins},
              {"subsample", p.subsample},
              {"seed", p.seed}};
}

inline GbdtParams gbdt_params_from_json(const Json& j) {
  GbdtParams p;
  p.n_trees = j.at("n_trees").get<std::size_t>();
  p.learning_rate = j.at("learning_rate").get<double>();
  p.max_leaves = j.at("max_leaves").get<std::size_t>();
  p.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
  p.n_bins = j.at("n_bins").get<std::size_t>();
  p.subsample = j.at("subsample").get<double>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

inline void validate(const GbdtParams& p) {
  if (p.learning_rate < 0 || !std::isfinite(p.learning_rate)) {
    throw Error(ErrorCode::kUsage, "learning_rate must be finite and >= 0");
  }
  if (p.max_leaves < 1 || p.min_samples_leaf < 1) throw Error(ErrorCode::kUsage, "max_leaves and min_samples_leaf must be >= 1");
  if (p.n_bins < 2 || p.n_bins > 256) throw Error(ErrorCode::kUsage, "n_bins must be in [2, 256]");
  if (!(p.subsample > 0.0 && p.subsample <= 1.0)) throw Error(ErrorCode::kUsage, "subsample must be in (0, 1]");
}

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;

  double leaf_value(const FeatureView& x) const {
    std::size_t n = 0;
    while (!nodes[n].is_leaf()) {
      const auto& node = nodes[n];
      n = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                                               : node.right);
    }
    return nodes[n].value;
  }

  std::size_t internal_nodes() const {
    return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(),
                                                  [](const TreeNode& n) { return !n.is_leaf(); }));
  }
};

class GbdtModel final : public Classifier {
 public:
  GbdtParams params;
  double base_score = 0.0;
  std::size_t n_features = 0;
  std::vector<Tree> trees;
  std::map<std::size_t, std::size_t> split_counts;

  std::string_view kind() const override { return "gbdt"; }
  std::size_t width() const override { return n_features; }

  double raw_score(const FeatureView& x) const {
    double sum = 0.0;
    for (const auto& t : trees) sum += t.leaf_value(x);
    return base_score + params.learning_rate * sum;
  }

  double score(const FeatureView& x) const override { return sigmoid(raw_score(x)); }

  std::size_t internal_nodes() const {
    std::size_t n = 0;
    for (const auto& t : trees) n += t.internal_nodes();
    return n;
  }

  Json to_json() const override {
    Json j;
    j["version"] = kModelVersion;
    j["kind"] = "gbdt";
    j["schema_hash"] = schema_hash;
    j["width"] = n_features;
    j["params"] = refscan::to_json(params);
    j["base_score"] = base_score;
    Json ts = Json::array();
    for (const auto& t : trees) {
      Json nodes = Json::array();
      for (const auto& n : t.nodes) {
        if (n.is_leaf()) {
          nodes.push_back(Json{{"v", n.value}});
        } else {
          nodes.push_back(Json{{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}});
        }
      }
      ts.push_back(std::move(nodes));
    }
    j["trees"] = std::move(ts);
    Json sc = Json::object();
    for (const auto& [f, c] : split_counts) sc[std::to_string(f)] = c;
    j["split_counts"] = std::move(sc);
    return j;
  }

  static GbdtModel from_json(const Json& j) {
    GbdtModel m;
    m.schema_hash = j.value("schema_hash", "");
    m.n_features = j.at("width").get<std::size_t>();
    m.params = gbdt_params_from_json(j.at("params"));
    m.base_score = j.at("base_score").get<double>();
    for (const auto& jt : j.at("trees")) {
      Tree t;
      for (const auto& jn : jt) {
        TreeNode n;
        if (jn.contains("v")) {
          n.value = jn.at("v").get<double>();
        } else {
          n.feature = jn.at("f").get<int>();
          n.threshold = jn.at("t").get<double>();
          n.left = jn.at("l").get<int>();
          n.right = jn.at("r").get<int>();
        }
        t.nodes.push_back(n);
      }
      const auto size = static_cast<int>(t.nodes.size());
      for (const auto& n : t.nodes) {
        if (n.is_leaf()) continue;
        if (static_cast<std::size_t>(n.feature) >= m.n_features || n.left <= 0 || n.left >= size ||
            n.right <= 0 || n.right >= size) {
          throw Error(ErrorCode::kParseError, "malformed tree node");
        }
      }
      m.trees.push_back(std::move(t));
    }
    for (const auto& [f, c] : j.at("split_counts").items()) {
      m.split_counts[std::stoul(f)] = c.get<std::size_t>();
    }
    return m;
  }
};

namespace detail {

inline constexpr double kLeafL2 = 1.0;
inline constexpr double kMinHessian = 1e-3;

// Quantile bin edges over the training values of one feature. Edges are
// actual data values; bin b holds values in (edges[b-1], edges[b]].
inline std::vector<double> quantile_edges(std::vector<double> values, std::size_t n_bins) {
  std::sort(values.begin(), values.end());
  std::vector<double> unique = values;
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  if (unique.size() <= n_bins) return unique;
  std::vector<double> edges;
  const std::size_t n = values.size();
  for (std::size_t b = 1; b <= n_bins; ++b) {
    const std::size_t pos = std::max<std::size_t>(b * n / n_bins, 1) - 1;
    const double v = values[pos];
    if (edges.empty() || v > edges.back()) edges.push_back(v);
  }
  if (edges.back() < values.back()) edges.push_back(values.back());
  return edges;
}

inline std::uint8_t bin_of(const std::vector<double>& edges, double x) {
  const auto it = std::lower_bound(edges.begin(), edges.end(), x);
  const auto b = static_cast<std::size_t>(it - edges.begin());
  return static_cast<std::uint8_t>(std::min(b, edges.size() - 1));
}

struct GradStat {
  double g = 0.0;
  double h = 0.0;
  std::size_t n = 0;

  void add(double gg, double hh) {
    g += gg;
    h += hh;
    ++n;
  }
};

struct SplitChoice {
  double gain = 0.0;
  std::size_t feature = 0;
  std::size_t bin = 0;  // left = bins <= bin
  bool valid = false;
};

class GbdtTrainer {
 public:
  GbdtTrainer(const FeatureMatrix& m, const GbdtParams& p) : m_(m), p_(p) {
    const std::size_t n = m.rows.size();
    vocab_ = m.vocab_size;
    const std::size_t numeric = m.numeric_columns.size();
    edges_.resize(numeric);
    bins_.assign(numeric, std::vector<std::uint8_t>(n));
    for (std::size_t c = 0; c < numeric; ++c) {
      std::vector<double> col(n);
      for (std::size_t r = 0; r < n; ++r) col[r] = m.rows[r].numeric[c];
      edges_[c] = quantile_edges(col, p.n_bins);
      for (std::size_t r = 0; r < n; ++r) bins_[c][r] = bin_of(edges_[c], col[r]);
    }
  }

  Tree grow(const std::vector<double>& grad, const std::vector<double>& hess,
            const std::vector<std::uint32_t>& sample, std::map<std::size_t, std::size_t>& split_counts) {
    Tree tree;
    struct Leaf {
      std::size_t node;
      std::vector<std::uint32_t> rows;
      GradStat total;
      SplitChoice best;
    };
    std::vector<Leaf> leaves;
    tree.nodes.emplace_back();
    leaves.push_back(Leaf{0, sample, {}, {}});
    prepare(leaves.back().rows, grad, hess, leaves.back().total, leaves.back().best);

    while (leaves.size() < p_.max_leaves) {
      std::size_t pick = leaves.size();
      double best_gain = 0.0;
      for (std::size_t i = 0; i < leaves.size(); ++i) {
        if (leaves[i].best.valid && leaves[i].best.gain > best_gain) {
          best_gain = leaves[i].best.gain;
          pick = i;
        }
      }
      if (pick == leaves.size()) break;

      Leaf parent = std::move(leaves[pick]);
      const auto split = parent.best;
      std::vector<std::uint32_t> left_rows;
      std::vector<std::uint32_t> right_rows;
      for (auto r : parent.rows) (goes_left(r, split) ? left_rows : right_rows).push_back(r);

      const int left_id = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      auto& node = tree.nodes[parent.node];
      node.feature = static_cast<int>(split.feature);
      node.threshold = threshold_of(split);
      node.left = left_id;
      node.right = left_id + 1;
      ++split_counts[split.feature];

      leaves[pick] = Leaf{static_cast<std::size_t>(left_id), std::move(left_rows), {}, {}};
      prepare(leaves[pick].rows, grad, hess, leaves[pick].total, leaves[pick].best);
      leaves.push_back(Leaf{static_cast<std::size_t>(left_id + 1), std::move(right_rows), {}, {}});
      prepare(leaves.back().rows, grad, hess, leaves.back().total, leaves.back().best);
    }

    for (const auto& leaf : leaves) {
      tree.nodes[leaf.node].value = -leaf.total.g / (leaf.total.h + kLeafL2);
    }
    return tree;
  }

  // Leaf value for training row r, following the binned representation.
  double leaf_value(const Tree& tree, std::uint32_t r) const {
    std::size_t n = 0;
    while (!tree.nodes[n].is_leaf()) {
      const auto& node = tree.nodes[n];
      const auto f = static_cast<std::size_t>(node.feature);
      bool left = false;
      if (f < vocab_) {
        left = !has_term(r, f);
      } else {
        left = edges_[f - vocab_][bins_[f - vocab_][r]] <= node.threshold;
      }
      n = static_cast<std::size_t>(left ? node.left : node.right);
    }
    return tree.nodes[n].value;
  }

 private:
  bool has_term(std::uint32_t r, std::size_t f) const {
    const auto& t = m_.rows[r].textual;
    return std::binary_search(t.begin(), t.end(), static_cast<std::uint32_t>(f));
  }

  bool goes_left(std::uint32_t r, const SplitChoice& s) const {
    if (s.feature < vocab_) return !has_term(r, s.feature);
    return bins_[s.feature - vocab_][r] <= s.bin;
  }

  double threshold_of(const SplitChoice& s) const {
    if (s.feature < vocab_) return 0.0;
    return edges_[s.feature - vocab_][s.bin];
  }

  static double leaf_objective(double g, double h) { return g * g / (h + kLeafL2); }

  void consider(const GradStat& left, const GradStat& total, std::size_t feature, std::size_t bin,
                double parent_obj, SplitChoice& best) const {
    const GradStat right{total.g - left.g, total.h - left.h, total.n - left.n};
    if (left.n < p_.min_samples_leaf || right.n < p_.min_samples_leaf) return;
    if (left.h < kMinHessian || right.h < kMinHessian) return;
    const double gain = leaf_objective(left.g, left.h) + leaf_objective(right.g, right.h) - parent_obj;
    if (gain > best.gain) best = SplitChoice{gain, feature, bin, true};
  }

  void prepare(const std::vector<std::uint32_t>& rows, const std::vector<double>& grad,
               const std::vector<double>& hess, GradStat& total, SplitChoice& best) {
    total = {};
    for (auto r : rows) total.add(grad[r], hess[r]);
    best = {};
    if (rows.size() < 2 * p_.min_samples_leaf) return;
    const double parent_obj = leaf_objective(total.g, total.h);

    if (vocab_ > 0) {
      present_.assign(vocab_, GradStat{});
      for (auto r : rows) {
        for (auto t : m_.rows[r].textual) present_[t].add(grad[r], hess[r]);
      }
      for (std::size_t f = 0; f < vocab_; ++f) {
        const auto& pr = present_[f];
        if (pr.n == 0 || pr.n == rows.size()) continue;
        const GradStat absent{total.g - pr.g, total.h - pr.h, total.n - pr.n};
        consider(absent, total, f, 0, parent_obj, best);
      }
    }

    for (std::size_t c = 0; c < edges_.size(); ++c) {
      const std::size_t nb = edges_[c].size();
      if (nb < 2) continue;
      hist_.assign(nb, GradStat{});
      const auto& col = bins_[c];
      for (auto r : rows) hist_[col[r]].add(grad[r], hess[r]);
      GradStat left;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        left.g += hist_[b].g;
        left.h += hist_[b].h;
        left.n += hist_[b].n;
        if (hist_[b].n == 0) continue;
        consider(left, total, vocab_ + c, b, parent_obj, best);
      }
    }
  }

  const FeatureMatrix& m_;
  const GbdtParams& p_;
  std::size_t vocab_ = 0;
  std::vector<std::vector<double>> edges_;
  std::vector<std::vector<std::uint8_t>> bins_;
  std::vector<GradStat> present_;
  std::vector<GradStat> hist_;
};

}  // namespace detail

enum class SingleClassPolicy { kReject, kAllow };

/// Leaf-wise histogram GBDT on logistic loss with Newton leaf values.
/// With SingleClassPolicy::kAllow a one-class matrix trains a model whose
/// base score is the clamped log-odds of the observed prevalence.
inline GbdtModel train_gbdt(const FeatureMatrix& matrix, const GbdtParams& params,
                            SingleClassPolicy policy = SingleClassPolicy::kReject) {
  validate(params);
  if (matrix.rows.empty()) throw Error(ErrorCode::kEmptyTraining, "no training rows");
  if (policy == SingleClassPolicy::kReject) require_both_classes(matrix);

  const std::size_t n = matrix.rows.size();
  std::vector<double> y(n);
  double positives = 0;
  for (std::size_t r = 0; r < n; ++r) {
    y[r] = matrix.rows[r].label == 1 ? 1.0 : 0.0;
    positives += y[r];
  }
  const double prior = std::clamp(positives / static_cast<double>(n), 1e-6, 1.0 - 1e-6);

  GbdtModel model;
  model.params = params;
  model.n_features = matrix.width();
  model.base_score = std::log(prior / (1.0 - prior));

  detail::GbdtTrainer trainer(matrix, params);
  Rng rng(params.seed);
  std::vector<double> f(n, model.base_score);
  std::vector<double> grad(n);
  std::vector<double> hess(n);
  std::vector<std::uint32_t> sample;
  sample.reserve(n);
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    for (std::size_t r = 0; r < n; ++r) {
      const double p = sigmoid(f[r]);
      grad[r] = p - y[r];
      hess[r] = p * (1.0 - p);
    }
    sample.clear();
    for (std::size_t r = 0; r < n; ++r) {
      if (params.subsample >= 1.0 || rng.bernoulli(params.subsample)) sample.push_back(static_cast<std::uint32_t>(r));
    }
    if (sample.empty()) sample.push_back(static_cast<std::uint32_t>(rng.below(n)));
    Tree tree = trainer.grow(grad, hess, sample, model.split_counts);
    for (std::size_t r = 0; r < n; ++r) {
      f[r] += params.learning_rate * trainer.leaf_value(tree, static_cast<std::uint32_t>(r));
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace refscan
