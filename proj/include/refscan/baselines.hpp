#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "refscan/error.hpp"
#include "refscan/io.hpp"
#include "refscan/model.hpp"
#include "refscan/random.hpp"

namespace refscan {

struct BaselineParams {
  std::size_t max_depth = 8;         // decision_tree, random_forest
  std::size_t min_samples_leaf = 1;  // decision_tree, random_forest
  std::size_t n_trees = 100;         // random_forest
  std::size_t k = 5;                 // knn
  double alpha = 1.0;                // complement_naive_bayes
  std::uint64_t seed = 0;
};

inline Json to_json(const BaselineParams& p) {
  return Json{{"max_depth", p.max_depth}, {"min_samples_leaf", p.min_samples_leaf},
              {"n_trees", p.n_trees},     {"k", p.k},
              {"alpha", p.alpha},         {"seed", p.seed}};
}

inline BaselineParams baseline_params_from_json(const Json& j) {
  BaselineParams p;
  p.max_depth = j.value("max_depth", p.max_depth);
  p.min_samples_leaf = j.value("min_samples_leaf", p.min_samples_leaf);
  p.n_trees = j.value("n_trees", p.n_trees);
  p.k = j.value("k", p.k);
  p.alpha = j.value("alpha", p.alpha);
  p.seed = j.value("seed", p.seed);
  return p;
}

namespace detail {

inline Json tree_to_json(const Tree& t) {
  Json nodes = Json::array();
  for (const auto& n : t.nodes) {
    if (n.is_leaf()) {
      nodes.push_back(Json{{"v", n.value}});
    } else {
      nodes.push_back(Json{{"f", n.feature}, {"t", n.threshold}, {"l", n.left}, {"r", n.right}});
    }
  }
  return nodes;
}

inline Tree tree_from_json(const Json& j, std::size_t width) {
  Tree t;
  for (const auto& jn : j) {
    TreeNode n;
    if (jn.contains("v")) {
      n.value = jn.at("v").get<double>();
    } else {
      n.feature = jn.at("f").get<int>();
      n.threshold = jn.at("t").get<double>();
      n.left = jn.at("l").get<int>();
      n.right = jn.at("r").get<int>();
      if (static_cast<std::size_t>(n.feature) >= width) throw Error(ErrorCode::kParseError, "feature out of range");
    }
    t.nodes.push_back(n);
  }
  return t;
}

inline double gini(double pos, double total) {
  if (total <= 0) return 0.0;
  const double p = pos / total;
  return 2.0 * p * (1.0 - p);
}

// CART on gini impurity with midpoint thresholds. When max_features > 0 a
// fresh random feature subset of that size is drawn at every node.
class CartBuilder {
 public:
  CartBuilder(const FeatureMatrix& m, const BaselineParams& p, std::size_t max_features, Rng* rng)
      : m_(m), p_(p), max_features_(max_features), rng_(rng) {}

  Tree build(std::vector<std::uint32_t> rows) {
    Tree t;
    t.nodes.emplace_back();
    grow(t, 0, std::move(rows), 0);
    return t;
  }

 private:
  double value(std::uint32_t r, std::size_t j) const { return FeatureView(m_.rows[r], m_.vocab_size)[j]; }

  void grow(Tree& t, std::size_t node, std::vector<std::uint32_t> rows, std::size_t depth) {
    double pos = 0;
    for (auto r : rows) pos += m_.rows[r].label == 1 ? 1.0 : 0.0;
    const double total = static_cast<double>(rows.size());
    t.nodes[node].value = total > 0 ? pos / total : 0.0;
    if (depth >= p_.max_depth || rows.size() < 2 * p_.min_samples_leaf || pos == 0 || pos == total) return;

    const std::size_t width = m_.width();
    std::vector<std::size_t> features(width);
    std::iota(features.begin(), features.end(), 0);
    if (max_features_ > 0 && max_features_ < width) {
      for (std::size_t i = 0; i < max_features_; ++i) {
        const auto j = i + static_cast<std::size_t>(rng_->below(width - i));
        std::swap(features[i], features[j]);
      }
      features.resize(max_features_);
      std::sort(features.begin(), features.end());
    }

    double best = gini(pos, total) * total - 1e-12;
    int best_feature = -1;
    double best_threshold = 0;
    std::vector<std::pair<double, int>> xs(rows.size());
    for (auto j : features) {
      for (std::size_t i = 0; i < rows.size(); ++i) xs[i] = {value(rows[i], j), m_.rows[rows[i]].label};
      std::sort(xs.begin(), xs.end());
      if (xs.front().first == xs.back().first) continue;
      double left_pos = 0;
      for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        left_pos += xs[i].second == 1 ? 1.0 : 0.0;
        if (xs[i].first == xs[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = total - nl;
        if (nl < static_cast<double>(p_.min_samples_leaf) || nr < static_cast<double>(p_.min_samples_leaf)) continue;
        const double impurity = gini(left_pos, nl) * nl + gini(pos - left_pos, nr) * nr;
        if (impurity < best) {
          best = impurity;
          best_feature = static_cast<int>(j);
          best_threshold = (xs[i].first + xs[i + 1].first) / 2.0;
        }
      }
    }
    if (best_feature < 0) return;

    std::vector<std::uint32_t> left;
    std::vector<std::uint32_t> right;
    for (auto r : rows) {
      (value(r, static_cast<std::size_t>(best_feature)) <= best_threshold ? left : right).push_back(r);
    }
    const int left_id = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    t.nodes.emplace_back();
    t.nodes[node].feature = best_feature;
    t.nodes[node].threshold = best_threshold;
    t.nodes[node].left = left_id;
    t.nodes[node].right = left_id + 1;
    grow(t, static_cast<std::size_t>(left_id), std::move(left), depth + 1);
    grow(t, static_cast<std::size_t>(left_id + 1), std::move(right), depth + 1);
  }

  const FeatureMatrix& m_;
  const BaselineParams& p_;
  std::size_t max_features_;
  Rng* rng_;
};

}  // namespace detail

class DecisionTreeModel final : public Classifier {
 public:
  BaselineParams params;
  std::size_t n_features = 0;
  Tree tree;

  std::string_view kind() const override { return "decision_tree"; }
  std::size_t width() const override { return n_features; }
  double score(const FeatureView& x) const override { return tree.leaf_value(x); }

  Json to_json() const override {
    return Json{{"version", kModelVersion}, {"kind", kind()},  {"schema_hash", schema_hash},
                {"width", n_features},      {"params", refscan::to_json(params)},
                {"tree", detail::tree_to_json(tree)}};
  }
};

class RandomForestModel final : public Classifier {
 public:
  BaselineParams params;
  std::size_t n_features = 0;
  std::vector<Tree> trees;

  std::string_view kind() const override { return "random_forest"; }
  std::size_t width() const override { return n_features; }

  double score(const FeatureView& x) const override {
    if (trees.empty()) return 0.5;
    double sum = 0;
    for (const auto& t : trees) sum += t.leaf_value(x);
    return sum / static_cast<double>(trees.size());
  }

  Json to_json() const override {
    Json ts = Json::array();
    for (const auto& t : trees) ts.push_back(detail::tree_to_json(t));
    return Json{{"version", kModelVersion}, {"kind", kind()},  {"schema_hash", schema_hash},
                {"width", n_features},      {"params", refscan::to_json(params)},
                {"trees", std::move(ts)}};
  }
};

/// Complement naive Bayes. Each class c is scored with the negated log
/// complement-class feature probabilities; probability of class 1 is the
/// logistic of the score difference.
class ComplementNbModel final : public Classifier {
 public:
  BaselineParams params;
  std::vector<double> weight0;  // -log theta of the complement of class 0
  std::vector<double> weight1;

  std::string_view kind() const override { return "complement_naive_bayes"; }
  std::size_t width() const override { return weight0.size(); }

  double score(const FeatureView& x) const override {
    double diff = 0;
    x.for_each_nonzero([&](std::size_t j, double v) { diff += v * (weight1[j] - weight0[j]); });
    return sigmoid(diff);
  }

  Json to_json() const override {
    return Json{{"version", kModelVersion}, {"kind", kind()},  {"schema_hash", schema_hash},
                {"width", width()},         {"params", refscan::to_json(params)},
                {"weight0", weight0},       {"weight1", weight1}};
  }
};

/// k nearest neighbours under Euclidean distance; probability is the
/// positive fraction among the k nearest (ties by training row order).
class KnnModel final : public Classifier {
 public:
  BaselineParams params;
  FeatureMatrix training;

  std::string_view kind() const override { return "knn"; }
  std::size_t width() const override { return training.width(); }

  double score(const FeatureView& x) const override {
    const std::size_t vocab = training.vocab_size;
    std::vector<double> q(width());
    double text_norm = 0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      q[j] = x[j];
      if (j < vocab) text_norm += q[j] * q[j];
    }
    std::vector<std::pair<double, std::size_t>> d(training.rows.size());
    for (std::size_t r = 0; r < training.rows.size(); ++r) {
      const auto& row = training.rows[r];
      double s = text_norm;
      for (auto t : row.textual) s += (q[t] - 1.0) * (q[t] - 1.0) - q[t] * q[t];
      for (std::size_t c = 0; c < row.numeric.size(); ++c) {
        const double diff = q[vocab + c] - row.numeric[c];
        s += diff * diff;
      }
      d[r] = {s, r};
    }
    const std::size_t k = std::min(params.k, d.size());
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    double pos = 0;
    for (std::size_t i = 0; i < k; ++i) pos += training.rows[d[i].second].label == 1 ? 1.0 : 0.0;
    return pos / static_cast<double>(k);
  }

  Json to_json() const override {
    Json rows = Json::array();
    for (const auto& r : training.rows) {
      rows.push_back(Json{{"label", r.label}, {"text", r.textual}, {"num", r.numeric}});
    }
    return Json{{"version", kModelVersion},
                {"kind", kind()},
                {"schema_hash", schema_hash},
                {"width", width()},
                {"params", refscan::to_json(params)},
                {"vocab_size", training.vocab_size},
                {"numeric", training.numeric_columns},
                {"rows", std::move(rows)}};
  }
};

inline DecisionTreeModel train_decision_tree(const FeatureMatrix& m, const BaselineParams& p) {
  require_both_classes(m);
  DecisionTreeModel model;
  model.params = p;
  model.n_features = m.width();
  std::vector<std::uint32_t> rows(m.rows.size());
  std::iota(rows.begin(), rows.end(), 0);
  model.tree = detail::CartBuilder(m, p, 0, nullptr).build(std::move(rows));
  return model;
}

inline RandomForestModel train_random_forest(const FeatureMatrix& m, const BaselineParams& p) {
  require_both_classes(m);
  RandomForestModel model;
  model.params = p;
  model.n_features = m.width();
  Rng rng(p.seed);
  const auto max_features = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::sqrt(static_cast<double>(m.width()))));
  for (std::size_t t = 0; t < p.n_trees; ++t) {
    Rng tree_rng = rng.fork(t);
    std::vector<std::uint32_t> rows(m.rows.size());
    for (auto& r : rows) r = static_cast<std::uint32_t>(tree_rng.below(m.rows.size()));
    model.trees.push_back(detail::CartBuilder(m, p, max_features, &tree_rng).build(std::move(rows)));
  }
  return model;
}

inline ComplementNbModel train_complement_nb(const FeatureMatrix& m, const BaselineParams& p) {
  require_both_classes(m);
  const std::size_t width = m.width();
  std::vector<double> counts0(width, 0.0);
  std::vector<double> counts1(width, 0.0);
  for (const auto& r : m.rows) {
    auto& counts = r.label == 1 ? counts1 : counts0;
    FeatureView(r, m.vocab_size).for_each_nonzero([&](std::size_t j, double v) { counts[j] += v; });
  }
  ComplementNbModel model;
  model.params = p;
  // The complement of class 0 is class 1 and vice versa.
  auto weights = [&](const std::vector<double>& complement) {
    const double total = std::accumulate(complement.begin(), complement.end(), 0.0) +
                         p.alpha * static_cast<double>(width);
    std::vector<double> w(width);
    for (std::size_t j = 0; j < width; ++j) w[j] = -std::log((complement[j] + p.alpha) / total);
    return w;
  };
  model.weight0 = weights(counts1);
  model.weight1 = weights(counts0);
  return model;
}

inline KnnModel train_knn(const FeatureMatrix& m, const BaselineParams& p) {
  require_both_classes(m);
  if (p.k == 0) throw Error(ErrorCode::kUsage, "knn k must be >= 1");
  KnnModel model;
  model.params = p;
  model.training = m;
  for (auto& r : model.training.rows) {
    r.sha.clear();
    r.project_id.clear();
  }
  return model;
}

// ---------------------------------------------------------------------------
// Model kinds and persistence
// ---------------------------------------------------------------------------

enum class ModelKind { kGbdt, kDecisionTree, kRandomForest, kComplementNb, kKnn };

inline std::string_view model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::kGbdt: return "gbdt";
    case ModelKind::kDecisionTree: return "decision_tree";
    case ModelKind::kRandomForest: return "random_forest";
    case ModelKind::kComplementNb: return "complement_naive_bayes";
    case ModelKind::kKnn: return "knn";
  }
  return "gbdt";
}

inline ModelKind parse_model_kind(std::string_view name) {
  for (auto k : {ModelKind::kGbdt, ModelKind::kDecisionTree, ModelKind::kRandomForest,
                 ModelKind::kComplementNb, ModelKind::kKnn}) {
    if (model_kind_name(k) == name) return k;
  }
  throw Error(ErrorCode::kUsage, "unknown model kind '" + std::string(name) + "'");
}

inline std::unique_ptr<Classifier> train_baseline(ModelKind kind, const FeatureMatrix& m,
                                                  const BaselineParams& p) {
  switch (kind) {
    case ModelKind::kDecisionTree: return std::make_unique<DecisionTreeModel>(train_decision_tree(m, p));
    case ModelKind::kRandomForest: return std::make_unique<RandomForestModel>(train_random_forest(m, p));
    case ModelKind::kComplementNb: return std::make_unique<ComplementNbModel>(train_complement_nb(m, p));
    case ModelKind::kKnn: return std::make_unique<KnnModel>(train_knn(m, p));
    case ModelKind::kGbdt: break;
  }
  throw Error(ErrorCode::kUsage, "gbdt is not a baseline");
}

inline std::unique_ptr<Classifier> classifier_from_json(const Json& j) {
  try {
    if (j.at("version").get<int>() != kModelVersion) {
      throw Error(ErrorCode::kParseError, "unsupported model version");
    }
    const auto kind = parse_model_kind(j.at("kind").get<std::string>());
    const std::string hash = j.value("schema_hash", "");
    const auto width = j.at("width").get<std::size_t>();
    std::unique_ptr<Classifier> out;
    switch (kind) {
      case ModelKind::kGbdt:
        out = std::make_unique<GbdtModel>(GbdtModel::from_json(j));
        break;
      case ModelKind::kDecisionTree: {
        auto m = std::make_unique<DecisionTreeModel>();
        m->params = baseline_params_from_json(j.at("params"));
        m->n_features = width;
        m->tree = detail::tree_from_json(j.at("tree"), width);
        out = std::move(m);
        break;
      }
      case ModelKind::kRandomForest: {
        auto m = std::make_unique<RandomForestModel>();
        m->params = baseline_params_from_json(j.at("params"));
        m->n_features = width;
        for (const auto& t : j.at("trees")) m->trees.push_back(detail::tree_from_json(t, width));
        out = std::move(m);
        break;
      }
      case ModelKind::kComplementNb: {
        auto m = std::make_unique<ComplementNbModel>();
        m->params = baseline_params_from_json(j.at("params"));
        m->weight0 = j.at("weight0").get<std::vector<double>>();
        m->weight1 = j.at("weight1").get<std::vector<double>>();
        if (m->weight0.size() != width || m->weight1.size() != width) {
          throw Error(ErrorCode::kParseError, "weight vectors do not match width");
        }
        out = std::move(m);
        break;
      }
      case ModelKind::kKnn: {
        auto m = std::make_unique<KnnModel>();
        m->params = baseline_params_from_json(j.at("params"));
        m->training.vocab_size = j.at("vocab_size").get<std::size_t>();
        m->training.numeric_columns = j.at("numeric").get<std::vector<std::string>>();
        for (const auto& jr : j.at("rows")) {
          FeatureRow r;
          r.label = jr.at("label").get<int>();
          r.textual = jr.at("text").get<std::vector<std::uint32_t>>();
          r.numeric = jr.at("num").get<std::vector<double>>();
          m->training.rows.push_back(std::move(r));
        }
        out = std::move(m);
        break;
      }
    }
    out->schema_hash = hash;
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, std::string("model file: ") + e.what());
  }
}

}  // namespace refscan
