#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "refscan/error.hpp"
#include "refscan/evaluation.hpp"
#include "refscan/io.hpp"
#include "refscan/model.hpp"
#include "refscan/parallel.hpp"
#include "refscan/pipeline.hpp"
#include "refscan/random.hpp"

namespace refscan {

/// Feature name -> number of internal nodes splitting on it, ordered by
/// count descending then name.
inline std::vector<std::pair<std::string, std::size_t>> split_importance(const GbdtModel& model,
                                                                         const FeatureSchema& schema) {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& [feature, count] : model.split_counts) {
    if (count > 0) out.emplace_back(schema.feature_name(feature), count);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  return out;
}

struct LimeConfig {
  std::size_t n_samples = 1000;
  std::size_t top_k = 20;
  std::uint64_t seed = 0;
  double noise_sigma = 0.1;    // numeric jitter, in units of the [0, 1] range
  double drop_probability = 0.5;
  double ridge_lambda = 1.0;
  double kernel_factor = 0.75;  // kernel width = factor * sqrt(active features)
};

struct Explanation {
  std::string sha;
  std::vector<std::pair<std::string, double>> weights;  // by |weight| descending
  double intercept = 0.0;
  double local_fit_r2 = 0.0;
};

namespace detail {

inline double cosine_distance(std::span<const double> a, std::span<const double> b) {
  double dot = 0;
  double na = 0;
  double nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na <= 0 || nb <= 0) return 1.0;
  return 1.0 - dot / std::sqrt(na * nb);
}

}  // namespace detail

/// Local surrogate for one instance. `predict` maps a dense feature vector
/// to P(refactoring). Active features are the instance's present terms
/// (index < vocab_size with value 1) and every numeric column; present terms
/// are dropped independently, numeric values get clamped Gaussian jitter.
/// The first sample is the unperturbed instance.
template <class Predict>
Explanation lime_explain(const Predict& predict, std::span<const double> instance, std::size_t vocab_size,
                         const std::vector<std::string>& names, const LimeConfig& cfg, std::string sha = {}) {
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < instance.size(); ++j) {
    if (j >= vocab_size || instance[j] != 0.0) active.push_back(j);
  }
  if (active.empty()) throw Error(ErrorCode::kDegenerateInstance, "no active features" + (sha.empty() ? "" : " for " + sha));
  if (cfg.n_samples < 2) throw Error(ErrorCode::kUsage, "LIME needs at least 2 samples");

  const auto n = static_cast<Eigen::Index>(cfg.n_samples);
  const auto a = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd z(n, a);
  Eigen::VectorXd y(n);
  Eigen::VectorXd w(n);
  const double width = cfg.kernel_factor * std::sqrt(static_cast<double>(active.size()));

  std::vector<double> original(active.size());
  for (std::size_t k = 0; k < active.size(); ++k) original[k] = instance[active[k]];

  Rng rng(cfg.seed);
  std::vector<double> x(instance.begin(), instance.end());
  std::vector<double> sample(active.size());
  for (Eigen::Index s = 0; s < n; ++s) {
    for (std::size_t k = 0; k < active.size(); ++k) {
      const std::size_t j = active[k];
      double v = instance[j];
      if (s > 0) {
        if (j < vocab_size) {
          v = rng.bernoulli(cfg.drop_probability) ? 0.0 : instance[j];
        } else {
          v = std::clamp(instance[j] + cfg.noise_sigma * rng.normal(), 0.0, 1.0);
        }
      }
      x[j] = v;
      sample[k] = v;
      z(s, static_cast<Eigen::Index>(k)) = v;
    }
    y(s) = predict(std::span<const double>(x));
    const double d = detail::cosine_distance(sample, original);
    w(s) = std::exp(-(d * d) / (width * width));
  }

  // Weighted ridge with an unpenalised intercept: centre by weighted means.
  const double wsum = w.sum();
  const Eigen::RowVectorXd zmean = (w.transpose() * z) / wsum;
  const double ymean = w.dot(y) / wsum;
  const Eigen::MatrixXd zc = z.rowwise() - zmean;
  const Eigen::VectorXd yc = y.array() - ymean;
  Eigen::MatrixXd gram = zc.transpose() * w.asDiagonal() * zc;
  gram.diagonal().array() += cfg.ridge_lambda;
  const Eigen::VectorXd beta = gram.ldlt().solve(zc.transpose() * (w.asDiagonal() * yc));

  Explanation e;
  e.sha = std::move(sha);
  e.intercept = ymean - zmean.dot(beta);
  const Eigen::VectorXd resid = yc - zc * beta;
  const double ss_res = (w.array() * resid.array().square()).sum();
  const double ss_tot = (w.array() * yc.array().square()).sum();
  e.local_fit_r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 0.0;

  std::vector<std::size_t> order(active.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) {
    return std::abs(beta(static_cast<Eigen::Index>(p))) > std::abs(beta(static_cast<Eigen::Index>(q)));
  });
  const std::size_t keep = std::min(cfg.top_k, order.size());
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t k = order[i];
    e.weights.emplace_back(names.at(active[k]), beta(static_cast<Eigen::Index>(k)));
  }
  return e;
}

inline std::vector<std::string> feature_names(const FeatureSchema& schema) {
  std::vector<std::string> names;
  names.reserve(schema.width());
  for (std::size_t j = 0; j < schema.width(); ++j) names.push_back(schema.feature_name(j));
  return names;
}

/// Explains every row of `m`. Row i uses an independent seed derived from
/// cfg.seed and i. Rows with no active features yield an empty weight list.
inline std::vector<Explanation> explain_rows(const Classifier& model, const FeatureMatrix& m,
                                             const FeatureSchema& schema, const LimeConfig& cfg,
                                             std::size_t jobs = 1) {
  const auto names = feature_names(schema);
  std::vector<Explanation> out(m.rows.size());
  parallel_for(m.rows.size(), jobs, [&](std::size_t i) {
    LimeConfig row_cfg = cfg;
    row_cfg.seed = cfg.seed ^ (0x9E3779B97F4A7C15ULL * (i + 1));
    const auto dense = m.dense_row(i);
    try {
      out[i] = lime_explain([&](std::span<const double> x) { return model.predict_proba(x); }, dense,
                            m.vocab_size, names, row_cfg, m.rows[i].sha);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDegenerateInstance) throw;
      out[i] = Explanation{m.rows[i].sha, {}, 0.0, 0.0};
    }
  });
  return out;
}

enum class Direction { kRefactoring, kNonRefactoring, kNeutral };

inline std::string_view direction_name(Direction d) {
  switch (d) {
    case Direction::kRefactoring: return "refactoring";
    case Direction::kNonRefactoring: return "non_refactoring";
    case Direction::kNeutral: return "neutral";
  }
  return "neutral";
}

inline Direction direction_of(double median_weight, double epsilon) {
  if (median_weight > epsilon) return Direction::kRefactoring;
  if (median_weight < -epsilon) return Direction::kNonRefactoring;
  return Direction::kNeutral;
}

struct AggregateEntry {
  std::string feature;
  double median_weight = 0.0;
  Direction direction = Direction::kNeutral;
  std::size_t split_count = 0;
  std::size_t reports = 0;
};

/// Median weight per feature over the explanations that report it; ordered
/// by split count descending, then |median| descending, then name.
inline std::vector<AggregateEntry> aggregate_explanations(
    const std::vector<Explanation>& explanations,
    const std::vector<std::pair<std::string, std::size_t>>& split_counts, double epsilon = 1e-4) {
  if (explanations.empty()) throw Error(ErrorCode::kEmptyInput, "no explanations to aggregate");
  std::map<std::string, std::vector<double>> by_feature;
  for (const auto& e : explanations) {
    for (const auto& [name, weight] : e.weights) by_feature[name].push_back(weight);
  }
  std::map<std::string, std::size_t> splits(split_counts.begin(), split_counts.end());
  std::vector<AggregateEntry> out;
  for (auto& [name, weights] : by_feature) {
    AggregateEntry a;
    a.feature = name;
    a.reports = weights.size();
    a.median_weight = median(std::move(weights));
    a.direction = direction_of(a.median_weight, epsilon);
    const auto it = splits.find(name);
    a.split_count = it == splits.end() ? 0 : it->second;
    out.push_back(std::move(a));
  }
  std::sort(out.begin(), out.end(), [](const AggregateEntry& x, const AggregateEntry& y) {
    if (x.split_count != y.split_count) return x.split_count > y.split_count;
    if (std::abs(x.median_weight) != std::abs(y.median_weight)) {
      return std::abs(x.median_weight) > std::abs(y.median_weight);
    }
    return x.feature < y.feature;
  });
  return out;
}

inline Json to_json(const Explanation& e) {
  Json weights = Json::array();
  for (const auto& [name, w] : e.weights) weights.push_back(Json{{"feature", name}, {"weight", w}});
  return Json{{"sha", e.sha}, {"intercept", e.intercept}, {"local_fit_r2", e.local_fit_r2}, {"weights", std::move(weights)}};
}

inline Json to_json(const AggregateEntry& a) {
  return Json{{"feature", a.feature},
              {"median_weight", a.median_weight},
              {"direction", direction_name(a.direction)},
              {"split_count", a.split_count},
              {"reports", a.reports}};
}

}  // namespace refscan
