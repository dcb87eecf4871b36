#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "refscan/error.hpp"
#include "refscan/evaluation.hpp"
#include "refscan/io.hpp"
#include "refscan/model.hpp"
#include "refscan/parallel.hpp"
#include "refscan/random.hpp"

namespace refscan {

struct SearchSpace {
  std::vector<std::size_t> n_trees = {100, 200, 400};
  double learning_rate_lo = 0.01;  // log-uniform
  double learning_rate_hi = 0.3;
  std::vector<std::size_t> max_leaves = {15, 31, 63};
  std::vector<std::size_t> min_samples_leaf = {5, 20, 50};
  std::vector<double> subsample = {0.7, 1.0};
  std::size_t n_bins = 256;
};

struct SearchTrial {
  GbdtParams params;
  double auc = 0.0;
};

struct SearchResult {
  GbdtParams best;
  double best_auc = 0.0;
  std::vector<SearchTrial> trials;
};

template <class T>
const T& pick(const std::vector<T>& options, Rng& rng) {
  if (options.empty()) throw Error(ErrorCode::kUsage, "empty search dimension");
  return options[static_cast<std::size_t>(rng.below(options.size()))];
}

inline GbdtParams sample_params(const SearchSpace& space, Rng& rng, std::uint64_t train_seed) {
  GbdtParams p;
  p.n_trees = pick(space.n_trees, rng);
  const double lo = std::log(space.learning_rate_lo);
  const double hi = std::log(space.learning_rate_hi);
  p.learning_rate = std::exp(rng.uniform(lo, hi));
  if (space.learning_rate_lo == space.learning_rate_hi) p.learning_rate = space.learning_rate_lo;
  p.max_leaves = pick(space.max_leaves, rng);
  p.min_samples_leaf = pick(space.min_samples_leaf, rng);
  p.subsample = pick(space.subsample, rng);
  p.n_bins = space.n_bins;
  p.seed = train_seed;
  return p;
}

/// Stratified 80/20 split of the training matrix into (fit, validation) row
/// indices. Each class keeps at least one row on the fit side.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> internal_split(const FeatureMatrix& m,
                                                                                     Rng& rng) {
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t r = 0; r < m.rows.size(); ++r) (m.rows[r].label == 1 ? pos : neg).push_back(r);
  std::vector<std::size_t> fit;
  std::vector<std::size_t> val;
  for (auto* group : {&pos, &neg}) {
    rng.shuffle(std::span(*group));
    auto t = static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(group->size())));
    if (group->size() >= 1) t = std::min(t, group->size() - 1);
    val.insert(val.end(), group->begin(), group->begin() + static_cast<std::ptrdiff_t>(t));
    fit.insert(fit.end(), group->begin() + static_cast<std::ptrdiff_t>(t), group->end());
  }
  std::sort(fit.begin(), fit.end());
  std::sort(val.begin(), val.end());
  return {std::move(fit), std::move(val)};
}

/// Samples `budget` configurations, scores each by validation AUC on an
/// internal split and returns the first configuration with the highest AUC.
inline SearchResult random_search(const FeatureMatrix& m, const SearchSpace& space, std::size_t budget,
                                  std::uint64_t seed, std::size_t jobs = 1) {
  if (budget < 1) throw Error(ErrorCode::kUsage, "search budget must be >= 1");
  require_both_classes(m);
  Rng rng(seed);
  Rng split_rng = rng.fork(0);
  const auto [fit_rows, val_rows] = internal_split(m, split_rng);
  const FeatureMatrix fit = m.subset(fit_rows);
  const FeatureMatrix val = m.subset(val_rows);
  const auto val_labels = val.labels();

  SearchResult result;
  result.trials.resize(budget);
  for (auto& t : result.trials) t.params = sample_params(space, rng, seed);
  parallel_for(budget, jobs, [&](std::size_t i) {
    const auto model = train_gbdt(fit, result.trials[i].params);
    const auto scores = model.predict_all(val);
    result.trials[i].auc = roc_auc(scores, val_labels).auc;
  });
  result.best = result.trials.front().params;
  result.best_auc = result.trials.front().auc;
  for (const auto& t : result.trials) {
    if (t.auc > result.best_auc) {
      result.best_auc = t.auc;
      result.best = t.params;
    }
  }
  return result;
}

inline Json to_json(const SearchResult& r) {
  Json trials = Json::array();
  for (const auto& t : r.trials) trials.push_back(Json{{"params", to_json(t.params)}, {"auc", t.auc}});
  return Json{{"best", to_json(r.best)}, {"best_auc", r.best_auc}, {"trials", std::move(trials)}};
}

}  // namespace refscan
