#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "refscan/error.hpp"
#include "refscan/io.hpp"
#include "refscan/random.hpp"

namespace refscan {

struct EvalReport {
  std::string setting;
  std::string fold;
  double threshold = 0.5;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.5;
  bool degenerate = false;  // test labels contain a single class (or no rows)
  std::string note;
};

struct AucResult {
  double auc = 0.5;
  bool degenerate = false;
};

/// Probability that a random positive outranks a random negative, ties
/// credited one half. Counts are kept as doubled integers so the only
/// rounding is the final division.
inline AucResult roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(scores.size()) + " scores vs " +
                                                std::to_string(labels.size()) + " labels");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  std::uint64_t positives = 0;
  std::uint64_t negatives = 0;
  std::uint64_t doubled = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::uint64_t pos = 0;
    std::uint64_t neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      (labels[order[j]] == 1 ? pos : neg) += 1;
      ++j;
    }
    doubled += 2 * pos * negatives + pos * neg;
    positives += pos;
    negatives += neg;
    i = j;
  }
  if (positives == 0 || negatives == 0) return {0.5, true};
  return {static_cast<double>(doubled) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives)),
          false};
}

inline double safe_ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

/// Confusion counts at `threshold` (score >= threshold predicts 1) plus AUC.
inline EvalReport evaluate(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(scores.size()) + " scores vs " +
                                                std::to_string(labels.size()) + " labels");
  }
  if (scores.empty()) throw Error(ErrorCode::kEmptyInput, "nothing to evaluate");
  EvalReport r;
  r.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++r.tp;
    else if (predicted) ++r.fp;
    else if (actual) ++r.fn;
    else ++r.tn;
  }
  r.precision = safe_ratio(static_cast<double>(r.tp), static_cast<double>(r.tp + r.fp));
  r.recall = safe_ratio(static_cast<double>(r.tp), static_cast<double>(r.tp + r.fn));
  r.f1 = safe_ratio(2.0 * r.precision * r.recall, r.precision + r.recall);
  const auto auc = roc_auc(scores, labels);
  r.auc = auc.auc;
  r.degenerate = auc.degenerate;
  return r;
}

inline Json to_json(const EvalReport& r) {
  Json j{{"fold", r.fold},
         {"setting", r.setting},
         {"threshold", r.threshold},
         {"tp", r.tp},
         {"fp", r.fp},
         {"tn", r.tn},
         {"fn", r.fn},
         {"precision", r.precision},
         {"recall", r.recall},
         {"f1", r.f1},
         {"auc", r.auc},
         {"degenerate", r.degenerate}};
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

// ---------------------------------------------------------------------------
// Splits
// ---------------------------------------------------------------------------

enum class SplitStrategy { kMixed, kWithinProject, kCrossProject };

inline std::string_view split_strategy_name(SplitStrategy s) {
  switch (s) {
    case SplitStrategy::kMixed: return "mixed";
    case SplitStrategy::kWithinProject: return "within";
    case SplitStrategy::kCrossProject: return "cross";
  }
  return "mixed";
}

inline SplitStrategy parse_split_strategy(std::string_view name) {
  if (name == "mixed") return SplitStrategy::kMixed;
  if (name == "within" || name == "within_project") return SplitStrategy::kWithinProject;
  if (name == "cross" || name == "cross_project") return SplitStrategy::kCrossProject;
  throw Error(ErrorCode::kUsage, "unknown setting '" + std::string(name) + "'");
}

struct SplitPlan {
  SplitStrategy strategy = SplitStrategy::kMixed;
  double test_ratio = 0.2;
  std::uint64_t seed = 0;
};

struct Fold {
  std::string name;
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

namespace detail {

// Test-set size: round(n * ratio), kept within [1, n-1] when n >= 2.
inline std::size_t test_count(std::size_t n, double ratio) {
  auto t = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratio));
  if (n >= 2) t = std::clamp<std::size_t>(t, 1, n - 1);
  return std::min(t, n);
}

inline Fold random_fold(std::string name, std::vector<std::size_t> rows, double ratio, Rng& rng) {
  rng.shuffle(std::span(rows));
  const std::size_t t = test_count(rows.size(), ratio);
  Fold f;
  f.name = std::move(name);
  f.test.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(t));
  f.train.assign(rows.begin() + static_cast<std::ptrdiff_t>(t), rows.end());
  std::sort(f.test.begin(), f.test.end());
  std::sort(f.train.begin(), f.train.end());
  return f;
}

}  // namespace detail

/// Folds over row indices given each row's project id. Projects are visited
/// in lexicographic order.
inline std::vector<Fold> make_splits(const std::vector<std::string>& row_projects, const SplitPlan& plan) {
  if (row_projects.empty()) throw Error(ErrorCode::kEmptyDataset, "no rows to split");
  if (plan.strategy != SplitStrategy::kCrossProject && !(plan.test_ratio > 0.0 && plan.test_ratio < 1.0)) {
    throw Error(ErrorCode::kUsage, "test ratio must be in (0, 1)");
  }
  std::map<std::string, std::vector<std::size_t>> by_project;
  for (std::size_t i = 0; i < row_projects.size(); ++i) by_project[row_projects[i]].push_back(i);

  Rng rng(plan.seed);
  std::vector<Fold> folds;
  switch (plan.strategy) {
    case SplitStrategy::kMixed: {
      std::vector<std::size_t> all(row_projects.size());
      std::iota(all.begin(), all.end(), 0);
      folds.push_back(detail::random_fold("mixed", std::move(all), plan.test_ratio, rng));
      break;
    }
    case SplitStrategy::kWithinProject:
      for (const auto& [project, rows] : by_project) {
        folds.push_back(detail::random_fold(project, rows, plan.test_ratio, rng));
      }
      break;
    case SplitStrategy::kCrossProject:
      for (const auto& [project, rows] : by_project) {
        Fold f;
        f.name = project;
        f.test = rows;
        for (std::size_t i = 0; i < row_projects.size(); ++i) {
          if (row_projects[i] != project) f.train.push_back(i);
        }
        folds.push_back(std::move(f));
      }
      break;
  }
  return folds;
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

inline double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

struct EvalSummary {
  double median_precision = 0.0;
  double median_recall = 0.0;
  double median_auc = 0.0;
  double median_f1 = 0.0;
};

inline EvalSummary summarize(const std::vector<EvalReport>& folds) {
  std::vector<double> p;
  std::vector<double> r;
  std::vector<double> a;
  std::vector<double> f;
  for (const auto& x : folds) {
    p.push_back(x.precision);
    r.push_back(x.recall);
    a.push_back(x.auc);
    f.push_back(x.f1);
  }
  return {median(p), median(r), median(a), median(f)};
}

inline Json to_json(const EvalSummary& s) {
  return Json{{"median_precision", s.median_precision},
              {"median_recall", s.median_recall},
              {"median_auc", s.median_auc},
              {"median_f1", s.median_f1}};
}

}  // namespace refscan
