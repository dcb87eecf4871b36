#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "refscan/corpus.hpp"

namespace refscan {

struct ProcessFeatures {
  std::int64_t lines_added = 0;
  std::int64_t lines_deleted = 0;
  std::int64_t lines_changed = 0;
  std::int64_t num_files = 0;
  bool has_executable = false;
  double entropy = 0.0;
  double rcr = 0.0;
};

/// Prior commits of one author within one project, each reduced to its
/// combined refactoring label. All entries precede the commit being
/// featurized in (timestamp, sha) order.
struct AuthorHistory {
  std::string author_id;
  std::vector<bool> prior_labels;
};

/// Shannon entropy (bits) of the relative churn distribution. Zero churns are
/// ignored; fewer than two files gives 0.
inline double code_entropy(std::span<const std::int64_t> churns) {
  double total = 0.0;
  std::size_t nonzero = 0;
  for (auto c : churns) {
    if (c > 0) {
      total += static_cast<double>(c);
      ++nonzero;
    }
  }
  if (nonzero < 2) return 0.0;
  double h = 0.0;
  for (auto c : churns) {
    if (c <= 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return h;
}

/// Fraction of the author's prior commits labeled as refactoring; 0 without
/// history.
inline double refactoring_contribution(const AuthorHistory& history) {
  if (history.prior_labels.empty()) return 0.0;
  std::size_t refactorings = 0;
  for (bool b : history.prior_labels) refactorings += b ? 1 : 0;
  return static_cast<double>(refactorings) / static_cast<double>(history.prior_labels.size());
}

inline ProcessFeatures process_features(const CommitRecord& commit, const AuthorHistory& history) {
  ProcessFeatures f;
  std::vector<std::int64_t> exec_churns;
  for (const auto& file : commit.files) {
    f.lines_added += file.lines_added;
    f.lines_deleted += file.lines_deleted;
    if (file.is_executable && !file.is_binary) {
      f.has_executable = true;
      exec_churns.push_back(file.churn());
    }
  }
  f.lines_changed = f.lines_added - f.lines_deleted;
  f.num_files = static_cast<std::int64_t>(commit.files.size());
  f.entropy = code_entropy(exec_churns);
  f.rcr = refactoring_contribution(history);
  return f;
}

}  // namespace refscan
