#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "refscan/error.hpp"
#include "refscan/parallel.hpp"
#include "refscan/pipeline.hpp"

namespace refscan {

enum class NearMissVariant { kNm1, kNm2, kNm3 };

struct SamplerConfig {
  NearMissVariant variant = NearMissVariant::kNm3;
  std::size_t k = 3;  // positives consulted per negative (NM1)
  std::size_t m = 3;  // negatives kept per positive (NM3)
};

inline std::string_view sampler_name(NearMissVariant v) {
  switch (v) {
    case NearMissVariant::kNm1: return "nearmiss1";
    case NearMissVariant::kNm2: return "nearmiss2";
    case NearMissVariant::kNm3: return "nearmiss3";
  }
  return "nearmiss3";
}

/// Squared Euclidean distance over the concatenated (textual 0/1, numeric)
/// vector. The textual part is the size of the symmetric difference of the
/// two sorted index lists; numeric terms are accumulated in column order.
inline double squared_distance(const FeatureRow& a, const FeatureRow& b) {
  std::size_t diff = 0;
  auto i = a.textual.begin();
  auto j = b.textual.begin();
  while (i != a.textual.end() && j != b.textual.end()) {
    if (*i == *j) {
      ++i;
      ++j;
    } else if (*i < *j) {
      ++diff;
      ++i;
    } else {
      ++diff;
      ++j;
    }
  }
  diff += static_cast<std::size_t>(a.textual.end() - i) + static_cast<std::size_t>(b.textual.end() - j);
  double d = static_cast<double>(diff);
  for (std::size_t c = 0; c < a.numeric.size(); ++c) {
    const double t = a.numeric[c] - b.numeric[c];
    d += t * t;
  }
  return d;
}

inline double euclidean_distance(const FeatureRow& a, const FeatureRow& b) {
  return std::sqrt(squared_distance(a, b));
}

/// NearMiss undersampling of label-0 rows. Returns the retained row indices
/// in ascending order: every positive plus the selected negatives.
inline std::vector<std::size_t> nearmiss(const FeatureMatrix& matrix, const SamplerConfig& config,
                                         std::size_t jobs = 1) {
  if (config.k == 0 || config.m == 0) throw Error(ErrorCode::kUsage, "NearMiss k and m must be >= 1");
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
    (matrix.rows[r].label == 1 ? pos : neg).push_back(r);
  }
  if (pos.empty() || neg.empty()) {
    throw Error(ErrorCode::kSingleClassInput, "NearMiss needs both classes");
  }

  std::vector<std::size_t> selected;
  if (neg.size() <= pos.size()) {
    selected = neg;
  } else if (config.variant == NearMissVariant::kNm3) {
    std::vector<std::vector<std::size_t>> nearest(pos.size());
    parallel_for(pos.size(), jobs, [&](std::size_t p) {
      std::vector<std::pair<double, std::size_t>> d;
      d.reserve(neg.size());
      for (auto n : neg) d.emplace_back(euclidean_distance(matrix.rows[pos[p]], matrix.rows[n]), n);
      const std::size_t take = std::min(config.m, d.size());
      std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(take), d.end());
      for (std::size_t i = 0; i < take; ++i) nearest[p].push_back(d[i].second);
    });
    for (const auto& list : nearest) selected.insert(selected.end(), list.begin(), list.end());
    std::sort(selected.begin(), selected.end());
    selected.erase(std::unique(selected.begin(), selected.end()), selected.end());
  } else {
    const std::size_t k = config.variant == NearMissVariant::kNm1 ? std::min(config.k, pos.size())
                                                                  : pos.size();
    std::vector<std::pair<double, std::size_t>> scores(neg.size());
    parallel_for(neg.size(), jobs, [&](std::size_t i) {
      std::vector<double> d;
      d.reserve(pos.size());
      for (auto p : pos) d.push_back(euclidean_distance(matrix.rows[neg[i]], matrix.rows[p]));
      std::sort(d.begin(), d.end());
      double sum = 0.0;
      for (std::size_t j = 0; j < k; ++j) sum += d[j];
      scores[i] = {sum / static_cast<double>(k), neg[i]};
    });
    std::sort(scores.begin(), scores.end());
    for (std::size_t i = 0; i < pos.size(); ++i) selected.push_back(scores[i].second);
    std::sort(selected.begin(), selected.end());
  }

  std::vector<std::size_t> out = pos;
  out.insert(out.end(), selected.begin(), selected.end());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace refscan
