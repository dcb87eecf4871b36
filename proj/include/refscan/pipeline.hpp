#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "refscan/codefeat.hpp"
#include "refscan/error.hpp"
#include "refscan/io.hpp"
#include "refscan/procfeat.hpp"
#include "refscan/textfeat.hpp"

namespace refscan {

// ---------------------------------------------------------------------------
// Raw (unfitted) feature rows
// ---------------------------------------------------------------------------

/// Numeric feature names in declared order: message statistics, process
/// features, then code-metric deltas.
inline const std::vector<std::string>& numeric_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n = {"word_count",    "sentence_count", "readability",
                                  "lines_added",   "lines_deleted",  "lines_changed",
                                  "num_files",     "code_entropy",   "refactoring_contribution",
                                  "has_executable"};
    for (const auto& f : kCodeMetricFields) n.emplace_back(f.name);
    return n;
  }();
  return names;
}

struct RawFeatureRow {
  std::string sha;
  std::string project_id;
  int label = 0;
  bool rule_label = false;
  std::vector<std::string> terms;  // sorted, unique
  std::vector<double> numeric;     // aligned with RawDataset::numeric_names
};

struct RawDataset {
  std::vector<std::string> numeric_names = numeric_feature_names();
  std::vector<RawFeatureRow> rows;

  RawDataset subset(std::span<const std::size_t> indices) const {
    RawDataset out;
    out.numeric_names = numeric_names;
    out.rows.reserve(indices.size());
    for (auto i : indices) out.rows.push_back(rows[i]);
    return out;
  }
};

inline RawFeatureRow make_raw_row(std::string sha, std::string project_id, bool label,
                                  const TextFeatures& text, const ProcessFeatures& process,
                                  const CodeFeatureDelta& code) {
  RawFeatureRow row;
  row.sha = std::move(sha);
  row.project_id = std::move(project_id);
  row.label = label ? 1 : 0;
  row.terms.assign(text.terms.begin(), text.terms.end());
  row.numeric = {static_cast<double>(text.word_count),
                 static_cast<double>(text.sentence_count),
                 text.readability,
                 static_cast<double>(process.lines_added),
                 static_cast<double>(process.lines_deleted),
                 static_cast<double>(process.lines_changed),
                 static_cast<double>(process.num_files),
                 process.entropy,
                 process.rcr,
                 process.has_executable ? 1.0 : 0.0};
  for (const auto& f : kCodeMetricFields) row.numeric.push_back(code.*(f.member));
  return row;
}

inline Json to_json(const RawFeatureRow& r) {
  return Json{{"sha", r.sha},     {"project", r.project_id}, {"label", r.label},
              {"rule", r.rule_label}, {"terms", r.terms},    {"num", r.numeric}};
}

inline RawFeatureRow raw_row_from_json(const Json& j) {
  RawFeatureRow r;
  r.sha = j.at("sha").get<std::string>();
  r.project_id = j.at("project").get<std::string>();
  r.label = j.at("label").get<int>();
  r.rule_label = j.value("rule", false);
  r.terms = j.at("terms").get<std::vector<std::string>>();
  r.numeric = j.at("num").get<std::vector<double>>();
  return r;
}

/// Raw dataset file: a header line {"numeric": [...names]} followed by one
/// row per line.
inline std::string raw_dataset_to_jsonl(const RawDataset& data) {
  std::string out = Json{{"numeric", data.numeric_names}}.dump() + "\n";
  for (const auto& r : data.rows) out += to_json(r).dump() + "\n";
  return out;
}

inline RawDataset read_raw_dataset(const std::filesystem::path& path) {
  RawDataset data;
  bool header = true;
  for_each_jsonl(path, [&](const Json& row, std::size_t line) {
    if (header) {
      if (!row.contains("numeric")) {
        throw Error(ErrorCode::kParseError, path.string() + ": missing header line");
      }
      data.numeric_names = row.at("numeric").get<std::vector<std::string>>();
      header = false;
      return;
    }
    auto r = raw_row_from_json(row);
    if (r.numeric.size() != data.numeric_names.size()) {
      throw Error(ErrorCode::kParseError,
                  path.string() + " line " + std::to_string(line) + ": numeric width mismatch");
    }
    data.rows.push_back(std::move(r));
  });
  return data;
}

// ---------------------------------------------------------------------------
// Statistics used by pruning
// ---------------------------------------------------------------------------

/// Ranks with ties assigned their average rank (1-based).
inline std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  if (n == 0) return 0.0;
  double ma = 0;
  double mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0;
  double saa = 0;
  double sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0 || sbb <= 0) return 0.0;  // constant column: no correlation
  return sab / std::sqrt(saa * sbb);
}

/// Spearman's rho: Pearson correlation of average ranks.
inline double spearman_rho(std::span<const double> a, std::span<const double> b) {
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson(ra, rb);
}

/// R^2 of regressing `y` on `predictors` (least squares with intercept).
/// Zero when y is constant.
inline double r_squared(std::span<const double> y,
                        const std::vector<std::span<const double>>& predictors) {
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::VectorXd target(n);
  double mean = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    target(i) = y[static_cast<std::size_t>(i)];
    mean += target(i);
  }
  mean /= static_cast<double>(n);
  const double ss_tot = (target.array() - mean).square().sum();
  if (ss_tot <= 0) return 0.0;
  Eigen::MatrixXd x(n, static_cast<Eigen::Index>(predictors.size()) + 1);
  x.col(0).setOnes();
  for (std::size_t p = 0; p < predictors.size(); ++p) {
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i, static_cast<Eigen::Index>(p) + 1) = predictors[p][static_cast<std::size_t>(i)];
    }
  }
  const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(target);
  const double ss_res = (target - x * beta).squaredNorm();
  return std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
}

using ColumnSet = std::vector<std::vector<double>>;  // column-major

/// Greedy scan over pairs in declared column order; whenever |rho| exceeds
/// the threshold, the later column is dropped. Returns retained indices.
inline std::vector<std::size_t> spearman_prune(const ColumnSet& columns, double threshold = 0.7) {
  if (!columns.empty() && columns.front().size() < 2) {
    throw Error(ErrorCode::kDegenerateInput, "spearman_prune needs at least 2 rows");
  }
  std::vector<std::vector<double>> ranks;
  ranks.reserve(columns.size());
  for (const auto& c : columns) ranks.push_back(average_ranks(c));
  std::vector<bool> dropped(columns.size(), false);
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (dropped[i]) continue;
    for (std::size_t j = i + 1; j < columns.size(); ++j) {
      if (dropped[j]) continue;
      if (std::abs(pearson(ranks[i], ranks[j])) > threshold) dropped[j] = true;
    }
  }
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (!dropped[i]) kept.push_back(i);
  }
  return kept;
}

/// Per-column R^2 against all other listed columns.
inline std::vector<double> redundancy_scores(const ColumnSet& columns,
                                             std::span<const std::size_t> active) {
  std::vector<double> scores(active.size(), 0.0);
  if (active.size() < 2) return scores;
  for (std::size_t a = 0; a < active.size(); ++a) {
    std::vector<std::span<const double>> others;
    for (std::size_t b = 0; b < active.size(); ++b) {
      if (b != a) others.emplace_back(columns[active[b]]);
    }
    scores[a] = r_squared(columns[active[a]], others);
  }
  return scores;
}

/// Repeatedly drops the column with the largest R^2 (regressed on all other
/// retained columns) while that R^2 exceeds the cutoff. Among columns tied
/// within 1e-9 of the maximum, the latest in declared order is dropped.
inline std::vector<std::size_t> redundancy_prune(const ColumnSet& columns, double r2_cutoff = 0.9) {
  std::vector<std::size_t> active(columns.size());
  std::iota(active.begin(), active.end(), 0);
  while (active.size() >= 2) {
    const auto scores = redundancy_scores(columns, active);
    const double best = *std::max_element(scores.begin(), scores.end());
    if (best <= r2_cutoff) break;
    std::size_t victim = 0;
    for (std::size_t a = 0; a < scores.size(); ++a) {
      if (scores[a] >= best - 1e-9) victim = a;
    }
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(victim));
  }
  return active;
}

inline double binary_presence_variance(std::size_t present, std::size_t total) {
  if (total == 0) return 0.0;
  const double p = static_cast<double>(present) / static_cast<double>(total);
  return p * (1.0 - p);
}

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

struct FitOptions {
  double variance_threshold = 0.001;
  double spearman_threshold = 0.7;
  double r2_cutoff = 0.9;
};

struct FeatureSchema {
  std::vector<std::string> vocabulary;
  std::vector<std::string> numeric_columns;
  std::map<std::string, std::vector<std::string>> dropped;  // correlated | redundant | low_variance
  std::size_t dropped_terms = 0;
  bool redundancy_skipped = false;
  std::vector<std::pair<double, double>> minmax;  // aligned with numeric_columns

  std::size_t width() const { return vocabulary.size() + numeric_columns.size(); }

  std::string feature_name(std::size_t index) const {
    if (index < vocabulary.size()) return "term:" + vocabulary[index];
    return numeric_columns.at(index - vocabulary.size());
  }

  friend bool operator==(const FeatureSchema&, const FeatureSchema&) = default;
};

inline constexpr int kSchemaVersion = 1;

inline Json to_json(const FeatureSchema& s) {
  Json j;
  j["version"] = kSchemaVersion;
  j["vocabulary"] = s.vocabulary;
  j["numeric"] = s.numeric_columns;
  Json dropped = Json::object();
  for (const char* reason : {"correlated", "redundant", "low_variance"}) {
    const auto it = s.dropped.find(reason);
    dropped[reason] = it == s.dropped.end() ? std::vector<std::string>{} : it->second;
  }
  j["dropped"] = std::move(dropped);
  j["dropped_terms"] = s.dropped_terms;
  j["redundancy_skipped"] = s.redundancy_skipped;
  Json mm = Json::object();
  for (std::size_t i = 0; i < s.numeric_columns.size(); ++i) {
    mm[s.numeric_columns[i]] = {s.minmax[i].first, s.minmax[i].second};
  }
  j["minmax"] = std::move(mm);
  return j;
}

inline FeatureSchema schema_from_json(const Json& j) {
  if (j.at("version").get<int>() != kSchemaVersion) {
    throw Error(ErrorCode::kParseError, "unsupported schema version");
  }
  FeatureSchema s;
  s.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
  s.numeric_columns = j.at("numeric").get<std::vector<std::string>>();
  for (const auto& [reason, names] : j.at("dropped").items()) {
    auto list = names.get<std::vector<std::string>>();
    if (!list.empty()) s.dropped[reason] = std::move(list);
  }
  s.dropped_terms = j.value("dropped_terms", std::size_t{0});
  s.redundancy_skipped = j.value("redundancy_skipped", false);
  const auto& mm = j.at("minmax");
  for (const auto& name : s.numeric_columns) {
    const auto& range = mm.at(name);
    s.minmax.emplace_back(range.at(0).get<double>(), range.at(1).get<double>());
  }
  return s;
}

/// Stable fingerprint of a schema, stored in model files.
inline std::string schema_hash(const FeatureSchema& s) { return hex64(fnv1a64(to_json(s).dump())); }

/// Fits the pre-processing state on training rows only: term vocabulary by
/// binary-presence variance, then numeric columns by variance (after min-max
/// scaling), Spearman correlation and R^2 redundancy, then min-max ranges.
inline FeatureSchema fit_schema(const RawDataset& training, const FitOptions& opts = {}) {
  if (training.rows.empty()) throw Error(ErrorCode::kEmptyTraining, "no training rows");
  const std::size_t n = training.rows.size();
  FeatureSchema schema;

  std::unordered_map<std::string, std::size_t> doc_freq;
  for (const auto& row : training.rows) {
    for (const auto& t : row.terms) ++doc_freq[t];
  }
  for (const auto& [term, count] : doc_freq) {
    if (binary_presence_variance(count, n) >= opts.variance_threshold) {
      schema.vocabulary.push_back(term);
    } else {
      ++schema.dropped_terms;
    }
  }
  std::sort(schema.vocabulary.begin(), schema.vocabulary.end());

  const std::size_t width = training.numeric_names.size();
  ColumnSet columns(width, std::vector<double>(n));
  for (std::size_t r = 0; r < n; ++r) {
    if (training.rows[r].numeric.size() != width) {
      throw Error(ErrorCode::kSchemaMismatch, "row " + training.rows[r].sha + " numeric width");
    }
    for (std::size_t c = 0; c < width; ++c) columns[c][r] = training.rows[r].numeric[c];
  }

  std::vector<std::size_t> candidates;
  for (std::size_t c = 0; c < width; ++c) {
    const auto [lo, hi] = std::minmax_element(columns[c].begin(), columns[c].end());
    const double range = *hi - *lo;
    double variance = 0;
    if (range > 0) {
      double mean = 0;
      for (double v : columns[c]) mean += (v - *lo) / range;
      mean /= static_cast<double>(n);
      for (double v : columns[c]) {
        const double d = (v - *lo) / range - mean;
        variance += d * d;
      }
      variance /= static_cast<double>(n);
    }
    if (variance < opts.variance_threshold) {
      schema.dropped["low_variance"].push_back(training.numeric_names[c]);
    } else {
      candidates.push_back(c);
    }
  }

  std::vector<std::size_t> retained = candidates;
  if (n >= 2 && !candidates.empty()) {
    ColumnSet subset;
    for (auto c : candidates) subset.push_back(columns[c]);
    const auto kept = spearman_prune(subset, opts.spearman_threshold);
    std::set<std::size_t> kept_set(kept.begin(), kept.end());
    retained.clear();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (kept_set.contains(i)) {
        retained.push_back(candidates[i]);
      } else {
        schema.dropped["correlated"].push_back(training.numeric_names[candidates[i]]);
      }
    }
  }

  if (retained.size() >= 2) {
    if (n > retained.size()) {
      ColumnSet subset;
      for (auto c : retained) subset.push_back(columns[c]);
      const auto kept = redundancy_prune(subset, opts.r2_cutoff);
      std::set<std::size_t> kept_set(kept.begin(), kept.end());
      std::vector<std::size_t> next;
      for (std::size_t i = 0; i < retained.size(); ++i) {
        if (kept_set.contains(i)) {
          next.push_back(retained[i]);
        } else {
          schema.dropped["redundant"].push_back(training.numeric_names[retained[i]]);
        }
      }
      retained = std::move(next);
    } else {
      schema.redundancy_skipped = true;
    }
  }

  for (auto c : retained) {
    schema.numeric_columns.push_back(training.numeric_names[c]);
    const auto [lo, hi] = std::minmax_element(columns[c].begin(), columns[c].end());
    schema.minmax.emplace_back(*lo, *hi);
  }
  return schema;
}

// ---------------------------------------------------------------------------
// Transformed matrix
// ---------------------------------------------------------------------------

struct FeatureRow {
  std::string sha;
  std::string project_id;
  int label = 0;
  std::vector<std::uint32_t> textual;  // sorted vocabulary indices
  std::vector<double> numeric;         // in [0, 1]
};

struct FeatureMatrix {
  std::size_t vocab_size = 0;
  std::vector<std::string> numeric_columns;
  std::vector<FeatureRow> rows;

  std::size_t width() const { return vocab_size + numeric_columns.size(); }

  /// Dense feature vector: textual presence (0/1) first, then numeric.
  void dense_row(std::size_t r, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (auto t : rows[r].textual) out[t] = 1.0;
    std::copy(rows[r].numeric.begin(), rows[r].numeric.end(), out.begin() + vocab_size);
  }

  std::vector<double> dense_row(std::size_t r) const {
    std::vector<double> out(width());
    dense_row(r, out);
    return out;
  }

  std::vector<int> labels() const {
    std::vector<int> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.label);
    return out;
  }

  FeatureMatrix subset(std::span<const std::size_t> indices) const {
    FeatureMatrix out;
    out.vocab_size = vocab_size;
    out.numeric_columns = numeric_columns;
    out.rows.reserve(indices.size());
    for (auto i : indices) out.rows.push_back(rows[i]);
    return out;
  }
};

inline double min_max_scale(double v, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
}

class SchemaTransformer {
 public:
  SchemaTransformer(const FeatureSchema& schema, const std::vector<std::string>& numeric_names)
      : schema_(schema) {
    for (std::size_t i = 0; i < schema.vocabulary.size(); ++i) {
      term_index_.emplace(schema.vocabulary[i], static_cast<std::uint32_t>(i));
    }
    for (const auto& name : schema.numeric_columns) {
      const auto it = std::find(numeric_names.begin(), numeric_names.end(), name);
      if (it == numeric_names.end()) {
        throw Error(ErrorCode::kSchemaMismatch, "unknown numeric feature " + name);
      }
      source_columns_.push_back(static_cast<std::size_t>(it - numeric_names.begin()));
    }
  }

  FeatureRow operator()(const RawFeatureRow& raw) const {
    FeatureRow row;
    row.sha = raw.sha;
    row.project_id = raw.project_id;
    row.label = raw.label;
    for (const auto& t : raw.terms) {
      const auto it = term_index_.find(t);
      if (it != term_index_.end()) row.textual.push_back(it->second);
    }
    std::sort(row.textual.begin(), row.textual.end());
    row.textual.erase(std::unique(row.textual.begin(), row.textual.end()), row.textual.end());
    row.numeric.reserve(source_columns_.size());
    for (std::size_t i = 0; i < source_columns_.size(); ++i) {
      if (source_columns_[i] >= raw.numeric.size()) {
        throw Error(ErrorCode::kSchemaMismatch, "row " + raw.sha + " lacks numeric features");
      }
      const auto [lo, hi] = schema_.minmax[i];
      row.numeric.push_back(min_max_scale(raw.numeric[source_columns_[i]], lo, hi));
    }
    return row;
  }

 private:
  const FeatureSchema& schema_;
  std::unordered_map<std::string, std::uint32_t> term_index_;
  std::vector<std::size_t> source_columns_;
};

inline FeatureMatrix transform(const RawDataset& data, const FeatureSchema& schema) {
  const SchemaTransformer tx(schema, data.numeric_names);
  FeatureMatrix m;
  m.vocab_size = schema.vocabulary.size();
  m.numeric_columns = schema.numeric_columns;
  m.rows.reserve(data.rows.size());
  for (const auto& raw : data.rows) m.rows.push_back(tx(raw));
  return m;
}

inline Json to_json(const FeatureRow& r) {
  return Json{{"sha", r.sha}, {"project", r.project_id}, {"label", r.label},
              {"text", r.textual}, {"num", r.numeric}};
}

/// Dataset file: one transformed row per line. Width information comes from
/// the schema the rows were produced with.
inline std::string feature_matrix_to_jsonl(const FeatureMatrix& m) {
  std::string out;
  for (const auto& r : m.rows) out += to_json(r).dump() + "\n";
  return out;
}

inline FeatureMatrix read_feature_matrix(const std::filesystem::path& path,
                                         const FeatureSchema& schema) {
  FeatureMatrix m;
  m.vocab_size = schema.vocabulary.size();
  m.numeric_columns = schema.numeric_columns;
  for_each_jsonl(path, [&](const Json& j, std::size_t line) {
    FeatureRow r;
    r.sha = j.at("sha").get<std::string>();
    r.project_id = j.at("project").get<std::string>();
    r.label = j.at("label").get<int>();
    r.textual = j.at("text").get<std::vector<std::uint32_t>>();
    r.numeric = j.at("num").get<std::vector<double>>();
    const bool bad_text = std::any_of(r.textual.begin(), r.textual.end(),
                                      [&](std::uint32_t t) { return t >= m.vocab_size; });
    if (bad_text || r.numeric.size() != m.numeric_columns.size()) {
      throw Error(ErrorCode::kSchemaMismatch,
                  path.string() + " line " + std::to_string(line) + " does not match schema");
    }
    m.rows.push_back(std::move(r));
  });
  return m;
}

}  // namespace refscan
