#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "fixture_repos.hpp"
#include "refscan/pipeline.hpp"
#include "refscan/random.hpp"

using namespace refscan;

namespace {

RawDataset dataset_with(std::vector<std::string> names, const std::vector<std::vector<double>>& columns,
                        std::vector<std::vector<std::string>> terms = {}) {
  RawDataset d;
  d.numeric_names = std::move(names);
  const std::size_t n = columns.empty() ? terms.size() : columns.front().size();
  for (std::size_t r = 0; r < n; ++r) {
    RawFeatureRow row;
    row.sha = "r" + std::to_string(r);
    row.project_id = "p";
    row.label = static_cast<int>(r % 2);
    for (const auto& c : columns) row.numeric.push_back(c[r]);
    if (r < terms.size()) row.terms = terms[r];
    d.rows.push_back(std::move(row));
  }
  return d;
}

// Spearman via 1 - 6 sum d^2 / (n (n^2 - 1)); only valid without ties.
double spearman_formula(const std::vector<double>& a, const std::vector<double>& b) {
  auto rank = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      r[i] = 1.0 + static_cast<double>(std::count_if(v.begin(), v.end(), [&](double x) { return x < v[i]; }));
    }
    return r;
  };
  const auto ra = rank(a);
  const auto rb = rank(b);
  double d2 = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d2 += (ra[i] - rb[i]) * (ra[i] - rb[i]);
  const double n = static_cast<double>(a.size());
  return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

}  // namespace

TEST(Variance, BinaryPresence) {
  EXPECT_NEAR(binary_presence_variance(3, 1000), 0.002991, 1e-12);
  EXPECT_NEAR(binary_presence_variance(1, 2000), 0.00049975, 1e-12);
  EXPECT_DOUBLE_EQ(binary_presence_variance(5, 5), 0.0);
  EXPECT_DOUBLE_EQ(binary_presence_variance(0, 0), 0.0);
}

TEST(FitSchema, TermVarianceFilter) {
  std::vector<std::vector<std::string>> terms(2000);
  for (std::size_t r = 0; r < 2000; ++r) terms[r].push_back("everywher");
  terms[0].push_back("singl");
  for (std::size_t r : {10u, 20u, 30u, 40u, 50u, 60u}) terms[r].push_back("rare");
  std::vector<double> x(2000);
  for (std::size_t r = 0; r < 2000; ++r) x[r] = static_cast<double>(r % 7);
  const auto schema = fit_schema(dataset_with({"x"}, {x}, terms));
  // rare: 6 / 2000 -> 0.002982 retained; singl: 1 / 2000 dropped; everywher: variance 0
  EXPECT_EQ(schema.vocabulary, std::vector<std::string>{"rare"});
  EXPECT_EQ(schema.dropped_terms, 2u);

  std::vector<std::vector<std::string>> small(1000);
  for (std::size_t r : {1u, 2u, 3u}) small[r].push_back("three");
  std::vector<double> y(1000);
  for (std::size_t r = 0; r < 1000; ++r) y[r] = static_cast<double>(r % 5);
  EXPECT_EQ(fit_schema(dataset_with({"x"}, {y}, small)).vocabulary, std::vector<std::string>{"three"});
}

TEST(Spearman, KnownValuesAndFormulaOracle) {
  const std::vector<double> a = {1, 2, 3, 4};
  const std::vector<double> b = {1, 3, 2, 4};
  EXPECT_NEAR(spearman_rho(a, b), 0.8, 1e-12);
  EXPECT_NEAR(spearman_formula(a, b), 0.8, 1e-12);
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = 3 + rng.below(40);
    std::vector<double> x(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.uniform();
      y[i] = rng.uniform();
    }
    EXPECT_NEAR(spearman_rho(x, y), spearman_formula(x, y), 1e-12);
  }
}

TEST(Spearman, PruneDropsLaterCorrelatedColumn) {
  const std::vector<double> a = {1, 2, 3, 4};
  const std::vector<double> b = {1, 3, 2, 4};
  EXPECT_EQ(spearman_prune({a, b}), std::vector<std::size_t>{0});
  EXPECT_EQ(spearman_prune({b, a}), std::vector<std::size_t>{0});
  std::vector<double> e;
  for (double v : a) e.push_back(std::exp(v));
  const std::vector<double> other = {3, 1, 4, 2};
  EXPECT_EQ(spearman_prune({a, a, e, other}), (std::vector<std::size_t>{0, 3}));
  EXPECT_THROW(spearman_prune({{1.0}, {2.0}}), Error);
}

TEST(Redundancy, LinearCombinationDropped) {
  Rng rng(9);
  std::vector<double> a(50);
  std::vector<double> b(50);
  std::vector<double> c(50);
  for (std::size_t i = 0; i < 50; ++i) {
    a[i] = rng.uniform();
    b[i] = rng.uniform();
    c[i] = a[i] + b[i];
  }
  EXPECT_EQ(redundancy_prune({a, b, c}), (std::vector<std::size_t>{0, 1}));
  EXPECT_EQ(redundancy_prune({a}), std::vector<std::size_t>{0});
}

TEST(Redundancy, OrthogonalColumnsKept) {
  // Centered, mutually orthogonal columns: R^2 = 0 against the others.
  const std::vector<double> u = {1, -1, 1, -1, 1, -1, 1, -1};
  const std::vector<double> v = {1, 1, -1, -1, 1, 1, -1, -1};
  const std::vector<double> w = {1, 1, 1, 1, -1, -1, -1, -1};
  EXPECT_EQ(redundancy_prune({u, v, w}), (std::vector<std::size_t>{0, 1, 2}));
  const std::vector<std::span<const double>> others = {v, w};
  EXPECT_NEAR(r_squared(u, others), 0.0, 1e-12);
}

TEST(Redundancy, SinglePredictorMatchesSquaredCorrelation) {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = 5 + rng.below(50);
    std::vector<double> x(n);
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = rng.normal();
      y[i] = 0.5 * x[i] + rng.normal();
    }
    double mx = 0;
    double my = 0;
    for (std::size_t i = 0; i < n; ++i) {
      mx += x[i];
      my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0;
    double sxx = 0;
    double syy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
      syy += (y[i] - my) * (y[i] - my);
    }
    const std::vector<std::span<const double>> pred = {x};
    EXPECT_NEAR(r_squared(y, pred), sxy * sxy / (sxx * syy), 1e-9);
  }
}

TEST(Transform, MinMaxScaling) {
  const auto train = dataset_with({"x", "k", "z"}, {{2, 4, 10}, {5, 5, 5}, {0, 9, 1}});
  FitOptions keep_all;
  keep_all.variance_threshold = 0.0;
  keep_all.spearman_threshold = 1.0;
  keep_all.r2_cutoff = 1.1;
  const auto schema = fit_schema(train, keep_all);
  ASSERT_EQ(schema.numeric_columns, (std::vector<std::string>{"x", "k", "z"}));
  const auto test = dataset_with({"x", "k", "z"}, {{4, 12, -3}, {5, 99, 0}, {9, 0, 4}});
  const auto m = transform(test, schema);
  EXPECT_DOUBLE_EQ(m.rows[0].numeric[0], 0.25);
  EXPECT_DOUBLE_EQ(m.rows[1].numeric[0], 1.0);
  EXPECT_DOUBLE_EQ(m.rows[2].numeric[0], 0.0);
  EXPECT_DOUBLE_EQ(m.rows[0].numeric[1], 0.0);
  EXPECT_DOUBLE_EQ(m.rows[1].numeric[1], 0.0);
  EXPECT_DOUBLE_EQ(min_max_scale(12, 2, 10), 1.0);
}

TEST(Transform, UnknownTermsAndColumnsOrder) {
  FitOptions keep_all;
  keep_all.variance_threshold = 0.0;
  const auto train = dataset_with({"a", "b"}, {{0, 1, 2, 3}, {3, 0, 2, 1}},
                                  {{"x", "y"}, {"y"}, {"z"}, {"x"}});
  const auto schema = fit_schema(train, keep_all);
  EXPECT_EQ(schema.vocabulary, (std::vector<std::string>{"x", "y", "z"}));
  EXPECT_EQ(schema.feature_name(1), "term:y");
  EXPECT_EQ(schema.feature_name(3), schema.numeric_columns[0]);
  auto test = dataset_with({"b", "a"}, {{9, 9}, {1, 2}}, {{"z", "unseen", "x"}, {}});
  const auto m = transform(test, schema);
  EXPECT_EQ(m.rows[0].textual, (std::vector<std::uint32_t>{0, 2}));
  EXPECT_TRUE(m.rows[1].textual.empty());
  EXPECT_DOUBLE_EQ(m.rows[0].numeric[0], 1.0 / 3.0);  // column a read by name
  test.numeric_names = {"b", "c"};
  try {
    transform(test, schema);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaMismatch);
  }
}

TEST(Transform, ValuesAlwaysInUnitInterval) {
  Rng rng(21);
  std::vector<std::vector<double>> cols(5, std::vector<double>(200));
  for (auto& c : cols) {
    for (auto& v : c) v = rng.normal() * 10;
  }
  const std::vector<std::string> names = {"a", "b", "c", "d", "e"};
  const auto schema = fit_schema(dataset_with(names, cols));
  std::vector<std::vector<double>> wild(5, std::vector<double>(300));
  for (auto& c : wild) {
    for (auto& v : c) v = rng.normal() * 1e6;
  }
  const auto data = dataset_with(names, wild);
  const auto m1 = transform(data, schema);
  const auto m2 = transform(data, schema);
  EXPECT_EQ(feature_matrix_to_jsonl(m1), feature_matrix_to_jsonl(m2));
  for (const auto& r : m1.rows) {
    for (double v : r.numeric) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(FitSchema, ThresholdsHoldAfterFit) {
  Rng rng(31);
  const std::size_t n = 400;
  std::vector<std::vector<double>> cols;
  for (int c = 0; c < 8; ++c) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    cols.push_back(std::move(v));
  }
  std::vector<double> mix(n);
  std::vector<double> mono(n);
  std::vector<double> noisy(n);
  for (std::size_t i = 0; i < n; ++i) {
    mix[i] = cols[0][i] + 0.5 * cols[1][i] - cols[2][i] + 0.8 * cols[3][i] + 0.01 * rng.normal();
    mono[i] = std::pow(cols[4][i] + 10, 3);
    noisy[i] = cols[5][i] + 0.6 * rng.normal();
  }
  cols.push_back(mix);
  cols.push_back(mono);
  cols.push_back(noisy);
  std::vector<std::string> names;
  for (std::size_t c = 0; c < cols.size(); ++c) names.push_back("c" + std::to_string(c));
  const auto schema = fit_schema(dataset_with(names, cols));
  ASSERT_FALSE(schema.redundancy_skipped);
  std::vector<std::vector<double>> kept;
  for (const auto& name : schema.numeric_columns) {
    kept.push_back(cols[static_cast<std::size_t>(std::stoi(name.substr(1)))]);
  }
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t j = i + 1; j < kept.size(); ++j) {
      EXPECT_LE(std::abs(spearman_formula(kept[i], kept[j])), 0.7);
    }
  }
  EXPECT_TRUE(std::find(schema.numeric_columns.begin(), schema.numeric_columns.end(), "c9") ==
              schema.numeric_columns.end());
  const auto& red = schema.dropped.at("redundant");
  EXPECT_EQ(red.size(), 1u);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    std::vector<std::span<const double>> others;
    for (std::size_t j = 0; j < kept.size(); ++j) {
      if (j != i) others.emplace_back(kept[j]);
    }
    EXPECT_LE(r_squared(kept[i], others), 0.9);
  }
}

TEST(FitSchema, IgnoresRowsOutsideTrainingSet) {
  Rng rng(37);
  std::vector<std::vector<double>> cols(3, std::vector<double>(100));
  for (auto& c : cols) {
    for (auto& v : c) v = rng.uniform();
  }
  std::vector<std::vector<std::string>> terms(100);
  for (std::size_t r = 0; r < 100; ++r) terms[r] = {r % 3 ? "a" : "b"};
  auto data = dataset_with({"x", "y", "z"}, cols, terms);
  std::vector<std::size_t> train(80);
  std::iota(train.begin(), train.end(), 0);
  const auto before = to_json(fit_schema(data.subset(train))).dump();
  for (std::size_t r = 80; r < 100; ++r) {
    data.rows[r].numeric = {1e9, -1e9, 42};
    data.rows[r].terms = {"leak"};
  }
  EXPECT_EQ(to_json(fit_schema(data.subset(train))).dump(), before);
}

TEST(FitSchema, EmptyTrainingAndSkippedRedundancy) {
  try {
    fit_schema(RawDataset{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyTraining);
  }
  const auto few = fit_schema(dataset_with({"a", "b", "c"}, {{0, 1, 2}, {2, 0, 1}, {1, 2, 0}}));
  EXPECT_TRUE(few.redundancy_skipped);
}

TEST(Serialization, RoundTrips) {
  refscan::testing::TempDir tmp("pipe");
  Rng rng(2);
  std::vector<std::vector<double>> cols(4, std::vector<double>(60));
  for (auto& c : cols) {
    for (auto& v : c) v = rng.uniform() * 100;
  }
  std::vector<std::vector<std::string>> terms(60);
  for (std::size_t r = 0; r < 60; ++r) terms[r] = {"t" + std::to_string(r % 4), "common"};
  const auto data = dataset_with({"a", "b", "c", "d"}, cols, terms);
  refscan::testing::write_text(tmp.path() / "raw.jsonl", raw_dataset_to_jsonl(data));
  const auto raw_back = read_raw_dataset(tmp.path() / "raw.jsonl");
  EXPECT_EQ(raw_dataset_to_jsonl(raw_back), raw_dataset_to_jsonl(data));

  const auto schema = fit_schema(data);
  const auto schema_back = schema_from_json(Json::parse(to_json(schema).dump()));
  EXPECT_EQ(to_json(schema_back).dump(), to_json(schema).dump());
  EXPECT_EQ(schema_hash(schema_back), schema_hash(schema));

  const auto m = transform(data, schema);
  refscan::testing::write_text(tmp.path() / "ds.jsonl", feature_matrix_to_jsonl(m));
  const auto m_back = read_feature_matrix(tmp.path() / "ds.jsonl", schema);
  EXPECT_EQ(feature_matrix_to_jsonl(m_back), feature_matrix_to_jsonl(m));
  EXPECT_EQ(m_back.width(), schema.width());

  FeatureSchema narrower = schema;
  narrower.vocabulary.clear();
  narrower.numeric_columns.clear();
  narrower.minmax.clear();
  try {
    read_feature_matrix(tmp.path() / "ds.jsonl", narrower);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaMismatch);
  }
}

TEST(RawRow, NumericLayout) {
  EXPECT_EQ(numeric_feature_names().size(), 24u);
  EXPECT_EQ(numeric_feature_names()[7], "code_entropy");
  TextFeatures t;
  t.terms = {"b", "a"};
  t.word_count = 3;
  ProcessFeatures p;
  p.lines_added = 5;
  p.lines_deleted = 7;
  p.lines_changed = -2;
  p.has_executable = true;
  CodeFeatureDelta c;
  c.cyclomatic_sum = 4;
  const auto row = make_raw_row("s", "p", true, t, p, c);
  EXPECT_EQ(row.terms, (std::vector<std::string>{"a", "b"}));
  ASSERT_EQ(row.numeric.size(), 24u);
  EXPECT_EQ(row.numeric[0], 3);
  EXPECT_EQ(row.numeric[5], -2);
  EXPECT_EQ(row.numeric[9], 1);
  EXPECT_EQ(row.numeric[23], 4);
  EXPECT_EQ(row.label, 1);
}
