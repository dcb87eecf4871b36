#include <gtest/gtest.h>

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "refscan/explain.hpp"
#include "refscan/model.hpp"
#include "refscan/random.hpp"

using namespace refscan;

namespace {

double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }

double weight_of(const Explanation& e, const std::string& name) {
  for (const auto& [n, w] : e.weights) {
    if (n == name) return w;
  }
  ADD_FAILURE() << name << " not reported";
  return 0.0;
}

FeatureSchema two_column_schema() {
  FeatureSchema s;
  s.vocabulary = {"refactor"};
  s.numeric_columns = {"lines_added", "n_files"};
  s.minmax = {{0, 1}, {0, 1}};
  return s;
}

}  // namespace

TEST(Lime, RecoversSignsOfLinearLogit) {
  const std::vector<std::string> names = {"x1", "x2", "x3"};
  const std::vector<double> instance = {0.6, 0.4, 0.5};
  const auto predict = [](std::span<const double> x) { return logistic(2.0 * x[0] - 3.0 * x[1]); };
  LimeConfig cfg;
  cfg.seed = 4;
  const auto e = lime_explain(predict, instance, 0, names, cfg);
  EXPECT_GT(weight_of(e, "x1"), 0.0);
  EXPECT_LT(weight_of(e, "x2"), 0.0);
  EXPECT_LT(std::abs(weight_of(e, "x3")), 1e-3);
  EXPECT_EQ(e.weights.front().first, "x2");
  EXPECT_GT(e.local_fit_r2, 0.9);
}

TEST(Lime, DeterministicForSeed) {
  const std::vector<std::string> names = {"t", "x"};
  const std::vector<double> instance = {1.0, 0.3};
  const auto predict = [](std::span<const double> x) { return logistic(x[0] + x[1] * x[1]); };
  LimeConfig cfg;
  cfg.seed = 8;
  const auto a = lime_explain(predict, instance, 1, names, cfg);
  const auto b = lime_explain(predict, instance, 1, names, cfg);
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.intercept, b.intercept);
  cfg.seed = 9;
  EXPECT_NE(lime_explain(predict, instance, 1, names, cfg).weights, a.weights);
}

TEST(Lime, AbsentTermsAreNotExplained) {
  const std::vector<std::string> names = {"a", "b", "x"};
  const std::vector<double> instance = {0.0, 1.0, 0.5};
  const auto predict = [](std::span<const double> x) { return logistic(x[0] + x[1] - x[2]); };
  const auto e = lime_explain(predict, instance, 2, names, LimeConfig{});
  ASSERT_EQ(e.weights.size(), 2u);
  for (const auto& [n, w] : e.weights) EXPECT_NE(n, "a");
  EXPECT_GT(weight_of(e, "b"), 0.0);
}

TEST(Lime, TopKTruncates) {
  const std::vector<std::string> names = {"a", "b", "c", "d"};
  const std::vector<double> instance = {0.5, 0.5, 0.5, 0.5};
  const auto predict = [](std::span<const double> x) { return logistic(4 * x[0] - 2 * x[1] + x[2] - 0.5 * x[3]); };
  LimeConfig cfg;
  cfg.top_k = 2;
  const auto e = lime_explain(predict, instance, 0, names, cfg);
  ASSERT_EQ(e.weights.size(), 2u);
  EXPECT_EQ(e.weights[0].first, "a");
  EXPECT_EQ(e.weights[1].first, "b");
}

TEST(Lime, DegenerateInstance) {
  const std::vector<std::string> names = {"a", "b"};
  const std::vector<double> instance = {0.0, 0.0};
  const auto predict = [](std::span<const double>) { return 0.5; };
  try {
    lime_explain(predict, instance, 2, names, LimeConfig{}, "abc");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateInstance);
  }
}

TEST(Lime, SignRecoveryOnRandomLinearModels) {
  Rng rng(61);
  std::size_t correct = 0;
  std::size_t total = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t terms = rng.below(3);
    const std::size_t numeric = 1 + rng.below(4);
    std::vector<double> w;
    std::vector<double> instance;
    std::vector<std::string> names;
    for (std::size_t j = 0; j < terms + numeric; ++j) {
      const double mag = rng.uniform(0.5, 3.0);
      w.push_back(rng.bernoulli(0.5) ? mag : -mag);
      instance.push_back(j < terms ? 1.0 : rng.uniform(0.2, 0.8));
      names.push_back("f" + std::to_string(j));
    }
    const auto predict = [&](std::span<const double> x) {
      double u = 0;
      for (std::size_t j = 0; j < x.size(); ++j) u += w[j] * (x[j] - 0.5);
      return logistic(u);
    };
    LimeConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(trial);
    const auto e = lime_explain(predict, instance, terms, names, cfg);
    for (std::size_t j = 0; j < w.size(); ++j) {
      ++total;
      if ((weight_of(e, names[j]) > 0) == (w[j] > 0)) ++correct;
    }
  }
  EXPECT_GE(static_cast<double>(correct), 0.95 * static_cast<double>(total));
}

TEST(SplitImportance, CountsInternalNodesPerFeature) {
  const auto schema = two_column_schema();
  GbdtModel stump;
  stump.n_features = 3;
  Tree t;
  t.nodes = {TreeNode{1, 0.5, 1, 2, 0.0}, TreeNode{-1, 0, -1, -1, -0.2}, TreeNode{-1, 0, -1, -1, 0.3}};
  stump.trees.push_back(t);
  stump.split_counts = {{1, 1}};
  const auto imp = split_importance(stump, schema);
  ASSERT_EQ(imp.size(), 1u);
  EXPECT_EQ(imp[0].first, "lines_added");
  EXPECT_EQ(imp[0].second, 1u);
  EXPECT_TRUE(split_importance(GbdtModel{}, schema).empty());
}

TEST(SplitImportance, OrderedByCountThenName) {
  const auto schema = two_column_schema();
  GbdtModel m;
  m.split_counts = {{0, 2}, {1, 5}, {2, 2}};
  const auto imp = split_importance(m, schema);
  ASSERT_EQ(imp.size(), 3u);
  EXPECT_EQ(imp[0].first, "lines_added");
  EXPECT_EQ(imp[1].first, "n_files");
  EXPECT_EQ(imp[2].first, "term:refactor");
}

TEST(Aggregate, MedianAndDirection) {
  const std::vector<Explanation> ex = {
      {"a", {{"f", 0.2}, {"g", -0.1}}, 0, 0},
      {"b", {{"f", 0.3}, {"g", 0.1}}, 0, 0},
      {"c", {{"f", 0.4}}, 0, 0},
  };
  const auto agg = aggregate_explanations(ex, {{"g", 4}});
  ASSERT_EQ(agg.size(), 2u);
  EXPECT_EQ(agg[0].feature, "g");
  EXPECT_EQ(agg[0].split_count, 4u);
  EXPECT_EQ(agg[0].median_weight, 0.0);
  EXPECT_EQ(agg[0].direction, Direction::kNeutral);
  EXPECT_EQ(agg[1].feature, "f");
  EXPECT_DOUBLE_EQ(agg[1].median_weight, 0.3);
  EXPECT_EQ(agg[1].direction, Direction::kRefactoring);
  EXPECT_EQ(agg[1].reports, 3u);
  for (const auto& a : agg) EXPECT_NE(a.feature, "h");
}

TEST(Aggregate, NegationFlipsDirection) {
  Rng rng(71);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Explanation> ex;
    std::vector<Explanation> neg;
    for (int i = 0, n = 1 + static_cast<int>(rng.below(6)); i < n; ++i) {
      Explanation e;
      for (const char* name : {"p", "q", "r"}) {
        if (rng.bernoulli(0.7)) e.weights.emplace_back(name, rng.uniform(-1, 1));
      }
      Explanation f = e;
      for (auto& [_, w] : f.weights) w = -w;
      ex.push_back(e);
      neg.push_back(f);
    }
    const auto a = aggregate_explanations(ex, {});
    const auto b = aggregate_explanations(neg, {});
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_EQ(a[i].feature, b[i].feature);
      EXPECT_EQ(a[i].median_weight, -b[i].median_weight);
      if (a[i].direction == Direction::kRefactoring) EXPECT_EQ(b[i].direction, Direction::kNonRefactoring);
      if (a[i].direction == Direction::kNeutral) EXPECT_EQ(b[i].direction, Direction::kNeutral);
    }
  }
}

TEST(Aggregate, EmptyInputThrows) {
  try {
    aggregate_explanations({}, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyInput);
  }
}

TEST(ExplainRows, RowsWithoutActiveFeaturesGetEmptyWeights) {
  FeatureSchema schema;
  schema.vocabulary = {"refactor", "fix"};
  FeatureMatrix m;
  m.vocab_size = 2;
  m.rows.resize(2);
  m.rows[0].sha = "s0";
  m.rows[0].textual = {0};
  m.rows[1].sha = "s1";
  GbdtModel model;
  model.n_features = 2;
  LimeConfig cfg;
  cfg.n_samples = 50;
  const auto out = explain_rows(model, m, schema, cfg, 2);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].weights.size(), 1u);
  EXPECT_EQ(out[0].weights[0].first, "term:refactor");
  EXPECT_TRUE(out[1].weights.empty());
  EXPECT_EQ(out[1].sha, "s1");
}
