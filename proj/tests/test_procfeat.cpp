#include <gtest/gtest.h>

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "refscan/labeling.hpp"
#include "refscan/procfeat.hpp"
#include "refscan/random.hpp"
#include "refscan/workflow.hpp"

using namespace refscan;

namespace {

CommitRecord commit_of(std::vector<FileChange> files) {
  CommitRecord c;
  c.sha = "s";
  c.project_id = "p";
  c.files = std::move(files);
  return c;
}

FileChange change(std::string path, std::int64_t add, std::int64_t del) {
  return FileChange{path, add, del, classify_file(path), false, false};
}

AuthorHistory history_of(std::size_t refactorings, std::size_t total) {
  AuthorHistory h;
  for (std::size_t i = 0; i < total; ++i) h.prior_labels.push_back(i < refactorings);
  return h;
}

}  // namespace

TEST(CodeEntropy, KnownValues) {
  EXPECT_DOUBLE_EQ(code_entropy(std::vector<std::int64_t>{10}), 0.0);
  EXPECT_DOUBLE_EQ(code_entropy(std::vector<std::int64_t>{5, 5}), 1.0);
  EXPECT_NEAR(code_entropy(std::vector<std::int64_t>{3, 1}), 0.811278, 1e-6);
  EXPECT_NEAR(code_entropy(std::vector<std::int64_t>{3, 1}), -(0.75 * std::log2(0.75) + 0.25 * std::log2(0.25)), 1e-15);
  EXPECT_DOUBLE_EQ(code_entropy(std::vector<std::int64_t>{}), 0.0);
  EXPECT_DOUBLE_EQ(code_entropy(std::vector<std::int64_t>{0, 7}), 0.0);
}

TEST(CodeEntropy, ScaleInvariantAndBounded) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::int64_t> churns;
    const auto n = 1 + rng.below(12);
    for (std::uint64_t i = 0; i < n; ++i) churns.push_back(static_cast<std::int64_t>(rng.below(50)));
    const auto factor = static_cast<std::int64_t>(1 + rng.below(1000));
    std::vector<std::int64_t> scaled;
    for (auto c : churns) scaled.push_back(c * factor);
    const double h = code_entropy(churns);
    EXPECT_NEAR(code_entropy(scaled), h, 1e-12);
    const auto nonzero = std::count_if(churns.begin(), churns.end(), [](auto c) { return c > 0; });
    if (nonzero >= 1) {
      EXPECT_LE(h, std::log2(static_cast<double>(nonzero)) + 1e-12);
    }
    EXPECT_GE(h, 0.0);
  }
}

TEST(RefactoringContribution, Ratios) {
  EXPECT_DOUBLE_EQ(refactoring_contribution(history_of(3, 10)), 0.3);
  EXPECT_DOUBLE_EQ(refactoring_contribution(history_of(0, 0)), 0.0);
  EXPECT_DOUBLE_EQ(refactoring_contribution(history_of(4, 4)), 1.0);
}

TEST(ProcessFeatures, HandEvaluated) {
  const auto f = process_features(commit_of({change("a.py", 4, 1), change("b.md", 2, 0)}), {});
  EXPECT_EQ(f.lines_added, 6);
  EXPECT_EQ(f.lines_deleted, 1);
  EXPECT_EQ(f.lines_changed, 5);
  EXPECT_EQ(f.num_files, 2);
  EXPECT_TRUE(f.has_executable);
  EXPECT_DOUBLE_EQ(f.entropy, 0.0);

  const auto empty = process_features(commit_of({}), {});
  EXPECT_EQ(empty.lines_added, 0);
  EXPECT_EQ(empty.lines_changed, 0);
  EXPECT_EQ(empty.num_files, 0);
  EXPECT_FALSE(empty.has_executable);
  EXPECT_DOUBLE_EQ(empty.entropy, 0.0);
  EXPECT_DOUBLE_EQ(empty.rcr, 0.0);

  EXPECT_DOUBLE_EQ(process_features(commit_of({change("a.py", 5, 0), change("b.py", 0, 5)}), {}).entropy, 1.0);
}

TEST(ProcessFeatures, BinaryAndDocsExcludedFromEntropy) {
  auto bin = change("blob.py", 0, 0);
  bin.is_binary = true;
  const auto f = process_features(commit_of({change("a.py", 3, 0), change("b.md", 9, 9), bin}), {});
  EXPECT_DOUBLE_EQ(f.entropy, 0.0);
  EXPECT_EQ(f.num_files, 3);
}

TEST(ProcessFeatures, LinesChangedIsSignedDifference) {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<FileChange> files;
    std::int64_t added = 0;
    std::int64_t deleted = 0;
    const auto n = rng.below(8);
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto a = static_cast<std::int64_t>(rng.below(100));
      const auto d = static_cast<std::int64_t>(rng.below(100));
      added += a;
      deleted += d;
      files.push_back(change("f" + std::to_string(i) + (rng.below(2) ? ".py" : ".txt"), a, d));
    }
    const auto f = process_features(commit_of(files), {});
    EXPECT_EQ(f.lines_changed, added - deleted);
    EXPECT_EQ(f.lines_changed, f.lines_added - f.lines_deleted);
  }
}

TEST(AuthorHistories, StrictlyPriorWithinProject) {
  auto mk = [](std::string sha, std::string project, std::string author, std::int64_t ts) {
    CommitRecord c;
    c.sha = std::move(sha);
    c.project_id = std::move(project);
    c.author_id = std::move(author);
    c.timestamp = ts;
    return c;
  };
  const std::vector<CommitRecord> commits = {
      mk("c", "p", "ann", 30), mk("a", "p", "ann", 10), mk("b", "p", "ann", 20),
      mk("d", "p", "bob", 20), mk("e", "q", "ann", 5),  mk("f", "p", "ann", 20),
  };
  std::unordered_map<std::string, LabelRecord> labels;
  for (const auto& c : commits) labels[c.sha].combined = c.sha == "a" || c.sha == "b";
  const auto h = author_histories(commits, labels);
  EXPECT_EQ(h[1].prior_labels, std::vector<bool>{});
  EXPECT_EQ(h[2].prior_labels, std::vector<bool>{true});
  EXPECT_EQ(h[5].prior_labels, (std::vector<bool>{true, true}));
  EXPECT_EQ(h[0].prior_labels, (std::vector<bool>{true, true, false}));
  EXPECT_TRUE(h[3].prior_labels.empty());
  EXPECT_TRUE(h[4].prior_labels.empty());
  EXPECT_NEAR(refactoring_contribution(h[0]), 2.0 / 3.0, 1e-15);
}

TEST(AuthorHistories, LaterCommitsNeverChangeRcr) {
  Rng rng(29);
  std::vector<CommitRecord> commits;
  std::unordered_map<std::string, LabelRecord> labels;
  for (int i = 0; i < 60; ++i) {
    CommitRecord c;
    c.sha = "s" + std::to_string(100 + i);
    c.project_id = "p";
    c.author_id = "a" + std::to_string(rng.below(3));
    c.timestamp = i;
    labels[c.sha].combined = rng.below(2) == 1;
    commits.push_back(c);
  }
  const auto base = author_histories(commits, labels);
  auto changed = labels;
  for (int i = 40; i < 60; ++i) changed["s" + std::to_string(100 + i)].combined ^= true;
  auto permuted = commits;
  Rng shuffle(1);
  shuffle.shuffle(std::span(permuted));
  const auto after = author_histories(permuted, changed);
  for (std::size_t j = 0; j < permuted.size(); ++j) {
    const auto i = static_cast<std::size_t>(std::stoi(permuted[j].sha.substr(1)) - 100);
    if (i <= 40) {
      EXPECT_EQ(after[j].prior_labels, base[i].prior_labels) << i;
    }
  }
}
