#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "fixture_repos.hpp"
#include "refscan/labeling.hpp"
#include "refscan/random.hpp"

using namespace refscan;

namespace {

CommitRecord commit_with(std::string sha, std::string message, std::vector<std::string> paths) {
  CommitRecord c;
  c.sha = std::move(sha);
  c.project_id = "p";
  c.message = std::move(message);
  for (auto& p : paths) c.files.push_back(FileChange{p, 1, 0, classify_file(p), false, false});
  return c;
}

}  // namespace

TEST(KeywordLabel, KnownMessages) {
  const auto kw = KeywordSet::defaults();
  EXPECT_EQ(kw.size(), 16u);
  const auto a = keyword_label("Refactor data loader", kw);
  EXPECT_TRUE(a.matched);
  EXPECT_EQ(a.keywords, std::vector<std::string>{"refactor"});
  const auto b = keyword_label("", kw);
  EXPECT_FALSE(b.matched);
  EXPECT_TRUE(b.keywords.empty());
  const auto c = keyword_label("fix(helper): improve collision in random_port", kw);
  EXPECT_TRUE(c.matched);
  EXPECT_EQ(c.keywords, std::vector<std::string>{"improve"});
}

TEST(KeywordLabel, StemPrefixMatches) {
  const auto kw = KeywordSet::defaults();
  EXPECT_TRUE(keyword_label("Restructured the parser", kw).matched);
  EXPECT_TRUE(keyword_label("Simplified option handling", kw).matched);
  EXPECT_TRUE(keyword_label("Removed unused arguments", kw).matched);
  EXPECT_FALSE(keyword_label("Add retry to downloader", kw).matched);
  EXPECT_FALSE(keyword_label("https://example.com/refactor", kw).matched);
}

TEST(KeywordLabel, MatchedListInKeywordOrder) {
  const auto kw = KeywordSet::defaults();
  const auto m = keyword_label("Rename and move helpers, remove dead code", kw);
  EXPECT_EQ(m.keywords, (std::vector<std::string>{"move", "remove", "rename"}));
}

TEST(KeywordLabel, AddingKeywordsNeverFlipsTrueToFalse) {
  const std::vector<std::string> pool = {"move", "refactor", "remove", "rename", "split", "clean", "improve",
                                         "unused", "cleanup", "simplify", "restruct", "inline", "parameterize",
                                         "consolidate", "encapsulate", "update", "fix", "add", "test"};
  const std::vector<std::string> vocab = {"fix",    "rename", "loader", "cleanup", "add",   "tests",  "update",
                                          "inline", "split",  "docs",   "bug",     "moved", "simpler", "x"};
  Rng rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    std::string msg;
    const auto words = 1 + rng.below(6);
    for (std::uint64_t i = 0; i < words; ++i) msg += vocab[rng.below(vocab.size())] + " ";
    std::vector<std::string> small;
    for (const auto& k : pool) {
      if (rng.below(2) == 0) small.push_back(k);
    }
    if (small.empty()) small.push_back("fix");
    std::vector<std::string> big = small;
    for (const auto& k : pool) {
      if (rng.below(2) == 0) big.push_back(k);
    }
    const bool before = keyword_label(msg, KeywordSet(small)).matched;
    const bool after = keyword_label(msg, KeywordSet(big)).matched;
    EXPECT_TRUE(!before || after) << msg;
  }
}

TEST(KeywordSet, FromFileAndErrors) {
  refscan::testing::TempDir tmp("kw");
  refscan::testing::write_text(tmp.path() / "k.txt", "# custom\nretire\n\n  Deprecate \n");
  const auto kw = KeywordSet::from_file(tmp.path() / "k.txt");
  EXPECT_EQ(kw.keywords(), (std::vector<std::string>{"retire", "deprecate"}));
  EXPECT_TRUE(keyword_label("Deprecated old API", kw).matched);
  refscan::testing::write_text(tmp.path() / "empty.txt", "# nothing\n");
  EXPECT_THROW(KeywordSet::from_file(tmp.path() / "empty.txt"), Error);
  EXPECT_THROW(KeywordSet(std::vector<std::string>{}), Error);
}

TEST(RuleLabels, Ingestion) {
  const auto a = parse_rule_labels(R"({"abc123": [{"type": "Extract Method"}]})");
  EXPECT_TRUE(a.at("abc123"));
  const auto b = parse_rule_labels(R"({"abc123": []})");
  EXPECT_FALSE(b.at("abc123"));
  const auto c = parse_rule_labels(R"({"x": [{"type": "Move Method", "detail": "a.f -> b.f"}], "y": []})");
  EXPECT_TRUE(c.at("x"));
  EXPECT_FALSE(c.at("y"));
  for (const char* bad : {"{", "[]", R"({"x": {}})", R"({"x": [{"detail": "no type"}]})"}) {
    try {
      parse_rule_labels(bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::kParseError) << bad;
    }
  }
}

TEST(RuleLabels, MissingFile) {
  try {
    ingest_rule_labels("/nonexistent/rules.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingFile);
  }
}

TEST(CombineLabels, TruthTable) {
  EXPECT_TRUE(combine_labels(true, false, true));
  EXPECT_FALSE(combine_labels(true, false, false));
  EXPECT_FALSE(combine_labels(false, false, true));
  for (int bits = 0; bits < 8; ++bits) {
    const bool k = bits & 1;
    const bool r = bits & 2;
    const bool e = bits & 4;
    // Enumerated form of "either detector fires, on executable code".
    const bool expected = (k && e) || (r && e);
    EXPECT_EQ(combine_labels(k, r, e), expected) << bits;
  }
}

TEST(CombineLabels, MonotoneWhenExecutable) {
  for (int r = 0; r < 2; ++r) {
    EXPECT_LE(combine_labels(false, r, true), combine_labels(true, r, true));
    EXPECT_LE(combine_labels(r, false, true), combine_labels(r, true, true));
  }
}

TEST(LabelCommits, ReadmeOnlyCommitIsNeverRefactoring) {
  const std::vector<CommitRecord> commits = {
      commit_with("a1", "Refactor README wording", {"README.md"}),
      commit_with("b2", "Refactor data loader", {"src/loader.py", "README.md"}),
      commit_with("c3", "Relocate helpers", {"src/util.py"}),
      commit_with("d4", "Add CLI flag", {"src/cli.py"}),
  };
  const RuleLabels rules = {{"a1", true}, {"c3", true}, {"zz", true}, {"d4", false}};
  const auto result = label_commits(commits, rules, KeywordSet::defaults());
  ASSERT_EQ(result.records.size(), 4u);
  EXPECT_TRUE(result.records[0].keyword_label);
  EXPECT_TRUE(result.records[0].rule_label);
  EXPECT_FALSE(result.records[0].has_executable);
  EXPECT_FALSE(result.records[0].combined);
  EXPECT_TRUE(result.records[1].combined);
  EXPECT_TRUE(result.records[2].combined);
  EXPECT_FALSE(result.records[2].keyword_label);
  EXPECT_FALSE(result.records[3].combined);
  EXPECT_EQ(result.unknown_rule_shas, 1u);
}

TEST(LabelCommits, MatchedNonEmptyIffKeywordLabel) {
  Rng rng(3);
  const std::vector<std::string> words = {"rename", "fix", "cleanup", "feature", "docs", "tests", "typo"};
  std::vector<CommitRecord> commits;
  for (int i = 0; i < 100; ++i) {
    std::string msg = words[rng.below(words.size())] + " " + words[rng.below(words.size())];
    commits.push_back(commit_with("s" + std::to_string(i), msg, {rng.below(2) ? "a.py" : "a.md"}));
  }
  for (const auto& r : label_commits(commits, {}, KeywordSet::defaults()).records) {
    EXPECT_EQ(r.keyword_label, !r.matched.empty());
    EXPECT_EQ(r.combined, (r.keyword_label || r.rule_label) && r.has_executable);
  }
}

TEST(LabelCommits, JsonRoundTrip) {
  const auto result = label_commits({commit_with("a1", "Rename foo", {"x.py"})}, {}, KeywordSet::defaults());
  const auto& r = result.records[0];
  const auto back = label_from_json(Json::parse(to_json(r).dump()));
  EXPECT_EQ(back.sha, r.sha);
  EXPECT_EQ(back.matched, r.matched);
  EXPECT_EQ(back.combined, r.combined);
  EXPECT_EQ(back.keyword_label, r.keyword_label);
}
