#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "fixture_repos.hpp"
#include "refscan/codefeat.hpp"
#include "refscan/corpus.hpp"
#include "refscan/random.hpp"

using namespace refscan;
using namespace std::string_literals;

namespace {

void expect_line_invariants(const CodeMetricVector& m) {
  EXPECT_GE(m.count_line, m.count_line_blank + m.count_line_code);
  EXPECT_LE(m.count_line, m.count_line_blank + m.count_line_code + m.count_line_comment);
  EXPECT_LE(m.cyclomatic_max, m.cyclomatic_sum);
  if (m.count_line_code == 0) {
    EXPECT_EQ(m.ratio_comment_to_code, 0.0);
  } else {
    EXPECT_DOUBLE_EQ(m.ratio_comment_to_code, m.count_line_comment / m.count_line_code);
  }
}

}  // namespace

TEST(MeasureSource, EmptyIsZero) { EXPECT_EQ(measure_source(""), CodeMetricVector{}); }

TEST(MeasureSource, SmallFunction) {
  const auto m = measure_source("def f(x):\n    # doc\n    return x\n");
  EXPECT_EQ(m.count_line, 3);
  EXPECT_EQ(m.count_line_code, 2);
  EXPECT_EQ(m.count_line_comment, 1);
  EXPECT_EQ(m.count_line_blank, 0);
  EXPECT_EQ(m.count_decl_function, 1);
  EXPECT_EQ(m.cyclomatic_sum, 1);
  EXPECT_EQ(m.max_nesting, 1);
  EXPECT_EQ(m.count_line_code_decl, 1);
  EXPECT_EQ(m.avg_count_line_code, 2);
  EXPECT_DOUBLE_EQ(m.ratio_comment_to_code, 0.5);
}

TEST(MeasureSource, IfElseComplexity) {
  const auto m = measure_source("def g(x):\n    if x:\n        return 1\n    else:\n        return 2\n");
  EXPECT_EQ(m.cyclomatic_sum, 2);
  EXPECT_EQ(m.cyclomatic_max, 2);
  EXPECT_EQ(m.max_nesting, 2);
}

TEST(MeasureSource, ClassesMethodsAndNestedFunctions) {
  const std::string src =
      "import os\n"
      "\n"
      "class A:\n"
      "    \"\"\"Doc\n"
      "    string.\"\"\"\n"
      "    def m(self, a, b):\n"
      "        if a and b:  # both\n"
      "            return 1\n"
      "        for i in range(3):\n"
      "            while i:\n"
      "                i -= 1\n"
      "        return 0\n"
      "\n"
      "def outer():\n"
      "    def inner(y):\n"
      "        return y or 1\n"
      "    return inner\n";
  const auto m = measure_source(src);
  EXPECT_EQ(m.count_line, 17);
  EXPECT_EQ(m.count_line_blank, 2);
  EXPECT_EQ(m.count_line_code, 13);
  EXPECT_EQ(m.count_line_comment, 3);  // two docstring lines plus one trailing comment
  EXPECT_EQ(m.count_decl_class, 1);
  EXPECT_EQ(m.count_decl_function, 3);
  EXPECT_EQ(m.count_decl_method, 1);
  EXPECT_EQ(m.count_line_code_decl, 5);
  // m: if, and, for, while -> 5; outer: 1; inner: or -> 2
  EXPECT_EQ(m.cyclomatic_sum, 8);
  EXPECT_EQ(m.cyclomatic_max, 5);
  EXPECT_EQ(m.max_nesting, 4);
  expect_line_invariants(m);
}

TEST(MeasureSource, KeywordsInsideStringsIgnored) {
  const auto m = measure_source("def f():\n    s = 'if x and y'\n    t = \"\"\"for\nwhile\"\"\"\n    return s\n");
  EXPECT_EQ(m.cyclomatic_sum, 1);
  EXPECT_EQ(m.count_line_code, 5);
}

TEST(MeasureSource, TabsAndContinuations) {
  const auto m = measure_source("def f(a,\n      b):\n\tif a:\n\t\treturn (a +\n\t\t        b)\n\treturn b\n");
  EXPECT_EQ(m.count_line_code, 6);
  EXPECT_EQ(m.count_decl_function, 1);
  EXPECT_EQ(m.cyclomatic_sum, 2);
  EXPECT_EQ(m.max_nesting, 2);
}

TEST(MeasureSource, TotalOnArbitraryBytes) {
  Rng rng(41);
  const std::string alphabet = "abdefi():#'\"\\ \t\n\n\n\xff\x00if"s;
  for (int trial = 0; trial < 300; ++trial) {
    std::string text;
    const auto n = rng.below(200);
    for (std::uint64_t i = 0; i < n; ++i) text += alphabet[rng.below(alphabet.size())];
    const auto a = measure_source(text);
    EXPECT_EQ(a, measure_source(text));
    expect_line_invariants(a);
  }
}

TEST(MeasureSource, LineMetricsAddUnderConcatenation) {
  const std::vector<std::string> pool = {
      "def f(x):\n    return x\n", "\n", "# note\n", "x = 1  # trailing\n", "class K:\n    pass\n",
      "'''doc'''\n", "if a:\n    b = 2\n", "s = \"# not a comment\"\n", "\n\n",
  };
  Rng rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    std::string a;
    std::string b;
    for (auto* part : {&a, &b}) {
      const auto n = rng.below(6);
      for (std::uint64_t i = 0; i < n; ++i) *part += pool[rng.below(pool.size())];
    }
    const auto ma = measure_source(a);
    const auto mb = measure_source(b);
    const auto mab = measure_source(a + b);
    EXPECT_EQ(mab.count_line, ma.count_line + mb.count_line);
    EXPECT_EQ(mab.count_line_blank, ma.count_line_blank + mb.count_line_blank);
    EXPECT_EQ(mab.count_line_code, ma.count_line_code + mb.count_line_code);
    EXPECT_EQ(mab.count_line_comment, ma.count_line_comment + mb.count_line_comment);
  }
}

TEST(MeasureLines, CFamilyAndHash) {
  const auto c = measure_file("x.c", "int a; // x\n/* block\n   more */\n\nint b = '/'; \"/* no\";\n");
  EXPECT_EQ(c.count_line, 5);
  EXPECT_EQ(c.count_line_code, 2);
  EXPECT_EQ(c.count_line_comment, 3);
  EXPECT_EQ(c.count_line_blank, 1);
  EXPECT_EQ(c.count_decl_function, 0);
  const auto sh = measure_file("run.sh", "#!/bin/sh\necho '#'\n");
  EXPECT_EQ(sh.count_line_code, 1);
  EXPECT_EQ(sh.count_line_comment, 1);
}

TEST(MetricDelta, KnownDeltas) {
  CodeMetricVector ten;
  ten.count_line_code = 10;
  CodeMetricVector twelve;
  twelve.count_line_code = 12;
  EXPECT_EQ(metric_delta({{"a.py", ten}}, {{"a.py", twelve}}).count_line_code, 2);
  EXPECT_EQ(metric_delta({{"a.py", ten}}, {{"a.py", ten}}), CodeMetricVector{});
  CodeMetricVector seven;
  seven.count_line_code = 7;
  EXPECT_EQ(metric_delta({{"gone.py", seven}}, {}).count_line_code, -7);
}

TEST(MetricDelta, SelfDeltaIsZero) {
  Rng rng(47);
  for (int trial = 0; trial < 50; ++trial) {
    PathMetrics side;
    for (std::uint64_t i = 0, n = rng.below(5); i < n; ++i) {
      CodeMetricVector v;
      for (const auto& f : kCodeMetricFields) v.*(f.member) = rng.uniform(0, 100);
      side.emplace_back("f" + std::to_string(i), v);
    }
    const auto d = metric_delta(side, side);
    for (const auto& f : kCodeMetricFields) EXPECT_EQ(d.*(f.member), 0.0) << f.name;
  }
}

TEST(CommitCodeDelta, ReadsBeforeAndAfterFromGit) {
  refscan::testing::TempDir tmp("code");
  refscan::testing::GitRepo repo(tmp.path() / "r");
  const refscan::testing::Author who{"A", "a@x"};
  const std::string v1 = "def f(x):\n    return x\n";
  const std::string v2 = "def f(x):\n    if x:\n        return 1\n    return x\n\ndef g():\n    pass\n";
  const std::string other = "print('hi')\n";
  repo.write("m.py", v1);
  repo.write("gone.py", other);
  repo.write("notes.md", "# title\n");
  repo.commit("one", who, 1000);
  repo.write("m.py", v2);
  repo.remove("gone.py");
  repo.write("notes.md", "# title\nmore\n");
  repo.commit("two", who, 2000);

  const auto commits = mine_commits(RepoEntry{"p", repo.dir(), "main"});
  ASSERT_EQ(commits.size(), 2u);
  BlobReader reader(repo.dir());
  const auto root = commit_code_delta(reader, commits[0]);
  auto expected_root = measure_source(v1);
  expected_root += measure_source(other);
  EXPECT_EQ(root, expected_root);
  const auto delta = commit_code_delta(reader, commits[1]);
  const auto expected = metric_delta({{"m.py", measure_source(v1)}, {"gone.py", measure_source(other)}},
                                     {{"m.py", measure_source(v2)}});
  EXPECT_EQ(delta, expected);
  EXPECT_EQ(delta.count_decl_function, 1);
  EXPECT_EQ(delta.count_line_code, 3);
}
