#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "refscan/corpus.hpp"
#include "refscan/error.hpp"
#include "refscan/io.hpp"
#include "refscan/porter_stemmer.hpp"
#include "refscan/textfeat.hpp"

namespace refscan {

/// Ordered refactoring keywords. Each entry is matched through its Porter
/// stem, so entries may be given as words ("simplify") or stems ("restruct").
class KeywordSet {
 public:
  explicit KeywordSet(std::vector<std::string> keywords) : keywords_(std::move(keywords)) {
    if (keywords_.empty()) throw Error(ErrorCode::kEmptyInput, "keyword set is empty");
    for (auto& k : keywords_) {
      k = detail::ascii_lower(detail::trim(k));
      if (k.empty()) throw Error(ErrorCode::kParseError, "blank keyword");
      stems_.push_back(porter_stem(k));
    }
  }

  static KeywordSet defaults() {
    return KeywordSet({"move", "refactor", "remove", "rename", "split", "clean", "improve",
                       "unused", "cleanup", "simplify", "restruct", "inline", "parameterize",
                       "consolidate", "encapsulate", "update"});
  }

  /// One keyword per line; blank lines and '#' comments skipped.
  static KeywordSet from_file(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    std::vector<std::string> keywords;
    std::size_t pos = 0;
    while (pos < text.size()) {
      auto nl = text.find('\n', pos);
      if (nl == std::string::npos) nl = text.size();
      const auto line = detail::trim(std::string_view(text).substr(pos, nl - pos));
      if (!line.empty() && line.front() != '#') keywords.emplace_back(line);
      pos = nl + 1;
    }
    if (keywords.empty()) throw Error(ErrorCode::kParseError, path.string() + ": no keywords");
    return KeywordSet(std::move(keywords));
  }

  const std::vector<std::string>& keywords() const { return keywords_; }
  const std::vector<std::string>& stems() const { return stems_; }
  std::size_t size() const { return keywords_.size(); }

 private:
  std::vector<std::string> keywords_;
  std::vector<std::string> stems_;
};

struct KeywordMatch {
  bool matched = false;
  std::vector<std::string> keywords;
};

/// A keyword matches when its stem is a prefix of any stemmed message token.
inline KeywordMatch keyword_label(const std::vector<std::string>& message_tokens,
                                  const KeywordSet& keywords) {
  KeywordMatch result;
  for (std::size_t i = 0; i < keywords.size(); ++i) {
    const auto& stem = keywords.stems()[i];
    for (const auto& token : message_tokens) {
      if (token.starts_with(stem)) {
        result.keywords.push_back(keywords.keywords()[i]);
        break;
      }
    }
  }
  result.matched = !result.keywords.empty();
  return result;
}

inline KeywordMatch keyword_label(std::string_view message, const KeywordSet& keywords) {
  return keyword_label(normalize_message(message), keywords);
}

inline bool combine_labels(bool keyword, bool rule, bool has_executable) {
  return (keyword || rule) && has_executable;
}

using RuleLabels = std::unordered_map<std::string, bool>;

/// Parses the detector output: a JSON object mapping sha to an array of
/// {type, detail?} operations. A sha is a refactoring iff its array is
/// non-empty.
inline RuleLabels parse_rule_labels(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::kParseError, "rule labels must be a JSON object");
  RuleLabels labels;
  for (const auto& [sha, ops] : doc.items()) {
    if (!ops.is_array()) throw Error(ErrorCode::kParseError, "operations for " + sha + " not an array");
    for (const auto& op : ops) {
      if (!op.is_object() || !op.contains("type") || !op["type"].is_string()) {
        throw Error(ErrorCode::kParseError, "operation for " + sha + " lacks a string type");
      }
    }
    labels[sha] = !ops.empty();
  }
  return labels;
}

inline RuleLabels ingest_rule_labels(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) throw Error(ErrorCode::kMissingFile, path.string());
  try {
    return parse_rule_labels(read_text_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParseError) {
      throw Error(ErrorCode::kParseError, path.string() + ": " + e.detail());
    }
    throw;
  }
}

struct LabelRecord {
  std::string sha;
  std::string project_id;
  bool keyword_label = false;
  std::vector<std::string> matched;
  bool rule_label = false;
  bool has_executable = false;
  bool combined = false;
};

struct LabelingResult {
  std::vector<LabelRecord> records;
  std::size_t unknown_rule_shas = 0;  // rule-map entries not present in the corpus
};

inline LabelingResult label_commits(const std::vector<CommitRecord>& commits,
                                    const RuleLabels& rules, const KeywordSet& keywords) {
  LabelingResult result;
  result.records.reserve(commits.size());
  std::unordered_set<std::string_view> known;
  for (const auto& c : commits) {
    known.insert(c.sha);
    LabelRecord rec;
    rec.sha = c.sha;
    rec.project_id = c.project_id;
    auto kw = keyword_label(c.message, keywords);
    rec.keyword_label = kw.matched;
    rec.matched = std::move(kw.keywords);
    const auto it = rules.find(c.sha);
    rec.rule_label = it != rules.end() && it->second;
    rec.has_executable = c.has_executable();
    rec.combined = combine_labels(rec.keyword_label, rec.rule_label, rec.has_executable);
    result.records.push_back(std::move(rec));
  }
  for (const auto& [sha, _] : rules) {
    if (!known.contains(sha)) ++result.unknown_rule_shas;
  }
  return result;
}

inline Json to_json(const LabelRecord& r) {
  return Json{{"sha", r.sha},       {"project", r.project_id},  {"keyword", r.keyword_label},
              {"matched", r.matched}, {"rule", r.rule_label}, {"exec", r.has_executable},
              {"label", r.combined}};
}

inline LabelRecord label_from_json(const Json& j) {
  LabelRecord r;
  r.sha = j.at("sha").get<std::string>();
  r.project_id = j.at("project").get<std::string>();
  r.keyword_label = j.at("keyword").get<bool>();
  r.matched = j.at("matched").get<std::vector<std::string>>();
  r.rule_label = j.at("rule").get<bool>();
  r.has_executable = j.at("exec").get<bool>();
  r.combined = j.at("label").get<bool>();
  return r;
}

inline std::unordered_map<std::string, LabelRecord> read_labels_jsonl(
    const std::filesystem::path& path) {
  std::unordered_map<std::string, LabelRecord> labels;
  for_each_jsonl(path, [&](const Json& row, std::size_t) {
    auto r = label_from_json(row);
    labels.emplace(r.sha, std::move(r));
  });
  return labels;
}

}  // namespace refscan
