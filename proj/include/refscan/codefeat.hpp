#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "refscan/corpus.hpp"

namespace refscan {

/// Fourteen source metrics of one file. Line metrics are always computed;
/// structural metrics (declarations, cyclomatic, nesting, per-function
/// averages) are zero for text the analyzer cannot structure.
struct CodeMetricVector {
  double count_line = 0;
  double count_line_blank = 0;
  double count_line_code = 0;
  double count_line_comment = 0;
  double count_line_code_decl = 0;
  double count_decl_function = 0;
  double count_decl_class = 0;
  double count_decl_method = 0;
  double cyclomatic_sum = 0;
  double cyclomatic_max = 0;
  double cyclomatic_avg = 0;
  double max_nesting = 0;
  double ratio_comment_to_code = 0;
  double avg_count_line_code = 0;

  friend bool operator==(const CodeMetricVector&, const CodeMetricVector&) = default;
};

/// Per-commit change of the metric vector, summed over touched files.
using CodeFeatureDelta = CodeMetricVector;

struct CodeMetricField {
  std::string_view name;
  double CodeMetricVector::*member;
};

// Declared column order used by feature pruning.
inline constexpr std::array<CodeMetricField, 14> kCodeMetricFields = {{
    {"avg_count_line_code", &CodeMetricVector::avg_count_line_code},
    {"cyclomatic_avg", &CodeMetricVector::cyclomatic_avg},
    {"count_decl_class", &CodeMetricVector::count_decl_class},
    {"count_decl_function", &CodeMetricVector::count_decl_function},
    {"count_decl_method", &CodeMetricVector::count_decl_method},
    {"count_line", &CodeMetricVector::count_line},
    {"count_line_blank", &CodeMetricVector::count_line_blank},
    {"count_line_code", &CodeMetricVector::count_line_code},
    {"count_line_code_decl", &CodeMetricVector::count_line_code_decl},
    {"count_line_comment", &CodeMetricVector::count_line_comment},
    {"cyclomatic_max", &CodeMetricVector::cyclomatic_max},
    {"max_nesting", &CodeMetricVector::max_nesting},
    {"ratio_comment_to_code", &CodeMetricVector::ratio_comment_to_code},
    {"cyclomatic_sum", &CodeMetricVector::cyclomatic_sum},
}};

namespace detail {

enum class LineKind { kBlank, kComment, kCode };

struct PhysicalLine {
  LineKind kind = LineKind::kBlank;
  bool trailing_comment = false;
  int logical = -1;
};

struct LogicalLine {
  std::size_t first = 0;
  std::size_t last = 0;
  int indent = 0;
  std::string first_word;
  std::string second_word;
  bool starts_with_decorator = false;
  int branch_keywords = 0;
};

inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  return lines;
}

inline bool is_ident_start(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' ||
         static_cast<unsigned char>(c) >= 0x80;
}
inline bool is_ident_char(char c) { return is_ident_start(c) || (c >= '0' && c <= '9'); }

inline bool is_string_prefix(std::string_view word) {
  if (word.size() > 2) return false;
  for (char c : word) {
    const char l = static_cast<char>(c | 0x20);
    if (l != 'r' && l != 'u' && l != 'b' && l != 'f') return false;
  }
  return true;
}

inline bool is_branch_keyword(std::string_view w) {
  return w == "if" || w == "elif" || w == "for" || w == "while" || w == "except" || w == "and" ||
         w == "or";
}

inline bool is_block_keyword(std::string_view w) {
  return w == "if" || w == "elif" || w == "else" || w == "for" || w == "while" || w == "try" ||
         w == "except" || w == "finally" || w == "with" || w == "def" || w == "class" ||
         w == "async" || w == "match" || w == "case";
}

// Tokenizes Python into physical-line kinds and logical lines.
class PythonScanner {
 public:
  explicit PythonScanner(std::string_view text) : lines_(split_lines(text)) {
    phys_.resize(lines_.size());
    for (std::size_t i = 0; i < lines_.size(); ++i) scan_line(i);
    if (in_string_ || depth_ != 0) malformed_ = true;
    if (current_ >= 0) logical_[static_cast<std::size_t>(current_)].last = lines_.size() - 1;
  }

  const std::vector<PhysicalLine>& physical() const { return phys_; }
  const std::vector<LogicalLine>& logical() const { return logical_; }
  bool malformed() const { return malformed_; }

 private:
  void scan_line(std::size_t idx) {
    const std::string_view line = lines_[idx];
    PhysicalLine& pl = phys_[idx];
    bool has_code = false;
    bool has_comment = false;
    bool docstring_part = false;
    std::size_t pos = 0;

    const bool continuing = in_string_ || depth_ > 0 || backslash_;
    backslash_ = false;

    if (in_string_) {
      (string_is_doc_ ? docstring_part : has_code) = true;
      pos = scan_string_body(line, 0);
    } else if (!continuing) {
      int width = 0;
      while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\f')) {
        width += line[pos] == '\t' ? 4 : (line[pos] == ' ' ? 1 : 0);
        ++pos;
      }
      if (pos >= line.size()) {
        pl.kind = LineKind::kBlank;
        return;
      }
      if (line[pos] == '#') {
        pl.kind = LineKind::kComment;
        return;
      }
      if (current_ >= 0) logical_[static_cast<std::size_t>(current_)].last = idx - 1;
      logical_.push_back(LogicalLine{idx, idx, width, {}, {}, line[pos] == '@', 0});
      current_ = static_cast<int>(logical_.size()) - 1;
      tokens_in_logical_ = 0;
    }

    while (pos < line.size()) {
      const char c = line[pos];
      if (c == ' ' || c == '\t' || c == '\f') {
        ++pos;
        continue;
      }
      if (c == '#') {
        has_comment = true;
        break;
      }
      if (c == '\\' && pos + 1 == line.size()) {
        backslash_ = true;
        ++pos;
        continue;
      }
      if (c == '"' || c == '\'') {
        open_string(line, pos, has_code, docstring_part);
        pos = scan_string_body(line, pos + (string_triple_ ? 3 : 1));
        continue;
      }
      if (is_ident_start(c)) {
        std::size_t end = pos;
        while (end < line.size() && is_ident_char(line[end])) ++end;
        const std::string_view word = line.substr(pos, end - pos);
        if (end < line.size() && (line[end] == '"' || line[end] == '\'') &&
            is_string_prefix(word)) {
          open_string(line, end, has_code, docstring_part);
          pos = scan_string_body(line, end + (string_triple_ ? 3 : 1));
          continue;
        }
        has_code = true;
        note_word(word);
        pos = end;
        continue;
      }
      has_code = true;
      ++tokens_in_logical_;
      if (c == '(' || c == '[' || c == '{') ++depth_;
      if (c == ')' || c == ']' || c == '}') {
        if (--depth_ < 0) {
          malformed_ = true;
          depth_ = 0;
        }
      }
      ++pos;
    }

    if (in_string_ && !string_triple_ && !string_backslash_eol_) {
      // Single-quoted string without a closing quote or line continuation.
      malformed_ = true;
      in_string_ = false;
    }
    string_backslash_eol_ = false;

    if (current_ >= 0 && (has_code || docstring_part)) pl.logical = current_;
    if (has_code) {
      pl.kind = LineKind::kCode;
      pl.trailing_comment = has_comment;
    } else if (docstring_part || has_comment) {
      pl.kind = LineKind::kComment;
    } else {
      pl.kind = LineKind::kBlank;
    }
  }

  void open_string(std::string_view line, std::size_t quote_pos, bool& has_code,
                   bool& docstring_part) {
    const char q = line[quote_pos];
    string_quote_ = q;
    string_triple_ = quote_pos + 2 < line.size() && line[quote_pos + 1] == q &&
                     line[quote_pos + 2] == q;
    string_is_doc_ = string_triple_ && tokens_in_logical_ == 0;
    ++tokens_in_logical_;
    in_string_ = true;
    (string_is_doc_ ? docstring_part : has_code) = true;
  }

  // Consumes string content from `pos`; returns the position after the
  // closing quote or line.size() if the string continues.
  std::size_t scan_string_body(std::string_view line, std::size_t pos) {
    while (pos < line.size()) {
      const char c = line[pos];
      if (c == '\\') {
        if (pos + 1 == line.size()) {
          string_backslash_eol_ = true;
          return line.size();
        }
        pos += 2;
        continue;
      }
      if (c == string_quote_) {
        if (!string_triple_) {
          in_string_ = false;
          return pos + 1;
        }
        if (pos + 2 < line.size() && line[pos + 1] == c && line[pos + 2] == c) {
          in_string_ = false;
          return pos + 3;
        }
      }
      ++pos;
    }
    return line.size();
  }

  void note_word(std::string_view word) {
    if (current_ < 0) return;
    auto& ll = logical_[static_cast<std::size_t>(current_)];
    if (tokens_in_logical_ == 0) ll.first_word = word;
    if (tokens_in_logical_ == 1) ll.second_word = word;
    ++tokens_in_logical_;
    if (is_branch_keyword(word)) ++ll.branch_keywords;
  }

  std::vector<std::string_view> lines_;
  std::vector<PhysicalLine> phys_;
  std::vector<LogicalLine> logical_;
  int current_ = -1;
  int depth_ = 0;
  int tokens_in_logical_ = 0;
  bool backslash_ = false;
  bool in_string_ = false;
  bool string_triple_ = false;
  bool string_is_doc_ = false;
  bool string_backslash_eol_ = false;
  char string_quote_ = '"';
  bool malformed_ = false;
};

}  // namespace detail

/// Measures Python source. Lines are blank, comment-only (including
/// statement-position triple-quoted strings) or code; a code line with a
/// trailing comment also counts as a comment line. Cyclomatic complexity per
/// function is 1 + the number of if/elif/for/while/except/and/or tokens in
/// its own body.
inline CodeMetricVector measure_source(std::string_view text) {
  CodeMetricVector m;
  const detail::PythonScanner scan(text);
  const auto& phys = scan.physical();
  double comment_only = 0;
  double trailing = 0;
  for (const auto& pl : phys) {
    switch (pl.kind) {
      case detail::LineKind::kBlank: m.count_line_blank += 1; break;
      case detail::LineKind::kComment: comment_only += 1; break;
      case detail::LineKind::kCode:
        m.count_line_code += 1;
        if (pl.trailing_comment) trailing += 1;
        break;
    }
  }
  m.count_line = m.count_line_blank + m.count_line_code + comment_only;
  m.count_line_comment = comment_only + trailing;
  m.ratio_comment_to_code = m.count_line_code > 0 ? m.count_line_comment / m.count_line_code : 0.0;
  if (scan.malformed()) return m;

  // Code lines per logical line.
  const auto& logical = scan.logical();
  std::vector<double> code_lines(logical.size(), 0.0);
  for (const auto& pl : phys) {
    if (pl.kind == detail::LineKind::kCode && pl.logical >= 0) {
      code_lines[static_cast<std::size_t>(pl.logical)] += 1;
    }
  }

  struct Scope {
    bool is_function;
    int indent;
    std::size_t function_index;
  };
  struct FunctionStats {
    double code_lines = 0;
    double complexity = 1;
  };
  std::vector<Scope> scopes;
  std::vector<FunctionStats> functions;
  std::vector<int> indents = {0};
  int max_nesting = 0;
  double decl_lines = 0;
  double classes = 0;
  double methods = 0;
  bool inconsistent = false;

  for (std::size_t li = 0; li < logical.size(); ++li) {
    const auto& ll = logical[li];
    const int w = ll.indent;
    if (w > indents.back()) {
      indents.push_back(w);
    } else {
      while (w < indents.back()) indents.pop_back();
      if (w != indents.back()) {
        inconsistent = true;
        break;
      }
    }
    const int level = static_cast<int>(indents.size()) - 1;
    while (!scopes.empty() && scopes.back().indent >= w) scopes.pop_back();

    const bool is_async_def = ll.first_word == "async" && ll.second_word == "def";
    const bool is_def = ll.first_word == "def" || is_async_def;
    const bool is_class = ll.first_word == "class";
    if (detail::is_block_keyword(ll.first_word)) max_nesting = std::max(max_nesting, level + 1);

    if (is_def) {
      if (!scopes.empty() && !scopes.back().is_function) methods += 1;
      functions.push_back({});
      scopes.push_back({true, w, functions.size() - 1});
    } else if (is_class) {
      classes += 1;
      scopes.push_back({false, w, 0});
    }

    for (const auto& s : scopes) {
      if (s.is_function) functions[s.function_index].code_lines += code_lines[li];
    }
    for (auto it = scopes.rbegin(); it != scopes.rend(); ++it) {
      if (it->is_function) {
        functions[it->function_index].complexity += ll.branch_keywords;
        break;
      }
    }
    const auto& fw = ll.first_word;
    if (is_def || is_class || ll.starts_with_decorator || fw == "import" || fw == "from" ||
        fw == "global" || fw == "nonlocal") {
      decl_lines += code_lines[li];
    }
  }
  if (inconsistent) return m;

  m.count_line_code_decl = decl_lines;
  m.count_decl_function = static_cast<double>(functions.size());
  m.count_decl_class = classes;
  m.count_decl_method = methods;
  m.max_nesting = max_nesting;
  double line_sum = 0;
  for (const auto& f : functions) {
    m.cyclomatic_sum += f.complexity;
    m.cyclomatic_max = std::max(m.cyclomatic_max, f.complexity);
    line_sum += f.code_lines;
  }
  if (!functions.empty()) {
    const double n = static_cast<double>(functions.size());
    m.cyclomatic_avg = m.cyclomatic_sum / n;
    m.avg_count_line_code = line_sum / n;
  }
  return m;
}

enum class CommentSyntax { kPython, kHash, kCFamily };

inline CommentSyntax comment_syntax_for(std::string_view path) {
  const auto ext = file_extension(path);
  if (ext == "py" || ext == "pyx" || ext == "pyi") return CommentSyntax::kPython;
  if (ext == "sh" || ext == "bash" || ext == "rb" || ext == "pl") return CommentSyntax::kHash;
  return CommentSyntax::kCFamily;
}

/// Line metrics only, for non-Python executable files.
inline CodeMetricVector measure_lines(std::string_view text, CommentSyntax syntax) {
  CodeMetricVector m;
  bool in_block = false;
  double comment_only = 0;
  double trailing = 0;
  for (const auto line : detail::split_lines(text)) {
    bool has_code = false;
    bool has_comment = in_block;
    std::size_t i = 0;
    char quote = 0;
    while (i < line.size()) {
      const char c = line[i];
      if (in_block) {
        if (c == '*' && i + 1 < line.size() && line[i + 1] == '/') {
          in_block = false;
          i += 2;
        } else {
          ++i;
        }
        continue;
      }
      if (quote) {
        if (c == '\\') {
          i += 2;
          continue;
        }
        if (c == quote) quote = 0;
        ++i;
        continue;
      }
      if (c == ' ' || c == '\t' || c == '\f') {
        ++i;
        continue;
      }
      if (syntax == CommentSyntax::kHash && c == '#') {
        has_comment = true;
        break;
      }
      if (syntax == CommentSyntax::kCFamily && c == '/' && i + 1 < line.size()) {
        if (line[i + 1] == '/') {
          has_comment = true;
          break;
        }
        if (line[i + 1] == '*') {
          has_comment = true;
          in_block = true;
          i += 2;
          continue;
        }
      }
      has_code = true;
      if (c == '"' || c == '\'') quote = c;
      ++i;
    }
    if (has_code) {
      m.count_line_code += 1;
      if (has_comment) trailing += 1;
    } else if (has_comment) {
      comment_only += 1;
    } else {
      m.count_line_blank += 1;
    }
  }
  m.count_line = m.count_line_blank + m.count_line_code + comment_only;
  m.count_line_comment = comment_only + trailing;
  m.ratio_comment_to_code = m.count_line_code > 0 ? m.count_line_comment / m.count_line_code : 0.0;
  return m;
}

inline CodeMetricVector measure_file(std::string_view path, std::string_view text) {
  const auto syntax = comment_syntax_for(path);
  if (syntax == CommentSyntax::kPython) return measure_source(text);
  return measure_lines(text, syntax);
}

inline CodeMetricVector& operator+=(CodeMetricVector& a, const CodeMetricVector& b) {
  for (const auto& f : kCodeMetricFields) a.*(f.member) += b.*(f.member);
  return a;
}

inline CodeMetricVector operator-(CodeMetricVector a, const CodeMetricVector& b) {
  for (const auto& f : kCodeMetricFields) a.*(f.member) -= b.*(f.member);
  return a;
}

using PathMetrics = std::vector<std::pair<std::string, CodeMetricVector>>;

/// Componentwise sum over `after` minus sum over `before`. A file missing on
/// one side contributes the zero vector there.
inline CodeFeatureDelta metric_delta(const PathMetrics& before, const PathMetrics& after) {
  CodeMetricVector sum_before;
  CodeMetricVector sum_after;
  for (const auto& [_, v] : before) sum_before += v;
  for (const auto& [_, v] : after) sum_after += v;
  return sum_after - sum_before;
}

inline bool looks_binary(std::string_view content) {
  return content.substr(0, 8000).find('\0') != std::string_view::npos;
}

/// Before/after metric sets for the executable, non-binary files touched by
/// a commit, read through `reader`.
inline CodeFeatureDelta commit_code_delta(BlobReader& reader, const CommitRecord& commit,
                                          const MineOptions& opts = {}) {
  PathMetrics before;
  PathMetrics after;
  for (const auto& tf : reader.touched(commit.sha, commit.parent_sha)) {
    auto side = [&](const std::string& path, const std::string& blob, PathMetrics& out) {
      if (path.empty() || !classify_file(path, opts.exec_extensions)) return;
      const auto content = reader.read(blob);
      if (!content || looks_binary(*content)) return;
      out.emplace_back(path, measure_file(path, *content));
    };
    side(tf.old_path, tf.old_blob, before);
    side(tf.new_path, tf.new_blob, after);
  }
  return metric_delta(before, after);
}

}  // namespace refscan
