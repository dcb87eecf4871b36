#pragma once

#include <cctype>
#include <cstddef>
#include <functional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "refscan/porter_stemmer.hpp"
#include "refscan/stopwords.hpp"

namespace refscan {

struct TextFeatures {
  std::vector<std::string> tokens;
  std::set<std::string> terms;
  std::size_t word_count = 0;
  std::size_t sentence_count = 0;
  double readability = 0.0;
};

struct TextStats {
  std::size_t words = 0;
  std::size_t sentences = 0;
  friend bool operator==(const TextStats&, const TextStats&) = default;
};

/// Per-token spelling correction applied before stop-word removal. The
/// default leaves tokens unchanged.
using SpellingHook = std::function<std::string(std::string_view)>;

namespace detail {

inline bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
inline bool is_ascii_alnum(char c) { return is_ascii_alpha(c) || (c >= '0' && c <= '9'); }

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

inline bool starts_url(std::string_view s, std::size_t i) {
  const auto rest = s.substr(i);
  return rest.starts_with("http://") || rest.starts_with("https://") ||
         rest.starts_with("ftp://") || rest.starts_with("www.");
}

// Replaces URLs and HTML/XML tags with spaces. Input is already lowercase.
inline std::string strip_urls_and_tags(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const bool at_word_start = i == 0 || std::isspace(static_cast<unsigned char>(s[i - 1])) ||
                               s[i - 1] == '(' || s[i - 1] == '<' || s[i - 1] == '[';
    if (at_word_start && starts_url(s, i)) {
      while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i])) && s[i] != ')' &&
             s[i] != ']' && s[i] != '>') {
        ++i;
      }
      out += ' ';
      continue;
    }
    if (s[i] == '<' && i + 1 < s.size() &&
        (is_ascii_alpha(s[i + 1]) || s[i + 1] == '/' || s[i + 1] == '!')) {
      const auto close = s.find('>', i + 1);
      const auto nl = s.find('\n', i + 1);
      if (close != std::string_view::npos && (nl == std::string_view::npos || close < nl)) {
        out += ' ';
        i = close + 1;
        continue;
      }
    }
    out += s[i++];
  }
  return out;
}

}  // namespace detail

/// lowercase -> strip URLs, HTML tags, punctuation, emoji and digits ->
/// drop stop words -> Porter-stem each remaining token.
inline std::vector<std::string> normalize_message(std::string_view raw,
                                                  const SpellingHook& spelling = {}) {
  const std::string cleaned = detail::strip_urls_and_tags(detail::ascii_lower(raw));
  std::vector<std::string> tokens;
  const PorterStemmer stem;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    std::string w = spelling ? spelling(word) : word;
    word.clear();
    if (w.empty() || is_stop_word(w)) return;
    tokens.push_back(stem(w));
  };
  for (char c : cleaned) {
    if (c >= 'a' && c <= 'z') {
      word += c;
    } else {
      flush();
    }
  }
  flush();
  return tokens;
}

/// All space-joined contiguous token runs of length 1..n_max.
inline std::set<std::string> extract_ngrams(const std::vector<std::string>& tokens,
                                            std::size_t n_max = 6) {
  std::set<std::string> terms;
  for (std::size_t start = 0; start < tokens.size(); ++start) {
    std::string term;
    for (std::size_t n = 1; n <= n_max && start + n <= tokens.size(); ++n) {
      if (n > 1) term += ' ';
      term += tokens[start + n - 1];
      terms.insert(term);
    }
  }
  return terms;
}

namespace detail {

inline std::vector<std::string> raw_words(std::string_view raw) {
  std::vector<std::string> words;
  std::string current;
  for (char c : raw) {
    if (is_ascii_alnum(c)) {
      current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

}  // namespace detail

/// Words are maximal alphanumeric runs; sentences are segments between
/// . ! ? or newline that contain at least one alphanumeric character.
inline TextStats text_stats(std::string_view raw) {
  TextStats stats;
  stats.words = detail::raw_words(raw).size();
  bool segment_has_word = false;
  for (char c : raw) {
    if (c == '.' || c == '!' || c == '?' || c == '\n') {
      if (segment_has_word) ++stats.sentences;
      segment_has_word = false;
    } else if (detail::is_ascii_alnum(c)) {
      segment_has_word = true;
    }
  }
  if (segment_has_word) ++stats.sentences;
  return stats;
}

/// Vowel-group syllable estimate: groups of [aeiouy], minus one for a
/// trailing silent 'e' unless that would reach zero; at least 1.
inline std::size_t count_syllables(std::string_view word) {
  auto is_vowel = [](char c) {
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
  };
  std::size_t groups = 0;
  bool in_group = false;
  for (char c : word) {
    const bool v = is_vowel(c);
    if (v && !in_group) ++groups;
    in_group = v;
  }
  if (!word.empty() && word.back() == 'e' && groups > 1) --groups;
  return groups == 0 ? 1 : groups;
}

/// Flesch reading ease from raw counts.
inline double flesch_reading_ease(double words, double sentences, double syllables) {
  if (words <= 0.0 || sentences <= 0.0) return 0.0;
  return 206.835 - 1.015 * (words / sentences) - 84.6 * (syllables / words);
}

inline double readability(std::string_view raw) {
  const auto words = detail::raw_words(raw);
  if (words.empty()) return 0.0;
  std::size_t syllables = 0;
  for (const auto& w : words) syllables += count_syllables(w);
  return flesch_reading_ease(static_cast<double>(words.size()),
                             static_cast<double>(text_stats(raw).sentences),
                             static_cast<double>(syllables));
}

inline TextFeatures text_features(std::string_view raw, std::size_t n_max = 6,
                                  const SpellingHook& spelling = {}) {
  TextFeatures f;
  f.tokens = normalize_message(raw, spelling);
  f.terms = extract_ngrams(f.tokens, n_max);
  const auto stats = text_stats(raw);
  f.word_count = stats.words;
  f.sentence_count = stats.sentences;
  f.readability = readability(raw);
  return f;
}

}  // namespace refscan
