#pragma once

#include <string>
#include <string_view>

namespace refscan {

/// Porter (1980) suffix-stripping stemmer for lowercase ASCII words. Follows
/// the reference C implementation, including its two documented departures
/// ("bli" -> "ble" and "logi" -> "log" in step 2).
class PorterStemmer {
 public:
  std::string operator()(std::string_view word) const {
    State s{std::string(word), 0, 0};
    if (s.b.size() <= 2) return s.b;
    s.k = static_cast<int>(s.b.size()) - 1;
    step1ab(s);
    if (s.k > 0) {
      step1c(s);
      step2(s);
      step3(s);
      step4(s);
      step5(s);
    }
    s.b.resize(static_cast<std::size_t>(s.k) + 1);
    return s.b;
  }

 private:
  struct State {
    std::string b;
    int k;  // end of the current word
    int j;  // end of the stem before a matched suffix
  };

  static bool cons(const State& s, int i) {
    switch (s.b[static_cast<std::size_t>(i)]) {
      case 'a': case 'e': case 'i': case 'o': case 'u': return false;
      case 'y': return i == 0 ? true : !cons(s, i - 1);
      default: return true;
    }
  }

  // Number of VC sequences in b[0..j].
  static int measure(const State& s) {
    int n = 0;
    int i = 0;
    for (;;) {
      if (i > s.j) return n;
      if (!cons(s, i)) break;
      ++i;
    }
    ++i;
    for (;;) {
      for (;;) {
        if (i > s.j) return n;
        if (cons(s, i)) break;
        ++i;
      }
      ++i;
      ++n;
      for (;;) {
        if (i > s.j) return n;
        if (!cons(s, i)) break;
        ++i;
      }
      ++i;
    }
  }

  static bool vowel_in_stem(const State& s) {
    for (int i = 0; i <= s.j; ++i) {
      if (!cons(s, i)) return true;
    }
    return false;
  }

  static bool double_consonant(const State& s, int j) {
    if (j < 1) return false;
    if (s.b[static_cast<std::size_t>(j)] != s.b[static_cast<std::size_t>(j - 1)]) return false;
    return cons(s, j);
  }

  // consonant-vowel-consonant ending at i, last consonant not w, x or y.
  static bool cvc(const State& s, int i) {
    if (i < 2 || !cons(s, i) || cons(s, i - 1) || !cons(s, i - 2)) return false;
    const char ch = s.b[static_cast<std::size_t>(i)];
    return ch != 'w' && ch != 'x' && ch != 'y';
  }

  static bool ends(State& s, std::string_view suffix) {
    const int len = static_cast<int>(suffix.size());
    if (len > s.k + 1) return false;
    if (std::string_view(s.b).substr(static_cast<std::size_t>(s.k - len + 1),
                                     static_cast<std::size_t>(len)) != suffix) {
      return false;
    }
    s.j = s.k - len;
    return true;
  }

  static void set_to(State& s, std::string_view replacement) {
    const auto start = static_cast<std::size_t>(s.j + 1);
    s.b.replace(start, s.b.size() - start, replacement);
    s.k = s.j + static_cast<int>(replacement.size());
    s.b.resize(static_cast<std::size_t>(s.k) + 1);
  }

  static void replace_if_measured(State& s, std::string_view replacement) {
    if (measure(s) > 0) set_to(s, replacement);
  }

  static void step1ab(State& s) {
    if (s.b[static_cast<std::size_t>(s.k)] == 's') {
      if (ends(s, "sses")) {
        s.k -= 2;
      } else if (ends(s, "ies")) {
        set_to(s, "i");
      } else if (s.b[static_cast<std::size_t>(s.k - 1)] != 's') {
        --s.k;
      }
    }
    if (ends(s, "eed")) {
      if (measure(s) > 0) --s.k;
    } else if ((ends(s, "ed") || ends(s, "ing")) && vowel_in_stem(s)) {
      s.k = s.j;
      if (ends(s, "at")) {
        set_to(s, "ate");
      } else if (ends(s, "bl")) {
        set_to(s, "ble");
      } else if (ends(s, "iz")) {
        set_to(s, "ize");
      } else if (double_consonant(s, s.k)) {
        --s.k;
        const char ch = s.b[static_cast<std::size_t>(s.k)];
        if (ch == 'l' || ch == 's' || ch == 'z') ++s.k;
      } else if (measure(s) == 1 && cvc(s, s.k)) {
        set_to(s, "e");
      }
    }
    s.b.resize(static_cast<std::size_t>(s.k) + 1);
  }

  static void step1c(State& s) {
    if (ends(s, "y") && vowel_in_stem(s)) s.b[static_cast<std::size_t>(s.k)] = 'i';
  }

  static bool try_rule(State& s, std::string_view suffix, std::string_view replacement) {
    if (!ends(s, suffix)) return false;
    replace_if_measured(s, replacement);
    return true;
  }

  static void step2(State& s) {
    if (s.k < 1) return;
    switch (s.b[static_cast<std::size_t>(s.k - 1)]) {
      case 'a':
        if (try_rule(s, "ational", "ate")) return;
        if (try_rule(s, "tional", "tion")) return;
        return;
      case 'c':
        if (try_rule(s, "enci", "ence")) return;
        if (try_rule(s, "anci", "ance")) return;
        return;
      case 'e':
        try_rule(s, "izer", "ize");
        return;
      case 'l':
        if (try_rule(s, "bli", "ble")) return;
        if (try_rule(s, "alli", "al")) return;
        if (try_rule(s, "entli", "ent")) return;
        if (try_rule(s, "eli", "e")) return;
        if (try_rule(s, "ousli", "ous")) return;
        return;
      case 'o':
        if (try_rule(s, "ization", "ize")) return;
        if (try_rule(s, "ation", "ate")) return;
        if (try_rule(s, "ator", "ate")) return;
        return;
      case 's':
        if (try_rule(s, "alism", "al")) return;
        if (try_rule(s, "iveness", "ive")) return;
        if (try_rule(s, "fulness", "ful")) return;
        if (try_rule(s, "ousness", "ous")) return;
        return;
      case 't':
        if (try_rule(s, "aliti", "al")) return;
        if (try_rule(s, "iviti", "ive")) return;
        if (try_rule(s, "biliti", "ble")) return;
        return;
      case 'g':
        try_rule(s, "logi", "log");
        return;
      default:
        return;
    }
  }

  static void step3(State& s) {
    switch (s.b[static_cast<std::size_t>(s.k)]) {
      case 'e':
        if (try_rule(s, "icate", "ic")) return;
        if (try_rule(s, "ative", "")) return;
        if (try_rule(s, "alize", "al")) return;
        return;
      case 'i':
        try_rule(s, "iciti", "ic");
        return;
      case 'l':
        if (try_rule(s, "ical", "ic")) return;
        if (try_rule(s, "ful", "")) return;
        return;
      case 's':
        try_rule(s, "ness", "");
        return;
      default:
        return;
    }
  }

  static void step4(State& s) {
    if (s.k < 1) return;
    switch (s.b[static_cast<std::size_t>(s.k - 1)]) {
      case 'a':
        if (ends(s, "al")) break;
        return;
      case 'c':
        if (ends(s, "ance")) break;
        if (ends(s, "ence")) break;
        return;
      case 'e':
        if (ends(s, "er")) break;
        return;
      case 'i':
        if (ends(s, "ic")) break;
        return;
      case 'l':
        if (ends(s, "able")) break;
        if (ends(s, "ible")) break;
        return;
      case 'n':
        if (ends(s, "ant")) break;
        if (ends(s, "ement")) break;
        if (ends(s, "ment")) break;
        if (ends(s, "ent")) break;
        return;
      case 'o':
        if (ends(s, "ion") && s.j >= 0 &&
            (s.b[static_cast<std::size_t>(s.j)] == 's' || s.b[static_cast<std::size_t>(s.j)] == 't')) {
          break;
        }
        if (ends(s, "ou")) break;
        return;
      case 's':
        if (ends(s, "ism")) break;
        return;
      case 't':
        if (ends(s, "ate")) break;
        if (ends(s, "iti")) break;
        return;
      case 'u':
        if (ends(s, "ous")) break;
        return;
      case 'v':
        if (ends(s, "ive")) break;
        return;
      case 'z':
        if (ends(s, "ize")) break;
        return;
      default:
        return;
    }
    if (measure(s) > 1) s.k = s.j;
  }

  static void step5(State& s) {
    s.j = s.k;
    if (s.b[static_cast<std::size_t>(s.k)] == 'e') {
      const int a = measure(s);
      if (a > 1 || (a == 1 && !cvc(s, s.k - 1))) --s.k;
    }
    if (s.b[static_cast<std::size_t>(s.k)] == 'l' && double_consonant(s, s.k) && measure(s) > 1) {
      --s.k;
    }
  }
};

inline std::string porter_stem(std::string_view word) { return PorterStemmer{}(word); }

}  // namespace refscan
