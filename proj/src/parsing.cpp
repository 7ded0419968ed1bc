#include "tgeval/parsing.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tgeval {

namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alnum(char c) {
  return is_digit(c) || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), is_digit);
}

// Longest numeric prefix, trailing unit text tolerated ("20s", "15 seconds",
// "40%"). Rejected when the leftover suffix still contains digits.
std::optional<double> coerce_number(const std::string& token) {
  const std::string t = trim(token);
  std::size_t i = 0;
  if (i < t.size() && (t[i] == '+' || t[i] == '-')) ++i;
  std::size_t digits = 0;
  while (i < t.size() && is_digit(t[i])) ++i, ++digits;
  if (i < t.size() && t[i] == '.') {
    ++i;
    while (i < t.size() && is_digit(t[i])) ++i, ++digits;
  }
  if (digits == 0) return std::nullopt;
  for (std::size_t k = i; k < t.size(); ++k) {
    if (is_digit(t[k])) return std::nullopt;
  }
  return std::strtod(t.substr(0, i).c_str(), nullptr);
}

// Splits bracket content on commas and reassembles thousands groups
// ("1,234, 5,678" -> 1234 and 5678). Yields a pair only when exactly two
// numeric tokens remain.
std::optional<std::pair<double, double>> extract_pair(
    const std::string& content) {
  std::vector<std::string> tokens;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= content.size(); ++i) {
    if (i == content.size() || content[i] == ',') {
      tokens.push_back(trim(content.substr(start, i - start)));
      start = i + 1;
    }
  }
  if (tokens.size() > 2) {
    std::vector<std::string> merged;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      std::string tok = tokens[i];
      while (i + 1 < tokens.size() && all_digits(tok) &&
             tokens[i + 1].size() == 3 && all_digits(tokens[i + 1])) {
        tok += tokens[i + 1];
        ++i;
      }
      merged.push_back(tok);
    }
    tokens = std::move(merged);
  }
  if (tokens.size() != 2) return std::nullopt;
  const auto a = coerce_number(tokens[0]);
  const auto b = coerce_number(tokens[1]);
  if (!a || !b) return std::nullopt;
  return std::make_pair(*a, *b);
}

// Strict nested-list grammar: "[[a, b], [c, d], ...]" with plain decimal
// numbers and arbitrary whitespace. Success here (plus zero repairs) is what
// qualifies a parse as Clean.
class StrictParser {
 public:
  explicit StrictParser(const std::string& text) : text_(text) {}

  std::optional<std::vector<std::pair<double, double>>> run() {
    skip_ws();
    if (!eat('[')) return std::nullopt;
    std::vector<std::pair<double, double>> out;
    skip_ws();
    while (true) {
      auto pair = parse_inner();
      if (!pair) return std::nullopt;
      out.push_back(*pair);
      skip_ws();
      if (eat(',')) {
        skip_ws();
        continue;
      }
      break;
    }
    if (!eat(']')) return std::nullopt;
    skip_ws();
    if (pos_ != text_.size()) return std::nullopt;
    return out;
  }

 private:
  std::optional<std::pair<double, double>> parse_inner() {
    if (!eat('[')) return std::nullopt;
    skip_ws();
    auto a = parse_number();
    if (!a) return std::nullopt;
    skip_ws();
    if (!eat(',')) return std::nullopt;
    skip_ws();
    auto b = parse_number();
    if (!b) return std::nullopt;
    skip_ws();
    if (!eat(']')) return std::nullopt;
    return std::make_pair(*a, *b);
  }

  // Exactly the shapes the window renderer emits: unsigned, at least one
  // integer digit, optional fraction. Anything looser goes through the
  // tolerant path and reads as Repaired.
  std::optional<double> parse_number() {
    const std::size_t begin = pos_;
    std::size_t digits = 0;
    while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_, ++digits;
    if (digits == 0) {
      pos_ = begin;
      return std::nullopt;
    }
    if (pos_ < text_.size() && text_[pos_] == '.') {
      ++pos_;
      std::size_t frac = 0;
      while (pos_ < text_.size() && is_digit(text_[pos_])) ++pos_, ++frac;
      if (frac == 0) {
        pos_ = begin;
        return std::nullopt;
      }
    }
    return std::strtod(text_.substr(begin, pos_ - begin).c_str(), nullptr);
  }

  void skip_ws() {
    while (pos_ < text_.size() &&
           std::isspace(static_cast<unsigned char>(text_[pos_]))) {
      ++pos_;
    }
  }

  bool eat(char c) {
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  const std::string& text_;
  std::size_t pos_ = 0;
};

std::string strip_code_fences(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t eol = text.find('\n', i);
    if (eol == std::string::npos) eol = text.size();
    const std::string line = text.substr(i, eol - i);
    if (trim(line).rfind("```", 0) != 0) {
      out += line;
      out += '\n';
    }
    i = eol + 1;
  }
  return out;
}

// Innermost bracket pairs in order of appearance; nested lists, flat pairs,
// and pair lists without outer brackets all reduce to this.
std::vector<std::pair<double, double>> tolerant_scan(const std::string& text) {
  std::vector<std::pair<double, double>> out;
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] != '[') {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < text.size() && text[j] != '[' && text[j] != ']') ++j;
    if (j < text.size() && text[j] == ']') {
      if (auto pair = extract_pair(text.substr(i + 1, j - i - 1))) {
        out.push_back(*pair);
      }
      i = j + 1;
    } else if (j < text.size()) {
      i = j;  // step into the nested bracket
    } else {
      break;  // unclosed bracket, nothing more to find
    }
  }
  return out;
}

// Last standalone capital option letter in the text (bare "B", "B.", "(B)").
std::optional<int> scan_option_letter(const std::string& text) {
  std::optional<int> found;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] < 'A' || text[i] > 'E') continue;
    if (i > 0 && is_alnum(text[i - 1])) continue;
    if (i + 1 < text.size() && is_alnum(text[i + 1])) continue;
    found = text[i] - 'A';
  }
  return found;
}

}  // namespace

double parse_time(const std::string& token, const TimestampStyle& style,
                  double duration_s) {
  const std::string t = trim(token);
  if (t.empty()) {
    throw std::invalid_argument("parse_time: empty token");
  }
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) {
    throw std::invalid_argument("parse_time: not numeric: \"" + token + "\"");
  }
  if (style.representation == TimeRepresentation::Absolute) return v;
  if (style.precision == TimePrecision::Integer) {
    return v / 100.0 * duration_s;
  }
  return v * duration_s;
}

Prediction parse_prediction(const std::string& raw_text,
                            const ParseConfig& cfg) {
  if (!(cfg.duration_s > 0.0)) {
    throw std::invalid_argument("parse_prediction: duration must be > 0");
  }
  if (cfg.max_windows < 1) {
    throw std::invalid_argument("parse_prediction: max_windows must be >= 1");
  }

  Prediction pred;
  pred.raw_text = raw_text;
  pred.answer_index = scan_option_letter(raw_text);

  // Window search happens after the final answer marker when one exists;
  // reasoning text above it routinely quotes example windows.
  std::string region = raw_text;
  if (!cfg.answer_marker.empty()) {
    const std::size_t at = raw_text.rfind(cfg.answer_marker);
    if (at != std::string::npos) {
      region = raw_text.substr(at + cfg.answer_marker.size());
    }
  }

  bool strict_ok = false;
  std::vector<std::pair<double, double>> pairs;
  if (auto strict = StrictParser(trim(raw_text)).run()) {
    strict_ok = true;
    pairs = std::move(*strict);
  } else {
    pairs = tolerant_scan(strip_code_fences(region));
  }

  bool repaired = false;
  const bool relative =
      cfg.style.representation == TimeRepresentation::Relative;
  for (auto [a, b] : pairs) {
    if (a > b) {
      std::swap(a, b);
      repaired = true;
    }
    if (relative) {
      const double scale = cfg.style.precision == TimePrecision::Integer
                               ? cfg.duration_s / 100.0
                               : cfg.duration_s;
      a *= scale;
      b *= scale;
      repaired = true;  // mapping back to seconds is itself a rewrite
    }
    const double ca = std::clamp(a, 0.0, cfg.duration_s);
    const double cb = std::clamp(b, 0.0, cfg.duration_s);
    if (ca != a || cb != b) repaired = true;
    const TimeInterval iv{ca, cb};
    const bool dup = std::any_of(
        pred.windows.begin(), pred.windows.end(),
        [&](const TimeInterval& w) { return w == iv; });
    if (!dup) pred.windows.push_back(iv);
  }

  if (cfg.take_first_only && pred.windows.size() > 1) {
    pred.windows.resize(1);
  }
  if (pred.windows.size() > static_cast<std::size_t>(cfg.max_windows)) {
    pred.windows.resize(static_cast<std::size_t>(cfg.max_windows));
  }

  if (pred.windows.empty()) {
    pred.parse_status = ParseStatus::Failed;
  } else if (strict_ok && !repaired) {
    pred.parse_status = ParseStatus::Clean;
  } else {
    pred.parse_status = ParseStatus::Repaired;
  }
  return pred;
}

}  // namespace tgeval
