#include "intent/answers.hpp"

#include <algorithm>
#include <cctype>
#include <vector>

#include "intent/errors.hpp"

namespace intent::answers {

namespace {

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

struct NumberToken {
  std::size_t begin = 0;
  std::string normalized;
};

/// Scans numbers of the form [sign][$]digits[,ddd]*[.digits].
std::vector<NumberToken> scan_numbers(std::string_view text) {
  std::vector<NumberToken> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    if (!is_digit(text[i])) {
      ++i;
      continue;
    }
    // Digits glued to letters or other digits on the left are part of a
    // larger token (e.g. "x2"), not a standalone number.
    if (i > 0 && (std::isalpha(static_cast<unsigned char>(text[i - 1])) != 0)) {
      while (i < n && (is_digit(text[i]) || text[i] == ',' || text[i] == '.')) ++i;
      continue;
    }
    NumberToken tok;
    tok.begin = i;
    // Leading sign and currency: "-5", "$5", "-$5", "$-5". A hyphen glued
    // to a preceding word or digit ("3-5") is not a sign.
    auto minus_at = [&](std::size_t pos) {
      return text[pos] == '-' && (pos == 0 || !is_alnum(text[pos - 1]));
    };
    bool negative = false;
    if (i > 0 && text[i - 1] == '$') {
      negative = i > 1 && minus_at(i - 2);
    } else if (i > 0 && text[i - 1] == '-') {
      negative = minus_at(i - 1) || (i > 1 && text[i - 2] == '$');
    }

    std::string digits;
    std::size_t k = i;
    // ".75" reads as 0.75 when the dot is not itself after a digit.
    const bool bare_fraction = i > 0 && text[i - 1] == '.' && (i < 2 || !is_digit(text[i - 2]));
    if (bare_fraction) {
      digits = "0.";
      while (k < n && is_digit(text[k])) digits.push_back(text[k++]);
      if (i > 1 && text[i - 2] == '-' && minus_at(i - 2)) negative = true;
      tok.normalized = (negative ? "-" : "") + digits;
      out.push_back(std::move(tok));
      i = k;
      continue;
    }
    while (k < n && is_digit(text[k])) digits.push_back(text[k++]);
    // Thousands grouping only continues a 1-3 digit head: "1,234,567".
    if (digits.size() <= 3) {
      while (k + 3 < n && text[k] == ',' && is_digit(text[k + 1]) && is_digit(text[k + 2]) &&
             is_digit(text[k + 3]) && (k + 4 >= n || !is_digit(text[k + 4]))) {
        digits.append(text.substr(k + 1, 3));
        k += 4;
      }
    }
    if (k + 1 < n && text[k] == '.' && is_digit(text[k + 1])) {
      digits.push_back('.');
      ++k;
      while (k < n && is_digit(text[k])) digits.push_back(text[k++]);
    }
    tok.normalized = (negative ? "-" : "") + digits;
    out.push_back(std::move(tok));
    i = k;
  }
  return out;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

struct LetterToken {
  std::size_t pos = 0;
  char letter = 0;  // uppercase
};

/// Standalone option letters: delimited by non-alphanumerics or string ends.
/// Lowercase letters only count when wrapped ("(b)", "b)", "b.") or when
/// `any_case` is set, so articles like "a" in prose are not read as options.
std::vector<LetterToken> scan_letters(std::string_view text, std::string_view options, bool any_case) {
  std::vector<LetterToken> out;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (!std::isalpha(static_cast<unsigned char>(c))) continue;
    const bool left_ok = i == 0 || !is_alnum(text[i - 1]);
    const bool right_ok = i + 1 >= text.size() || !is_alnum(text[i + 1]);
    if (!left_ok || !right_ok) continue;
    const char upper = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (options.find(upper) == std::string_view::npos) continue;
    if (c != upper && !any_case) {
      const bool wrapped = (i > 0 && text[i - 1] == '(') ||
                           (i + 1 < text.size() && (text[i + 1] == ')' || text[i + 1] == '.'));
      if (!wrapped) continue;
    }
    out.push_back({i, upper});
  }
  return out;
}

}  // namespace

std::string_view to_string(ParseMethod method) {
  switch (method) {
    case ParseMethod::delimiter: return "delimiter";
    case ParseMethod::fallback_last: return "fallback_last";
    case ParseMethod::none: return "none";
  }
  return "none";
}

ParseResult parse_gsm8k(std::string_view text) {
  ParseResult out;
  const auto marker = text.rfind("####");
  if (marker != std::string_view::npos) {
    const auto tail = scan_numbers(text.substr(marker + 4));
    if (!tail.empty()) {
      out.parsed = tail.back().normalized;
      out.method = ParseMethod::delimiter;
      out.compliant = true;
      return out;
    }
  }
  const auto all = scan_numbers(text);
  if (!all.empty()) {
    out.parsed = all.back().normalized;
    out.method = ParseMethod::fallback_last;
    out.compliant = true;
  }
  return out;
}

ParseResult parse_mcq(std::string_view text, std::string_view options) {
  if (options.empty()) throw DomainError("option set is empty");
  ParseResult out;
  const std::string folded = lower(text);
  const auto marker = folded.rfind("final answer");
  if (marker != std::string::npos) {
    const auto tail = text.substr(marker + std::string_view("final answer").size());
    const auto letters = scan_letters(tail, options, true);
    if (!letters.empty()) {
      out.parsed = std::string(1, letters.front().letter);
      out.method = ParseMethod::delimiter;
      out.compliant = true;
      return out;
    }
  }
  // A reply that is nothing but one letter counts in any case.
  std::string_view trimmed = text;
  while (!trimmed.empty() && !is_alnum(trimmed.front())) trimmed.remove_prefix(1);
  while (!trimmed.empty() && !is_alnum(trimmed.back())) trimmed.remove_suffix(1);
  const bool bare = trimmed.size() == 1;
  const auto letters = scan_letters(text, options, bare);
  if (!letters.empty()) {
    out.parsed = std::string(1, letters.back().letter);
    out.method = ParseMethod::fallback_last;
    out.compliant = true;
  }
  return out;
}

std::optional<std::string> canonical_number(std::string_view text) {
  std::string s;
  for (char c : text) {
    if (c == ',' || c == '$' || std::isspace(static_cast<unsigned char>(c))) continue;
    s.push_back(c);
  }
  while (!s.empty() && s.back() == '.') s.pop_back();
  if (s.empty()) return std::nullopt;
  bool negative = false;
  std::size_t i = 0;
  if (s[0] == '-' || s[0] == '+') {
    negative = s[0] == '-';
    i = 1;
  }
  std::string int_part;
  std::string frac_part;
  bool seen_point = false;
  for (; i < s.size(); ++i) {
    if (s[i] == '.') {
      if (seen_point) return std::nullopt;
      seen_point = true;
    } else if (is_digit(s[i])) {
      (seen_point ? frac_part : int_part).push_back(s[i]);
    } else {
      return std::nullopt;
    }
  }
  if (int_part.empty() && frac_part.empty()) return std::nullopt;
  int_part.erase(0, std::min(int_part.find_first_not_of('0'), int_part.size()));
  while (!frac_part.empty() && frac_part.back() == '0') frac_part.pop_back();
  if (int_part.empty()) int_part = "0";
  std::string out = int_part;
  if (!frac_part.empty()) out += "." + frac_part;
  if (negative && out != "0") out.insert(out.begin(), '-');
  return out;
}

Score score(const ParseResult& parsed, std::string_view gold, AnswerFormat format) {
  if (gold.empty()) throw DomainError("gold answer is empty");
  Score out;
  out.compliant = parsed.compliant && parsed.parsed.has_value();
  if (!out.compliant) return out;
  const std::string& answer = *parsed.parsed;
  if (format == AnswerFormat::multiple_choice) {
    out.correct = lower(answer) == lower(gold);
    return out;
  }
  const auto a = canonical_number(answer);
  const auto g = canonical_number(gold);
  if (a && g) {
    out.correct = *a == *g;
  } else {
    out.correct = answer == gold;
  }
  return out;
}

double compliance_rate(std::span<const ParseResult> results) {
  if (results.empty()) throw DomainError("compliance rate of an empty set");
  const auto ok = std::count_if(results.begin(), results.end(), [](const ParseResult& r) { return r.compliant; });
  return static_cast<double>(ok) / static_cast<double>(results.size());
}

AnswerFormat format_for_benchmark(std::string_view benchmark_id) {
  if (benchmark_id == "gsm8k") return AnswerFormat::free_response;
  if (benchmark_id == "arc_challenge" || benchmark_id == "aqua_rat") return AnswerFormat::multiple_choice;
  throw DomainError("unknown benchmark: " + std::string(benchmark_id));
}

std::string options_for(const IntentionRecord& record) {
  if (record.option_logprobs.empty()) return "ABCDE";
  std::string letters;
  for (const auto& [letter, lp] : record.option_logprobs) {
    if (letter.size() == 1) letters.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(letter[0]))));
  }
  return letters.empty() ? std::string("ABCDE") : letters;
}

Run rescore_run(const Run& run) {
  Run out = run;
  const auto format = format_for_benchmark(run.manifest.benchmark_id);
  for (auto& r : out.records) {
    const auto parsed = format == AnswerFormat::free_response ? parse_gsm8k(r.generated_text)
                                                              : parse_mcq(r.generated_text, options_for(r));
    const auto s = score(parsed, r.gold_answer, format);
    r.parsed_answer = parsed.parsed;
    r.compliant = s.compliant;
    r.correct = s.correct;
  }
  return out;
}

}  // namespace intent::answers
