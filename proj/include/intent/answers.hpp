#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "intent/record.hpp"

namespace intent::answers {

enum class ParseMethod { delimiter, fallback_last, none };
enum class AnswerFormat { free_response, multiple_choice };

std::string_view to_string(ParseMethod method);

struct ParseResult {
  std::optional<std::string> parsed;
  bool compliant = false;
  ParseMethod method = ParseMethod::none;

  bool operator==(const ParseResult&) const = default;
};

/// Last number after the last "####"; otherwise the last number anywhere.
/// Grouping commas, currency signs and trailing periods are dropped; sign
/// and decimal point are kept.
ParseResult parse_gsm8k(std::string_view text);

/// First standalone option letter after the last "Final answer" marker;
/// otherwise the last standalone option letter. `options` holds the allowed
/// uppercase letters, e.g. "ABCDE".
ParseResult parse_mcq(std::string_view text, std::string_view options);

/// Canonical decimal form ("1,234.50" -> "1234.5", "-0" -> "0"), or nullopt
/// when `text` is not a plain decimal number.
std::optional<std::string> canonical_number(std::string_view text);

struct Score {
  bool correct = false;
  bool compliant = false;
};

/// Extraction failures score incorrect. Free-response answers compare by
/// exact decimal value; option letters compare case-insensitively.
Score score(const ParseResult& parsed, std::string_view gold, AnswerFormat format);

double compliance_rate(std::span<const ParseResult> results);

/// gsm8k is free-response; arc_challenge and aqua_rat are multiple choice.
AnswerFormat format_for_benchmark(std::string_view benchmark_id);

/// Option letters for a record: its logged option keys when present,
/// otherwise "ABCDE".
std::string options_for(const IntentionRecord& record);

/// Re-parses and re-scores every record in place on a copy of the run.
Run rescore_run(const Run& run);

}  // namespace intent::answers
