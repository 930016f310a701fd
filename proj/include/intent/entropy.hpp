#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "intent/record.hpp"

namespace intent::entropy {

/// Shannon entropy in bits of softmax(logits), evaluated in double precision
/// through a shifted log-sum-exp. Requires at least two finite logits.
double entropy_from_logits(std::span<const float> logits);
double entropy_from_logits(std::span<const double> logits);

/// Entropy in bits of the distribution restricted to `options` and
/// renormalized. Log-probabilities are natural-log.
double option_normalized_entropy(const std::map<std::string, double>& option_logprobs,
                                 std::span<const std::string> options);

/// Top-1 minus top-2 restricted log-probability (>= 0).
double option_margin(const std::map<std::string, double>& option_logprobs,
                     std::span<const std::string> options);

struct EntropySummary {
  double mean_bits = 0.0;
  double std_bits = 0.0;  // sample std (N-1); 0 when n == 1
  std::size_t n = 0;
  std::vector<double> per_item;
  bool degenerate_n = false;  // set when n == 1
  std::vector<Warning> warnings;
};

/// Per-item entropies (recomputed from logits when present, stored value
/// otherwise) with mean and sample standard deviation.
EntropySummary summarize_cell(std::span<const IntentionRecord> records);

/// Per-item entropy of a single record, with the same precedence rule.
double record_entropy(const IntentionRecord& record);

enum class ShiftLabel { collapse_first, explore_then_commit, indeterminate };

std::string_view to_string(ShiftLabel label);
/// "CF"/"EC" as printed in results tables, or the enum names.
ShiftLabel parse_shift_label(std::string_view text);
std::string_view short_name(ShiftLabel label);

struct RegimeShift {
  double delta_h = 0.0;  // cot mean minus baseline mean, bits
  ShiftLabel label = ShiftLabel::indeterminate;
};

RegimeShift regime_shift(double base_mean_bits, double cot_mean_bits);
RegimeShift regime_shift(const EntropySummary& base, const EntropySummary& cot);

}  // namespace intent::entropy
