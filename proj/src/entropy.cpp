#include "intent/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "intent/errors.hpp"

namespace intent::entropy {

namespace {

constexpr double kDisagreementBits = 1e-6;

template <typename T>
double entropy_impl(std::span<const T> logits) {
  if (logits.size() < 2) throw DomainError("entropy needs at least two logits");
  double max_logit = -std::numeric_limits<double>::infinity();
  for (T v : logits) {
    const double x = static_cast<double>(v);
    if (!std::isfinite(x)) throw DomainError("non-finite logit");
    max_logit = std::max(max_logit, x);
  }
  // H = log Z - sum p_i s_i (nats), with s = x - max and Z = sum exp(s).
  double z = 0.0;
  double weighted = 0.0;
  for (T v : logits) {
    const double s = static_cast<double>(v) - max_logit;
    const double e = std::exp(s);
    z += e;
    weighted += e * s;
  }
  // log2 Z directly so uniform logits give exactly log2 V.
  const double bits = std::log2(z) - weighted / (z * std::numbers::ln2);
  const double upper = std::log2(static_cast<double>(logits.size()));
  return std::clamp(bits, 0.0, upper);
}

std::vector<double> restricted(const std::map<std::string, double>& option_logprobs,
                               std::span<const std::string> options) {
  if (options.size() < 2) throw DomainError("option set needs at least two letters");
  std::vector<double> values;
  values.reserve(options.size());
  for (const auto& letter : options) {
    auto it = option_logprobs.find(letter);
    if (it == option_logprobs.end()) throw DomainError("missing option logprob for " + letter);
    if (!std::isfinite(it->second)) throw DomainError("non-finite logprob for " + letter);
    values.push_back(it->second);
  }
  return values;
}

}  // namespace

double entropy_from_logits(std::span<const float> logits) { return entropy_impl(logits); }
double entropy_from_logits(std::span<const double> logits) { return entropy_impl(logits); }

double option_normalized_entropy(const std::map<std::string, double>& option_logprobs,
                                 std::span<const std::string> options) {
  const auto values = restricted(option_logprobs, options);
  // Renormalizing logprobs over a subset is a softmax over those logprobs.
  return entropy_from_logits(std::span<const double>(values));
}

double option_margin(const std::map<std::string, double>& option_logprobs,
                     std::span<const std::string> options) {
  auto values = restricted(option_logprobs, options);
  std::partial_sort(values.begin(), values.begin() + 2, values.end(), std::greater<>());
  return values[0] - values[1];
}

double record_entropy(const IntentionRecord& record) {
  if (record.logits) return entropy_from_logits(std::span<const float>(*record.logits));
  if (record.entropy_bits) return *record.entropy_bits;
  throw DomainError("record " + record.item_id + " has neither logits nor entropy");
}

EntropySummary summarize_cell(std::span<const IntentionRecord> records) {
  if (records.empty()) throw DomainError("cannot summarize an empty cell");
  EntropySummary out;
  out.n = records.size();
  out.per_item.reserve(records.size());
  for (const auto& r : records) {
    const double h = record_entropy(r);
    if (r.logits && r.entropy_bits && std::abs(*r.entropy_bits - h) > kDisagreementBits) {
      out.warnings.push_back({r.item_id, "stored entropy disagrees with logits; using recomputed value"});
    }
    out.per_item.push_back(h);
  }
  double sum = 0.0;
  for (double h : out.per_item) sum += h;
  out.mean_bits = sum / static_cast<double>(out.n);
  if (out.n == 1) {
    out.std_bits = 0.0;
    out.degenerate_n = true;
  } else {
    double ss = 0.0;
    for (double h : out.per_item) ss += (h - out.mean_bits) * (h - out.mean_bits);
    out.std_bits = std::sqrt(ss / static_cast<double>(out.n - 1));
  }
  return out;
}

std::string_view to_string(ShiftLabel label) {
  switch (label) {
    case ShiftLabel::collapse_first: return "collapse_first";
    case ShiftLabel::explore_then_commit: return "explore_then_commit";
    case ShiftLabel::indeterminate: return "indeterminate";
  }
  return "indeterminate";
}

std::string_view short_name(ShiftLabel label) {
  switch (label) {
    case ShiftLabel::collapse_first: return "CF";
    case ShiftLabel::explore_then_commit: return "EC";
    case ShiftLabel::indeterminate: return "";
  }
  return "";
}

ShiftLabel parse_shift_label(std::string_view text) {
  if (text == "CF" || text == "collapse_first") return ShiftLabel::collapse_first;
  if (text == "EC" || text == "explore_then_commit") return ShiftLabel::explore_then_commit;
  if (text.empty() || text == "indeterminate") return ShiftLabel::indeterminate;
  throw DomainError("unknown regime label: " + std::string(text));
}

RegimeShift regime_shift(double base_mean_bits, double cot_mean_bits) {
  RegimeShift out;
  out.delta_h = cot_mean_bits - base_mean_bits;
  if (out.delta_h < 0.0) {
    out.label = ShiftLabel::collapse_first;
  } else if (out.delta_h > 0.0) {
    out.label = ShiftLabel::explore_then_commit;
  } else {
    out.label = ShiftLabel::indeterminate;
  }
  return out;
}

RegimeShift regime_shift(const EntropySummary& base, const EntropySummary& cot) {
  return regime_shift(base.mean_bits, cot.mean_bits);
}

}  // namespace intent::entropy
