#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

namespace intent {

enum class Regime { baseline, cot, babble };

std::string_view to_string(Regime regime);
/// Accepts "baseline", "cot" (alias "enhanced") and "babble".
Regime parse_regime(std::string_view text);

struct DecodingParams {
  double temperature = 0.0;
  int max_tokens = 50;
  bool operator==(const DecodingParams&) const = default;
};

struct RunSeeds {
  std::uint64_t split = 0;
  std::uint64_t bootstrap = 0;
  std::uint64_t shuffle = 0;
  std::uint64_t subsample = 0;
  bool operator==(const RunSeeds&) const = default;
};

/// Provenance of one (model, benchmark, regime) run.
struct RunManifest {
  int schema_version = 1;
  std::string model_id;
  std::string benchmark_id;
  Regime regime = Regime::baseline;
  std::vector<int> layer_indices;
  int model_layer_count = 0;  // 0: unknown, only the lower bound is checked
  std::size_t hidden_dim = 0;
  std::size_t vocab_size = 0;
  std::size_t item_count = 0;
  DecodingParams decoding;
  RunSeeds seeds;
  std::string prompt_template_id;
  bool reference_protocol = false;  // claims greedy, fixed-budget decoding
  nlohmann::json extra = nlohmann::json::object();

  std::size_t layer_count() const { return layer_indices.size(); }
  bool operator==(const RunManifest&) const = default;
};

/// One item's pre-collapse snapshot plus its generation outcome.
struct IntentionRecord {
  std::string item_id;
  /// layer_count x hidden_dim, layer-major, rows in manifest layer order.
  std::vector<float> hidden_states;
  std::optional<std::vector<float>> logits;
  std::optional<double> entropy_bits;
  std::map<std::string, double> option_logprobs;  // empty when not logged
  std::string gold_answer;
  std::string generated_text;
  std::optional<std::string> parsed_answer;
  bool correct = false;
  bool compliant = false;
  std::uint32_t generated_token_count = 0;

  std::span<const float> layer_row(std::size_t row, std::size_t hidden_dim) const {
    return std::span<const float>(hidden_states).subspan(row * hidden_dim, hidden_dim);
  }

  bool operator==(const IntentionRecord&) const = default;
};

struct Run {
  RunManifest manifest;
  std::vector<IntentionRecord> records;
};

/// Identifies a matrix cell. Ordered lexicographically over
/// (model_id, benchmark_id, regime) with regimes ordered baseline < cot < babble.
struct CellKey {
  std::string model_id;
  std::string benchmark_id;
  Regime regime = Regime::baseline;

  auto operator<=>(const CellKey&) const = default;
  bool operator==(const CellKey&) const = default;
};

std::string to_string(const CellKey& key);

struct Warning {
  std::string item_id;
  std::string message;
};

}  // namespace intent
