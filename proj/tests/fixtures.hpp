#pragma once

#include <atomic>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>

#include <unistd.h>

#include "intent/random.hpp"
#include "intent/record.hpp"
#include "intent/store.hpp"

namespace fixture {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("intent_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Small valid run with random states and logits.
inline intent::Run small_run(std::size_t n = 4, std::size_t layers = 2, std::size_t d = 3, std::size_t vocab = 5,
                             intent::Regime regime = intent::Regime::baseline, std::string model = "m",
                             std::string benchmark = "gsm8k", std::uint64_t seed = 1) {
  intent::Run run;
  auto& m = run.manifest;
  m.model_id = std::move(model);
  m.benchmark_id = std::move(benchmark);
  m.regime = regime;
  for (std::size_t l = 0; l < layers; ++l) m.layer_indices.push_back(static_cast<int>(4 * (l + 1)));
  m.model_layer_count = 32;
  m.hidden_dim = d;
  m.vocab_size = vocab;
  m.item_count = n;
  m.decoding.temperature = 0.0;
  m.decoding.max_tokens = 50;
  m.seeds = {seed, seed + 1, seed + 2, seed + 3};
  m.prompt_template_id = "gsm8k/baseline";
  intent::Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    intent::IntentionRecord r;
    r.item_id = intent::store::item_id_for("question " + std::to_string(i));
    r.hidden_states.resize(layers * d);
    for (auto& v : r.hidden_states) v = static_cast<float>(rng.normal());
    std::vector<float> logits(vocab);
    for (auto& v : logits) v = static_cast<float>(rng.normal());
    r.logits = logits;
    r.gold_answer = std::to_string(i);
    r.generated_text = "#### " + std::to_string(i % 2 ? i : i + 1);
    r.parsed_answer = std::to_string(i % 2 ? i : i + 1);
    r.correct = i % 2 == 1;
    r.compliant = true;
    r.generated_token_count = static_cast<std::uint32_t>(3 + i);
    run.records.push_back(std::move(r));
  }
  return run;
}

}  // namespace fixture

namespace fixture {

/// Overwrites the first hidden-state value of record `index` in a stored run
/// with NaN and fixes the checksum, so only record validation can catch it.
inline void poison_state(const std::filesystem::path& dir, std::size_t index) {
  const auto path = dir / intent::store::kRecordsFile;
  std::vector<unsigned char> bytes;
  {
    std::ifstream in(path, std::ios::binary);
    bytes.assign(std::istreambuf_iterator<char>(in), {});
  }
  auto u32 = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int k = 3; k >= 0; --k) v = (v << 8) | bytes[off + k];
    return v;
  };
  std::uint64_t n = 0;
  for (int k = 7; k >= 0; --k) n = (n << 8) | bytes[16 + k];
  const std::size_t row = std::size_t{u32(24)} * u32(28);
  const std::size_t states = 64 + (n + 3) / 4 * 4;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(&bytes[states + index * row * 4], &nan, 4);
  std::uint64_t sum = intent::store::checksum64({bytes.data() + 64, bytes.size() - 64});
  for (int k = 0; k < 8; ++k) bytes[56 + k] = static_cast<unsigned char>(sum >> (8 * k));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace fixture
