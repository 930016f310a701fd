#include "intent/store.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "intent/entropy.hpp"
#include "intent/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "records.bin is little-endian; big-endian hosts need byte swapping");

namespace intent {

std::string_view to_string(Regime regime) {
  switch (regime) {
    case Regime::baseline: return "baseline";
    case Regime::cot: return "cot";
    case Regime::babble: return "babble";
  }
  return "baseline";
}

Regime parse_regime(std::string_view text) {
  if (text == "baseline") return Regime::baseline;
  if (text == "cot" || text == "enhanced") return Regime::cot;
  if (text == "babble") return Regime::babble;
  throw DomainError("unknown regime: " + std::string(text));
}

std::string to_string(const CellKey& key) {
  return key.model_id + "/" + key.benchmark_id + "/" + std::string(to_string(key.regime));
}

}  // namespace intent

namespace intent::store {

namespace {

constexpr char kMagic[8] = {'I', 'C', 'R', 'E', 'C', 'O', 'R', 'D'};
constexpr std::size_t kHeaderSize = 64;
constexpr double kEntropyDisagreementBits = 1e-6;

enum PresenceBits : std::uint8_t {
  kHasLogits = 1u << 0,
  kHasEntropy = 1u << 1,
  kHasOptions = 1u << 2,
};

class ByteWriter {
 public:
  template <typename T>
  void put(T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const unsigned char*>(&value);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_string(std::string_view s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void put_floats(std::span<const float> values) {
    const auto* p = reinterpret_cast<const unsigned char*>(values.data());
    bytes_.insert(bytes_.end(), p, p + values.size_bytes());
  }
  void pad_to(std::size_t multiple) {
    while (bytes_.size() % multiple != 0) bytes_.push_back(0);
  }
  std::vector<unsigned char>& bytes() { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class ByteReader {
 public:
  ByteReader(std::span<const unsigned char> bytes, std::string block)
      : bytes_(bytes), block_(std::move(block)) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void get_floats(std::vector<float>& out, std::size_t count) {
    need(count * sizeof(float));
    out.resize(count);
    std::memcpy(out.data(), bytes_.data() + pos_, count * sizeof(float));
    pos_ += count * sizeof(float);
  }
  void skip_to(std::size_t multiple) {
    const std::size_t target = (pos_ + multiple - 1) / multiple * multiple;
    need(target - pos_);
    pos_ = target;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("unexpected end of " + block_ + " block");
  }
  std::span<const unsigned char> bytes_;
  std::string block_;
  std::size_t pos_ = 0;
};

std::size_t checked_mul(std::size_t a, std::size_t b) {
  if (a != 0 && b > std::numeric_limits<std::size_t>::max() / a) {
    throw FormatError("tensor dimensions overflow");
  }
  return a * b;
}

}  // namespace

std::uint64_t checksum64(std::span<const unsigned char> bytes, std::uint64_t state) {
  for (unsigned char b : bytes) {
    state ^= b;
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::string item_id_for(std::string_view question) {
  std::string canonical;
  canonical.reserve(question.size());
  bool pending_space = false;
  for (char c : question) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !canonical.empty();
      continue;
    }
    if (pending_space) canonical.push_back(' ');
    pending_space = false;
    canonical.push_back(c);
  }
  const auto h = checksum64(std::span<const unsigned char>(
      reinterpret_cast<const unsigned char*>(canonical.data()), canonical.size()));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

nlohmann::json manifest_to_json(const RunManifest& m) {
  nlohmann::json j;
  j["schema_version"] = m.schema_version;
  j["model_id"] = m.model_id;
  j["benchmark_id"] = m.benchmark_id;
  j["regime"] = std::string(to_string(m.regime));
  j["layer_indices"] = m.layer_indices;
  j["model_layer_count"] = m.model_layer_count;
  j["hidden_dim"] = m.hidden_dim;
  j["vocab_size"] = m.vocab_size;
  j["item_count"] = m.item_count;
  j["decoding"] = {{"temperature", m.decoding.temperature}, {"max_tokens", m.decoding.max_tokens}};
  j["seeds"] = {{"split", m.seeds.split},
                {"bootstrap", m.seeds.bootstrap},
                {"shuffle", m.seeds.shuffle},
                {"subsample", m.seeds.subsample}};
  j["prompt_template_id"] = m.prompt_template_id;
  j["reference_protocol"] = m.reference_protocol;
  j["extra"] = m.extra;
  return j;
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  RunManifest m;
  try {
    m.schema_version = j.at("schema_version").get<int>();
    if (m.schema_version != kSchemaVersion) {
      throw SchemaVersionError("unsupported schema_version " + std::to_string(m.schema_version));
    }
    m.model_id = j.at("model_id").get<std::string>();
    m.benchmark_id = j.at("benchmark_id").get<std::string>();
    m.regime = parse_regime(j.at("regime").get<std::string>());
    m.layer_indices = j.at("layer_indices").get<std::vector<int>>();
    m.model_layer_count = j.value("model_layer_count", 0);
    m.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    m.vocab_size = j.at("vocab_size").get<std::size_t>();
    m.item_count = j.at("item_count").get<std::size_t>();
    const auto& dec = j.at("decoding");
    m.decoding.temperature = dec.at("temperature").get<double>();
    m.decoding.max_tokens = dec.at("max_tokens").get<int>();
    const auto& seeds = j.at("seeds");
    m.seeds.split = seeds.at("split").get<std::uint64_t>();
    m.seeds.bootstrap = seeds.at("bootstrap").get<std::uint64_t>();
    m.seeds.shuffle = seeds.at("shuffle").get<std::uint64_t>();
    m.seeds.subsample = seeds.at("subsample").get<std::uint64_t>();
    m.prompt_template_id = j.value("prompt_template_id", std::string{});
    m.reference_protocol = j.value("reference_protocol", false);
    m.extra = j.value("extra", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  } catch (const DomainError& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

void validate_manifest(const RunManifest& m) {
  if (m.schema_version != kSchemaVersion) {
    throw SchemaVersionError("unsupported schema_version " + std::to_string(m.schema_version));
  }
  if (m.model_id.empty() || m.benchmark_id.empty()) throw FormatError("manifest lacks model or benchmark id");
  if (m.layer_indices.empty()) throw FormatError("manifest has no layers");
  for (std::size_t i = 0; i < m.layer_indices.size(); ++i) {
    const int layer = m.layer_indices[i];
    if (layer < 1) throw FormatError("layer index below 1: " + std::to_string(layer));
    if (m.model_layer_count > 0 && layer > m.model_layer_count) {
      throw FormatError("layer index beyond model depth: " + std::to_string(layer));
    }
    if (i > 0 && layer <= m.layer_indices[i - 1]) throw FormatError("layer indices not strictly increasing");
  }
  if (m.item_count == 0) throw FormatError("item_count must be positive");
  if (m.hidden_dim == 0) throw FormatError("hidden_dim must be positive");
  if (m.vocab_size < 2) throw FormatError("vocab_size must exceed 1");
  if (m.reference_protocol && m.decoding.temperature != 0.0) {
    throw FormatError("reference-protocol runs must decode greedily (temperature 0)");
  }
}

std::vector<Warning> validate_run(const Run& run) {
  const auto& m = run.manifest;
  validate_manifest(m);
  if (run.records.size() != m.item_count) {
    throw CountMismatchError("manifest item_count " + std::to_string(m.item_count) + " but " +
                             std::to_string(run.records.size()) + " records");
  }
  std::vector<Warning> warnings;
  std::set<std::string> seen;
  const std::size_t state_len = m.layer_count() * m.hidden_dim;
  for (const auto& r : run.records) {
    if (r.item_id.empty()) throw FormatError("record with empty item_id");
    if (!seen.insert(r.item_id).second) throw FormatError("duplicate item_id", r.item_id);
    if (r.hidden_states.size() != state_len) {
      throw FormatError("hidden_states has " + std::to_string(r.hidden_states.size()) +
                            " values, expected " + std::to_string(m.layer_count()) + "x" +
                            std::to_string(m.hidden_dim),
                        r.item_id);
    }
    for (float v : r.hidden_states) {
      if (!std::isfinite(v)) throw FormatError("non-finite hidden state", r.item_id);
    }
    if (!r.logits && !r.entropy_bits) throw FormatError("neither logits nor entropy_bits present", r.item_id);
    if (r.logits) {
      if (r.logits->size() != m.vocab_size) {
        throw FormatError("logits length " + std::to_string(r.logits->size()) + " != vocab_size " +
                              std::to_string(m.vocab_size),
                          r.item_id);
      }
      for (float v : *r.logits) {
        if (!std::isfinite(v)) throw FormatError("non-finite logit", r.item_id);
      }
    }
    if (r.entropy_bits) {
      const double h = *r.entropy_bits;
      if (!std::isfinite(h) || h < 0.0) throw FormatError("entropy_bits must be finite and >= 0", r.item_id);
    }
    if (r.logits && r.entropy_bits) {
      const double recomputed = entropy::entropy_from_logits(std::span<const float>(*r.logits));
      if (std::abs(recomputed - *r.entropy_bits) > kEntropyDisagreementBits) {
        warnings.push_back({r.item_id, "stored entropy_bits differs from logits entropy by " +
                                           std::to_string(std::abs(recomputed - *r.entropy_bits)) + " bits"});
      }
    }
    for (const auto& [letter, lp] : r.option_logprobs) {
      if (letter.empty() || !std::isfinite(lp)) throw FormatError("invalid option logprob", r.item_id);
    }
    if (r.correct && !r.compliant) throw FormatError("correct record marked non-compliant", r.item_id);
  }
  return warnings;
}

std::vector<Warning> write_run(const Run& run, const std::filesystem::path& dir) {
  auto warnings = validate_run(run);
  const auto& m = run.manifest;
  const std::size_t n = run.records.size();

  ByteWriter tensor;
  std::uint32_t flags = 0;
  for (const auto& r : run.records) {
    std::uint8_t p = 0;
    if (r.logits) p |= kHasLogits;
    if (r.entropy_bits) p |= kHasEntropy;
    if (!r.option_logprobs.empty()) p |= kHasOptions;
    flags |= p;
    tensor.put(p);
  }
  tensor.pad_to(4);
  for (const auto& r : run.records) tensor.put_floats(r.hidden_states);
  for (const auto& r : run.records) {
    if (r.logits) tensor.put_floats(*r.logits);
  }

  ByteWriter text;
  for (const auto& r : run.records) {
    text.put_string(r.item_id);
    text.put_string(r.gold_answer);
    text.put_string(r.generated_text);
    text.put<std::uint8_t>(r.parsed_answer ? 1 : 0);
    if (r.parsed_answer) text.put_string(*r.parsed_answer);
    if (r.entropy_bits) text.put<double>(*r.entropy_bits);
    text.put<std::uint8_t>(r.correct ? 1 : 0);
    text.put<std::uint8_t>(r.compliant ? 1 : 0);
    text.put<std::uint32_t>(r.generated_token_count);
    text.put<std::uint32_t>(static_cast<std::uint32_t>(r.option_logprobs.size()));
    for (const auto& [letter, lp] : r.option_logprobs) {
      text.put_string(letter);
      text.put<double>(lp);
    }
  }

  std::uint64_t sum = checksum64(tensor.bytes());
  sum = checksum64(text.bytes(), sum);

  ByteWriter header;
  for (char c : kMagic) header.put(c);
  header.put<std::uint32_t>(static_cast<std::uint32_t>(m.schema_version));
  header.put<std::uint32_t>(flags);
  header.put<std::uint64_t>(n);
  header.put<std::uint32_t>(static_cast<std::uint32_t>(m.layer_count()));
  header.put<std::uint32_t>(static_cast<std::uint32_t>(m.hidden_dim));
  header.put<std::uint32_t>(static_cast<std::uint32_t>(m.vocab_size));
  header.put<std::uint32_t>(0);
  header.put<std::uint64_t>(tensor.bytes().size());
  header.put<std::uint64_t>(text.bytes().size());
  header.put<std::uint64_t>(sum);

  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / kRecordsFile, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + (dir / kRecordsFile).string() + " for writing");
    auto write = [&](std::vector<unsigned char>& b) {
      out.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    };
    write(header.bytes());
    write(tensor.bytes());
    write(text.bytes());
    if (!out) throw Error("write failed for " + (dir / kRecordsFile).string());
  }
  {
    std::ofstream out(dir / kManifestFile, std::ios::trunc);
    if (!out) throw Error("cannot open " + (dir / kManifestFile).string() + " for writing");
    out << manifest_to_json(m).dump(2) << '\n';
  }
  return warnings;
}

RunManifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / kManifestFile);
  if (!in) throw FormatError("missing " + (dir / kManifestFile).string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
  }
  return manifest_from_json(j);
}

LoadedRun read_run(const std::filesystem::path& dir) {
  LoadedRun out;
  out.run.manifest = read_manifest(dir);
  const auto& m = out.run.manifest;

  std::ifstream in(dir / kRecordsFile, std::ios::binary);
  if (!in) throw FormatError("missing " + (dir / kRecordsFile).string());
  std::vector<unsigned char> file((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (file.size() < kHeaderSize) throw TruncationError("records.bin shorter than its header");

  ByteReader header(std::span<const unsigned char>(file.data(), kHeaderSize), "header");
  for (char c : kMagic) {
    if (header.get<char>() != c) throw FormatError("records.bin has wrong magic bytes");
  }
  const auto schema = header.get<std::uint32_t>();
  if (schema != static_cast<std::uint32_t>(kSchemaVersion)) {
    throw SchemaVersionError("unsupported records.bin schema_version " + std::to_string(schema));
  }
  const auto flags = header.get<std::uint32_t>();
  const auto n = header.get<std::uint64_t>();
  const auto layers = header.get<std::uint32_t>();
  const auto hidden = header.get<std::uint32_t>();
  const auto vocab = header.get<std::uint32_t>();
  (void)header.get<std::uint32_t>();
  const auto tensor_bytes = header.get<std::uint64_t>();
  const auto text_bytes = header.get<std::uint64_t>();
  const auto stored_sum = header.get<std::uint64_t>();

  const std::uint64_t expected_size = kHeaderSize + tensor_bytes + text_bytes;
  if (file.size() < expected_size) {
    throw TruncationError("records.bin truncated: " + std::to_string(file.size()) + " of " +
                          std::to_string(expected_size) + " bytes");
  }
  if (file.size() > expected_size) throw FormatError("records.bin has trailing bytes");
  if (n != m.item_count) {
    throw CountMismatchError("manifest item_count " + std::to_string(m.item_count) + " but " +
                             std::to_string(n) + " records on disk");
  }
  if (layers != m.layer_count() || hidden != m.hidden_dim || vocab != m.vocab_size) {
    throw FormatError("records.bin dimensions disagree with manifest");
  }

  const std::span<const unsigned char> tensor_block(file.data() + kHeaderSize, tensor_bytes);
  const std::span<const unsigned char> text_block(file.data() + kHeaderSize + tensor_bytes, text_bytes);
  std::uint64_t sum = checksum64(tensor_block);
  sum = checksum64(text_block, sum);
  if (sum != stored_sum) throw ChecksumError("records.bin checksum mismatch");

  auto& records = out.run.records;
  records.resize(n);
  ByteReader tensor(tensor_block, "tensor");
  std::vector<std::uint8_t> presence(n);
  std::uint32_t seen_flags = 0;
  for (auto& p : presence) {
    p = tensor.get<std::uint8_t>();
    seen_flags |= p;
  }
  if (seen_flags != flags) throw FormatError("presence flags disagree with header");
  tensor.skip_to(4);
  const std::size_t state_len = checked_mul(layers, hidden);
  for (auto& r : records) tensor.get_floats(r.hidden_states, state_len);
  for (std::size_t i = 0; i < n; ++i) {
    if (presence[i] & kHasLogits) {
      records[i].logits.emplace();
      tensor.get_floats(*records[i].logits, vocab);
    }
  }
  if (tensor.remaining() != 0) throw FormatError("tensor block has unread bytes");

  ByteReader text(text_block, "text");
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = records[i];
    r.item_id = text.get_string();
    r.gold_answer = text.get_string();
    r.generated_text = text.get_string();
    if (text.get<std::uint8_t>() != 0) r.parsed_answer = text.get_string();
    if (presence[i] & kHasEntropy) r.entropy_bits = text.get<double>();
    r.correct = text.get<std::uint8_t>() != 0;
    r.compliant = text.get<std::uint8_t>() != 0;
    r.generated_token_count = text.get<std::uint32_t>();
    const auto options = text.get<std::uint32_t>();
    for (std::uint32_t k = 0; k < options; ++k) {
      auto letter = text.get_string();
      r.option_logprobs[letter] = text.get<double>();
    }
    if (((presence[i] & kHasOptions) != 0) != !r.option_logprobs.empty()) {
      throw FormatError("option presence flag disagrees with contents", r.item_id);
    }
  }
  if (text.remaining() != 0) throw FormatError("text block has unread bytes");

  out.warnings = validate_run(out.run);
  return out;
}

std::vector<std::pair<CellKey, std::filesystem::path>> iterate_cells(const std::filesystem::path& root) {
  std::vector<std::pair<CellKey, std::filesystem::path>> cells;
  if (!std::filesystem::exists(root)) return cells;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file() || entry.path().filename() != kManifestFile) continue;
    const auto dir = entry.path().parent_path();
    const auto m = read_manifest(dir);
    cells.emplace_back(CellKey{m.model_id, m.benchmark_id, m.regime}, dir);
  }
  std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return a.second < b.second;
  });
  for (std::size_t i = 1; i < cells.size(); ++i) {
    if (cells[i].first == cells[i - 1].first) {
      throw DuplicateCellError("cell " + to_string(cells[i].first) + " claimed by both " +
                               cells[i - 1].second.string() + " and " + cells[i].second.string());
    }
  }
  return cells;
}

void check_item_stability(const std::vector<Run>& runs) {
  std::map<std::pair<std::string, std::string>, std::pair<const Run*, std::set<std::string>>> reference;
  for (const auto& run : runs) {
    std::set<std::string> ids;
    for (const auto& r : run.records) ids.insert(r.item_id);
    const auto key = std::make_pair(run.manifest.model_id, run.manifest.benchmark_id);
    auto it = reference.find(key);
    if (it == reference.end()) {
      reference.emplace(key, std::make_pair(&run, std::move(ids)));
      continue;
    }
    const auto& expected = it->second.second;
    for (const auto& id : ids) {
      if (!expected.count(id)) throw FormatError("item set differs across regimes", id);
    }
    for (const auto& id : expected) {
      if (!ids.count(id)) throw FormatError("item set differs across regimes", id);
    }
  }
}

}  // namespace intent::store
