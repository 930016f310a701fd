#include <doctest.h>

#include <fstream>
#include <functional>

#include "fixtures.hpp"
#include "intent/entropy.hpp"
#include "intent/errors.hpp"
#include "intent/store.hpp"

using namespace intent;
namespace fs = std::filesystem;

namespace {

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void patch_manifest(const fs::path& dir, const std::function<void(nlohmann::json&)>& edit) {
  std::ifstream in(dir / store::kManifestFile);
  auto j = nlohmann::json::parse(in);
  in.close();
  edit(j);
  std::ofstream(dir / store::kManifestFile, std::ios::trunc) << j.dump(2);
}

}  // namespace

TEST_CASE("write then read returns the same run") {
  fixture::TempDir tmp;
  auto run = fixture::small_run(2);
  run.records[1].logits.reset();
  run.records[1].entropy_bits = 1.25;
  run.records[0].option_logprobs = {{"A", -0.5}, {"B", -1.0}};
  run.manifest.extra = {{"note", "x"}};
  CHECK(store::write_run(run, tmp.path()).empty());
  const auto loaded = store::read_run(tmp.path());
  CHECK(loaded.warnings.empty());
  CHECK(loaded.run.manifest == run.manifest);
  REQUIRE(loaded.run.records.size() == 2);
  CHECK(loaded.run.records == run.records);
}

TEST_CASE("record with the wrong number of layer rows is rejected with its id") {
  auto run = fixture::small_run(2);
  run.records[1].hidden_states.resize(3);
  fixture::TempDir tmp;
  try {
    store::write_run(run, tmp.path());
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.item_id() == run.records[1].item_id);
  }
  CHECK_FALSE(fs::exists(tmp / store::kRecordsFile));
}

TEST_CASE("stored entropy inconsistent with logits is a warning, not an error") {
  auto run = fixture::small_run(2);
  const double true_h = entropy::entropy_from_logits(std::span<const float>(*run.records[0].logits));
  run.records[0].entropy_bits = true_h + 1e-3;
  run.records[1].entropy_bits = entropy::entropy_from_logits(std::span<const float>(*run.records[1].logits)) + 5e-7;
  const auto warnings = store::validate_run(run);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].item_id == run.records[0].item_id);
}

TEST_CASE("corruption is detected") {
  fixture::TempDir tmp;
  const auto run = fixture::small_run(3);
  store::write_run(run, tmp.path());
  const auto bin = tmp / store::kRecordsFile;
  const auto bytes = slurp(bin);

  SUBCASE("truncated by one byte") {
    spit(bin, {bytes.begin(), bytes.end() - 1});
    CHECK_THROWS_AS(store::read_run(tmp.path()), TruncationError);
  }
  SUBCASE("trailing bytes") {
    auto longer = bytes;
    longer.push_back(0);
    spit(bin, longer);
    CHECK_THROWS_AS(store::read_run(tmp.path()), FormatError);
  }
  SUBCASE("flipped payload byte") {
    auto flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x10;
    spit(bin, flipped);
    CHECK_THROWS_AS(store::read_run(tmp.path()), ChecksumError);
  }
  SUBCASE("header shorter than 64 bytes") {
    spit(bin, {bytes.begin(), bytes.begin() + 20});
    CHECK_THROWS_AS(store::read_run(tmp.path()), TruncationError);
  }
  SUBCASE("manifest claims more items than stored") {
    patch_manifest(tmp.path(), [](nlohmann::json& j) { j["item_count"] = 4; });
    CHECK_THROWS_AS(store::read_run(tmp.path()), CountMismatchError);
  }
  SUBCASE("unknown schema version") {
    patch_manifest(tmp.path(), [](nlohmann::json& j) { j["schema_version"] = 2; });
    CHECK_THROWS_AS(store::read_run(tmp.path()), SchemaVersionError);
  }
  SUBCASE("missing manifest") {
    fs::remove(tmp / store::kManifestFile);
    CHECK_THROWS_AS(store::read_run(tmp.path()), FormatError);
  }
}

TEST_CASE("header is 64 little-endian bytes starting with the magic") {
  fixture::TempDir tmp;
  const auto run = fixture::small_run(2, 2, 3, 5);
  store::write_run(run, tmp.path());
  const auto bytes = slurp(tmp / store::kRecordsFile);
  REQUIRE(bytes.size() > 64);
  CHECK(std::string(bytes.begin(), bytes.begin() + 8) == "ICRECORD");
  auto u32 = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int k = 3; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(bytes[off + k]);
    return v;
  };
  auto u64 = [&](std::size_t off) {
    std::uint64_t v = 0;
    for (int k = 7; k >= 0; --k) v = (v << 8) | static_cast<unsigned char>(bytes[off + k]);
    return v;
  };
  CHECK(u32(8) == 1);   // schema
  CHECK(u64(16) == 2);  // N
  CHECK(u32(24) == 2);  // L
  CHECK(u32(28) == 3);  // d
  CHECK(u32(32) == 5);  // V
  CHECK(64 + u64(40) + u64(48) == bytes.size());
  const auto* payload = reinterpret_cast<const unsigned char*>(bytes.data()) + 64;
  CHECK(store::checksum64({payload, bytes.size() - 64}) == u64(56));
}

TEST_CASE("checksum is FNV-1a 64") {
  CHECK(store::checksum64({}) == 0xcbf29ce484222325ULL);
  const std::string a = "a";
  CHECK(store::checksum64({reinterpret_cast<const unsigned char*>(a.data()), 1}) == 0xaf63dc4c8601ec8cULL);
}

TEST_CASE("item ids ignore whitespace layout") {
  CHECK(store::item_id_for("  What is  2+2?\n") == store::item_id_for("What is 2+2?"));
  CHECK(store::item_id_for("What is 2+2?") != store::item_id_for("What is 2+3?"));
  CHECK(store::item_id_for("x").size() == 16);
}

TEST_CASE("manifest invariants") {
  auto run = fixture::small_run(2);
  SUBCASE("layers must increase") {
    run.manifest.layer_indices = {8, 4};
    CHECK_THROWS_AS(store::validate_run(run), FormatError);
  }
  SUBCASE("reference protocol requires greedy decoding") {
    run.manifest.reference_protocol = true;
    run.manifest.decoding.temperature = 0.7;
    CHECK_THROWS_AS(store::validate_run(run), FormatError);
  }
  SUBCASE("correct implies compliant") {
    run.records[1].compliant = false;
    run.records[1].correct = true;
    CHECK_THROWS_AS(store::validate_run(run), FormatError);
  }
  SUBCASE("duplicate ids") {
    run.records[1].item_id = run.records[0].item_id;
    CHECK_THROWS_AS(store::validate_run(run), FormatError);
  }
  SUBCASE("non-finite state") {
    run.records[0].hidden_states[0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(store::validate_run(run), FormatError);
  }
  SUBCASE("record needs logits or entropy") {
    run.records[0].logits.reset();
    CHECK_THROWS_AS(store::validate_run(run), FormatError);
  }
}

TEST_CASE("iterate_cells enumerates in key order") {
  fixture::TempDir tmp;
  SUBCASE("empty root") { CHECK(store::iterate_cells(tmp.path()).empty()); }
  SUBCASE("full matrix") {
    const std::vector<std::string> models{"qwen", "llama", "mistral"};
    const std::vector<std::string> benches{"gsm8k", "aqua_rat", "arc_challenge"};
    for (const auto& m : models)
      for (const auto& b : benches)
        for (auto r : {Regime::babble, Regime::cot, Regime::baseline})
          store::write_run(fixture::small_run(2, 1, 2, 3, r, m, b),
                           tmp.path() / m / b / std::string(to_string(r)));
    const auto cells = store::iterate_cells(tmp.path());
    REQUIRE(cells.size() == 27);
    CHECK(std::is_sorted(cells.begin(), cells.end(),
                         [](const auto& a, const auto& b) { return a.first < b.first; }));
    CHECK(cells.front().first == CellKey{"llama", "aqua_rat", Regime::baseline});
    CHECK(cells.back().first == CellKey{"qwen", "gsm8k", Regime::babble});
  }
  SUBCASE("duplicate cell") {
    store::write_run(fixture::small_run(2, 1, 2, 3, Regime::cot, "mistral"), tmp / "a");
    store::write_run(fixture::small_run(2, 1, 2, 3, Regime::cot, "mistral"), tmp / "b");
    try {
      store::iterate_cells(tmp.path());
      FAIL("expected DuplicateCellError");
    } catch (const DuplicateCellError& e) {
      const std::string what = e.what();
      CHECK(what.find((tmp / "a").string()) != std::string::npos);
      CHECK(what.find((tmp / "b").string()) != std::string::npos);
    }
  }
}

TEST_CASE("item sets must match across regimes") {
  auto a = fixture::small_run(3, 1, 2, 3, Regime::baseline);
  auto b = fixture::small_run(3, 1, 2, 3, Regime::cot);
  CHECK_NOTHROW(store::check_item_stability({a, b}));
  b.records[2].item_id = store::item_id_for("another question");
  CHECK_THROWS_AS(store::check_item_stability({a, b}), FormatError);
}

TEST_CASE("record-level corruption names the item") {
  fixture::TempDir tmp;
  const auto run = fixture::small_run(4);
  store::write_run(run, tmp.path());
  fixture::poison_state(tmp.path(), 2);
  try {
    store::read_run(tmp.path());
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.item_id() == run.records[2].item_id);
  }
}
