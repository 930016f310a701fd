#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "intent/record.hpp"

namespace intent::store {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kManifestFile = "manifest.json";
inline constexpr const char* kRecordsFile = "records.bin";

/// Stable item identity: 64-bit FNV-1a hash (hex) of the question text with
/// surrounding whitespace trimmed and inner whitespace runs collapsed.
std::string item_id_for(std::string_view question);

/// 64-bit FNV-1a over a byte range; `state` chains successive calls.
std::uint64_t checksum64(std::span<const unsigned char> bytes,
                         std::uint64_t state = 0xcbf29ce484222325ULL);

nlohmann::json manifest_to_json(const RunManifest& manifest);
RunManifest manifest_from_json(const nlohmann::json& json);

/// Checks manifest invariants; throws FormatError.
void validate_manifest(const RunManifest& manifest);

/// Checks every record against the manifest and its own invariants. Throws
/// FormatError naming the first offending item. Soft inconsistencies (stored
/// entropy disagreeing with logits) are returned as warnings.
std::vector<Warning> validate_run(const Run& run);

/// Writes `manifest.json` and `records.bin` into `dir` (created if needed).
/// Returns validation warnings; throws FormatError on any hard violation
/// before touching the filesystem.
std::vector<Warning> write_run(const Run& run, const std::filesystem::path& dir);

struct LoadedRun {
  Run run;
  std::vector<Warning> warnings;
};

/// Reads and fully re-validates a run directory.
LoadedRun read_run(const std::filesystem::path& dir);

/// Reads only the manifest of a run directory.
RunManifest read_manifest(const std::filesystem::path& dir);

/// Finds every run directory under `root` (any depth) and orders them by
/// CellKey. Throws DuplicateCellError when two directories claim one cell.
std::vector<std::pair<CellKey, std::filesystem::path>> iterate_cells(
    const std::filesystem::path& root);

/// Checks that every regime of each (model, benchmark) carries the same item
/// set. Throws FormatError naming the first item that breaks it.
void check_item_stability(const std::vector<Run>& runs);

}  // namespace intent::store
