#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "intent/entropy.hpp"
#include "intent/probes.hpp"
#include "intent/record.hpp"

namespace intent::harness {

using Interval = std::pair<double, double>;

struct MatrixRow {
  CellKey cell;
  double accuracy = 0.0;  // fraction in [0, 1]
  std::optional<double> compliance;
  std::optional<double> h_mean;
  std::optional<double> h_std;
  std::optional<double> deff_aggregate;
  std::optional<double> auroc;
  std::optional<Interval> auroc_ci;
  std::optional<double> delta_h;  // cot rows with a baseline only
  std::optional<entropy::ShiftLabel> regime_label;
  std::optional<double> mean_generated_tokens;
};

struct MatrixSummary {
  std::vector<MatrixRow> rows;  // ordered by CellKey

  const MatrixRow* find(const CellKey& key) const;
};

void write_summary_csv(const MatrixSummary& summary, const std::filesystem::path& path);
MatrixSummary read_summary_csv(const std::filesystem::path& path);

/// Model x benchmark grid for one figure panel.
struct Heatmap {
  std::string name;
  std::vector<std::string> models;
  std::vector<std::string> benchmarks;
  std::vector<std::vector<std::optional<double>>> values;  // [model][benchmark]
};

/// Panels: (a) CoT accuracy gain in points, (b) entropy shift in bits,
/// (c) CoT accuracy in percent, (d) CoT probe AUROC.
std::array<Heatmap, 4> heatmaps(const MatrixSummary& summary);
void write_heatmap_csv(const Heatmap& map, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Reference results transcribed from the published tables.

struct MainResultRow {
  std::string model;
  std::string benchmark;
  Regime condition = Regime::baseline;
  double accuracy_pct = 0.0;
  std::optional<double> h_int;
  std::optional<entropy::ShiftLabel> pattern;  // cot rows
  std::optional<double> auroc;                 // cot rows
  std::optional<Interval> auroc_ci;
  bool ci_excludes_chance = false;
  std::string note;
};

struct ProbeRobustnessRow {
  std::string model;
  std::string benchmark;
  Regime condition = Regime::baseline;
  double train = 0.0;
  double test = 0.0;
  std::optional<Interval> test_ci;  // absent where the table prints "--"
  double shuffle = 0.0;
  double gap = 0.0;
};

struct ReferenceDataset {
  std::vector<MainResultRow> main_results;
  std::vector<ProbeRobustnessRow> probe_robustness;
  std::map<std::string, double> headlines;  // avg_baseline_accuracy_pct, ...
};

/// Loads main_results.csv, probe_robustness.csv and headlines.csv from `dir`
/// and checks that every (model, benchmark, condition) appears once per table.
ReferenceDataset load_reference(const std::filesystem::path& dir);

/// Summary rows (baseline and cot) carrying the reference values, with
/// entropy shifts derived from the reference entropies.
MatrixSummary summary_from_reference(const ReferenceDataset& reference);

struct Tolerances {
  double accuracy_pp = 0.5;
  double h_int_bits = 0.05;
  double auroc = 0.02;
  double gap = 0.01;  // two values printed at 2 decimals can differ by 0.01 after rounding
};

struct Check {
  std::string scope;   // cell key or "reference"
  std::string metric;
  std::optional<double> expected;
  std::optional<double> actual;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

struct ComparisonReport {
  std::vector<Check> checks;
  std::size_t overlapping_cells = 0;

  bool passed() const;
  std::size_t failures() const;
};

/// Per-cell comparison of `summary` against the reference, plus derived
/// cross-checks recomputed from the reference inputs (entropy shifts and
/// labels, probe gaps, headline averages). Throws DomainError without
/// overlapping cells.
ComparisonReport compare_reference(const MatrixSummary& summary, const ReferenceDataset& reference,
                                   const Tolerances& tolerances = {});

/// Mean accuracy in percent over a condition's reference rows.
double reference_mean_accuracy(const ReferenceDataset& reference, Regime condition);

// ---------------------------------------------------------------------------
// Matrix runs.

struct CellFilter {
  std::string model;
  std::string benchmark;
};

struct MatrixConfig {
  std::vector<CellFilter> cells;  // empty: every cell under the root
  probes::ProbeConfig probe;
  bool run_probes = true;
  std::vector<std::size_t> deff_sizes;
  int deff_repeats = 20;
  bool transfer = false;
  Tolerances tolerances;
};

MatrixConfig matrix_config_from_json(const nlohmann::json& json);

struct MatrixResult {
  MatrixSummary summary;
  std::map<CellKey, probes::ProbeReport> probe_reports;
  std::map<std::pair<std::string, std::string>, probes::TransferMatrix> transfers;
  std::vector<std::string> warnings;
};

MatrixResult run_matrix(const std::filesystem::path& root, const MatrixConfig& config);

/// summary.csv, heatmap_{a,b,c,d}.csv, probe_robustness.csv and, when
/// computed, transfer_<model>_<benchmark>.csv.
void write_matrix_outputs(const MatrixResult& result, const std::filesystem::path& out_dir);

// ---------------------------------------------------------------------------
// Synthetic runs with known ground truth.

enum class Signal { none, planted, orthogonal_by_regime };
enum class EntropyProfile { one_hot, uniform, target };
enum class Fidelity { logits, entropy_only };

struct SynthSpec {
  std::string model_id = "synthetic";
  std::string benchmark_id = "gsm8k";
  Regime regime = Regime::baseline;
  std::size_t n = 200;
  std::size_t hidden_dim = 64;
  std::vector<int> layers{8, 16};
  Signal signal = Signal::none;
  double separation = 2.0;   // class-mean distance in within-class std units
  std::size_t latent_dim = 8;
  double noise_scale = 0.05;  // isotropic noise added to every feature
  EntropyProfile entropy_profile = EntropyProfile::target;
  double entropy_mean_bits = 2.0;
  double entropy_std_bits = 0.5;
  Fidelity fidelity = Fidelity::logits;
  std::size_t vocab_size = 64;
  double accuracy = 0.5;
  double compliance = 1.0;
  std::uint64_t seed = 0;
};

nlohmann::json synth_spec_to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& json);

/// Generates a validated run. Items, labels and loadings depend only on the
/// seed, so runs that differ only in regime share their item set.
Run synth_run(const SynthSpec& spec);

/// Logits of length `vocab` whose softmax entropy is `bits`, shaped by
/// `direction`.
std::vector<float> logits_with_entropy(std::span<const double> direction, double bits);

}  // namespace intent::harness
