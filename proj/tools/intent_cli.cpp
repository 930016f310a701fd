#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "intent/answers.hpp"
#include "intent/csv.hpp"
#include "intent/entropy.hpp"
#include "intent/errors.hpp"
#include "intent/geometry.hpp"
#include "intent/harness.hpp"
#include "intent/probes.hpp"
#include "intent/store.hpp"

namespace {

using namespace intent;

void print_warnings(const std::vector<Warning>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w.item_id << ": " << w.message << '\n';
}

Run load(const std::string& path) {
  auto loaded = store::read_run(path);
  print_warnings(loaded.warnings);
  return std::move(loaded.run);
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) out.push_back(std::stoul(part));
  }
  return out;
}

// "1e-4..1e2" is one value per decade; otherwise a comma list.
std::vector<double> parse_grid(const std::string& text) {
  if (auto pos = text.find(".."); pos != std::string::npos) {
    const double lo = std::stod(text.substr(0, pos));
    const double hi = std::stod(text.substr(pos + 2));
    if (!(lo > 0.0) || hi < lo) throw DomainError("grid range must be positive and increasing");
    std::vector<double> grid;
    const int a = static_cast<int>(std::lround(std::log10(lo)));
    const int b = static_cast<int>(std::lround(std::log10(hi)));
    for (int e = a; e <= b; ++e) grid.push_back(std::pow(10.0, e));
    return grid;
  }
  std::vector<double> grid;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (!part.empty()) grid.push_back(std::stod(part));
  }
  if (grid.empty()) throw DomainError("empty grid");
  return grid;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

std::string opt(const std::optional<double>& v) { return csv::number(v); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pre-collapse intention metrics over stored model-state runs"};
  app.require_subcommand(1);

  // store
  auto* store_cmd = app.add_subcommand("store", "Run directory utilities");
  store_cmd->require_subcommand(1);
  std::string validate_path;
  auto* validate = store_cmd->add_subcommand("validate", "Check every store invariant");
  validate->add_option("path", validate_path)->required();

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Per-run metrics");
  metrics->require_subcommand(1);
  std::string entropy_path;
  auto* entropy_cmd = metrics->add_subcommand("entropy", "Per-item intention entropy in bits");
  entropy_cmd->add_option("run", entropy_path)->required();
  std::string base_path, cot_path;
  auto* delta_cmd = metrics->add_subcommand("delta-h", "Entropy shift between a baseline and a CoT run");
  delta_cmd->add_option("base", base_path)->required();
  delta_cmd->add_option("cot", cot_path)->required();
  std::string deff_path, deff_sizes;
  int deff_repeats = 20;
  std::uint64_t deff_seed = 0;
  bool deff_seed_set = false;
  auto* deff_cmd = metrics->add_subcommand("deff", "PCA participation ratio per layer");
  deff_cmd->add_option("run", deff_path)->required();
  deff_cmd->add_option("--sizes", deff_sizes, "Subsample sizes, comma separated");
  deff_cmd->add_option("--repeats", deff_repeats)->check(CLI::PositiveNumber);
  auto* seed_opt = deff_cmd->add_option("--seed", deff_seed, "Subsample seed (default: manifest)");
  std::string id_path, estimator = "twonn";
  auto* id_cmd = metrics->add_subcommand("id", "Intrinsic dimension per layer");
  id_cmd->add_option("run", id_path)->required();
  id_cmd->add_option("--estimator", estimator)->check(CLI::IsMember({"twonn", "lb"}));

  // probe
  auto* probe = app.add_subcommand("probe", "Linear recoverability probes");
  probe->require_subcommand(1);
  std::string probe_path, grid_text = "1e-4..1e2";
  int resamples = 1000;
  auto* cell_cmd = probe->add_subcommand("cell", "Train/select/test one run");
  cell_cmd->add_option("run", probe_path)->required();
  cell_cmd->add_option("--grid", grid_text, "lo..hi by decade, or a comma list");
  cell_cmd->add_option("--resamples", resamples)->check(CLI::PositiveNumber);
  std::vector<std::string> transfer_paths;
  auto* transfer_cmd = probe->add_subcommand("transfer", "Regime x regime transfer AUROC");
  transfer_cmd->add_option("runs", transfer_paths)->required();
  transfer_cmd->add_option("--grid", grid_text);
  transfer_cmd->add_option("--resamples", resamples)->check(CLI::PositiveNumber);

  // answers
  auto* answers_cmd = app.add_subcommand("answers", "Answer parsing and scoring");
  answers_cmd->require_subcommand(1);
  std::string score_path, score_out;
  auto* score_cmd = answers_cmd->add_subcommand("score", "Re-parse and re-score into a new run directory");
  score_cmd->add_option("run", score_path)->required();
  score_cmd->add_option("--out", score_out, "New run directory")->required();

  // matrix
  auto* matrix = app.add_subcommand("matrix", "Experiment matrix");
  matrix->require_subcommand(1);
  std::string root, config_path, out_dir;
  auto* run_cmd = matrix->add_subcommand("run", "Compute the summary and heatmaps over a store root");
  run_cmd->add_option("--root", root)->required();
  run_cmd->add_option("--config", config_path);
  run_cmd->add_option("--out", out_dir)->default_val("matrix_out");
  std::string summary_path, reference_path;
  auto* check_cmd = matrix->add_subcommand("check", "Compare a summary against the reference tables");
  check_cmd->add_option("--summary", summary_path)->required();
  check_cmd->add_option("--reference", reference_path, "Reference directory or one of its CSV files")->required();
  std::string spec_path, synth_out;
  auto* synth_cmd = matrix->add_subcommand("synth", "Write a synthetic run");
  synth_cmd->add_option("--spec", spec_path)->required();
  synth_cmd->add_option("--out", synth_out)->required();

  CLI11_PARSE(app, argc, argv);
  deff_seed_set = seed_opt->count() > 0;

  try {
    if (validate->parsed()) {
      try {
        auto loaded = store::read_run(validate_path);
        print_warnings(loaded.warnings);
        std::cout << "ok: " << loaded.run.records.size() << " records\n";
        return 0;
      } catch (const FormatError& e) {
        if (!e.item_id().empty()) std::cout << e.item_id() << '\n';
        std::cerr << "invalid: " << e.what() << '\n';
        return 1;
      }
    }

    if (entropy_cmd->parsed()) {
      const auto run = load(entropy_path);
      std::cout << "item_id,entropy_bits\n";
      for (const auto& r : run.records) {
        std::cout << csv::join({r.item_id, csv::number(entropy::record_entropy(r))}) << '\n';
      }
      return 0;
    }

    if (delta_cmd->parsed()) {
      const auto base = load(base_path);
      const auto cot = load(cot_path);
      store::check_item_stability({base, cot});
      const auto shift =
          entropy::regime_shift(entropy::summarize_cell(base.records), entropy::summarize_cell(cot.records));
      std::cout << "delta_h,label\n"
                << csv::join({csv::number(shift.delta_h), std::string(entropy::short_name(shift.label))}) << '\n';
      return 0;
    }

    if (deff_cmd->parsed()) {
      auto run = load(deff_path);
      if (deff_seed_set) run.manifest.seeds.subsample = deff_seed;
      geometry::DimensionalityOptions opts;
      opts.sizes = parse_sizes(deff_sizes);
      opts.repeats = deff_repeats;
      const auto report = geometry::dimensionality_report(run, opts);
      std::cout << "layer,deff,weight\n";
      for (const auto& [layer, value] : report.per_layer_deff) {
        std::cout << csv::join({std::to_string(layer), csv::number(value), csv::number(report.weights.at(layer))})
                  << '\n';
      }
      std::cout << csv::join({"aggregate", csv::number(report.aggregate_deff), ""}) << '\n';
      if (!report.subsample_stability.empty()) {
        std::cout << "\nsize,mean,std,repeats,degenerate\n";
        for (const auto& [size, s] : report.subsample_stability) {
          std::cout << csv::join({std::to_string(size), csv::number(s.mean), csv::number(s.std),
                                  std::to_string(s.repeats), std::to_string(s.degenerate)})
                    << '\n';
        }
      }
      return 0;
    }

    if (id_cmd->parsed()) {
      const auto run = load(id_path);
      std::cout << "layer," << estimator << "\n";
      for (const auto& [layer, states] : geometry::layer_matrices(run)) {
        const double value = estimator == "twonn" ? geometry::twonn_estimate(states).dimension
                                                  : geometry::levina_bickel_estimate(states);
        std::cout << csv::join({std::to_string(layer), csv::number(value)}) << '\n';
      }
      return 0;
    }

    if (cell_cmd->parsed()) {
      const auto run = load(probe_path);
      std::vector<std::string> ids;
      for (const auto& r : run.records) ids.push_back(r.item_id);
      probes::ProbeConfig config;
      config.grid = parse_grid(grid_text);
      config.resamples = resamples;
      const auto r = probes::probe_cell(run, probes::make_splits(ids, run.manifest.seeds.split), config);
      std::cout << "train_auroc,test_auroc,test_ci_lo,test_ci_hi,shuffle_auroc,gap,selected_c,c_fallback,"
                   "positives_test,negatives_test,ci_degenerate_resamples,layer_selection\n";
      std::cout << csv::join({opt(r.train_auroc), opt(r.test_auroc), r.test_ci ? csv::number(r.test_ci->first) : "",
                              r.test_ci ? csv::number(r.test_ci->second) : "", opt(r.shuffle_auroc), opt(r.gap),
                              csv::number(r.selected_c), r.c_fallback ? "1" : "0", std::to_string(r.positives_test),
                              std::to_string(r.negatives_test), std::to_string(r.ci_degenerate_resamples),
                              r.layer_selection})
                << '\n';
      for (const auto& note : r.notes) std::cerr << "note: " << note << '\n';
      return 0;
    }

    if (transfer_cmd->parsed()) {
      std::vector<Run> runs;
      for (const auto& p : transfer_paths) runs.push_back(load(p));
      store::check_item_stability(runs);
      std::map<Regime, const Run*> by_regime;
      for (const auto& r : runs) {
        if (!by_regime.emplace(r.manifest.regime, &r).second) throw DomainError("two runs share a regime");
      }
      std::vector<std::string> ids;
      for (const auto& r : runs.front().records) ids.push_back(r.item_id);
      probes::ProbeConfig config;
      config.grid = parse_grid(grid_text);
      config.resamples = resamples;
      const auto m =
          probes::transfer_matrix(by_regime, probes::make_splits(ids, runs.front().manifest.seeds.split), config);
      csv::Row header{"train\\test"};
      for (auto r : m.regimes) header.emplace_back(to_string(r));
      std::cout << csv::join(header) << '\n';
      for (std::size_t i = 0; i < m.regimes.size(); ++i) {
        csv::Row row{std::string(to_string(m.regimes[i]))};
        for (const auto& v : m.entries[i]) row.push_back(opt(v));
        std::cout << csv::join(row) << '\n';
      }
      return 0;
    }

    if (score_cmd->parsed()) {
      namespace fs = std::filesystem;
      if (fs::exists(score_out) && fs::equivalent(score_out, score_path)) {
        throw DomainError("--out must differ from the input run");
      }
      if (fs::exists(fs::path(score_out) / store::kManifestFile)) {
        throw DomainError("--out already holds a run: " + score_out);
      }
      const auto run = load(score_path);
      const auto rescored = answers::rescore_run(run);
      print_warnings(store::write_run(rescored, score_out));
      std::size_t correct = 0, compliant = 0;
      for (const auto& r : rescored.records) {
        correct += r.correct;
        compliant += r.compliant;
      }
      const double n = static_cast<double>(rescored.records.size());
      std::cout << "cell,accuracy,compliance\n"
                << csv::join({to_string(CellKey{run.manifest.model_id, run.manifest.benchmark_id, run.manifest.regime}),
                              csv::number(correct / n), csv::number(compliant / n)})
                << '\n';
      return 0;
    }

    if (run_cmd->parsed()) {
      harness::MatrixConfig config;
      if (!config_path.empty()) config = harness::matrix_config_from_json(read_json(config_path));
      const auto result = harness::run_matrix(root, config);
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
      harness::write_matrix_outputs(result, out_dir);
      std::cout << "wrote " << result.summary.rows.size() << " rows to " << out_dir << '\n';
      return 0;
    }

    if (check_cmd->parsed()) {
      std::filesystem::path ref_dir = reference_path;
      if (!std::filesystem::is_directory(ref_dir)) ref_dir = ref_dir.parent_path();
      const auto reference = harness::load_reference(ref_dir);
      const auto report = harness::compare_reference(harness::read_summary_csv(summary_path), reference);
      std::cout << "scope,metric,expected,actual,tolerance,pass,detail\n";
      for (const auto& c : report.checks) {
        std::cout << csv::join({c.scope, c.metric, opt(c.expected), opt(c.actual), csv::number(c.tolerance),
                                c.pass ? "PASS" : "FAIL", c.detail})
                  << '\n';
      }
      std::cerr << report.failures() << " of " << report.checks.size() << " checks failed over "
                << report.overlapping_cells << " overlapping cells\n";
      return report.passed() ? 0 : 1;
    }

    if (synth_cmd->parsed()) {
      const auto spec = harness::synth_spec_from_json(read_json(spec_path));
      print_warnings(store::write_run(harness::synth_run(spec), synth_out));
      std::cout << "wrote " << spec.n << " records to " << synth_out << '\n';
      return 0;
    }
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what();
    if (!e.item_id().empty()) std::cerr << " (item " << e.item_id() << ")";
    std::cerr << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
