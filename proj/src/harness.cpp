#include "intent/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>

#include "intent/answers.hpp"
#include "intent/csv.hpp"
#include "intent/errors.hpp"
#include "intent/geometry.hpp"
#include "intent/random.hpp"
#include "intent/store.hpp"

namespace intent::harness {

namespace {

constexpr const char* kSummaryHeader =
    "model,benchmark,regime,accuracy,compliance,h_mean,h_std,deff_aggregate,auroc,auroc_ci_lo,auroc_ci_hi,"
    "delta_h,regime_label,mean_generated_tokens";

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::optional<Interval> interval_from(const std::string& lo, const std::string& hi) {
  const auto a = csv::parse_optional(lo);
  const auto b = csv::parse_optional(hi);
  if (a && b) return Interval{*a, *b};
  return std::nullopt;
}

/// Column lookup by header name.
class Table {
 public:
  explicit Table(std::vector<csv::Row> rows, const std::string& source) : source_(source) {
    if (rows.empty()) throw FormatError(source + " is empty");
    header_ = std::move(rows.front());
    rows.erase(rows.begin());
    rows_ = std::move(rows);
    for (const auto& r : rows_) {
      if (r.size() != header_.size()) throw FormatError(source + ": row width differs from header");
    }
  }
  const std::vector<csv::Row>& rows() const { return rows_; }
  const std::string& get(const csv::Row& row, const std::string& column) const {
    auto it = std::find(header_.begin(), header_.end(), column);
    if (it == header_.end()) throw FormatError(source_ + " lacks column " + column);
    return row[static_cast<std::size_t>(it - header_.begin())];
  }

 private:
  std::string source_;
  csv::Row header_;
  std::vector<csv::Row> rows_;
};

double round_to(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(value * scale) / scale;
}

}  // namespace

const MatrixRow* MatrixSummary::find(const CellKey& key) const {
  for (const auto& r : rows) {
    if (r.cell == key) return &r;
  }
  return nullptr;
}

void write_summary_csv(const MatrixSummary& summary, const std::filesystem::path& path) {
  auto out = open_out(path);
  out << kSummaryHeader << '\n';
  for (const auto& r : summary.rows) {
    csv::Row row{r.cell.model_id,
                 r.cell.benchmark_id,
                 std::string(to_string(r.cell.regime)),
                 csv::number(r.accuracy),
                 csv::number(r.compliance),
                 csv::number(r.h_mean),
                 csv::number(r.h_std),
                 csv::number(r.deff_aggregate),
                 csv::number(r.auroc),
                 r.auroc_ci ? csv::number(r.auroc_ci->first) : "",
                 r.auroc_ci ? csv::number(r.auroc_ci->second) : "",
                 csv::number(r.delta_h),
                 r.regime_label ? std::string(entropy::short_name(*r.regime_label)) : "",
                 csv::number(r.mean_generated_tokens)};
    out << csv::join(row) << '\n';
  }
}

MatrixSummary read_summary_csv(const std::filesystem::path& path) {
  Table table(csv::read(path), path.string());
  MatrixSummary summary;
  for (const auto& row : table.rows()) {
    MatrixRow r;
    r.cell = {table.get(row, "model"), table.get(row, "benchmark"), parse_regime(table.get(row, "regime"))};
    r.accuracy = csv::parse_number(table.get(row, "accuracy"));
    r.compliance = csv::parse_optional(table.get(row, "compliance"));
    r.h_mean = csv::parse_optional(table.get(row, "h_mean"));
    r.h_std = csv::parse_optional(table.get(row, "h_std"));
    r.deff_aggregate = csv::parse_optional(table.get(row, "deff_aggregate"));
    r.auroc = csv::parse_optional(table.get(row, "auroc"));
    r.auroc_ci = interval_from(table.get(row, "auroc_ci_lo"), table.get(row, "auroc_ci_hi"));
    r.delta_h = csv::parse_optional(table.get(row, "delta_h"));
    const auto& label = table.get(row, "regime_label");
    if (!label.empty()) r.regime_label = entropy::parse_shift_label(label);
    r.mean_generated_tokens = csv::parse_optional(table.get(row, "mean_generated_tokens"));
    summary.rows.push_back(std::move(r));
  }
  std::sort(summary.rows.begin(), summary.rows.end(),
            [](const MatrixRow& a, const MatrixRow& b) { return a.cell < b.cell; });
  return summary;
}

std::array<Heatmap, 4> heatmaps(const MatrixSummary& summary) {
  std::set<std::string> models;
  std::set<std::string> benchmarks;
  for (const auto& r : summary.rows) {
    models.insert(r.cell.model_id);
    benchmarks.insert(r.cell.benchmark_id);
  }
  std::array<Heatmap, 4> maps;
  const std::array<const char*, 4> names{"cot_accuracy_gain_pp", "delta_h_bits", "cot_accuracy_pct", "cot_probe_auroc"};
  for (std::size_t k = 0; k < 4; ++k) {
    maps[k].name = names[k];
    maps[k].models.assign(models.begin(), models.end());
    maps[k].benchmarks.assign(benchmarks.begin(), benchmarks.end());
    maps[k].values.assign(models.size(), std::vector<std::optional<double>>(benchmarks.size()));
  }
  for (std::size_t i = 0; i < maps[0].models.size(); ++i) {
    for (std::size_t j = 0; j < maps[0].benchmarks.size(); ++j) {
      const auto& m = maps[0].models[i];
      const auto& b = maps[0].benchmarks[j];
      const auto* base = summary.find({m, b, Regime::baseline});
      const auto* cot = summary.find({m, b, Regime::cot});
      if (!cot) continue;
      if (base) maps[0].values[i][j] = 100.0 * (cot->accuracy - base->accuracy);
      maps[1].values[i][j] = cot->delta_h;
      maps[2].values[i][j] = 100.0 * cot->accuracy;
      maps[3].values[i][j] = cot->auroc;
    }
  }
  return maps;
}

void write_heatmap_csv(const Heatmap& map, const std::filesystem::path& path) {
  auto out = open_out(path);
  csv::Row header{"model"};
  header.insert(header.end(), map.benchmarks.begin(), map.benchmarks.end());
  out << csv::join(header) << '\n';
  for (std::size_t i = 0; i < map.models.size(); ++i) {
    csv::Row row{map.models[i]};
    for (const auto& v : map.values[i]) row.push_back(csv::number(v));
    out << csv::join(row) << '\n';
  }
}

ReferenceDataset load_reference(const std::filesystem::path& dir) {
  ReferenceDataset ref;
  {
    Table t(csv::read(dir / "main_results.csv"), "main_results.csv");
    for (const auto& row : t.rows()) {
      MainResultRow r;
      r.model = t.get(row, "model");
      r.benchmark = t.get(row, "benchmark");
      r.condition = parse_regime(t.get(row, "condition"));
      r.accuracy_pct = csv::parse_number(t.get(row, "accuracy_pct"));
      r.h_int = csv::parse_optional(t.get(row, "h_int_bits"));
      const auto& pattern = t.get(row, "pattern");
      if (!pattern.empty()) r.pattern = entropy::parse_shift_label(pattern);
      r.auroc = csv::parse_optional(t.get(row, "auroc"));
      r.auroc_ci = interval_from(t.get(row, "auroc_ci_lo"), t.get(row, "auroc_ci_hi"));
      r.ci_excludes_chance = t.get(row, "ci_excludes_chance") == "1";
      r.note = t.get(row, "note");
      ref.main_results.push_back(std::move(r));
    }
  }
  {
    Table t(csv::read(dir / "probe_robustness.csv"), "probe_robustness.csv");
    for (const auto& row : t.rows()) {
      ProbeRobustnessRow r;
      r.model = t.get(row, "model");
      r.benchmark = t.get(row, "benchmark");
      r.condition = parse_regime(t.get(row, "condition"));
      r.train = csv::parse_number(t.get(row, "train"));
      r.test = csv::parse_number(t.get(row, "test"));
      r.test_ci = interval_from(t.get(row, "test_ci_lo"), t.get(row, "test_ci_hi"));
      r.shuffle = csv::parse_number(t.get(row, "shuffle"));
      r.gap = csv::parse_number(t.get(row, "gap"));
      ref.probe_robustness.push_back(std::move(r));
    }
  }
  {
    Table t(csv::read(dir / "headlines.csv"), "headlines.csv");
    for (const auto& row : t.rows()) ref.headlines[t.get(row, "quantity")] = csv::parse_number(t.get(row, "value"));
  }

  auto check_unique = [](const auto& rows, const char* table) {
    std::set<std::tuple<std::string, std::string, Regime>> seen;
    std::set<std::string> models;
    std::set<std::string> benchmarks;
    for (const auto& r : rows) {
      if (!seen.insert({r.model, r.benchmark, r.condition}).second) {
        throw FormatError(std::string(table) + ": duplicate row " + r.model + "/" + r.benchmark);
      }
      models.insert(r.model);
      benchmarks.insert(r.benchmark);
    }
    for (const auto& m : models) {
      for (const auto& b : benchmarks) {
        for (Regime c : {Regime::baseline, Regime::cot}) {
          if (!seen.count({m, b, c})) {
            throw FormatError(std::string(table) + ": missing row " + m + "/" + b + "/" + std::string(to_string(c)));
          }
        }
      }
    }
  };
  check_unique(ref.main_results, "main_results.csv");
  check_unique(ref.probe_robustness, "probe_robustness.csv");
  return ref;
}

MatrixSummary summary_from_reference(const ReferenceDataset& reference) {
  MatrixSummary summary;
  for (const auto& r : reference.main_results) {
    MatrixRow row;
    row.cell = {r.model, r.benchmark, r.condition};
    row.accuracy = r.accuracy_pct / 100.0;
    row.h_mean = r.h_int;
    row.auroc = r.auroc;
    row.auroc_ci = r.auroc_ci;
    summary.rows.push_back(std::move(row));
  }
  std::sort(summary.rows.begin(), summary.rows.end(),
            [](const MatrixRow& a, const MatrixRow& b) { return a.cell < b.cell; });
  for (auto& row : summary.rows) {
    if (row.cell.regime != Regime::cot || !row.h_mean) continue;
    const auto* base = summary.find({row.cell.model_id, row.cell.benchmark_id, Regime::baseline});
    if (!base || !base->h_mean) continue;
    const auto shift = entropy::regime_shift(*base->h_mean, *row.h_mean);
    row.delta_h = shift.delta_h;
    if (shift.label != entropy::ShiftLabel::indeterminate) row.regime_label = shift.label;
  }
  return summary;
}

bool ComparisonReport::passed() const { return failures() == 0; }

std::size_t ComparisonReport::failures() const {
  return static_cast<std::size_t>(std::count_if(checks.begin(), checks.end(), [](const Check& c) { return !c.pass; }));
}

double reference_mean_accuracy(const ReferenceDataset& reference, Regime condition) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : reference.main_results) {
    if (r.condition != condition) continue;
    sum += r.accuracy_pct;
    ++n;
  }
  if (n == 0) throw DomainError("no reference rows for condition");
  return sum / static_cast<double>(n);
}

ComparisonReport compare_reference(const MatrixSummary& summary, const ReferenceDataset& reference,
                                   const Tolerances& tol) {
  ComparisonReport report;
  auto numeric = [&](std::string scope, std::string metric, std::optional<double> expected,
                     std::optional<double> actual, double tolerance) {
    Check c{std::move(scope), std::move(metric), expected, actual, tolerance, false, {}};
    if (expected && actual) {
      c.pass = std::abs(*expected - *actual) <= tolerance + 1e-12;
    } else {
      c.detail = "value unavailable";
    }
    report.checks.push_back(std::move(c));
  };

  for (const auto& ref : reference.main_results) {
    const CellKey key{ref.model, ref.benchmark, ref.condition};
    const auto* row = summary.find(key);
    if (!row) continue;
    ++report.overlapping_cells;
    const auto scope = to_string(key);
    numeric(scope, "accuracy_pct", ref.accuracy_pct, 100.0 * row->accuracy, tol.accuracy_pp);
    if (ref.h_int) numeric(scope, "h_int_bits", ref.h_int, row->h_mean, tol.h_int_bits);
    if (ref.auroc) numeric(scope, "auroc", ref.auroc, row->auroc, tol.auroc);
    if (ref.pattern) {
      Check c{scope, "regime_label", std::nullopt, std::nullopt, 0.0, false, {}};
      c.pass = row->regime_label && *row->regime_label == *ref.pattern;
      c.detail = std::string("expected ") + std::string(entropy::short_name(*ref.pattern)) + ", got " +
                 (row->regime_label ? std::string(entropy::short_name(*row->regime_label)) : "none");
      report.checks.push_back(std::move(c));
    }
  }
  if (report.overlapping_cells == 0) throw DomainError("summary and reference share no cells");

  // Quantities derived from the reference inputs themselves.
  const auto derived = summary_from_reference(reference);
  for (const auto& ref : reference.main_results) {
    if (!ref.pattern) continue;
    const auto* row = derived.find({ref.model, ref.benchmark, Regime::cot});
    Check c{ref.model + "/" + ref.benchmark, "derived_delta_h_sign", std::nullopt,
            row ? row->delta_h : std::nullopt, 0.0, false, {}};
    c.pass = row && row->regime_label && *row->regime_label == *ref.pattern;
    c.detail = "label from recomputed entropy shift vs printed pattern";
    report.checks.push_back(std::move(c));
  }
  for (const auto& p : reference.probe_robustness) {
    numeric(p.model + "/" + p.benchmark + "/" + std::string(to_string(p.condition)), "derived_probe_gap", p.gap,
            p.train - p.test, tol.gap);
  }
  const double base_avg = reference_mean_accuracy(reference, Regime::baseline);
  const double cot_avg = reference_mean_accuracy(reference, Regime::cot);
  auto headline = [&](const std::string& name, double computed) {
    auto it = reference.headlines.find(name);
    if (it == reference.headlines.end()) return;
    // Headlines are printed to one decimal; compare at that precision.
    Check c{"reference", name, it->second, computed, 0.0, round_to(computed, 1) == round_to(it->second, 1), {}};
    report.checks.push_back(std::move(c));
  };
  headline("avg_baseline_accuracy_pct", base_avg);
  headline("avg_cot_accuracy_pct", cot_avg);
  headline("avg_cot_gain_pp", cot_avg - base_avg);

  // The same averages from the summary, when it covers every reference cell.
  bool covers = true;
  for (const auto& ref : reference.main_results) {
    if (!summary.find({ref.model, ref.benchmark, ref.condition})) covers = false;
  }
  if (covers) {
    auto mean_of = [&](Regime regime) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& ref : reference.main_results) {
        if (ref.condition != regime) continue;
        sum += 100.0 * summary.find({ref.model, ref.benchmark, regime})->accuracy;
        ++n;
      }
      return sum / static_cast<double>(n);
    };
    numeric("summary", "avg_baseline_accuracy_pct", base_avg, mean_of(Regime::baseline), tol.accuracy_pp);
    numeric("summary", "avg_cot_accuracy_pct", cot_avg, mean_of(Regime::cot), tol.accuracy_pp);
  }
  return report;
}

// ---------------------------------------------------------------------------

MatrixConfig matrix_config_from_json(const nlohmann::json& j) {
  MatrixConfig config;
  for (const auto& c : j.value("cells", nlohmann::json::array())) {
    config.cells.push_back({c.at("model").get<std::string>(), c.at("benchmark").get<std::string>()});
  }
  if (j.contains("probe")) {
    const auto& p = j.at("probe");
    config.run_probes = p.value("enabled", true);
    if (p.contains("grid")) config.probe.grid = p.at("grid").get<std::vector<double>>();
    config.probe.resamples = p.value("resamples", config.probe.resamples);
    config.probe.shuffle_repeats = p.value("shuffle_repeats", config.probe.shuffle_repeats);
    config.probe.max_degenerate_fraction = p.value("max_degenerate_fraction", config.probe.max_degenerate_fraction);
    if (p.contains("layers")) config.probe.layers = p.at("layers").get<std::vector<int>>();
    config.probe.select_layer_by_validation = p.value("select_layer_by_validation", false);
  }
  if (j.contains("deff")) {
    const auto& d = j.at("deff");
    if (d.contains("sizes")) config.deff_sizes = d.at("sizes").get<std::vector<std::size_t>>();
    config.deff_repeats = d.value("repeats", config.deff_repeats);
  }
  config.transfer = j.value("transfer", false);
  if (j.contains("tolerances")) {
    const auto& t = j.at("tolerances");
    config.tolerances.accuracy_pp = t.value("accuracy_pp", config.tolerances.accuracy_pp);
    config.tolerances.h_int_bits = t.value("h_int_bits", config.tolerances.h_int_bits);
    config.tolerances.auroc = t.value("auroc", config.tolerances.auroc);
    config.tolerances.gap = t.value("gap", config.tolerances.gap);
  }
  return config;
}

MatrixResult run_matrix(const std::filesystem::path& root, const MatrixConfig& config) {
  MatrixResult result;
  auto cells = store::iterate_cells(root);
  if (!config.cells.empty()) {
    std::erase_if(cells, [&](const auto& entry) {
      return std::none_of(config.cells.begin(), config.cells.end(), [&](const CellFilter& f) {
        return f.model == entry.first.model_id && f.benchmark == entry.first.benchmark_id;
      });
    });
  }

  // Group regimes of one (model, benchmark) so they share a split.
  std::map<std::pair<std::string, std::string>, std::vector<std::pair<CellKey, std::filesystem::path>>> groups;
  for (auto& c : cells) groups[{c.first.model_id, c.first.benchmark_id}].push_back(c);

  for (const auto& [group_key, members] : groups) {
    std::vector<Run> runs;
    for (const auto& [key, path] : members) {
      auto loaded = store::read_run(path);
      for (const auto& w : loaded.warnings) result.warnings.push_back(to_string(key) + ": " + w.item_id + ": " + w.message);
      runs.push_back(std::move(loaded.run));
    }
    store::check_item_stability(runs);
    std::vector<std::string> ids;
    for (const auto& r : runs.front().records) ids.push_back(r.item_id);
    const auto splits = probes::make_splits(ids, runs.front().manifest.seeds.split);

    std::map<Regime, const Run*> by_regime;
    for (const auto& run : runs) {
      const CellKey key{run.manifest.model_id, run.manifest.benchmark_id, run.manifest.regime};
      by_regime[key.regime] = &run;
      MatrixRow row;
      row.cell = key;
      double correct = 0.0, compliant = 0.0, tokens = 0.0;
      for (const auto& rec : run.records) {
        correct += rec.correct ? 1.0 : 0.0;
        compliant += rec.compliant ? 1.0 : 0.0;
        tokens += rec.generated_token_count;
      }
      const auto n = static_cast<double>(run.records.size());
      row.accuracy = correct / n;
      row.compliance = compliant / n;
      row.mean_generated_tokens = tokens / n;
      const auto h = entropy::summarize_cell(run.records);
      for (const auto& w : h.warnings) result.warnings.push_back(to_string(key) + ": " + w.item_id + ": " + w.message);
      row.h_mean = h.mean_bits;
      row.h_std = h.std_bits;
      try {
        geometry::DimensionalityOptions opts;
        opts.sizes = config.deff_sizes;
        opts.repeats = config.deff_repeats;
        row.deff_aggregate = geometry::dimensionality_report(run, opts).aggregate_deff;
      } catch (const DomainError& e) {
        result.warnings.push_back(to_string(key) + ": d_eff unavailable: " + e.what());
      }
      if (config.run_probes) {
        auto report = probes::probe_cell(run, splits, config.probe);
        row.auroc = report.test_auroc;
        row.auroc_ci = report.test_ci;
        for (const auto& note : report.notes) result.warnings.push_back(to_string(key) + ": " + note);
        result.probe_reports.emplace(key, std::move(report));
      }
      result.summary.rows.push_back(std::move(row));
    }
    if (config.transfer && config.run_probes) {
      result.transfers[group_key] = probes::transfer_matrix(by_regime, splits, config.probe);
    }
  }

  auto& rows = result.summary.rows;
  std::sort(rows.begin(), rows.end(), [](const MatrixRow& a, const MatrixRow& b) { return a.cell < b.cell; });
  for (auto& row : rows) {
    if (row.cell.regime != Regime::cot) continue;
    const auto* base = result.summary.find({row.cell.model_id, row.cell.benchmark_id, Regime::baseline});
    if (!base || !base->h_mean || !row.h_mean) {
      result.warnings.push_back(to_string(row.cell) + ": no baseline entropy; delta_h unavailable");
      continue;
    }
    const auto shift = entropy::regime_shift(*base->h_mean, *row.h_mean);
    row.delta_h = shift.delta_h;
    if (shift.label == entropy::ShiftLabel::indeterminate) {
      result.warnings.push_back(to_string(row.cell) + ": delta_h is exactly 0; label indeterminate");
    } else {
      row.regime_label = shift.label;
    }
  }
  return result;
}

void write_matrix_outputs(const MatrixResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_summary_csv(result.summary, out_dir / "summary.csv");
  const auto maps = heatmaps(result.summary);
  const std::array<const char*, 4> files{"heatmap_a.csv", "heatmap_b.csv", "heatmap_c.csv", "heatmap_d.csv"};
  for (std::size_t k = 0; k < 4; ++k) write_heatmap_csv(maps[k], out_dir / files[k]);

  auto out = open_out(out_dir / "probe_robustness.csv");
  out << "model,benchmark,regime,train,test,test_ci_lo,test_ci_hi,shuffle,gap,selected_c,positives_test,"
         "negatives_test,ci_degenerate_resamples\n";
  for (const auto& [key, r] : result.probe_reports) {
    out << csv::join({key.model_id, key.benchmark_id, std::string(to_string(key.regime)), csv::number(r.train_auroc),
                      csv::number(r.test_auroc), r.test_ci ? csv::number(r.test_ci->first) : "",
                      r.test_ci ? csv::number(r.test_ci->second) : "", csv::number(r.shuffle_auroc),
                      csv::number(r.gap), csv::number(r.selected_c), std::to_string(r.positives_test),
                      std::to_string(r.negatives_test), std::to_string(r.ci_degenerate_resamples)})
        << '\n';
  }
  for (const auto& [group, matrix] : result.transfers) {
    auto t = open_out(out_dir / ("transfer_" + group.first + "_" + group.second + ".csv"));
    csv::Row header{"train\\test"};
    for (auto r : matrix.regimes) header.emplace_back(to_string(r));
    t << csv::join(header) << '\n';
    for (std::size_t i = 0; i < matrix.regimes.size(); ++i) {
      csv::Row row{std::string(to_string(matrix.regimes[i]))};
      for (const auto& v : matrix.entries[i]) row.push_back(csv::number(v));
      t << csv::join(row) << '\n';
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

std::string_view to_string(Signal s) {
  switch (s) {
    case Signal::none: return "none";
    case Signal::planted: return "planted";
    case Signal::orthogonal_by_regime: return "orthogonal-by-regime";
  }
  return "none";
}

Signal parse_signal(const std::string& s) {
  if (s == "none") return Signal::none;
  if (s == "planted") return Signal::planted;
  if (s == "orthogonal-by-regime" || s == "orthogonal_by_regime") return Signal::orthogonal_by_regime;
  throw DomainError("unknown signal kind: " + s);
}

std::string_view to_string(EntropyProfile p) {
  switch (p) {
    case EntropyProfile::one_hot: return "one-hot";
    case EntropyProfile::uniform: return "uniform";
    case EntropyProfile::target: return "target";
  }
  return "target";
}

EntropyProfile parse_profile(const std::string& s) {
  if (s == "one-hot" || s == "one_hot") return EntropyProfile::one_hot;
  if (s == "uniform") return EntropyProfile::uniform;
  if (s == "target") return EntropyProfile::target;
  throw DomainError("unknown entropy profile: " + s);
}

double entropy_bits_of(std::span<const double> logits, double scale) {
  double max_v = -std::numeric_limits<double>::infinity();
  for (double v : logits) max_v = std::max(max_v, scale * v);
  double z = 0.0, weighted = 0.0;
  for (double v : logits) {
    const double s = scale * v - max_v;
    const double e = std::exp(s);
    z += e;
    weighted += e * s;
  }
  return (std::log(z) - weighted / z) / std::numbers::ln2;
}

}  // namespace

std::vector<float> logits_with_entropy(std::span<const double> direction, double bits) {
  const double top = std::log2(static_cast<double>(direction.size()));
  if (!(bits >= 0.0) || bits > top) throw DomainError("target entropy outside [0, log2 V]");
  // Entropy falls monotonically as the direction is scaled up from 0.
  double lo = 0.0, hi = 1.0;
  while (entropy_bits_of(direction, hi) > bits && hi < 1e12) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (entropy_bits_of(direction, mid) > bits) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double scale = 0.5 * (lo + hi);
  std::vector<float> out(direction.size());
  for (std::size_t i = 0; i < direction.size(); ++i) out[i] = static_cast<float>(scale * direction[i]);
  return out;
}

nlohmann::json synth_spec_to_json(const SynthSpec& s) {
  return {{"model_id", s.model_id},
          {"benchmark_id", s.benchmark_id},
          {"regime", std::string(intent::to_string(s.regime))},
          {"n", s.n},
          {"hidden_dim", s.hidden_dim},
          {"layers", s.layers},
          {"signal", std::string(to_string(s.signal))},
          {"separation", s.separation},
          {"latent_dim", s.latent_dim},
          {"noise_scale", s.noise_scale},
          {"entropy_profile", std::string(to_string(s.entropy_profile))},
          {"entropy_mean_bits", s.entropy_mean_bits},
          {"entropy_std_bits", s.entropy_std_bits},
          {"fidelity", s.fidelity == Fidelity::logits ? "logits" : "entropy_only"},
          {"vocab_size", s.vocab_size},
          {"accuracy", s.accuracy},
          {"compliance", s.compliance},
          {"seed", s.seed}};
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  try {
    s.model_id = j.value("model_id", s.model_id);
    s.benchmark_id = j.value("benchmark_id", s.benchmark_id);
    s.regime = parse_regime(j.value("regime", std::string("baseline")));
    s.n = j.value("n", s.n);
    s.hidden_dim = j.value("hidden_dim", s.hidden_dim);
    s.layers = j.value("layers", s.layers);
    s.signal = parse_signal(j.value("signal", std::string("none")));
    s.separation = j.value("separation", s.separation);
    s.latent_dim = j.value("latent_dim", s.latent_dim);
    s.noise_scale = j.value("noise_scale", s.noise_scale);
    s.entropy_profile = parse_profile(j.value("entropy_profile", std::string("target")));
    s.entropy_mean_bits = j.value("entropy_mean_bits", s.entropy_mean_bits);
    s.entropy_std_bits = j.value("entropy_std_bits", s.entropy_std_bits);
    const auto fidelity = j.value("fidelity", std::string("logits"));
    if (fidelity != "logits" && fidelity != "entropy_only") throw DomainError("unknown fidelity: " + fidelity);
    s.fidelity = fidelity == "logits" ? Fidelity::logits : Fidelity::entropy_only;
    s.vocab_size = j.value("vocab_size", s.vocab_size);
    s.accuracy = j.value("accuracy", s.accuracy);
    s.compliance = j.value("compliance", s.compliance);
    s.seed = j.value("seed", s.seed);
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("invalid synth spec: ") + e.what());
  }
  return s;
}

Run synth_run(const SynthSpec& spec) {
  if (spec.n < 5) throw DomainError("synthetic runs need n >= 5");
  if (spec.hidden_dim == 0 || spec.layers.empty()) throw DomainError("synthetic runs need layers and hidden_dim");
  if (spec.latent_dim == 0) throw DomainError("latent_dim must be positive");
  if (spec.latent_dim > spec.layers.size() * spec.hidden_dim) throw DomainError("latent_dim exceeds the feature count");
  if (spec.signal == Signal::orthogonal_by_regime && spec.latent_dim < 3) {
    throw DomainError("orthogonal-by-regime signal needs latent_dim >= 3");
  }
  if (spec.accuracy < 0.0 || spec.accuracy > 1.0 || spec.compliance < 0.0 || spec.compliance > 1.0) {
    throw DomainError("accuracy and compliance must lie in [0, 1]");
  }
  if (spec.vocab_size < 2) throw DomainError("vocab_size must exceed 1");
  const auto format = answers::format_for_benchmark(spec.benchmark_id);

  const std::size_t n = spec.n;
  const std::size_t width = spec.layers.size() * spec.hidden_dim;
  const auto regime_salt = static_cast<std::uint64_t>(spec.regime);

  // Labels and compliance: shared by every regime of the seed.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng label_rng(derive_seed(spec.seed, {0x1abe1ULL}));
  label_rng.shuffle(order);
  const auto positives = static_cast<std::size_t>(std::llround(spec.accuracy * static_cast<double>(n)));
  const auto noncompliant = std::min(n - positives,
                                     static_cast<std::size_t>(std::llround((1.0 - spec.compliance) * static_cast<double>(n))));
  std::vector<int> label(n, 0);
  std::vector<bool> compliant(n, true);
  for (std::size_t k = 0; k < positives; ++k) label[order[k]] = 1;
  for (std::size_t k = 0; k < noncompliant; ++k) compliant[order[n - 1 - k]] = false;

  // Latent loadings: shared by every regime of the seed. Each feature column
  // reads one latent axis with a random sign and unit-scale magnitude, so the
  // axes stay orthogonal under any per-column rescaling (z-scoring included).
  Rng load_rng(derive_seed(spec.seed, {0x10adULL}));
  std::vector<std::size_t> column_axis(width);
  std::vector<double> column_weight(width);
  for (std::size_t c = 0; c < width; ++c) {
    column_axis[c] = c % spec.latent_dim;
    column_weight[c] = (load_rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.5 + load_rng.uniform());
  }
  load_rng.shuffle(column_axis);

  const std::size_t signal_axis = spec.signal == Signal::orthogonal_by_regime ? regime_salt : 0;

  Run run;
  auto& m = run.manifest;
  m.model_id = spec.model_id;
  m.benchmark_id = spec.benchmark_id;
  m.regime = spec.regime;
  m.layer_indices = spec.layers;
  std::sort(m.layer_indices.begin(), m.layer_indices.end());
  m.model_layer_count = m.layer_indices.back();
  m.hidden_dim = spec.hidden_dim;
  m.vocab_size = spec.vocab_size;
  m.item_count = n;
  m.decoding.temperature = 0.0;
  m.decoding.max_tokens = spec.regime == Regime::baseline ? 50 : 512;
  m.seeds = {spec.seed, derive_seed(spec.seed, {1}), derive_seed(spec.seed, {2}), derive_seed(spec.seed, {3})};
  m.prompt_template_id = std::string(format == answers::AnswerFormat::free_response ? "gsm8k/" : "mcq/") +
                         std::string(intent::to_string(spec.regime));
  m.reference_protocol = true;
  m.extra = {{"synth_spec", synth_spec_to_json(spec)}};

  const std::string letters = "ABCDE";
  run.records.resize(n);
  std::vector<double> z(spec.latent_dim);
  std::vector<double> direction(spec.vocab_size);
  for (std::size_t i = 0; i < n; ++i) {
    auto& r = run.records[i];
    r.item_id = store::item_id_for("Synthetic " + spec.benchmark_id + " item " + std::to_string(i) + " (seed " +
                                   std::to_string(spec.seed) + ")");
    Rng rng(derive_seed(spec.seed, {0x17e3ULL, regime_salt, i}));
    for (double& v : z) v = rng.normal();
    if (spec.signal != Signal::none) z[signal_axis] += (label[i] ? 0.5 : -0.5) * spec.separation;

    r.hidden_states.assign(width, 0.0f);
    for (std::size_t c = 0; c < width; ++c) {
      const double v = z[column_axis[c]] * column_weight[c] + spec.noise_scale * rng.normal();
      r.hidden_states[c] = static_cast<float>(v);
    }

    std::vector<float> logits;
    double target = 0.0;
    switch (spec.entropy_profile) {
      case EntropyProfile::one_hot:
        logits.assign(spec.vocab_size, 0.0f);
        logits[rng.below(spec.vocab_size)] = 1000.0f;
        break;
      case EntropyProfile::uniform:
        logits.assign(spec.vocab_size, 0.0f);
        break;
      case EntropyProfile::target: {
        const double top = std::log2(static_cast<double>(spec.vocab_size));
        target = std::clamp(spec.entropy_mean_bits + spec.entropy_std_bits * rng.normal(), 0.0, top);
        for (double& v : direction) v = rng.normal();
        logits = logits_with_entropy(direction, target);
        break;
      }
    }
    if (spec.fidelity == Fidelity::logits) {
      r.logits = std::move(logits);
    } else {
      r.entropy_bits = entropy::entropy_from_logits(std::span<const float>(logits));
    }

    // Outcome text built so that the parser recovers the intended label.
    if (format == answers::AnswerFormat::free_response) {
      const long gold = static_cast<long>((i * 37 + 11) % 997);
      r.gold_answer = std::to_string(gold);
      if (!compliant[i]) {
        r.generated_text = "I cannot solve this.";
      } else {
        const long answer = label[i] ? gold : gold + 1;
        r.generated_text = "Working through the problem step by step. #### " + std::to_string(answer);
      }
    } else {
      const char gold = letters[i % letters.size()];
      r.gold_answer = std::string(1, gold);
      std::vector<double> lp(letters.size());
      for (double& v : lp) v = rng.normal();
      double mx = *std::max_element(lp.begin(), lp.end()), sum = 0.0;
      for (double v : lp) sum += std::exp(v - mx);
      for (std::size_t k = 0; k < letters.size(); ++k) {
        r.option_logprobs[std::string(1, letters[k])] = lp[k] - mx - std::log(sum);
      }
      if (!compliant[i]) {
        r.generated_text = "I am not sure which option fits.";
      } else {
        const char answer = label[i] ? gold : letters[(i + 1) % letters.size()];
        r.generated_text = "Reasoning: comparing the options.\nFinal answer: " + std::string(1, answer);
      }
    }
    r.generated_token_count = static_cast<std::uint32_t>(
        spec.regime == Regime::baseline ? 1 + i % 50 : 100 + (i * 13) % 413);
    const auto parsed = format == answers::AnswerFormat::free_response
                            ? answers::parse_gsm8k(r.generated_text)
                            : answers::parse_mcq(r.generated_text, letters);
    const auto s = answers::score(parsed, r.gold_answer, format);
    r.parsed_answer = parsed.parsed;
    r.correct = s.correct;
    r.compliant = s.compliant;
  }
  (void)store::validate_run(run);
  return run;
}

}  // namespace intent::harness
