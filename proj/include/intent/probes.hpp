#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "intent/record.hpp"

namespace intent::probes {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Split { train, val, test };

struct SplitAssignment {
  std::map<std::string, Split> assignment;
  std::uint64_t seed = 0;

  std::size_t count(Split split) const;
  Split of(const std::string& item_id) const;  // throws DomainError if unknown
};

/// 60/20/20 item-level split. Counts use floor then largest remainder (ties
/// resolved train, val, test); membership is a seeded shuffle of the sorted
/// ids, so the result depends only on the id set and the seed.
SplitAssignment make_splits(std::span<const std::string> item_ids, std::uint64_t seed);

/// Column-wise z-scoring with statistics from the training rows only.
struct Normalizer {
  Vector mean;
  Vector std;  // sample std; constant columns get 1
  Matrix apply(const Matrix& x) const;
};

Normalizer fit_normalizer(const Matrix& train);

struct TrainOptions {
  double gradient_tolerance = 1e-8;  // on the gradient infinity-norm
  int max_iterations = 1000;
};

struct ProbeModel {
  Vector weights;
  double intercept = 0.0;
  double c_value = 1.0;
  Vector feature_mean;  // identity (0/1) when trained on pre-normalized input
  Vector feature_std;
  int iterations = 0;
  bool converged = false;

  /// W . z(x) + b for each raw row x, where z is the stored normalization.
  Vector decision_function(const Matrix& raw) const;
};

/// (1/C) * 0.5 * |w|^2 + sum log(1 + exp(-y (w.x + b))), y in {-1, +1}
/// derived from 0/1 labels; the intercept is not penalized.
double logreg_objective(const Matrix& x, std::span<const int> labels, double c, const Vector& w, double b);

struct Gradient {
  Vector w;
  double b = 0.0;
};

Gradient logreg_gradient(const Matrix& x, std::span<const int> labels, double c, const Vector& w, double b);

/// Damped Newton solver for the L2 logistic objective. Iterates live in the
/// span of the training rows, so each step solves an n x n system regardless
/// of the feature count. With fewer features than rows it runs Newton on
/// (w, b) directly instead. The Gram matrix is built once and reused across
/// regularization strengths and label permutations.
class LogregSolver {
 public:
  explicit LogregSolver(Matrix features, TrainOptions options = {});

  /// Zero-initialized fit. Throws DomainError when labels hold one class.
  ProbeModel fit(std::span<const int> labels, double c) const;

  const Matrix& features() const { return x_; }

 private:
  ProbeModel fit_primal(std::span<const int> labels, double c) const;

  Matrix x_;
  Matrix gram_;
  TrainOptions options_;
};

ProbeModel train_logreg(const Matrix& features, std::span<const int> labels, double c,
                        const TrainOptions& options = {});

/// Probability a random positive outranks a random negative, ties counted 1/2
/// (midrank / Mann-Whitney). Throws UndefinedAurocError on a single class.
double auroc(std::span<const double> scores, std::span<const int> labels);

struct BootstrapCi {
  std::optional<std::pair<double, double>> interval;
  int resamples = 0;
  int degenerate_resamples = 0;  // single-class resamples, discarded
};

/// Percentile (2.5, 97.5) interval over AUROCs of resamples drawn with
/// replacement. Single-class resamples are discarded; when more than
/// `max_degenerate_fraction` of them are, the interval is unavailable.
BootstrapCi bootstrap_ci(std::span<const double> scores, std::span<const int> labels, int resamples,
                         std::uint64_t seed, double max_degenerate_fraction = 0.10);

/// 10^-4 .. 10^2, one per decade.
std::vector<double> default_grid();

struct CSelection {
  double c = 0.0;
  double val_auroc = 0.0;
  std::vector<std::pair<double, double>> candidates;  // (C, val AUROC) per fit
};

/// Fits one model per grid value on train and keeps the best validation
/// AUROC; ties go to the smaller C. `train_x`/`val_x` must already be
/// normalized.
CSelection select_c(const LogregSolver& train, std::span<const int> train_labels, const Matrix& val_x,
                    std::span<const int> val_labels, std::span<const double> grid);

struct ProbeConfig {
  std::vector<double> grid = default_grid();
  int resamples = 1000;
  int shuffle_repeats = 1;
  double max_degenerate_fraction = 0.10;
  /// Subset of manifest layers; empty means the manifest's fixed layer set.
  std::vector<int> layers;
  /// Pick a single layer by validation AUROC instead of concatenating.
  bool select_layer_by_validation = false;
  TrainOptions train;
};

struct ProbeReport {
  std::optional<double> train_auroc;
  std::optional<double> test_auroc;
  std::optional<std::pair<double, double>> test_ci;
  int ci_degenerate_resamples = 0;
  std::optional<double> shuffle_auroc;  // median over repeats
  std::vector<double> shuffle_aurocs;
  std::optional<double> gap;  // train - test
  double selected_c = 0.0;
  bool c_fallback = false;  // validation split was single-class
  int positives_test = 0;
  int negatives_test = 0;
  std::string layer_selection = "fixed";
  std::vector<int> layers_used;
  std::vector<std::string> notes;
};

/// Concatenated hidden states (selected layers) and 0/1 correctness labels.
struct ProbeData {
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> item_ids;
};

ProbeData probe_data(const Run& run, std::span<const int> layers);

/// Full recoverability pipeline for one run.
ProbeReport probe_cell(const Run& run, const SplitAssignment& splits, const ProbeConfig& config);

struct TransferMatrix {
  std::vector<Regime> regimes;
  /// entries[i][j]: probe trained on regimes[i], scored on regimes[j] test items.
  std::vector<std::vector<std::optional<double>>> entries;
};

/// Cross-regime transfer. All runs must share the split; entries whose
/// training or test data are unusable are absent.
TransferMatrix transfer_matrix(const std::map<Regime, const Run*>& runs, const SplitAssignment& splits,
                               const ProbeConfig& config);

}  // namespace intent::probes
