#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "intent/record.hpp"

namespace intent::geometry {

using Matrix = Eigen::MatrixXd;

/// Eigenvalues below this fraction of the largest are treated as zero.
inline constexpr double kClipEpsilon = 1e-10;

struct LayerSpectrum {
  int layer_index = 0;
  std::vector<double> eigenvalues;  // descending, min(d, N-1) retained
  double trace = 0.0;
};

/// Spectrum of the sample covariance (N-1 denominator) of the rows of
/// `states` (N x d). Uses the N x N Gram matrix of centered rows when d >= N,
/// the d x d covariance otherwise.
LayerSpectrum layer_spectrum(const Matrix& states, int layer_index = 0);

/// Always goes through the N x N Gram matrix.
LayerSpectrum layer_spectrum_gram(const Matrix& states, int layer_index = 0);
/// Always goes through the explicit d x d covariance.
LayerSpectrum layer_spectrum_covariance(const Matrix& states, int layer_index = 0);

/// (sum l)^2 / sum l^2. Throws DomainError on an all-zero spectrum.
double participation_ratio(std::span<const double> eigenvalues);

struct Aggregate {
  double value = 0.0;
  std::map<int, double> weights;       // trace share per layer
  std::map<int, double> per_layer;     // participation ratio per layer
};

/// Trace-weighted average of per-layer participation ratios. Layers with zero
/// trace get weight 0 and no per-layer entry.
Aggregate aggregate_deff(std::span<const LayerSpectrum> spectra);

struct SubsampleStat {
  double mean = 0.0;
  double std = 0.0;   // sample std across repeats
  int repeats = 0;
  bool degenerate = false;  // repeats == 1, or a single possible subsample
};

/// For each size, draws `repeats` subsets of items without replacement and
/// recomputes the aggregate. Each repeat has its own derived stream, so the
/// result does not depend on evaluation order.
std::map<std::size_t, SubsampleStat> subsample_stability(const std::map<int, Matrix>& states_per_layer,
                                                         std::span<const std::size_t> sizes, int repeats,
                                                         std::uint64_t seed);

struct IdEstimate {
  double dimension = 0.0;
  std::size_t points_used = 0;
  std::size_t duplicates_dropped = 0;
};

struct TwoNnOptions {
  /// Fraction of largest ratios discarded before the fit (0 = plain MLE).
  double discard_fraction = 0.0;
};

/// TwoNN: maximum-likelihood fit of the ratio of second to first
/// nearest-neighbour distances. Exact duplicate rows are removed first.
IdEstimate twonn_estimate(const Matrix& states, const TwoNnOptions& options = {});

/// Levina-Bickel MLE, averaging inverse per-point estimates over points and
/// then the resulting dimensions over k in [k_min, k_max].
double levina_bickel_estimate(const Matrix& states, int k_min = 10, int k_max = 20);

struct DimensionalityReport {
  std::map<int, double> per_layer_deff;
  std::map<int, double> weights;
  double aggregate_deff = 0.0;
  std::map<std::size_t, SubsampleStat> subsample_stability;
  std::map<int, double> twonn_id;
  std::map<int, double> levina_bickel_id;
  int lb_k_min = 10;
  int lb_k_max = 20;
};

struct DimensionalityOptions {
  std::vector<std::size_t> sizes;  // empty: skip subsampling
  int repeats = 20;
  bool intrinsic_dimension = false;
  int lb_k_min = 10;
  int lb_k_max = 20;
};

/// Per-layer item x hidden_dim matrices, keyed by layer index.
std::map<int, Matrix> layer_matrices(const Run& run);

DimensionalityReport dimensionality_report(const Run& run, const DimensionalityOptions& options);

}  // namespace intent::geometry
