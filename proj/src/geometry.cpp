#include "intent/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "intent/errors.hpp"
#include "intent/random.hpp"

namespace intent::geometry {

namespace {

Matrix centered(const Matrix& states) {
  if (states.rows() < 2) throw DomainError("spectrum needs at least two rows");
  return states.rowwise() - states.colwise().mean();
}

LayerSpectrum finish(const Eigen::VectorXd& raw, double trace, Eigen::Index n, Eigen::Index d, int layer) {
  LayerSpectrum out;
  out.layer_index = layer;
  out.trace = trace;
  std::vector<double> ev(raw.data(), raw.data() + raw.size());
  std::sort(ev.begin(), ev.end(), std::greater<>());
  const double top = ev.empty() ? 0.0 : ev.front();
  const double floor = std::max(0.0, kClipEpsilon * top);
  for (double& v : ev) {
    if (v < floor || v <= 0.0) v = 0.0;
  }
  ev.resize(static_cast<std::size_t>(std::min(d, n - 1)));
  out.eigenvalues = std::move(ev);
  return out;
}

}  // namespace

LayerSpectrum layer_spectrum_gram(const Matrix& states, int layer_index) {
  const Matrix x = centered(states);
  const double denom = static_cast<double>(x.rows() - 1);
  Matrix gram = Matrix::Zero(x.rows(), x.rows());
  gram.selfadjointView<Eigen::Lower>().rankUpdate(x);
  gram = gram.selfadjointView<Eigen::Lower>();
  gram /= denom;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(gram, Eigen::EigenvaluesOnly);
  return finish(solver.eigenvalues(), gram.trace(), x.rows(), x.cols(), layer_index);
}

LayerSpectrum layer_spectrum_covariance(const Matrix& states, int layer_index) {
  const Matrix x = centered(states);
  const double denom = static_cast<double>(x.rows() - 1);
  Matrix cov = Matrix::Zero(x.cols(), x.cols());
  cov.selfadjointView<Eigen::Lower>().rankUpdate(x.transpose());
  cov = cov.selfadjointView<Eigen::Lower>();
  cov /= denom;
  Eigen::SelfAdjointEigenSolver<Matrix> solver(cov, Eigen::EigenvaluesOnly);
  return finish(solver.eigenvalues(), cov.trace(), x.rows(), x.cols(), layer_index);
}

LayerSpectrum layer_spectrum(const Matrix& states, int layer_index) {
  if (states.cols() >= states.rows()) return layer_spectrum_gram(states, layer_index);
  return layer_spectrum_covariance(states, layer_index);
}

double participation_ratio(std::span<const double> eigenvalues) {
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double v : eigenvalues) {
    if (v < 0.0 || !std::isfinite(v)) throw DomainError("eigenvalues must be finite and non-negative");
    sum += v;
    sum_sq += v * v;
  }
  if (sum <= 0.0) throw DomainError("effective dimensionality undefined for an all-zero spectrum");
  return sum * sum / sum_sq;
}

Aggregate aggregate_deff(std::span<const LayerSpectrum> spectra) {
  double total = 0.0;
  for (const auto& s : spectra) total += s.trace;
  if (spectra.empty() || !(total > 0.0)) throw DomainError("aggregate d_eff undefined: every layer trace is zero");
  Aggregate out;
  for (const auto& s : spectra) {
    const double w = s.trace / total;
    out.weights[s.layer_index] = w;
    if (s.trace > 0.0) {
      const double pr = participation_ratio(s.eigenvalues);
      out.per_layer[s.layer_index] = pr;
      out.value += w * pr;
    }
  }
  return out;
}

std::map<std::size_t, SubsampleStat> subsample_stability(const std::map<int, Matrix>& states_per_layer,
                                                         std::span<const std::size_t> sizes, int repeats,
                                                         std::uint64_t seed) {
  if (states_per_layer.empty()) throw DomainError("no layers to subsample");
  if (repeats < 1) throw DomainError("repeats must be >= 1");
  const auto n = static_cast<std::size_t>(states_per_layer.begin()->second.rows());
  for (const auto& [layer, m] : states_per_layer) {
    if (static_cast<std::size_t>(m.rows()) != n) throw DomainError("layers disagree on item count");
  }
  std::map<std::size_t, SubsampleStat> out;
  for (std::size_t size : sizes) {
    if (size > n) throw DomainError("subsample size " + std::to_string(size) + " exceeds N=" + std::to_string(n));
    if (size < 2) throw DomainError("subsample size must be >= 2");
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(repeats));
    for (int r = 0; r < repeats; ++r) {
      Rng rng(derive_seed(seed, {size, static_cast<std::uint64_t>(r)}));
      auto idx = rng.sample_without_replacement(n, size);
      std::sort(idx.begin(), idx.end());
      std::vector<LayerSpectrum> spectra;
      for (const auto& [layer, m] : states_per_layer) {
        Matrix sub(static_cast<Eigen::Index>(size), m.cols());
        for (std::size_t i = 0; i < size; ++i) sub.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(idx[i]));
        spectra.push_back(layer_spectrum(sub, layer));
      }
      values.push_back(aggregate_deff(spectra).value);
    }
    SubsampleStat stat;
    stat.repeats = repeats;
    stat.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (repeats > 1 && size < n) {
      double ss = 0.0;
      for (double v : values) ss += (v - stat.mean) * (v - stat.mean);
      stat.std = std::sqrt(ss / static_cast<double>(repeats - 1));
    } else {
      // Either a single repeat, or N' = N where every draw is the full set.
      stat.std = 0.0;
      stat.degenerate = true;
    }
    out[size] = stat;
  }
  return out;
}

namespace {

struct Distances {
  // Squared pairwise distances, row-major n x n.
  std::vector<double> sq;
  std::size_t n = 0;
  double at(std::size_t i, std::size_t j) const { return sq[i * n + j]; }
};

Distances pairwise(const Matrix& x) {
  Distances d;
  d.n = static_cast<std::size_t>(x.rows());
  d.sq.assign(d.n * d.n, 0.0);
  for (std::size_t i = 0; i < d.n; ++i) {
    for (std::size_t j = i + 1; j < d.n; ++j) {
      double acc = 0.0;
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const double diff = x(static_cast<Eigen::Index>(i), c) - x(static_cast<Eigen::Index>(j), c);
        acc += diff * diff;
      }
      d.sq[i * d.n + j] = acc;
      d.sq[j * d.n + i] = acc;
    }
  }
  return d;
}

/// Sorted neighbour distances (excluding self) of point i, first k.
std::vector<double> nearest(const Distances& d, std::size_t i, std::size_t k) {
  std::vector<double> row;
  row.reserve(d.n - 1);
  for (std::size_t j = 0; j < d.n; ++j) {
    if (j != i) row.push_back(d.at(i, j));
  }
  k = std::min(k, row.size());
  std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(k), row.end());
  row.resize(k);
  for (double& v : row) v = std::sqrt(v);
  return row;
}

}  // namespace

IdEstimate twonn_estimate(const Matrix& states, const TwoNnOptions& options) {
  // Drop exact duplicate rows, keeping first occurrences.
  std::vector<Eigen::Index> keep;
  std::set<std::vector<double>> seen;
  for (Eigen::Index i = 0; i < states.rows(); ++i) {
    std::vector<double> row(states.cols());
    for (Eigen::Index c = 0; c < states.cols(); ++c) row[static_cast<std::size_t>(c)] = states(i, c);
    if (seen.insert(std::move(row)).second) keep.push_back(i);
  }
  IdEstimate out;
  out.duplicates_dropped = static_cast<std::size_t>(states.rows()) - keep.size();
  if (keep.size() < 10) throw DomainError("TwoNN needs at least 10 distinct points");
  Matrix x(static_cast<Eigen::Index>(keep.size()), states.cols());
  for (std::size_t i = 0; i < keep.size(); ++i) x.row(static_cast<Eigen::Index>(i)) = states.row(keep[i]);

  const auto d = pairwise(x);
  std::vector<double> log_mu;
  log_mu.reserve(d.n);
  for (std::size_t i = 0; i < d.n; ++i) {
    const auto nn = nearest(d, i, 2);
    log_mu.push_back(std::log(nn[1] / nn[0]));
  }
  if (options.discard_fraction > 0.0) {
    std::sort(log_mu.begin(), log_mu.end());
    const auto drop = static_cast<std::size_t>(std::floor(options.discard_fraction * static_cast<double>(log_mu.size())));
    log_mu.resize(log_mu.size() - drop);
  }
  const double total = std::accumulate(log_mu.begin(), log_mu.end(), 0.0);
  if (!(total > 0.0)) throw DomainError("TwoNN undefined: all neighbour ratios equal one");
  out.points_used = log_mu.size();
  out.dimension = static_cast<double>(log_mu.size()) / total;
  return out;
}

double levina_bickel_estimate(const Matrix& states, int k_min, int k_max) {
  const auto n = states.rows();
  if (k_min < 2 || k_max < k_min || k_max >= n) {
    throw DomainError("Levina-Bickel needs 2 <= k_min <= k_max < N");
  }
  const auto d = pairwise(states);
  std::vector<std::vector<double>> neighbours(d.n);
  for (std::size_t i = 0; i < d.n; ++i) neighbours[i] = nearest(d, i, static_cast<std::size_t>(k_max));

  double sum_dims = 0.0;
  for (int k = k_min; k <= k_max; ++k) {
    // Inverse per-point estimate: mean over j < k of log(T_k / T_j).
    double inverse_sum = 0.0;
    for (std::size_t i = 0; i < d.n; ++i) {
      const auto& t = neighbours[i];
      const double tk = t[static_cast<std::size_t>(k - 1)];
      if (!(tk > 0.0)) throw DomainError("Levina-Bickel undefined with coincident neighbours");
      double acc = 0.0;
      for (int j = 0; j < k - 1; ++j) {
        const double tj = t[static_cast<std::size_t>(j)];
        if (!(tj > 0.0)) throw DomainError("Levina-Bickel undefined with duplicate points");
        acc += std::log(tk / tj);
      }
      inverse_sum += acc / static_cast<double>(k - 1);
    }
    const double inverse_mean = inverse_sum / static_cast<double>(d.n);
    sum_dims += 1.0 / inverse_mean;
  }
  return sum_dims / static_cast<double>(k_max - k_min + 1);
}

std::map<int, Matrix> layer_matrices(const Run& run) {
  const auto& m = run.manifest;
  std::map<int, Matrix> out;
  const auto n = static_cast<Eigen::Index>(run.records.size());
  const auto d = static_cast<Eigen::Index>(m.hidden_dim);
  for (std::size_t l = 0; l < m.layer_count(); ++l) {
    Matrix x(n, d);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto row = run.records[static_cast<std::size_t>(i)].layer_row(l, m.hidden_dim);
      for (Eigen::Index c = 0; c < d; ++c) x(i, c) = static_cast<double>(row[static_cast<std::size_t>(c)]);
    }
    out.emplace(m.layer_indices[l], std::move(x));
  }
  return out;
}

DimensionalityReport dimensionality_report(const Run& run, const DimensionalityOptions& options) {
  const auto layers = layer_matrices(run);
  std::vector<LayerSpectrum> spectra;
  for (const auto& [layer, x] : layers) spectra.push_back(layer_spectrum(x, layer));
  const auto agg = aggregate_deff(spectra);

  DimensionalityReport report;
  report.per_layer_deff = agg.per_layer;
  report.weights = agg.weights;
  report.aggregate_deff = agg.value;
  report.lb_k_min = options.lb_k_min;
  report.lb_k_max = options.lb_k_max;
  if (!options.sizes.empty()) {
    report.subsample_stability =
        subsample_stability(layers, options.sizes, options.repeats, run.manifest.seeds.subsample);
  }
  if (options.intrinsic_dimension) {
    for (const auto& [layer, x] : layers) {
      report.twonn_id[layer] = twonn_estimate(x).dimension;
      // Too few points for the k range: leave the estimate absent.
      if (x.rows() > options.lb_k_max) {
        report.levina_bickel_id[layer] = levina_bickel_estimate(x, options.lb_k_min, options.lb_k_max);
      }
    }
  }
  return report;
}

}  // namespace intent::geometry
