#include "intent/probes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "intent/errors.hpp"
#include "intent/random.hpp"

namespace intent::probes {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

Vector signs(std::span<const int> labels) {
  Vector y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i)) = labels[i] ? 1.0 : -1.0;
  return y;
}

void require_both_classes(std::span<const int> labels, const char* what) {
  const auto pos = std::count_if(labels.begin(), labels.end(), [](int v) { return v != 0; });
  if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) {
    throw DomainError(std::string(what) + ": labels hold a single class");
  }
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

bool both_classes(std::span<const int> labels) {
  const auto pos = std::count_if(labels.begin(), labels.end(), [](int v) { return v != 0; });
  return pos > 0 && pos < static_cast<std::ptrdiff_t>(labels.size());
}

}  // namespace

std::size_t SplitAssignment::count(Split split) const {
  return static_cast<std::size_t>(
      std::count_if(assignment.begin(), assignment.end(), [&](const auto& kv) { return kv.second == split; }));
}

Split SplitAssignment::of(const std::string& item_id) const {
  auto it = assignment.find(item_id);
  if (it == assignment.end()) throw DomainError("item " + item_id + " has no split assignment");
  return it->second;
}

SplitAssignment make_splits(std::span<const std::string> item_ids, std::uint64_t seed) {
  std::vector<std::string> ids(item_ids.begin(), item_ids.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  const std::size_t n = ids.size();
  if (n < 5) throw DomainError("splitting needs at least 5 distinct items");

  constexpr std::array<double, 3> fractions{0.6, 0.2, 0.2};
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    // Exact shares in twentieths avoid 0.6 * n rounding below the integer.
    const std::size_t twentieths = static_cast<std::size_t>(std::llround(fractions[k] * 20.0)) * n;
    counts[k] = twentieths / 20;
    remainders[k] = static_cast<double>(twentieths % 20) / 20.0;
    assigned += counts[k];
  }
  while (assigned < n) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k) {
      if (remainders[k] > remainders[best]) best = k;
    }
    ++counts[best];
    remainders[best] = -1.0;
    ++assigned;
  }

  Rng rng(derive_seed(seed, {0x5b117ULL}));
  rng.shuffle(ids);
  SplitAssignment out;
  out.seed = seed;
  std::size_t i = 0;
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t j = 0; j < counts[k]; ++j) out.assignment[ids[i++]] = static_cast<Split>(k);
  }
  return out;
}

Matrix Normalizer::apply(const Matrix& x) const {
  if (x.cols() != mean.size()) throw DomainError("normalizer width mismatch");
  return ((x.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array()).matrix();
}

Normalizer fit_normalizer(const Matrix& train) {
  if (train.rows() < 2) throw DomainError("normalizer needs at least two training rows");
  Normalizer out;
  out.mean = train.colwise().mean().transpose();
  const Matrix centered = train.rowwise() - out.mean.transpose();
  out.std = (centered.colwise().squaredNorm() / static_cast<double>(train.rows() - 1)).cwiseSqrt().transpose();
  for (Eigen::Index j = 0; j < out.std.size(); ++j) {
    if (!(out.std(j) > 0.0)) out.std(j) = 1.0;
  }
  return out;
}

Vector ProbeModel::decision_function(const Matrix& raw) const {
  Normalizer norm{feature_mean, feature_std};
  return (norm.apply(raw) * weights).array() + intercept;
}

double logreg_objective(const Matrix& x, std::span<const int> labels, double c, const Vector& w, double b) {
  const Vector y = signs(labels);
  const Vector margins = (x * w).array() + b;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) loss += softplus(-y(i) * margins(i));
  return 0.5 * w.squaredNorm() / c + loss;
}

Gradient logreg_gradient(const Matrix& x, std::span<const int> labels, double c, const Vector& w, double b) {
  const Vector y = signs(labels);
  const Vector margins = (x * w).array() + b;
  Vector coef(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) coef(i) = -y(i) * sigmoid(-y(i) * margins(i));
  Gradient g;
  g.w = w / c + x.transpose() * coef;
  g.b = coef.sum();
  return g;
}

LogregSolver::LogregSolver(Matrix features, TrainOptions options)
    : x_(std::move(features)), options_(options) {
  if (!x_.allFinite()) throw DomainError("features must be finite");
  if (x_.cols() < x_.rows()) return;  // primal route, no Gram matrix
  gram_ = Matrix::Zero(x_.rows(), x_.rows());
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(x_);
  gram_ = gram_.selfadjointView<Eigen::Lower>();
}

ProbeModel LogregSolver::fit(std::span<const int> labels, double c) const {
  if (static_cast<Eigen::Index>(labels.size()) != x_.rows()) throw DomainError("label count mismatch");
  if (!(c > 0.0)) throw DomainError("C must be positive");
  require_both_classes(labels, "logistic regression");
  if (x_.cols() < x_.rows()) return fit_primal(labels, c);
  const Eigen::Index n = x_.rows();
  const Vector y = signs(labels);
  const Matrix& k = gram_;

  // w = X^T alpha throughout; margins m = K alpha + b.
  Vector alpha = Vector::Zero(n);
  double b = 0.0;
  Vector margins = Vector::Zero(n);

  auto objective = [&](const Vector& a, double bias, Vector& m_out) {
    const Vector ka = k * a;
    m_out = ka.array() + bias;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) loss += softplus(-y(i) * m_out(i));
    return 0.5 * a.dot(ka) / c + loss;
  };

  double f = objective(alpha, b, margins);
  ProbeModel model;
  model.c_value = c;
  int it = 0;
  for (; it < options_.max_iterations; ++it) {
    Vector q(n), d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      q(i) = sigmoid(-y(i) * margins(i));
      const double p = sigmoid(margins(i));
      d(i) = p * (1.0 - p);
    }
    const Vector r = alpha / c - y.cwiseProduct(q);
    const double g_b = -y.dot(q);
    const double g_inf = std::max((x_.transpose() * r).cwiseAbs().maxCoeff(), std::abs(g_b));
    if (g_inf <= options_.gradient_tolerance) {
      model.converged = true;
      break;
    }

    // Newton system on (w, b) reduced to n x n: A^-1 X^T v = X^T T(v) with
    // T(v) = C S M^-1 S^-1 v, M = I + C S K S, S = diag(sqrt(d)).
    const Vector s = d.cwiseMax(1e-200).cwiseSqrt();
    Matrix m = c * (s.asDiagonal() * k * s.asDiagonal());
    m.diagonal().array() += 1.0;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) break;
    auto apply_t = [&](const Vector& v) -> Vector {
      return c * s.cwiseProduct(llt.solve(v.cwiseQuotient(s)));
    };
    const Vector t_r = apply_t(r);
    const Vector t_d = apply_t(d);
    const double schur = std::max(d.sum() - d.dot(k * t_d), 1e-12 * d.sum() + 1e-300);
    const double delta_b = (-g_b + d.dot(k * t_r)) / schur;
    const Vector delta_alpha = apply_t(-r - d * delta_b);

    const double slope = r.dot(k * delta_alpha) + g_b * delta_b;
    if (!(slope < 0.0)) break;
    double step = 1.0;
    Vector trial_margins(n);
    bool accepted = false;
    // Near the optimum the predicted decrease falls below the resolution of
    // f; rounding would then reject good Newton steps, so take them whole.
    const bool negligible = -slope <= 1e-13 * std::max(1.0, std::abs(f));
    for (int ls = 0; ls < 60; ++ls) {
      const Vector trial_alpha = alpha + step * delta_alpha;
      const double trial_b = b + step * delta_b;
      const double trial_f = objective(trial_alpha, trial_b, trial_margins);
      if (negligible || trial_f <= f + 1e-4 * step * slope) {
        alpha = trial_alpha;
        b = trial_b;
        margins = trial_margins;
        f = trial_f;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  model.iterations = it;
  model.weights = x_.transpose() * alpha;
  model.intercept = b;
  model.feature_mean = Vector::Zero(x_.cols());
  model.feature_std = Vector::Ones(x_.cols());
  return model;
}

// Fewer features than rows: Newton on (w, b) directly with a (p+1) x (p+1)
// Hessian. Same objective, stopping rule and line search as the kernel route.
ProbeModel LogregSolver::fit_primal(std::span<const int> labels, double c) const {
  const Eigen::Index n = x_.rows();
  const Eigen::Index p = x_.cols();
  const Vector y = signs(labels);
  Vector w = Vector::Zero(p);
  double b = 0.0;
  Vector margins = Vector::Zero(n);

  auto objective = [&](const Vector& wv, double bias, Vector& m_out) {
    m_out = (x_ * wv).array() + bias;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) loss += softplus(-y(i) * m_out(i));
    return 0.5 * wv.squaredNorm() / c + loss;
  };

  double f = objective(w, b, margins);
  ProbeModel model;
  model.c_value = c;
  int it = 0;
  for (; it < options_.max_iterations; ++it) {
    Vector coef(n), d(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      coef(i) = -y(i) * sigmoid(-y(i) * margins(i));
      const double pr = sigmoid(margins(i));
      d(i) = pr * (1.0 - pr);
    }
    Vector g(p + 1);
    g.head(p) = w / c + x_.transpose() * coef;
    g(p) = coef.sum();
    if (g.cwiseAbs().maxCoeff() <= options_.gradient_tolerance) {
      model.converged = true;
      break;
    }
    Matrix h(p + 1, p + 1);
    const Matrix dx = d.asDiagonal() * x_;
    h.topLeftCorner(p, p) = x_.transpose() * dx;
    h.topLeftCorner(p, p).diagonal().array() += 1.0 / c;
    h.topRightCorner(p, 1) = dx.colwise().sum().transpose();
    h.bottomLeftCorner(1, p) = h.topRightCorner(p, 1).transpose();
    h(p, p) = std::max(d.sum(), 1e-300);
    Eigen::LDLT<Matrix> ldlt(h);
    if (ldlt.info() != Eigen::Success) break;
    const Vector delta = ldlt.solve(-g);
    const double slope = g.dot(delta);
    if (!(slope < 0.0)) break;
    double step = 1.0;
    Vector trial_margins(n);
    bool accepted = false;
    // Near the optimum the predicted decrease falls below the resolution of
    // f; rounding would then reject good Newton steps, so take them whole.
    const bool negligible = -slope <= 1e-13 * std::max(1.0, std::abs(f));
    for (int ls = 0; ls < 60; ++ls) {
      const Vector trial_w = w + step * delta.head(p);
      const double trial_b = b + step * delta(p);
      const double trial_f = objective(trial_w, trial_b, trial_margins);
      if (negligible || trial_f <= f + 1e-4 * step * slope) {
        w = trial_w;
        b = trial_b;
        margins = trial_margins;
        f = trial_f;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
  }
  model.iterations = it;
  model.weights = w;
  model.intercept = b;
  model.feature_mean = Vector::Zero(p);
  model.feature_std = Vector::Ones(p);
  return model;
}

ProbeModel train_logreg(const Matrix& features, std::span<const int> labels, double c, const TrainOptions& options) {
  return LogregSolver(features, options).fit(labels, c);
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw DomainError("scores and labels differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positives = 0.0;
  double rank_sum = 0.0;  // midranks of positives, 1-based
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) {
      if (labels[order[t]] != 0) {
        positives += 1.0;
        rank_sum += midrank;
      }
    }
    i = j + 1;
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0.0 || negatives == 0.0) throw UndefinedAurocError("AUROC undefined for a single class");
  const double u = rank_sum - positives * (positives + 1.0) / 2.0;
  return u / (positives * negatives);
}

BootstrapCi bootstrap_ci(std::span<const double> scores, std::span<const int> labels, int resamples,
                         std::uint64_t seed, double max_degenerate_fraction) {
  if (scores.size() != labels.size()) throw DomainError("scores and labels differ in length");
  require_both_classes(labels, "bootstrap");
  if (resamples < 1) throw DomainError("resamples must be >= 1");
  const std::size_t n = scores.size();
  BootstrapCi out;
  out.resamples = resamples;
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(resamples));
  std::vector<double> s(n);
  std::vector<int> l(n);
  for (int b = 0; b < resamples; ++b) {
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(b)}));
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(rng.below(n));
      s[i] = scores[k];
      l[i] = labels[k];
    }
    if (!both_classes(l)) {
      ++out.degenerate_resamples;
      continue;
    }
    values.push_back(auroc(s, l));
  }
  const double discarded = static_cast<double>(out.degenerate_resamples) / static_cast<double>(resamples);
  if (values.empty() || discarded > max_degenerate_fraction) return out;
  std::sort(values.begin(), values.end());
  out.interval = std::make_pair(quantile_sorted(values, 0.025), quantile_sorted(values, 0.975));
  return out;
}

std::vector<double> default_grid() { return {1e-4, 1e-3, 1e-2, 1e-1, 1e0, 1e1, 1e2}; }

CSelection select_c(const LogregSolver& train, std::span<const int> train_labels, const Matrix& val_x,
                    std::span<const int> val_labels, std::span<const double> grid) {
  if (grid.empty()) throw DomainError("C grid is empty");
  if (!both_classes(val_labels)) throw DomainError("validation split holds a single class");
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());
  CSelection out;
  bool first = true;
  for (double c : sorted) {
    const auto model = train.fit(train_labels, c);
    const Vector scores = (val_x * model.weights).array() + model.intercept;
    const double a = auroc(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())), val_labels);
    out.candidates.emplace_back(c, a);
    if (first || a > out.val_auroc) {
      out.c = c;
      out.val_auroc = a;
      first = false;
    }
  }
  return out;
}

ProbeData probe_data(const Run& run, std::span<const int> layers) {
  const auto& m = run.manifest;
  std::vector<std::size_t> rows;
  for (int layer : layers) {
    auto it = std::find(m.layer_indices.begin(), m.layer_indices.end(), layer);
    if (it == m.layer_indices.end()) throw DomainError("layer " + std::to_string(layer) + " not in run");
    rows.push_back(static_cast<std::size_t>(it - m.layer_indices.begin()));
  }
  ProbeData out;
  const auto n = static_cast<Eigen::Index>(run.records.size());
  const auto d = m.hidden_dim;
  out.features.resize(n, static_cast<Eigen::Index>(rows.size() * d));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = run.records[static_cast<std::size_t>(i)];
    for (std::size_t l = 0; l < rows.size(); ++l) {
      const auto src = r.layer_row(rows[l], d);
      for (std::size_t c = 0; c < d; ++c) {
        out.features(i, static_cast<Eigen::Index>(l * d + c)) = static_cast<double>(src[c]);
      }
    }
    out.labels.push_back(r.correct ? 1 : 0);
    out.item_ids.push_back(r.item_id);
  }
  return out;
}

namespace {

struct Partition {
  Matrix x;
  std::vector<int> y;
};

std::array<Partition, 3> partition(const ProbeData& data, const SplitAssignment& splits) {
  std::array<std::vector<Eigen::Index>, 3> idx;
  for (std::size_t i = 0; i < data.item_ids.size(); ++i) {
    idx[static_cast<std::size_t>(splits.of(data.item_ids[i]))].push_back(static_cast<Eigen::Index>(i));
  }
  std::array<Partition, 3> out;
  for (std::size_t k = 0; k < 3; ++k) {
    out[k].x.resize(static_cast<Eigen::Index>(idx[k].size()), data.features.cols());
    for (std::size_t j = 0; j < idx[k].size(); ++j) {
      out[k].x.row(static_cast<Eigen::Index>(j)) = data.features.row(idx[k][j]);
      out[k].y.push_back(data.labels[static_cast<std::size_t>(idx[k][j])]);
    }
  }
  return out;
}

std::vector<int> resolve_layers(const Run& run, const ProbeConfig& config) {
  return config.layers.empty() ? run.manifest.layer_indices : config.layers;
}

std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

/// Normalizer, selected C and final model for one run's training split.
struct FittedProbe {
  std::optional<ProbeModel> model;  // absent when training is impossible
  std::vector<int> layers;
  double selected_c = 0.0;
  bool c_fallback = false;
  std::string layer_selection = "fixed";
  std::vector<std::string> notes;
  std::optional<LogregSolver> solver;
  std::array<Partition, 3> parts;
};

FittedProbe fit_probe(const Run& run, const SplitAssignment& splits, const ProbeConfig& config) {
  FittedProbe out;
  const auto candidate_layers = resolve_layers(run, config);
  if (config.grid.empty()) throw DomainError("C grid is empty");
  const double smallest_c = *std::min_element(config.grid.begin(), config.grid.end());

  auto prepare = [&](std::span<const int> layers) {
    auto parts = partition(probe_data(run, layers), splits);
    const auto norm = fit_normalizer(parts[0].x);
    for (auto& p : parts) p.x = norm.apply(p.x);
    return std::make_pair(std::move(parts), norm);
  };

  if (config.select_layer_by_validation) {
    out.layer_selection = "validation";
    double best = -1.0;
    int best_layer = candidate_layers.front();
    for (int layer : candidate_layers) {
      const std::array<int, 1> one{layer};
      auto [parts, norm] = prepare(one);
      if (!both_classes(parts[0].y) || !both_classes(parts[1].y)) continue;
      LogregSolver solver(parts[0].x, config.train);
      const auto sel = select_c(solver, parts[0].y, parts[1].x, parts[1].y, config.grid);
      if (sel.val_auroc > best) {
        best = sel.val_auroc;
        best_layer = layer;
      }
    }
    out.layers = {best_layer};
  } else {
    out.layers = candidate_layers;
  }

  auto [parts, norm] = prepare(out.layers);
  out.parts = std::move(parts);
  if (!both_classes(out.parts[0].y)) {
    out.notes.push_back("training split holds a single class; probe not trained");
    return out;
  }
  out.solver.emplace(out.parts[0].x, config.train);
  if (both_classes(out.parts[1].y)) {
    const auto sel = select_c(*out.solver, out.parts[0].y, out.parts[1].x, out.parts[1].y, config.grid);
    out.selected_c = sel.c;
  } else {
    out.selected_c = smallest_c;
    out.c_fallback = true;
    out.notes.push_back("validation split holds a single class; smallest C used");
  }
  auto model = out.solver->fit(out.parts[0].y, out.selected_c);
  if (!model.converged) out.notes.push_back("optimizer stopped before reaching gradient tolerance");
  model.feature_mean = norm.mean;
  model.feature_std = norm.std;
  out.model = std::move(model);
  return out;
}

/// Scores already-normalized rows with a model's raw weights.
Vector score_normalized(const ProbeModel& model, const Matrix& x) {
  return (x * model.weights).array() + model.intercept;
}

}  // namespace

ProbeReport probe_cell(const Run& run, const SplitAssignment& splits, const ProbeConfig& config) {
  auto fitted = fit_probe(run, splits, config);
  ProbeReport report;
  report.layers_used = fitted.layers;
  report.layer_selection = fitted.layer_selection;
  report.selected_c = fitted.selected_c;
  report.c_fallback = fitted.c_fallback;
  report.notes = fitted.notes;
  const auto& test = fitted.parts[2];
  report.positives_test = static_cast<int>(std::count(test.y.begin(), test.y.end(), 1));
  report.negatives_test = static_cast<int>(test.y.size()) - report.positives_test;
  if (!fitted.model) return report;

  const auto& model = *fitted.model;
  const auto& train = fitted.parts[0];
  const Vector train_scores = score_normalized(model, train.x);
  report.train_auroc = auroc(as_span(train_scores), train.y);

  const bool test_ok = both_classes(test.y);
  if (!test_ok) report.notes.push_back("test split holds a single class; AUROC unavailable");
  if (test_ok) {
    const Vector test_scores = score_normalized(model, test.x);
    report.test_auroc = auroc(as_span(test_scores), test.y);
    report.gap = *report.train_auroc - *report.test_auroc;
    const auto ci = bootstrap_ci(as_span(test_scores), test.y, config.resamples, run.manifest.seeds.bootstrap,
                                 config.max_degenerate_fraction);
    report.test_ci = ci.interval;
    report.ci_degenerate_resamples = ci.degenerate_resamples;
    if (!ci.interval) report.notes.push_back("bootstrap CI unavailable: too many single-class resamples");

    for (int rep = 0; rep < std::max(1, config.shuffle_repeats); ++rep) {
      auto permuted = train.y;
      Rng rng(derive_seed(run.manifest.seeds.shuffle, {static_cast<std::uint64_t>(rep)}));
      rng.shuffle(permuted);
      const auto shuffled = fitted.solver->fit(permuted, fitted.selected_c);
      const Vector s = score_normalized(shuffled, test.x);
      report.shuffle_aurocs.push_back(auroc(as_span(s), test.y));
    }
    auto sorted = report.shuffle_aurocs;
    std::sort(sorted.begin(), sorted.end());
    report.shuffle_auroc = quantile_sorted(sorted, 0.5);
  }
  return report;
}

TransferMatrix transfer_matrix(const std::map<Regime, const Run*>& runs, const SplitAssignment& splits,
                               const ProbeConfig& config) {
  TransferMatrix out;
  for (const auto& [regime, run] : runs) out.regimes.push_back(regime);
  const std::size_t r = out.regimes.size();
  out.entries.assign(r, std::vector<std::optional<double>>(r));

  // The shared split must cover every run's items.
  for (const auto& [regime, run] : runs) {
    for (const auto& rec : run->records) (void)splits.of(rec.item_id);
  }

  std::size_t i = 0;
  for (const auto& [train_regime, train_run] : runs) {
    auto fitted = fit_probe(*train_run, splits, config);
    if (fitted.model) {
      const auto& model = *fitted.model;
      std::size_t j = 0;
      for (const auto& [test_regime, test_run] : runs) {
        auto parts = partition(probe_data(*test_run, fitted.layers), splits);
        const auto& test = parts[2];
        if (both_classes(test.y)) {
          const Vector s = model.decision_function(test.x);
          out.entries[i][j] = auroc(as_span(s), test.y);
        }
        ++j;
      }
    }
    ++i;
  }
  return out;
}

}  // namespace intent::probes
