#pragma once

// Slow, independent reference computations used only by the tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace oracle {

/// -sum p log2 p in long double, straight from the definition (no shift tricks
/// beyond subtracting the max to stay finite).
inline long double entropy_bits(std::span<const double> logits) {
  long double mx = logits[0];
  for (double v : logits) mx = std::max<long double>(mx, v);
  std::vector<long double> w(logits.size());
  long double z = 0.0L;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    w[i] = std::exp(static_cast<long double>(logits[i]) - mx);
    z += w[i];
  }
  long double h = 0.0L;
  for (long double wi : w) {
    const long double p = wi / z;
    if (p > 0.0L) h -= p * std::log2(p);
  }
  return h;
}

/// Count positive/negative pairs directly.
inline double pair_count_auroc(std::span<const double> scores, std::span<const int> labels) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      pairs += 1.0;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / pairs;
}

/// Cyclic Jacobi eigenvalues of a symmetric matrix (row-major n x n),
/// descending.
inline std::vector<long double> jacobi_eigenvalues(std::vector<long double> a, std::size_t n) {
  auto at = [&](std::size_t i, std::size_t j) -> long double& { return a[i * n + j]; };
  for (int sweep = 0; sweep < 100; ++sweep) {
    long double off = 0.0L;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
    if (off < 1e-36L) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (at(p, q) == 0.0L) continue;
        const long double theta = (at(q, q) - at(p, p)) / (2.0L * at(p, q));
        const long double t = (theta >= 0 ? 1.0L : -1.0L) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0L));
        const long double c = 1.0L / std::sqrt(t * t + 1.0L);
        const long double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const long double akp = at(k, p), akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const long double apk = at(p, k), aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<long double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = at(i, i);
  std::sort(out.rbegin(), out.rend());
  return out;
}

/// Sample covariance (N-1) of row-major N x d data, in long double.
inline std::vector<long double> covariance(const std::vector<double>& rows, std::size_t n, std::size_t d) {
  std::vector<long double> mean(d, 0.0L), cov(d * d, 0.0L);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += rows[i * d + j];
  for (auto& m : mean) m /= static_cast<long double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b)
        cov[a * d + b] += (rows[i * d + a] - mean[a]) * (rows[i * d + b] - mean[b]);
  for (auto& c : cov) c /= static_cast<long double>(n - 1);
  return cov;
}

/// Central difference of f along coordinate k of x.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, std::size_t k, double h) {
  const double x0 = x[k];
  x[k] = x0 + h;
  const double up = f(x);
  x[k] = x0 - h;
  const double down = f(x);
  return (up - down) / (2.0 * h);
}

/// Exact rational value of a plain decimal string as (numerator digits,
/// exponent) with trailing zeros stripped, for comparing numbers without
/// floating point. "42.0" -> ("42", 0), "-1.50" -> ("-15", -1).
inline std::pair<std::string, int> decimal_value(const std::string& text) {
  std::string digits;
  int exponent = 0;
  bool negative = false, seen_point = false;
  for (char ch : text) {
    if (ch == '-') negative = true;
    else if (ch == '.') seen_point = true;
    else if (ch >= '0' && ch <= '9') {
      digits += ch;
      if (seen_point) --exponent;
    }
  }
  digits.erase(0, std::min(digits.find_first_not_of('0'), digits.size()));
  if (digits.empty()) return {"0", 0};
  while (digits.size() > 1 && digits.back() == '0') {
    digits.pop_back();
    ++exponent;
  }
  return {(negative ? "-" : "") + digits, exponent};
}

}  // namespace oracle
