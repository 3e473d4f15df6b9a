#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace spo::math {

// log(1 + exp(x)) without overflow.
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline double log_sigmoid(double x) { return -softplus(-x); }

inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

// In-place log-softmax. Returns the log normalizer.
inline double log_softmax_inplace(std::span<double> xs) {
  const double lse = log_sum_exp(xs);
  for (double& x : xs) x -= lse;
  return lse;
}

inline std::vector<double> softmax(std::span<const double> xs) {
  std::vector<double> out(xs.begin(), xs.end());
  log_softmax_inplace(out);
  for (double& x : out) x = std::exp(x);
  return out;
}

inline bool all_finite(std::span<const double> xs) {
  return std::all_of(xs.begin(), xs.end(), [](double x) { return std::isfinite(x); });
}

inline double l2_norm(std::span<const double> xs) {
  double s = 0.0;
  for (double x : xs) s += x * x;
  return std::sqrt(s);
}

// Ranks starting at 1; tied values share the mean of their ranks.
inline std::vector<double> ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> r(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double mean = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = mean;
    i = j + 1;
  }
  return r;
}

// Spearman rank correlation: Pearson correlation of the ranks. NaN when
// either side is constant.
inline double spearman(std::span<const double> xs, std::span<const double> ys) {
  const auto rx = ranks(xs), ry = ranks(ys);
  const double n = static_cast<double>(rx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) mx += rx[i] / n, my += ry[i] / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace spo::math
