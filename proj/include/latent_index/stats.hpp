#ifndef LATENT_INDEX_STATS_HPP_
#define LATENT_INDEX_STATS_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "latent_index/errors.hpp"

namespace latent_index {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kSqrtPi = 1.77245385090551602729816748334114518;
inline constexpr double kSqrt2 = 1.41421356237309504880168872420969808;
inline constexpr double kLogSqrt2Pi = 0.918938533204672741780329736405617640;

inline double log_sum_exp(std::span<const double> x) {
  if (x.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(x.begin(), x.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : x) s += std::exp(v - m);
  return m + std::log(s);
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 / (1 + exp(-x))) without overflow for large |x|.
inline double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

// log(1 - exp(d)) for d <= 0.
inline double log1m_exp(double d) {
  if (d > -0.6931471805599453) return std::log(-std::expm1(d));
  return std::log1p(-std::exp(d));
}

// log of the standard normal upper tail, log(1 - Phi(x)).
inline double log_normal_upper_tail(double x) {
  if (x == std::numeric_limits<double>::infinity())
    return -std::numeric_limits<double>::infinity();
  if (x < 30.0) return std::log(0.5 * std::erfc(x / kSqrt2));
  // Asymptotic series; at x >= 30 the omitted terms are below 1e-15.
  const double r = 1.0 / (x * x);
  const double series =
      1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r)));
  return -0.5 * x * x - std::log(x) - kLogSqrt2Pi + std::log(series);
}

// log(Phi(hi) - Phi(lo)) for lo < hi; either end may be infinite.
inline double log_normal_interval(double lo, double hi) {
  if (!(lo < hi)) return -std::numeric_limits<double>::infinity();
  if (lo >= 0.0) {
    const double a = log_normal_upper_tail(lo);
    const double b = log_normal_upper_tail(hi);
    return a + log1m_exp(b - a);
  }
  if (hi <= 0.0) {
    const double a = log_normal_upper_tail(-hi);
    const double b = log_normal_upper_tail(-lo);
    return a + log1m_exp(b - a);
  }
  const double tails = std::exp(log_normal_upper_tail(-lo)) +
                       std::exp(log_normal_upper_tail(hi));
  return std::log1p(-tails);
}

// Interpolated empirical quantile of sorted data ("type 7"):
// h = (n - 1) p, linear interpolation between order statistics.
inline double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw InvalidArgument("quantile of empty sample");
  if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("quantile level outside [0,1]");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted[sorted.size() - 1];
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

inline double quantile(std::vector<double> values, double p) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, p);
}

inline double median(std::vector<double> values) {
  return quantile(std::move(values), 0.5);
}

inline double interquartile_range(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, 0.75) - quantile_sorted(values, 0.25);
}

inline double mean(std::span<const double> values) {
  if (values.empty()) throw InvalidArgument("mean of empty sample");
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

// Inverse of the weighted empirical CDF: the smallest value whose cumulative
// weight reaches p * total. This is a minimizer of the weighted check loss.
inline double weighted_quantile(std::span<const double> values,
                                std::span<const double> weights, double p) {
  if (values.empty() || values.size() != weights.size())
    throw InvalidArgument("weighted quantile: size mismatch or empty sample");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  const double target = p * total;
  double cum = 0.0;
  for (std::size_t i : order) {
    cum += weights[i];
    if (cum >= target) return values[i];
  }
  return values[order.back()];
}

inline double weighted_mean(std::span<const double> values,
                            std::span<const double> weights) {
  if (values.empty() || values.size() != weights.size())
    throw InvalidArgument("weighted mean: size mismatch or empty sample");
  double s = 0.0, w = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    s += weights[i] * values[i];
    w += weights[i];
  }
  return s / w;
}

// Welford accumulator. Feeding the same value repeatedly leaves the mean
// bit-identical to that value.
class RunningMoments {
 public:
  void add(double x) {
    ++count_;
    if (count_ == 1) {
      mean_ = x;
      m2_ = 0.0;
      return;
    }
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }
  std::size_t count() const { return count_; }
  double mean() const { return mean_; }
  // Sample variance with n - 1 denominator; zero for fewer than two values.
  double variance() const {
    return count_ > 1 ? m2_ / static_cast<double>(count_ - 1) : 0.0;
  }

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

}  // namespace latent_index

#endif  // LATENT_INDEX_STATS_HPP_
