#ifndef LATENT_INDEX_QUADRATURE_HPP_
#define LATENT_INDEX_QUADRATURE_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <utility>
#include <string>
#include <vector>

#include "latent_index/errors.hpp"
#include "latent_index/stats.hpp"

namespace latent_index {

inline constexpr int kDefaultQuadratureOrder = 61;
inline constexpr int kMaxQuadratureOrder = 200;

// Physicists' Gauss-Hermite rule: sum_i weights[i] f(nodes[i]) approximates
// the integral of f(x) exp(-x^2) over the real line.
struct HermiteRule {
  int order = 0;
  std::vector<double> nodes;    // ascending, symmetric about 0
  std::vector<double> weights;  // positive, sum to sqrt(pi)
};

namespace detail {

// Orthonormal Hermite polynomials h_0..h_n at x; returns {h_n, h_{n-1}} and
// accumulates sum_{k<n} h_k^2 into *christoffel_sum.
inline std::pair<double, double> orthonormal_hermite(int n, double x,
                                                     double* christoffel_sum) {
  double prev = 0.0;
  double cur = 1.0 / std::sqrt(kSqrtPi);
  double sum = 0.0;
  for (int k = 0; k < n; ++k) {
    sum += cur * cur;
    const double next = std::sqrt(2.0 / (k + 1)) * x * cur -
                        std::sqrt(static_cast<double>(k) / (k + 1)) * prev;
    prev = cur;
    cur = next;
  }
  if (christoffel_sum != nullptr) *christoffel_sum = sum;
  return {cur, prev};
}

}  // namespace detail

// Golub-Welsch: nodes are the eigenvalues of the symmetric Jacobi matrix of
// the Hermite recurrence. Nodes get a Newton polish; weights come from the
// Christoffel function 1 / sum_k h_k(x)^2, which keeps tail weights accurate
// to full relative precision where squared eigenvector entries would not.
inline HermiteRule hermite_rule(int order) {
  if (order < 1 || order > kMaxQuadratureOrder) {
    throw InvalidArgument("hermite_rule: order must be in [1, " +
                          std::to_string(kMaxQuadratureOrder) + "], got " +
                          std::to_string(order));
  }
  const auto n = static_cast<Eigen::Index>(order);
  Eigen::VectorXd diag = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sub(std::max<Eigen::Index>(n - 1, 0));
  for (Eigen::Index k = 1; k < n; ++k) sub[k - 1] = std::sqrt(0.5 * static_cast<double>(k));

  std::vector<double> nodes(order, 0.0);
  if (order > 1) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
      throw NumericalError("hermite_rule: Jacobi eigen-decomposition failed");
    for (int i = 0; i < order; ++i) nodes[i] = solver.eigenvalues()[i];
  }

  std::vector<double> weights(order);
  for (int i = 0; i < order; ++i) {
    double x = nodes[i];
    for (int it = 0; it < 2 && order > 1; ++it) {
      const auto [hn, hn1] = detail::orthonormal_hermite(order, x, nullptr);
      const double deriv = std::sqrt(2.0 * order) * hn1;
      if (deriv != 0.0) x -= hn / deriv;
    }
    nodes[i] = x;
    double sum = 0.0;
    detail::orthonormal_hermite(order, x, &sum);
    weights[i] = 1.0 / sum;
  }

  for (int i = 0; i < order / 2; ++i) {
    const int j = order - 1 - i;
    const double x = 0.5 * (nodes[j] - nodes[i]);
    const double w = 0.5 * (weights[i] + weights[j]);
    nodes[i] = -x;
    nodes[j] = x;
    weights[i] = weights[j] = w;
  }
  if (order % 2 == 1) nodes[order / 2] = 0.0;

  return HermiteRule{order, std::move(nodes), std::move(weights)};
}

// A rule mapped to the standard normal: points z_q = sqrt(2) x_q and
// probabilities nu_q = w_q / sqrt(pi). This is the only place the change of
// variables happens.
struct StandardNormalGrid {
  std::vector<double> points;
  std::vector<double> probs;
  std::vector<double> log_probs;
};

inline StandardNormalGrid standard_normal_grid(const HermiteRule& rule) {
  StandardNormalGrid g;
  const std::size_t n = rule.nodes.size();
  g.points.resize(n);
  g.probs.resize(n);
  g.log_probs.resize(n);
  for (std::size_t q = 0; q < n; ++q) {
    g.points[q] = kSqrt2 * rule.nodes[q];
    g.probs[q] = rule.weights[q] / kSqrtPi;
    g.log_probs[q] = std::log(g.probs[q]);
  }
  return g;
}

// E[f(Z)] for Z ~ N(0, 1).
template <class F>
double gaussian_expectation(F&& f, const HermiteRule& rule) {
  const StandardNormalGrid g = standard_normal_grid(rule);
  double sum = 0.0;
  for (std::size_t q = 0; q < g.points.size(); ++q) {
    const double v = f(g.points[q]);
    if (!std::isfinite(v))
      throw NumericalDomainError("gaussian_expectation: non-finite integrand", q);
    sum += g.probs[q] * v;
  }
  return sum;
}

// log E[exp(log_f(Z))], evaluated with log-sum-exp over the nodes.
template <class F>
double log_gaussian_expectation(F&& log_f, const StandardNormalGrid& grid) {
  std::vector<double> terms(grid.points.size());
  for (std::size_t q = 0; q < grid.points.size(); ++q) {
    const double v = log_f(grid.points[q]);
    if (std::isnan(v) || v == std::numeric_limits<double>::infinity())
      throw NumericalDomainError("log_gaussian_expectation: invalid log integrand", q);
    terms[q] = grid.log_probs[q] + v;
  }
  return log_sum_exp(terms);
}

}  // namespace latent_index

#endif  // LATENT_INDEX_QUADRATURE_HPP_
