#ifndef LATENT_INDEX_OPTIMIZE_HPP_
#define LATENT_INDEX_OPTIMIZE_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace latent_index {

// Golden-section search for the maximum of a unimodal f on [lo, hi].
template <class F>
double golden_section_max(F&& f, double lo, double hi, double tol = 1e-10,
                          int max_iter = 300) {
  constexpr double kInvPhi = 0.6180339887498948482;
  double a = lo, b = hi;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < max_iter && (b - a) > tol * (1.0 + std::abs(a) + std::abs(b)); ++it) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = f(d);
    }
  }
  return fc >= fd ? c : d;
}

struct NelderMeadOptions {
  double initial_step = 0.1;  // simplex edge length along each axis
  double ftol = 1e-10;        // spread of function values across the simplex
  double xtol = 1e-8;         // simplex diameter
  int max_evals = 20000;
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

// Nelder-Mead simplex maximization of f: R^d -> R. Non-finite values are
// treated as -infinity.
template <class F>
NelderMeadResult nelder_mead_max(F&& f, const Eigen::VectorXd& start,
                                 const NelderMeadOptions& opt = {}) {
  const Eigen::Index d = start.size();
  const auto eval = [&](const Eigen::VectorXd& x) {
    const double v = f(x);
    return std::isfinite(v) ? v : -std::numeric_limits<double>::infinity();
  };
  std::vector<Eigen::VectorXd> pts(d + 1, start);
  std::vector<double> vals(d + 1);
  for (Eigen::Index i = 0; i < d; ++i) pts[i + 1][i] += opt.initial_step;
  NelderMeadResult res;
  for (Eigen::Index i = 0; i <= d; ++i) vals[i] = eval(pts[i]);
  res.evaluations = static_cast<int>(d + 1);

  std::vector<Eigen::Index> order(d + 1);
  while (res.evaluations < opt.max_evals) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return vals[a] > vals[b]; });
    const Eigen::Index best = order.front(), worst = order.back(), second = order[d - 1];
    double diam = 0.0;
    for (Eigen::Index i = 0; i <= d; ++i)
      diam = std::max(diam, (pts[i] - pts[best]).lpNorm<Eigen::Infinity>());
    const double spread = vals[best] - vals[worst];
    if (std::isfinite(spread) &&
        spread <= opt.ftol * (1.0 + std::abs(vals[best])) && diam <= opt.xtol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (Eigen::Index i = 0; i <= d; ++i)
      if (i != worst) centroid += pts[i];
    centroid /= static_cast<double>(d);

    const Eigen::VectorXd refl = centroid + (centroid - pts[worst]);
    const double fr = eval(refl);
    ++res.evaluations;
    if (fr > vals[best]) {
      const Eigen::VectorXd exp = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = eval(exp);
      ++res.evaluations;
      if (fe > fr) {
        pts[worst] = exp;
        vals[worst] = fe;
      } else {
        pts[worst] = refl;
        vals[worst] = fr;
      }
      continue;
    }
    if (fr > vals[second]) {
      pts[worst] = refl;
      vals[worst] = fr;
      continue;
    }
    const bool outside = fr > vals[worst];
    const Eigen::VectorXd con = outside ? Eigen::VectorXd(centroid + 0.5 * (refl - centroid))
                                        : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = eval(con);
    ++res.evaluations;
    if (fc > (outside ? fr : vals[worst])) {
      pts[worst] = con;
      vals[worst] = fc;
      continue;
    }
    // Shrink towards the best vertex.
    for (Eigen::Index i = 0; i <= d; ++i) {
      if (i == best) continue;
      pts[i] = pts[best] + 0.5 * (pts[i] - pts[best]);
      vals[i] = eval(pts[i]);
      ++res.evaluations;
    }
  }
  const auto it = std::max_element(vals.begin(), vals.end());
  res.x = pts[static_cast<std::size_t>(it - vals.begin())];
  res.value = *it;
  return res;
}

}  // namespace latent_index

#endif  // LATENT_INDEX_OPTIMIZE_HPP_
