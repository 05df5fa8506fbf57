#ifndef LATENT_INDEX_QUANTILE_MIXED_HPP_
#define LATENT_INDEX_QUANTILE_MIXED_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "latent_index/errors.hpp"
#include "latent_index/optimize.hpp"
#include "latent_index/quadrature.hpp"
#include "latent_index/rng.hpp"
#include "latent_index/stats.hpp"

namespace latent_index {

// Responses with a fixed-effect design and a group label per row. Group
// weights are keyed by label; an empty map means unit weights.
struct GroupedData {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  std::vector<std::string> group;
  std::map<std::string, double> group_weights;
  std::vector<std::string> column_names;
};

inline double check_loss(double r, double tau) {
  return r < 0.0 ? r * (tau - 1.0) : r * tau;
}

// Asymmetric Laplace log-density with location 0, scale sigma and skewness
// tau; its mode is 0 and its tau-quantile is 0.
inline double ald_logdensity(double r, double sigma, double tau) {
  return std::log(tau * (1.0 - tau)) - std::log(sigma) - check_loss(r, tau) / sigma;
}

namespace detail {

inline void check_tau(double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in (0, 1)");
}

// Rows of each group, groups in label order, with weights as supplied.
struct GroupIndex {
  std::vector<std::string> labels;
  std::vector<std::vector<Eigen::Index>> rows;
  std::vector<double> weights;
};

inline GroupIndex index_groups(const GroupedData& data) {
  const Eigen::Index n = data.y.size();
  if (n == 0) throw ValidationError("grouped data: no rows");
  if (data.X.rows() != n || static_cast<Eigen::Index>(data.group.size()) != n)
    throw SchemaError("grouped data: y, X and group sizes differ");
  if (data.X.cols() == 0) throw SchemaError("grouped data: empty design");
  if (!data.y.allFinite() || !data.X.allFinite())
    throw ValidationError("grouped data: non-finite response or design value");
  if (!data.column_names.empty() &&
      static_cast<Eigen::Index>(data.column_names.size()) != data.X.cols())
    throw SchemaError("grouped data: column_names size differs from design");
  std::map<std::string, std::vector<Eigen::Index>> by_label;
  for (Eigen::Index i = 0; i < n; ++i) by_label[data.group[i]].push_back(i);
  GroupIndex g;
  for (auto& [label, rows] : by_label) {
    double w = 1.0;
    if (!data.group_weights.empty()) {
      const auto it = data.group_weights.find(label);
      if (it == data.group_weights.end())
        throw ValidationError("grouped data: no weight for group '" + label + "'");
      w = it->second;
    }
    if (!(w > 0.0) || !std::isfinite(w))
      throw ValidationError("grouped data: weight of group '" + label + "' must be positive");
    g.labels.push_back(label);
    g.rows.push_back(std::move(rows));
    g.weights.push_back(w);
  }
  for (const auto& [label, w] : data.group_weights)
    if (!by_label.contains(label))
      throw ValidationError("grouped data: weighted group '" + label + "' has no rows");
  return g;
}

// Sum of check losses over residuals r is linear in u between consecutive
// order statistics, so the ALD x normal integral is a sum of Gaussian
// interval masses. For piece m (u between r_(m) and r_(m+1)):
//   S(u) = a + b u,  b = (1 - tau) m - tau (n - m)
// and exp(-S/sigma) N(u; 0, psi^2) integrates in closed form.
struct Piece {
  double log_mass;  // log of the integral over the piece, excluding the n log(tau(1-tau)/sigma) term
  double mu;        // mean of the tilted normal on this piece
  double lo, hi;    // standardized piece bounds
};

inline void pieces(std::vector<double>& r, double psi, double sigma, double tau,
                   std::vector<Piece>& out) {
  std::sort(r.begin(), r.end());
  const std::size_t n = r.size();
  double right = 0.0;  // sum of r_(k) for k > m
  for (double v : r) right += v;
  double left = 0.0;
  out.resize(n + 1);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m <= n; ++m) {
    if (m > 0) {
      left += r[m - 1];
      right -= r[m - 1];
    }
    const double md = static_cast<double>(m);
    const double b = (1.0 - tau) * md - tau * (static_cast<double>(n) - md);
    const double a = tau * right - (1.0 - tau) * left;
    const double c = -b / sigma;
    const double mu = c * psi * psi;
    const double lo = m == 0 ? -kInf : (r[m - 1] - mu) / psi;
    const double hi = m == n ? kInf : (r[m] - mu) / psi;
    out[m] = {-a / sigma + 0.5 * c * mu + log_normal_interval(lo, hi), mu, lo, hi};
  }
}

inline double log_normal_density(double z) {
  return std::isinf(z) ? -std::numeric_limits<double>::infinity() : -0.5 * z * z - kLogSqrt2Pi;
}

inline double group_loglik(std::vector<double>& r, double psi2, double sigma, double tau,
                           std::vector<Piece>& buf) {
  const double n = static_cast<double>(r.size());
  if (psi2 == 0.0) {
    double s = 0.0;
    for (double v : r) s += ald_logdensity(v, sigma, tau);
    return s;
  }
  pieces(r, std::sqrt(psi2), sigma, tau, buf);
  std::vector<double> lm(buf.size());
  for (std::size_t m = 0; m < buf.size(); ++m) lm[m] = buf[m].log_mass;
  return n * (std::log(tau * (1.0 - tau)) - std::log(sigma)) + log_sum_exp(lm);
}

// Posterior mean of the group effect: a mixture of truncated normals.
inline double group_posterior_mean(std::vector<double>& r, double psi2, double sigma, double tau,
                                   std::vector<Piece>& buf) {
  if (psi2 == 0.0) return 0.0;
  const double psi = std::sqrt(psi2);
  pieces(r, psi, sigma, tau, buf);
  std::vector<double> lm(buf.size());
  for (std::size_t m = 0; m < buf.size(); ++m) lm[m] = buf[m].log_mass;
  const double total = log_sum_exp(lm);
  double mean = 0.0;
  for (const Piece& p : buf) {
    if (p.log_mass == -std::numeric_limits<double>::infinity()) continue;
    const double log_z = log_normal_interval(p.lo, p.hi);
    // mean of N(mu, psi^2) truncated to the piece
    const double tm = p.mu + psi * (std::exp(log_normal_density(p.lo) - log_z) -
                                    std::exp(log_normal_density(p.hi) - log_z));
    mean += std::exp(p.log_mass - total) * tm;
  }
  return mean;
}

inline void group_residuals(const GroupedData& data, const std::vector<Eigen::Index>& rows,
                            const Eigen::VectorXd& gamma, std::vector<double>& r) {
  r.resize(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k)
    r[k] = data.y[rows[k]] - data.X.row(rows[k]).dot(gamma);
}

inline void check_lqmm_params(const GroupedData& data, const Eigen::VectorXd& gamma, double psi2,
                              double sigma, double tau) {
  check_tau(tau);
  if (gamma.size() != data.X.cols()) throw SchemaError("lqmm: gamma size differs from design");
  if (!(psi2 >= 0.0) || !(sigma > 0.0)) throw InvalidArgument("lqmm: need psi2 >= 0 and sigma > 0");
}

inline double lqmm_loglik_indexed(const GroupedData& data, const GroupIndex& g,
                                  const Eigen::VectorXd& gamma, double psi2, double sigma,
                                  double tau) {
  std::vector<double> r;
  std::vector<Piece> buf;
  double ll = 0.0;
  for (std::size_t j = 0; j < g.rows.size(); ++j) {
    group_residuals(data, g.rows[j], gamma, r);
    ll += g.weights[j] * group_loglik(r, psi2, sigma, tau, buf);
  }
  return ll;
}

}  // namespace detail

// Weighted marginal ALD log-likelihood with a normal random intercept per
// group, integrated exactly (piecewise closed form).
inline double lqmm_loglik(const GroupedData& data, const Eigen::VectorXd& gamma, double psi2,
                          double sigma, double tau) {
  detail::check_lqmm_params(data, gamma, psi2, sigma, tau);
  const double ll =
      detail::lqmm_loglik_indexed(data, detail::index_groups(data), gamma, psi2, sigma, tau);
  if (!std::isfinite(ll)) throw NumericalDomainError("lqmm_loglik: non-finite value", 0);
  return ll;
}

// Same quantity by Gauss-Hermite quadrature over u = psi z. The integrand
// has kinks at every residual, so the rule converges slowly when psi is
// large relative to sigma.
inline double lqmm_loglik(const GroupedData& data, const Eigen::VectorXd& gamma, double psi2,
                          double sigma, double tau, const HermiteRule& rule) {
  detail::check_lqmm_params(data, gamma, psi2, sigma, tau);
  const detail::GroupIndex g = detail::index_groups(data);
  const StandardNormalGrid grid = standard_normal_grid(rule);
  const double psi = std::sqrt(psi2);
  std::vector<double> r;
  double ll = 0.0;
  for (std::size_t j = 0; j < g.rows.size(); ++j) {
    detail::group_residuals(data, g.rows[j], gamma, r);
    ll += g.weights[j] * log_gaussian_expectation(
                             [&](double z) {
                               double s = 0.0;
                               for (double v : r) s += ald_logdensity(v - psi * z, sigma, tau);
                               return s;
                             },
                             grid);
  }
  return ll;
}

struct LqmmConfig {
  int restarts = 5;              // optimizer runs; the first starts from the data-driven start
  double restart_jitter = 0.5;   // scale of the perturbation of later starts
  std::uint64_t restart_seed = 0;
  NelderMeadOptions optimizer{0.25, 1e-12, 1e-7, 20000};
  bool pin_psi2_zero = false;    // fixed-effects quantile regression
};

struct QuantileMixedFit {
  double tau = 0.5;
  Eigen::VectorXd gamma;
  double psi2 = 0.0;
  double sigma = 1.0;
  std::vector<std::string> groups;     // label order
  std::vector<double> group_weights;   // normalized to sum to the group count
  std::vector<double> u;               // posterior mean effect per group
  std::vector<std::string> column_names;
  double loglik = 0.0;
  bool converged = false;
  int evaluations = 0;

  double effect(const std::string& group) const {
    const auto it = std::lower_bound(groups.begin(), groups.end(), group);
    if (it == groups.end() || *it != group)
      throw InvalidArgument("unknown group '" + group + "'");
    return u[static_cast<std::size_t>(it - groups.begin())];
  }
};

namespace detail {

inline GroupIndex normalized(GroupIndex g) {
  double total = 0.0;
  for (double w : g.weights) total += w;
  const double scale = static_cast<double>(g.weights.size()) / total;
  for (double& w : g.weights) w *= scale;
  return g;
}

// Minimizes sum_k w_k rho_tau(e_k - x_k g) over scalar g. Each row with
// x_k != 0 contributes a kink at e_k / x_k; walk the kinks until the
// subgradient turns nonnegative.
inline double weighted_check_argmin(const std::vector<double>& e, const std::vector<double>& x,
                                    const std::vector<double>& w, double tau, double current) {
  struct Kink {
    double at, weight, lead;
  };
  std::vector<Kink> kinks;
  double slope = 0.0;
  for (std::size_t k = 0; k < e.size(); ++k) {
    if (x[k] == 0.0) continue;
    const double t = x[k] > 0.0 ? tau : 1.0 - tau;
    const double aw = w[k] * std::abs(x[k]);
    kinks.push_back({e[k] / x[k], aw, t});
    slope -= aw * t;
  }
  if (kinks.empty()) return current;
  std::stable_sort(kinks.begin(), kinks.end(),
                   [](const Kink& a, const Kink& b) { return a.at < b.at; });
  for (const Kink& k : kinks) {
    slope += k.weight;
    if (slope >= 0.0) return k.at;
  }
  return kinks.back().at;
}

// Weighted quantile regression without random effects by cyclic coordinate
// steps. Not a global solver for P > 1 but a sound starting point.
inline Eigen::VectorXd coordinate_quantile_regression(const GroupedData& data,
                                                      const std::vector<double>& row_w,
                                                      double tau) {
  const Eigen::Index n = data.y.size(), P = data.X.cols();
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(P);
  Eigen::VectorXd fitted = Eigen::VectorXd::Zero(n);
  std::vector<double> e(n), x(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double change = 0.0;
    for (Eigen::Index p = 0; p < P; ++p) {
      for (Eigen::Index i = 0; i < n; ++i) {
        x[i] = data.X(i, p);
        e[i] = data.y[i] - fitted[i] + x[i] * gamma[p];
      }
      const double next = weighted_check_argmin(e, x, row_w, tau, gamma[p]);
      const double delta = next - gamma[p];
      if (delta != 0.0) {
        fitted += delta * data.X.col(p);
        gamma[p] = next;
        change = std::max(change, std::abs(delta));
      }
    }
    if (change < 1e-12) break;
  }
  return gamma;
}

struct LqmmStart {
  Eigen::VectorXd gamma;
  double psi2, sigma;
};

inline LqmmStart lqmm_start(const GroupedData& data, const GroupIndex& g, double tau) {
  std::vector<double> row_w(data.y.size());
  for (std::size_t j = 0; j < g.rows.size(); ++j)
    for (Eigen::Index i : g.rows[j]) row_w[i] = g.weights[j];
  LqmmStart s;
  s.gamma = coordinate_quantile_regression(data, row_w, tau);
  const Eigen::VectorXd r = data.y - data.X * s.gamma;
  double loss = 0.0, wsum = 0.0;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    loss += row_w[i] * check_loss(r[i], tau);
    wsum += row_w[i];
  }
  s.sigma = std::max(loss / wsum, 1e-8);
  RunningMoments between;
  for (const auto& rows : g.rows) {
    std::vector<double> rg;
    for (Eigen::Index i : rows) rg.push_back(r[i]);
    between.add(quantile(std::move(rg), tau));
  }
  const double v = between.count() > 1 ? between.variance() : 0.0;
  s.psi2 = std::max(v, 0.01 * s.sigma * s.sigma);
  return s;
}

// Parameter vector (gamma, log psi2, log sigma); psi2 absent when pinned.
inline Eigen::VectorXd pack(const Eigen::VectorXd& gamma, double psi2, double sigma, bool pinned) {
  const Eigen::Index P = gamma.size();
  Eigen::VectorXd th(P + (pinned ? 1 : 2));
  th.head(P) = gamma;
  if (!pinned) th[P] = std::log(psi2);
  th[th.size() - 1] = std::log(sigma);
  return th;
}

inline QuantileMixedFit fit_from(const GroupedData& data, const GroupIndex& g, double tau,
                                 const LqmmConfig& config, const LqmmStart& start) {
  const Eigen::Index P = data.X.cols();
  const bool pinned = config.pin_psi2_zero;
  const auto unpack_psi2 = [&](const Eigen::VectorXd& th) {
    return pinned ? 0.0 : std::exp(th[P]);
  };
  const auto objective = [&](const Eigen::VectorXd& th) {
    const double sigma = std::exp(th[th.size() - 1]);
    const double psi2 = unpack_psi2(th);
    if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(psi2))
      return -std::numeric_limits<double>::infinity();
    return lqmm_loglik_indexed(data, g, th.head(P), psi2, sigma, tau);
  };

  Eigen::VectorXd best_x = pack(start.gamma, start.psi2, start.sigma, pinned);
  double best_v = objective(best_x);
  int evals = 0;
  std::vector<std::pair<double, bool>> runs;
  Rng rng(derive_seed(config.restart_seed, {0x7175616e74ULL}));
  std::normal_distribution<double> z(0.0, 1.0);
  for (int run = 0; run < std::max(config.restarts, 1); ++run) {
    Eigen::VectorXd from = best_x;
    if (run > 0)
      for (Eigen::Index i = 0; i < from.size(); ++i)
        from[i] += config.restart_jitter * (0.1 + 0.1 * std::abs(from[i])) * z(rng);
    const NelderMeadResult res = nelder_mead_max(objective, from, config.optimizer);
    evals += res.evaluations;
    runs.emplace_back(res.value, res.converged);
    if (res.value >= best_v) {
      best_v = res.value;
      best_x = res.x;
    }
  }
  // Converged if some run that terminated normally reached the best value.
  bool converged = false;
  for (const auto& [v, ok] : runs)
    converged = converged || (ok && v >= best_v - 1e-7 * (1.0 + std::abs(best_v)));
  if (!std::isfinite(best_v)) throw NumericalError("fit_lqmm: log-likelihood is not finite");

  QuantileMixedFit fit;
  fit.tau = tau;
  fit.gamma = best_x.head(P);
  fit.psi2 = unpack_psi2(best_x);
  fit.sigma = std::exp(best_x[best_x.size() - 1]);
  fit.groups = g.labels;
  fit.group_weights = g.weights;
  fit.column_names = data.column_names;
  fit.loglik = best_v;
  fit.converged = converged;
  fit.evaluations = evals;
  std::vector<double> r;
  std::vector<Piece> buf;
  for (const auto& rows : g.rows) {
    group_residuals(data, rows, fit.gamma, r);
    fit.u.push_back(group_posterior_mean(r, fit.psi2, fit.sigma, tau, buf));
  }
  return fit;
}

}  // namespace detail

// Linear quantile mixed model with one normal random intercept per group,
// fitted by maximizing the weighted ALD marginal likelihood. Group weights
// are normalized to sum to the number of groups. Group effects are
// posterior means at the fitted parameters.
inline QuantileMixedFit fit_lqmm(const GroupedData& data, double tau, const LqmmConfig& config = {}) {
  detail::check_tau(tau);
  const detail::GroupIndex g = detail::normalized(detail::index_groups(data));
  return detail::fit_from(data, g, tau, config, detail::lqmm_start(data, g, tau));
}

// Refit from given parameters instead of the data-driven start.
inline QuantileMixedFit fit_lqmm_from(const GroupedData& data, double tau,
                                      const QuantileMixedFit& warm, const LqmmConfig& config) {
  detail::check_tau(tau);
  const detail::GroupIndex g = detail::normalized(detail::index_groups(data));
  if (warm.gamma.size() != data.X.cols()) throw SchemaError("warm start has wrong dimension");
  const double psi2 = config.pin_psi2_zero ? 0.0 : std::max(warm.psi2, 1e-8 * warm.sigma * warm.sigma);
  return detail::fit_from(data, g, tau, config, {warm.gamma, psi2, warm.sigma});
}

// Posterior mean group effects for `data` under the parameters of `fit`.
inline std::vector<double> group_effects(const QuantileMixedFit& fit, const GroupedData& data) {
  const detail::GroupIndex g = detail::index_groups(data);
  std::vector<double> u, r;
  std::vector<detail::Piece> buf;
  for (const auto& rows : g.rows) {
    detail::group_residuals(data, rows, fit.gamma, r);
    u.push_back(detail::group_posterior_mean(r, fit.psi2, fit.sigma, fit.tau, buf));
  }
  return u;
}

struct BootstrapResult {
  int requested = 0;
  int dropped = 0;
  std::uint64_t seed = 0;
  std::vector<Eigen::VectorXd> gamma;          // per kept replicate
  std::vector<double> psi2, sigma;
  std::vector<std::vector<double>> u;          // per kept replicate, effects of the original groups
  Eigen::VectorXd std_error, ci_low, ci_high;  // per fixed effect
};

struct BootstrapOptions {
  int threads = 1;
  LqmmConfig refit{1, 0.5, 0, {0.1, 1e-12, 1e-7, 20000}, false};
};

// Cluster bootstrap: groups are resampled with replacement (each copy keeps
// its weight), the model is refitted from the original estimates, and
// percentile intervals are taken over the replicates. Replicate b draws from
// substream (seed, b), so the result does not depend on `threads`.
inline BootstrapResult bootstrap_fits(const GroupedData& data, const QuantileMixedFit& fit, int B,
                                      std::uint64_t seed, const BootstrapOptions& options = {}) {
  if (B < 50) throw InvalidArgument("bootstrap needs B >= 50");
  const detail::GroupIndex g = detail::index_groups(data);
  const std::size_t J = g.rows.size();
  const Eigen::Index P = data.X.cols();

  struct Replicate {
    bool ok = false;
    QuantileMixedFit fit;
    std::vector<double> u;
  };
  std::vector<Replicate> reps(static_cast<std::size_t>(B));
  const auto run = [&](int b) {
    Rng rng = substream(seed, {static_cast<std::uint64_t>(b)});
    std::uniform_int_distribution<std::size_t> pick(0, J - 1);
    GroupedData boot;
    std::vector<std::size_t> chosen(J);
    Eigen::Index n = 0;
    for (std::size_t k = 0; k < J; ++k) {
      chosen[k] = pick(rng);
      n += static_cast<Eigen::Index>(g.rows[chosen[k]].size());
    }
    boot.y.resize(n);
    boot.X.resize(n, P);
    Eigen::Index i = 0;
    for (std::size_t k = 0; k < J; ++k) {
      // Zero-padded copy index keeps the label order equal to the draw order.
      std::string label = std::to_string(k);
      label.insert(0, 8 - std::min<std::size_t>(label.size(), 8), '0');
      boot.group_weights[label] = g.weights[chosen[k]];
      for (Eigen::Index row : g.rows[chosen[k]]) {
        boot.y[i] = data.y[row];
        boot.X.row(i) = data.X.row(row);
        boot.group.push_back(label);
        ++i;
      }
    }
    Replicate& out = reps[static_cast<std::size_t>(b)];
    try {
      LqmmConfig cfg = options.refit;
      cfg.restart_seed = derive_seed(seed, {static_cast<std::uint64_t>(b), 1});
      cfg.pin_psi2_zero = cfg.pin_psi2_zero || fit.psi2 == 0.0;
      out.fit = fit_lqmm_from(boot, fit.tau, fit, cfg);
      out.ok = out.fit.converged;
      if (out.ok) out.u = group_effects(out.fit, data);
    } catch (const NumericalError&) {
      out.ok = false;
    }
  };

  const int threads = std::max(1, std::min(options.threads, B));
  if (threads == 1) {
    for (int b = 0; b < B; ++b) run(b);
  } else {
    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (int b = t; b < B; b += threads) run(b);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  BootstrapResult res;
  res.requested = B;
  res.seed = seed;
  for (auto& r : reps) {
    if (!r.ok) {
      ++res.dropped;
      continue;
    }
    res.gamma.push_back(r.fit.gamma);
    res.psi2.push_back(r.fit.psi2);
    res.sigma.push_back(r.fit.sigma);
    res.u.push_back(std::move(r.u));
  }
  if (res.dropped * 5 > B)
    throw NumericalError("bootstrap: " + std::to_string(res.dropped) + " of " + std::to_string(B) +
                         " refits failed to converge");
  res.std_error.resize(P);
  res.ci_low.resize(P);
  res.ci_high.resize(P);
  for (Eigen::Index p = 0; p < P; ++p) {
    std::vector<double> v;
    RunningMoments m;
    for (const auto& gm : res.gamma) {
      v.push_back(gm[p]);
      m.add(gm[p]);
    }
    res.std_error[p] = std::sqrt(m.variance());
    std::sort(v.begin(), v.end());
    res.ci_low[p] = quantile_sorted(v, 0.025);
    res.ci_high[p] = quantile_sorted(v, 0.975);
  }
  return res;
}

enum class PredictionKind { kMarginal, kConditional };

struct QuantilePrediction {
  double level = 0.5;
  PredictionKind kind = PredictionKind::kMarginal;
  std::string group;
  double point = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double ci_level = 0.95;
};

namespace detail {

inline void check_design(const QuantileMixedFit& fit, const Eigen::MatrixXd& X_new) {
  if (X_new.cols() != fit.gamma.size())
    throw SchemaError("prediction design has " + std::to_string(X_new.cols()) +
                      " columns, fit has " + std::to_string(fit.gamma.size()));
}

// Percentile interval of the replicate predictions, widened if needed so it
// contains the point estimate.
inline void set_interval(QuantilePrediction& q, std::vector<double> v) {
  if (v.empty()) {
    q.ci_low = q.ci_high = q.point;
    return;
  }
  std::sort(v.begin(), v.end());
  q.ci_low = std::min(quantile_sorted(v, 0.025), q.point);
  q.ci_high = std::max(quantile_sorted(v, 0.975), q.point);
}

inline std::size_t group_position(const QuantileMixedFit& fit, const std::string& group) {
  const auto it = std::lower_bound(fit.groups.begin(), fit.groups.end(), group);
  if (it == fit.groups.end() || *it != group)
    throw InvalidArgument("unknown group '" + group + "'");
  return static_cast<std::size_t>(it - fit.groups.begin());
}

}  // namespace detail

// Population-level tau-quantile x' gamma per row. Without a bootstrap the
// interval collapses to the point.
inline std::vector<QuantilePrediction> predict_marginal(const QuantileMixedFit& fit,
                                                        const Eigen::MatrixXd& X_new,
                                                        const BootstrapResult* boot = nullptr) {
  detail::check_design(fit, X_new);
  std::vector<QuantilePrediction> out;
  for (Eigen::Index i = 0; i < X_new.rows(); ++i) {
    QuantilePrediction q;
    q.level = fit.tau;
    q.point = X_new.row(i).dot(fit.gamma);
    std::vector<double> v;
    if (boot)
      for (const auto& gm : boot->gamma) v.push_back(X_new.row(i).dot(gm));
    detail::set_interval(q, std::move(v));
    out.push_back(q);
  }
  return out;
}

// Group-level tau-quantile x' gamma + u_group. The interval bootstraps the
// sum jointly: each replicate's effect is recomputed for the original group.
inline std::vector<QuantilePrediction> predict_conditional(const QuantileMixedFit& fit,
                                                           const Eigen::MatrixXd& X_new,
                                                           const std::string& group,
                                                           const BootstrapResult* boot = nullptr) {
  detail::check_design(fit, X_new);
  const std::size_t j = detail::group_position(fit, group);
  std::vector<QuantilePrediction> out;
  for (Eigen::Index i = 0; i < X_new.rows(); ++i) {
    QuantilePrediction q;
    q.level = fit.tau;
    q.kind = PredictionKind::kConditional;
    q.group = group;
    q.point = X_new.row(i).dot(fit.gamma) + fit.u[j];
    std::vector<double> v;
    if (boot)
      for (std::size_t b = 0; b < boot->gamma.size(); ++b)
        v.push_back(X_new.row(i).dot(boot->gamma[b]) + boot->u[b][j]);
    detail::set_interval(q, std::move(v));
    out.push_back(q);
  }
  return out;
}

}  // namespace latent_index

#endif  // LATENT_INDEX_QUANTILE_MIXED_HPP_
