#ifndef LATENT_INDEX_LATENT_TRAIT_HPP_
#define LATENT_INDEX_LATENT_TRAIT_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "latent_index/errors.hpp"
#include "latent_index/quadrature.hpp"
#include "latent_index/rng.hpp"
#include "latent_index/stats.hpp"

namespace latent_index {

// n x p binary responses with per-unit sampling weights. Missing entries are
// stored as kMissing and skipped in every likelihood product.
class ResponseMatrix {
 public:
  static constexpr std::int8_t kMissing = -1;

  ResponseMatrix() = default;

  // `responses` is row-major, one row per unit. Throws ValidationError when a
  // structural invariant fails; degenerate items are reported, not rejected.
  ResponseMatrix(std::vector<std::int8_t> responses, std::vector<std::string> unit_ids,
                 std::vector<std::string> item_names, std::vector<double> weights)
      : responses_(std::move(responses)),
        unit_ids_(std::move(unit_ids)),
        item_names_(std::move(item_names)),
        weights_(std::move(weights)) {
    const std::size_t n = unit_ids_.size();
    const std::size_t p = item_names_.size();
    if (n < 1) throw ValidationError("response matrix needs at least one unit");
    if (p < 2) throw ValidationError("response matrix needs at least two items");
    if (responses_.size() != n * p)
      throw ValidationError("response matrix: expected " + std::to_string(n * p) +
                            " entries, got " + std::to_string(responses_.size()));
    if (weights_.size() != n)
      throw ValidationError("response matrix: one weight per unit required");
    for (std::size_t k = 0; k < n; ++k) {
      if (!(std::isfinite(weights_[k]) && weights_[k] > 0.0))
        throw ValidationError("unit '" + unit_ids_[k] + "': weight must be positive and finite");
      bool any = false;
      for (std::size_t i = 0; i < p; ++i) {
        const std::int8_t x = at(k, i);
        if (x != 0 && x != 1 && x != kMissing)
          throw ValidationError("unit '" + unit_ids_[k] + "', item '" + item_names_[i] +
                                "': response must be 0, 1 or missing");
        any = any || x != kMissing;
      }
      if (!any) throw ValidationError("unit '" + unit_ids_[k] + "': all responses missing");
    }
  }

  std::size_t n_units() const { return unit_ids_.size(); }
  std::size_t n_items() const { return item_names_.size(); }
  std::int8_t at(std::size_t unit, std::size_t item) const {
    return responses_[unit * item_names_.size() + item];
  }
  const std::vector<std::int8_t>& responses() const { return responses_; }
  const std::vector<std::string>& unit_ids() const { return unit_ids_; }
  const std::vector<std::string>& item_names() const { return item_names_; }
  const std::vector<double>& weights() const { return weights_; }

  // Items lacking an observed 0 or an observed 1.
  std::vector<std::string> degenerate_items() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n_items(); ++i) {
      bool zero = false, one = false;
      for (std::size_t k = 0; k < n_units(); ++k) {
        zero = zero || at(k, i) == 0;
        one = one || at(k, i) == 1;
      }
      if (!(zero && one)) out.push_back(item_names_[i]);
    }
    return out;
  }

 private:
  std::vector<std::int8_t> responses_;
  std::vector<std::string> unit_ids_;
  std::vector<std::string> item_names_;
  std::vector<double> weights_;
};

// Per-item intercept and loading of logit(pi_i(z)) = beta0_i + beta1_i z.
struct ItemParameters {
  std::vector<double> beta0;
  std::vector<double> beta1;

  std::size_t size() const { return beta0.size(); }
};

struct LtmConfig {
  int quadrature_order = kDefaultQuadratureOrder;
  int max_iter = 500;
  double tol = 1e-6;     // absolute change in weighted log-likelihood
  double ridge = 1e-4;   // penalty on beta1 in the M-step
  double max_abs_coef = 30.0;
};

struct FittedLTM {
  ItemParameters params;
  std::vector<std::string> item_names;
  double log_likelihood = 0.0;  // weighted marginal, at `params`
  int n_iterations = 0;
  bool converged = false;
  int quadrature_order = kDefaultQuadratureOrder;
  std::vector<double> loglik_trace;  // one entry per E-step
};

struct LatentScores {
  std::vector<std::string> unit_ids;
  std::vector<double> raw;           // EAP estimates
  std::vector<double> scaled;        // min-max rescaling of raw to [0, 1]
  std::vector<double> posterior_sd;
};

inline double item_probability(double beta0, double beta1, double z) {
  return sigmoid(beta0 + beta1 * z);
}

namespace detail {

// log pi_i(z_q) and log(1 - pi_i(z_q)) for every item and node, item-major.
struct NodeLogProbs {
  std::size_t n_nodes = 0;
  std::vector<double> log_p;
  std::vector<double> log_q;
};

inline NodeLogProbs node_log_probs(const ItemParameters& params,
                                   const StandardNormalGrid& grid) {
  NodeLogProbs t;
  t.n_nodes = grid.points.size();
  t.log_p.resize(params.size() * t.n_nodes);
  t.log_q.resize(params.size() * t.n_nodes);
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t q = 0; q < t.n_nodes; ++q) {
      const double eta = params.beta0[i] + params.beta1[i] * grid.points[q];
      t.log_p[i * t.n_nodes + q] = log_sigmoid(eta);
      t.log_q[i * t.n_nodes + q] = log_sigmoid(-eta);
    }
  }
  return t;
}

// out[q] = log nu_q + log P(x_k | z_q); returns the log marginal of unit k.
inline double unit_log_posterior(const ResponseMatrix& data, std::size_t k,
                                 const NodeLogProbs& table, const StandardNormalGrid& grid,
                                 std::vector<double>& out) {
  const std::size_t nq = table.n_nodes;
  out.assign(grid.log_probs.begin(), grid.log_probs.end());
  bool any = false;
  for (std::size_t i = 0; i < data.n_items(); ++i) {
    const std::int8_t x = data.at(k, i);
    if (x == ResponseMatrix::kMissing) continue;
    any = true;
    const double* row = (x == 1 ? table.log_p.data() : table.log_q.data()) + i * nq;
    for (std::size_t q = 0; q < nq; ++q) out[q] += row[q];
  }
  if (!any) throw ValidationError("unit '" + data.unit_ids()[k] + "': all responses missing");
  return log_sum_exp(out);
}

inline void check_params(const ResponseMatrix& data, const ItemParameters& params) {
  if (params.beta0.size() != data.n_items() || params.beta1.size() != data.n_items())
    throw InvalidArgument("item parameters do not match the number of items");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (!std::isfinite(params.beta0[i]) || !std::isfinite(params.beta1[i]))
      throw InvalidArgument("item parameters must be finite");
}

// Penalized binomial log-likelihood of one item on the quadrature pseudo-data.
inline double item_objective(double b0, double b1, const std::vector<double>& z,
                             const double* succ, const double* trials, double ridge) {
  double f = -0.5 * ridge * b1 * b1;
  for (std::size_t q = 0; q < z.size(); ++q) {
    if (trials[q] <= 0.0) continue;
    const double eta = b0 + b1 * z[q];
    f += succ[q] * log_sigmoid(eta) + (trials[q] - succ[q]) * log_sigmoid(-eta);
  }
  return f;
}

// Damped Newton for the weighted logistic regression of pseudo-data
// (z_q, successes, trials), started from (b0, b1). Coefficients are kept in
// [-cap, cap].
inline void refit_item(double& b0, double& b1, const std::vector<double>& z,
                       const double* succ, const double* trials, double ridge, double cap) {
  double f = item_objective(b0, b1, z, succ, trials, ridge);
  for (int it = 0; it < 100; ++it) {
    double g0 = 0.0, g1 = -ridge * b1;
    double h00 = 0.0, h01 = 0.0, h11 = ridge;
    for (std::size_t q = 0; q < z.size(); ++q) {
      if (trials[q] <= 0.0) continue;
      const double p = sigmoid(b0 + b1 * z[q]);
      const double r = succ[q] - trials[q] * p;
      const double w = trials[q] * p * (1.0 - p);
      g0 += r;
      g1 += r * z[q];
      h00 += w;
      h01 += w * z[q];
      h11 += w * z[q] * z[q];
    }
    const double det = h00 * h11 - h01 * h01;
    double d0, d1;
    if (det > 1e-300 * std::max(1.0, h00 * h11)) {
      d0 = (h11 * g0 - h01 * g1) / det;
      d1 = (h00 * g1 - h01 * g0) / det;
    } else {
      // Singular curvature (saturated item): fall back to a gradient step.
      d0 = g0 / std::max(h00, 1.0);
      d1 = g1 / std::max(h11, 1.0);
    }
    double step = 1.0;
    bool improved = false;
    for (int half = 0; half < 60; ++half) {
      const double n0 = std::clamp(b0 + step * d0, -cap, cap);
      const double n1 = std::clamp(b1 + step * d1, -cap, cap);
      const double fn = item_objective(n0, n1, z, succ, trials, ridge);
      if (fn >= f) {
        const double moved = std::abs(n0 - b0) + std::abs(n1 - b1);
        b0 = n0;
        b1 = n1;
        improved = fn > f || moved == 0.0;
        f = fn;
        if (moved < 1e-12) return;
        break;
      }
      step *= 0.5;
    }
    if (!improved) return;
  }
}

}  // namespace detail

// sum_k w_k log integral prod_i pi_i(z)^x (1 - pi_i(z))^(1 - x) phi(z) dz.
inline double weighted_marginal_loglik(const ResponseMatrix& data, const ItemParameters& params,
                                       const HermiteRule& rule) {
  detail::check_params(data, params);
  const StandardNormalGrid grid = standard_normal_grid(rule);
  const detail::NodeLogProbs table = detail::node_log_probs(params, grid);
  std::vector<double> buf;
  double total = 0.0;
  for (std::size_t k = 0; k < data.n_units(); ++k)
    total += data.weights()[k] * detail::unit_log_posterior(data, k, table, grid, buf);
  if (!std::isfinite(total)) throw NumericalError("weighted marginal log-likelihood is not finite");
  return total;
}

// Bock-Aitkin marginal maximum likelihood by EM over a Gauss-Hermite grid.
// Sampling weights scale each unit's contribution to the expected counts.
inline FittedLTM em_fit(const ResponseMatrix& data, const LtmConfig& config = {}) {
  if (!(config.tol > 0.0)) throw InvalidArgument("em_fit: tol must be positive");
  if (config.max_iter < 1) throw InvalidArgument("em_fit: max_iter must be >= 1");
  if (const auto bad = data.degenerate_items(); !bad.empty()) throw DegenerateItemError(bad.front());

  const std::size_t n = data.n_units();
  const std::size_t p = data.n_items();
  const HermiteRule rule = hermite_rule(config.quadrature_order);
  const StandardNormalGrid grid = standard_normal_grid(rule);
  const std::size_t nq = grid.points.size();

  ItemParameters params;
  params.beta0.resize(p);
  params.beta1.assign(p, 1.0);
  for (std::size_t i = 0; i < p; ++i) {
    double s = 0.0, w = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const std::int8_t x = data.at(k, i);
      if (x == ResponseMatrix::kMissing) continue;
      s += data.weights()[k] * x;
      w += data.weights()[k];
    }
    const double m = s / w;
    params.beta0[i] = std::clamp(std::log(m / (1.0 - m)), -3.0, 3.0);
  }

  FittedLTM fit;
  fit.item_names = data.item_names();
  fit.quadrature_order = config.quadrature_order;

  std::vector<double> succ(p * nq), trials(p * nq), post;
  double prev = 0.0;
  for (int iter = 1;; ++iter) {
    // E-step: posterior node weights per unit, accumulated into expected
    // successes and trials per item and node.
    std::fill(succ.begin(), succ.end(), 0.0);
    std::fill(trials.begin(), trials.end(), 0.0);
    const detail::NodeLogProbs table = detail::node_log_probs(params, grid);
    double ll = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      const double lm = detail::unit_log_posterior(data, k, table, grid, post);
      const double w = data.weights()[k];
      ll += w * lm;
      for (std::size_t q = 0; q < nq; ++q) post[q] = w * std::exp(post[q] - lm);
      for (std::size_t i = 0; i < p; ++i) {
        const std::int8_t x = data.at(k, i);
        if (x == ResponseMatrix::kMissing) continue;
        double* t = trials.data() + i * nq;
        for (std::size_t q = 0; q < nq; ++q) t[q] += post[q];
        if (x == 1) {
          double* s = succ.data() + i * nq;
          for (std::size_t q = 0; q < nq; ++q) s[q] += post[q];
        }
      }
    }
    if (!std::isfinite(ll)) throw NumericalError("em_fit: log-likelihood became non-finite");
    fit.loglik_trace.push_back(ll);
    fit.log_likelihood = ll;
    fit.n_iterations = iter;
    if (iter > 1 && std::abs(ll - prev) < config.tol) {
      fit.converged = true;
      break;
    }
    if (iter >= config.max_iter) break;
    prev = ll;

    // M-step: independent logistic regressions per item.
    for (std::size_t i = 0; i < p; ++i)
      detail::refit_item(params.beta0[i], params.beta1[i], grid.points, succ.data() + i * nq,
                         trials.data() + i * nq, config.ridge, config.max_abs_coef);
  }

  double loading_sum = 0.0;
  for (double b : params.beta1) loading_sum += b;
  if (loading_sum < 0.0)
    for (double& b : params.beta1) b = -b;
  fit.params = std::move(params);
  return fit;
}

// Min-max rescaling to [0, 1]; the minimum maps to exactly 0, the maximum to 1.
inline std::vector<double> scale_scores(const std::vector<double>& raw) {
  if (raw.size() < 2) throw DegenerateScaleError("scale_scores: need at least two scores");
  const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  const double lo = *lo_it, hi = *hi_it;
  if (!(hi > lo)) throw DegenerateScaleError("scale_scores: scores are constant");
  std::vector<double> out(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) out[k] = (raw[k] - lo) / (hi - lo);
  return out;
}

// Posterior mean and standard deviation of z for every unit under the
// standard-normal prior. The unit's sampling weight does not enter.
inline LatentScores posterior_moments(const ItemParameters& params, const ResponseMatrix& data,
                                      int quadrature_order = kDefaultQuadratureOrder) {
  detail::check_params(data, params);
  const StandardNormalGrid grid = standard_normal_grid(hermite_rule(quadrature_order));
  const detail::NodeLogProbs table = detail::node_log_probs(params, grid);
  LatentScores s;
  s.unit_ids = data.unit_ids();
  s.raw.resize(data.n_units());
  s.posterior_sd.resize(data.n_units());
  std::vector<double> post;
  for (std::size_t k = 0; k < data.n_units(); ++k) {
    const double lm = detail::unit_log_posterior(data, k, table, grid, post);
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t q = 0; q < post.size(); ++q) {
      const double h = std::exp(post[q] - lm);
      m1 += h * grid.points[q];
      m2 += h * grid.points[q] * grid.points[q];
    }
    s.raw[k] = m1;
    s.posterior_sd[k] = std::sqrt(std::max(m2 - m1 * m1, 0.0));
  }
  return s;
}

// EAP scores plus their [0, 1] rescaling. Throws DegenerateScaleError when all
// units share one score.
inline LatentScores eap_scores(const FittedLTM& fit, const ResponseMatrix& data) {
  LatentScores s = posterior_moments(fit.params, data, fit.quadrature_order);
  s.scaled = scale_scores(s.raw);
  return s;
}

struct SimulatedResponses {
  ResponseMatrix data;
  std::vector<double> true_z;
};

// z_k ~ N(0, 1), x_ki ~ Bernoulli(pi_i(z_k)); unit weights are 1.
inline SimulatedResponses simulate_responses(const ItemParameters& params, std::size_t n,
                                             std::uint64_t seed,
                                             std::vector<std::string> item_names = {}) {
  if (n < 1) throw InvalidArgument("simulate_responses: n must be >= 1");
  const std::size_t p = params.size();
  if (item_names.empty())
    for (std::size_t i = 0; i < p; ++i) item_names.push_back("item" + std::to_string(i + 1));
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<std::int8_t> x(n * p);
  std::vector<double> z(n);
  std::vector<std::string> ids(n);
  for (std::size_t k = 0; k < n; ++k) {
    z[k] = normal(rng);
    ids[k] = "u" + std::to_string(k + 1);
    for (std::size_t i = 0; i < p; ++i)
      x[k * p + i] = unif(rng) < item_probability(params.beta0[i], params.beta1[i], z[k]) ? 1 : 0;
  }
  return {ResponseMatrix(std::move(x), std::move(ids), std::move(item_names),
                         std::vector<double>(n, 1.0)),
          std::move(z)};
}

}  // namespace latent_index

#endif  // LATENT_INDEX_LATENT_TRAIT_HPP_
