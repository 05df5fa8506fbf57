#ifndef LATENT_INDEX_SAE_EBP_HPP_
#define LATENT_INDEX_SAE_EBP_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "latent_index/errors.hpp"
#include "latent_index/optimize.hpp"
#include "latent_index/rng.hpp"
#include "latent_index/stats.hpp"

namespace latent_index {

// Sampled units: response, design row and domain label per unit.
struct SampleData {
  Eigen::VectorXd y;
  Eigen::MatrixXd X;
  std::vector<std::string> domain;
  std::vector<std::string> column_names;  // optional; used in diagnostics
};

// Out-of-sample units of the population, encoded like SampleData::X.
// `population_sizes` (M_p, sampled plus out-of-sample) is optional; when
// given it must agree with the row counts.
struct PopulationFrame {
  Eigen::MatrixXd X;
  std::vector<std::string> domain;
  std::map<std::string, std::size_t> population_sizes;
};

enum class VarianceMethod { kML, kREML };

struct NestedErrorOptions {
  VarianceMethod method = VarianceMethod::kML;
  double log_ratio_lo = -20.0;  // search range for log(sigma2_u / sigma2_e)
  double log_ratio_hi = 10.0;
  int grid_points = 61;
};

struct DomainEffect {
  std::string domain;
  std::size_t n_sampled = 0;
  double mean_residual = 0.0;
  double gamma = 0.0;
  double u_hat = 0.0;
};

struct NestedErrorFit {
  Eigen::VectorXd beta;
  double sigma2_u = 0.0;
  double sigma2_e = 0.0;
  double loglik = 0.0;
  bool boundary = false;  // sigma2_u estimated at 0
  VarianceMethod method = VarianceMethod::kML;
  std::vector<DomainEffect> domains;  // sampled domains, sorted by label

  const DomainEffect* find(const std::string& label) const {
    const auto it = std::lower_bound(
        domains.begin(), domains.end(), label,
        [](const DomainEffect& d, const std::string& l) { return d.domain < l; });
    return it != domains.end() && it->domain == label ? &*it : nullptr;
  }
};

// gamma_p = sigma2_u / (sigma2_u + sigma2_e / N_p); zero for unsampled
// domains and for sigma2_u = 0.
inline double shrinkage_gamma(double sigma2_u, double sigma2_e, std::size_t n_p) {
  if (n_p == 0 || sigma2_u <= 0.0) return 0.0;
  return sigma2_u / (sigma2_u + sigma2_e / static_cast<double>(n_p));
}

// u_p = gamma_p * mean residual, the closed form of
// sigma2_u 1' V^-1 (y_ps - X_ps beta) for V = sigma2_u 11' + sigma2_e I.
inline double conditional_effect(const NestedErrorFit& fit,
                                 const std::vector<double>& domain_residuals) {
  if (domain_residuals.empty()) return 0.0;
  const double gamma = shrinkage_gamma(fit.sigma2_u, fit.sigma2_e, domain_residuals.size());
  return gamma * mean(domain_residuals);
}

// The same quantity through an explicit solve with V.
inline double conditional_effect_matrix(double sigma2_u, double sigma2_e,
                                        const std::vector<double>& domain_residuals) {
  const auto n = static_cast<Eigen::Index>(domain_residuals.size());
  if (n == 0) return 0.0;
  const Eigen::MatrixXd V = sigma2_u * Eigen::MatrixXd::Ones(n, n) +
                            sigma2_e * Eigen::MatrixXd::Identity(n, n);
  const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(domain_residuals.data(), n);
  const Eigen::VectorXd sol = V.ldlt().solve(r);
  return sigma2_u * sol.sum();
}

namespace detail {

inline std::map<std::string, std::vector<Eigen::Index>> rows_by_domain(
    const std::vector<std::string>& domain) {
  std::map<std::string, std::vector<Eigen::Index>> out;
  for (std::size_t i = 0; i < domain.size(); ++i)
    out[domain[i]].push_back(static_cast<Eigen::Index>(i));
  return out;
}

inline std::string column_label(const SampleData& s, Eigen::Index j) {
  if (static_cast<std::size_t>(j) < s.column_names.size()) return s.column_names[j];
  return "x" + std::to_string(j);
}

struct ProfilePoint {
  double loglik = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd beta;
  double sigma2_e = 0.0;
};

// Profile likelihood at ratio rho = sigma2_u / sigma2_e: with
// H = I + rho 11' per domain, beta is GLS and sigma2_e the scaled quadratic
// form of the residuals.
class NestedErrorProfile {
 public:
  NestedErrorProfile(const SampleData& s, VarianceMethod method)
      : s_(s), method_(method), groups_(rows_by_domain(s.domain)) {
    xtx_ = s.X.transpose() * s.X;
    xty_ = s.X.transpose() * s.y;
    for (const auto& [label, rows] : groups_) {
      Eigen::VectorXd sx = Eigen::VectorXd::Zero(s.X.cols());
      double sy = 0.0;
      for (Eigen::Index r : rows) {
        sx += s.X.row(r).transpose();
        sy += s.y[r];
      }
      sums_x_.push_back(std::move(sx));
      sums_y_.push_back(sy);
      sizes_.push_back(static_cast<double>(rows.size()));
    }
  }

  ProfilePoint operator()(double rho) const {
    const double n = static_cast<double>(s_.y.size());
    const double p = static_cast<double>(s_.X.cols());
    Eigen::MatrixXd a = xtx_;
    Eigen::VectorXd b = xty_;
    double logdet_h = 0.0;
    std::vector<double> c(sizes_.size());
    for (std::size_t g = 0; g < sizes_.size(); ++g) {
      c[g] = rho / (1.0 + sizes_[g] * rho);
      a.noalias() -= c[g] * sums_x_[g] * sums_x_[g].transpose();
      b -= c[g] * sums_y_[g] * sums_x_[g];
      logdet_h += std::log1p(sizes_[g] * rho);
    }
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
    ProfilePoint out;
    out.beta = ldlt.solve(b);
    const Eigen::VectorXd r = s_.y - s_.X * out.beta;
    double q = r.squaredNorm();
    std::size_t g = 0;
    for (const auto& [label, rows] : groups_) {
      double sr = 0.0;
      for (Eigen::Index i : rows) sr += r[i];
      q -= c[g] * sr * sr;
      ++g;
    }
    q = std::max(q, 0.0);
    if (method_ == VarianceMethod::kML) {
      out.sigma2_e = q / n;
      out.loglik = -0.5 * n * (std::log(2.0 * kPi * out.sigma2_e) + 1.0) - 0.5 * logdet_h;
    } else {
      out.sigma2_e = q / (n - p);
      double logdet_a = 0.0;
      const Eigen::VectorXd dv = ldlt.vectorD();
      for (Eigen::Index i = 0; i < dv.size(); ++i) logdet_a += std::log(dv[i]);
      out.loglik = -0.5 * (n - p) * (std::log(2.0 * kPi * out.sigma2_e) + 1.0) -
                   0.5 * logdet_h - 0.5 * logdet_a;
    }
    return out;
  }

  const std::map<std::string, std::vector<Eigen::Index>>& groups() const { return groups_; }

 private:
  const SampleData& s_;
  VarianceMethod method_;
  std::map<std::string, std::vector<Eigen::Index>> groups_;
  Eigen::MatrixXd xtx_;
  Eigen::VectorXd xty_;
  std::vector<Eigen::VectorXd> sums_x_;
  std::vector<double> sums_y_;
  std::vector<double> sizes_;
};

inline void check_full_rank(const SampleData& s) {
  const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(s.X);
  const Eigen::Index rank = qr.rank();
  if (rank == s.X.cols()) return;
  std::string names;
  for (Eigen::Index j = rank; j < s.X.cols(); ++j) {
    if (!names.empty()) names += ", ";
    names += column_label(s, qr.colsPermutation().indices()[j]);
  }
  throw ValidationError("design matrix is rank deficient (rank " + std::to_string(rank) +
                        " of " + std::to_string(s.X.cols()) + "); collinear columns: " + names);
}

}  // namespace detail

// Maximum likelihood (or REML) fit of y = X beta + u_p + e by a 1-D search
// over log(sigma2_u / sigma2_e) with beta and sigma2_e profiled out. The
// boundary sigma2_u = 0 is evaluated explicitly.
inline NestedErrorFit fit_nested_error(const SampleData& sample,
                                       const NestedErrorOptions& options = {}) {
  const Eigen::Index n = sample.y.size();
  if (sample.X.rows() != n || static_cast<Eigen::Index>(sample.domain.size()) != n)
    throw InvalidArgument("fit_nested_error: y, X and domain lengths differ");
  if (!sample.y.allFinite() || !sample.X.allFinite())
    throw ValidationError("fit_nested_error: non-finite values in y or X");
  if (n <= sample.X.cols()) throw ValidationError("fit_nested_error: fewer units than columns");
  detail::check_full_rank(sample);

  const detail::NestedErrorProfile profile(sample, options.method);
  std::size_t usable = 0;
  for (const auto& [label, rows] : profile.groups()) usable += rows.size() >= 2;
  if (usable < 2)
    throw ValidationError("fit_nested_error: need at least 2 domains with >= 2 units each");

  const auto at_log = [&](double t) { return profile(std::exp(t)).loglik; };
  const int m = std::max(options.grid_points, 3);
  const double step = (options.log_ratio_hi - options.log_ratio_lo) / (m - 1);
  int best = 0;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < m; ++i) {
    const double ll = at_log(options.log_ratio_lo + step * i);
    if (ll > best_ll) {
      best_ll = ll;
      best = i;
    }
  }
  const double lo = options.log_ratio_lo + step * std::max(best - 1, 0);
  const double hi = options.log_ratio_lo + step * std::min(best + 1, m - 1);
  const double t_hat = golden_section_max(at_log, lo, hi, 1e-12);

  detail::ProfilePoint interior = profile(std::exp(t_hat));
  const detail::ProfilePoint zero = profile(0.0);
  double rho = std::exp(t_hat);
  NestedErrorFit fit;
  fit.method = options.method;
  if (zero.loglik >= interior.loglik) {
    interior = zero;
    rho = 0.0;
    fit.boundary = true;
  }
  fit.beta = interior.beta;
  fit.sigma2_e = interior.sigma2_e;
  fit.sigma2_u = rho * interior.sigma2_e;
  fit.loglik = interior.loglik;

  const Eigen::VectorXd r = sample.y - sample.X * fit.beta;
  for (const auto& [label, rows] : profile.groups()) {
    DomainEffect d;
    d.domain = label;
    d.n_sampled = rows.size();
    double s = 0.0;
    for (Eigen::Index i : rows) s += r[i];
    d.mean_residual = s / static_cast<double>(rows.size());
    d.gamma = shrinkage_gamma(fit.sigma2_u, fit.sigma2_e, d.n_sampled);
    d.u_hat = d.gamma * d.mean_residual;
    fit.domains.push_back(std::move(d));
  }
  return fit;
}

// Domain statistic evaluated on a full synthetic population.
struct Statistic {
  enum class Kind { kMedian, kMean, kQuantile };
  Kind kind = Kind::kMedian;
  double level = 0.5;  // used by kQuantile

  static Statistic median() { return {}; }
  static Statistic mean() { return {Kind::kMean, 0.5}; }
  static Statistic quantile(double p) {
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("statistic quantile level outside [0,1]");
    return {Kind::kQuantile, p};
  }

  double operator()(std::vector<double>& values) const {
    switch (kind) {
      case Kind::kMean:
        return latent_index::mean(values);
      case Kind::kMedian:
        std::sort(values.begin(), values.end());
        return quantile_sorted(values, 0.5);
      case Kind::kQuantile:
        std::sort(values.begin(), values.end());
        return quantile_sorted(values, level);
    }
    return 0.0;
  }
};

namespace detail {

// Everything about one domain that does not change across replicates.
struct DomainPlan {
  std::string domain;
  std::vector<double> observed;
  std::vector<double> synthetic_mean;  // x_pr' beta + u_hat_p per out-of-sample unit
  double sd_u_star = 0.0;              // sqrt(sigma2_u (1 - gamma_p))
  double sd_e = 0.0;
};

inline std::vector<DomainPlan> plan_domains(const NestedErrorFit& fit,
                                            const PopulationFrame& frame,
                                            const SampleData& sample) {
  if (frame.X.rows() != static_cast<Eigen::Index>(frame.domain.size()))
    throw InvalidArgument("population frame: X rows and domain labels differ");
  if (frame.X.rows() > 0 && frame.X.cols() != fit.beta.size())
    throw SchemaError("population frame has " + std::to_string(frame.X.cols()) +
                      " columns, fit has " + std::to_string(fit.beta.size()));
  std::map<std::string, DomainPlan> plans;
  for (std::size_t i = 0; i < sample.domain.size(); ++i)
    plans[sample.domain[i]].observed.push_back(sample.y[static_cast<Eigen::Index>(i)]);
  const Eigen::VectorXd lin =
      frame.X.rows() > 0 ? Eigen::VectorXd(frame.X * fit.beta) : Eigen::VectorXd();
  for (std::size_t i = 0; i < frame.domain.size(); ++i)
    plans[frame.domain[i]].synthetic_mean.push_back(lin[static_cast<Eigen::Index>(i)]);
  for (const auto& [label, size] : frame.population_sizes) {
    if (!plans.count(label) && size == 0) continue;
    const DomainPlan& p = plans[label];
    const std::size_t have = p.observed.size() + p.synthetic_mean.size();
    if (have != size)
      throw ValidationError("domain '" + label + "': population size " + std::to_string(size) +
                            " but " + std::to_string(p.observed.size()) + " sampled + " +
                            std::to_string(p.synthetic_mean.size()) + " frame units");
  }
  std::vector<DomainPlan> out;
  for (auto& [label, p] : plans) {
    p.domain = label;
    const DomainEffect* eff = fit.find(label);
    const double gamma = eff != nullptr ? eff->gamma : 0.0;
    const double u_hat = eff != nullptr ? eff->u_hat : 0.0;
    for (double& m : p.synthetic_mean) m += u_hat;
    p.sd_u_star = std::sqrt(std::max(fit.sigma2_u * (1.0 - gamma), 0.0));
    p.sd_e = std::sqrt(std::max(fit.sigma2_e, 0.0));
    out.push_back(std::move(p));
  }
  return out;
}

// One synthetic population of a domain: observed values followed by
// simulated out-of-sample values, from the substream (seed, domain, replicate).
inline void synthesize(const DomainPlan& p, std::uint64_t seed, std::uint64_t replicate,
                       std::vector<double>& out) {
  out.assign(p.observed.begin(), p.observed.end());
  if (p.synthetic_mean.empty()) return;
  Rng rng = substream(seed, {hash_label(p.domain), replicate});
  std::normal_distribution<double> z(0.0, 1.0);
  const double u_star = p.sd_u_star * z(rng);
  for (double m : p.synthetic_mean) out.push_back(m + u_star + p.sd_e * z(rng));
}

}  // namespace detail

struct SyntheticDomain {
  std::string domain;
  std::size_t n_observed = 0;
  std::vector<double> values;  // observed first, then out-of-sample units in frame order
};

// One replicate of the census: sampled units keep their y, out-of-sample
// units get x'beta + u_hat_p + u*_p + e*, u*_p ~ N(0, sigma2_u (1 - gamma_p)),
// e* ~ N(0, sigma2_e). Domains absent from the fit are treated as unsampled.
inline std::vector<SyntheticDomain> simulate_census(const NestedErrorFit& fit,
                                                    const PopulationFrame& frame,
                                                    const SampleData& sample, std::uint64_t seed,
                                                    std::uint64_t replicate = 0) {
  std::vector<SyntheticDomain> out;
  for (const auto& plan : detail::plan_domains(fit, frame, sample)) {
    SyntheticDomain d;
    d.domain = plan.domain;
    d.n_observed = plan.observed.size();
    detail::synthesize(plan, seed, replicate, d.values);
    out.push_back(std::move(d));
  }
  return out;
}

struct EbpRow {
  std::string domain;
  double estimate = 0.0;          // unclamped Monte Carlo average
  double estimate_clamped = 0.0;  // clamped to the index support [0, 1]
  double mc_sd = 0.0;             // replicate standard deviation / sqrt(B)
  std::size_t n_sampled = 0;
  std::size_t n_population = 0;
};

struct EBPResult {
  std::vector<EbpRow> rows;  // sorted by domain label
  int B = 0;
  std::uint64_t seed = 0;

  const EbpRow* find(const std::string& label) const {
    for (const auto& r : rows)
      if (r.domain == label) return &r;
    return nullptr;
  }
};

// Monte Carlo empirical best predictor of a domain statistic: the average over
// B synthetic censuses. Fully sampled domains return the direct statistic.
inline EBPResult ebp_indicator(const NestedErrorFit& fit, const PopulationFrame& frame,
                               const SampleData& sample, const Statistic& statistic, int B,
                               std::uint64_t seed) {
  if (B < 1) throw InvalidArgument("ebp_indicator: B must be >= 1");
  EBPResult res;
  res.B = B;
  res.seed = seed;
  std::vector<double> buf;
  for (const auto& plan : detail::plan_domains(fit, frame, sample)) {
    EbpRow row;
    row.domain = plan.domain;
    row.n_sampled = plan.observed.size();
    row.n_population = plan.observed.size() + plan.synthetic_mean.size();
    if (plan.synthetic_mean.empty()) {
      buf = plan.observed;
      row.estimate = statistic(buf);
    } else {
      RunningMoments acc;
      for (int b = 0; b < B; ++b) {
        detail::synthesize(plan, seed, static_cast<std::uint64_t>(b), buf);
        acc.add(statistic(buf));
      }
      row.estimate = acc.mean();
      row.mc_sd = std::sqrt(acc.variance() / static_cast<double>(B));
    }
    row.estimate_clamped = std::clamp(row.estimate, 0.0, 1.0);
    res.rows.push_back(std::move(row));
  }
  return res;
}

// Optional report-time rescaling of the domain estimates to [0, 1] across
// domains. Returns the input unchanged when all estimates coincide.
inline std::vector<double> rescale_across_domains(const EBPResult& result) {
  std::vector<double> v;
  for (const auto& r : result.rows) v.push_back(r.estimate);
  if (v.size() < 2) return v;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  if (!(*hi > *lo)) return v;
  const double a = *lo, b = *hi;
  for (double& x : v) x = (x - a) / (b - a);
  return v;
}

}  // namespace latent_index

#endif  // LATENT_INDEX_SAE_EBP_HPP_
