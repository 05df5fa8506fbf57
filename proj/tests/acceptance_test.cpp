// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails. Each check builds its own oracle rather than reusing the
// unit tests.
#include <fmt/format.h>
#include <json.hpp>
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "latent_index/csv.hpp"
#include "latent_index/features.hpp"
#include "latent_index/fixture.hpp"
#include "latent_index/item_set.hpp"
#include "latent_index/latent_trait.hpp"
#include "latent_index/quadrature.hpp"
#include "latent_index/quantile_mixed.hpp"
#include "latent_index/sae_ebp.hpp"

namespace li = latent_index;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

// ---- 1. quadrature exactness -------------------------------------------

Outcome quadrature_exactness() {
  const li::HermiteRule r = li::hermite_rule(20);
  double worst = 0.0;
  for (int k = 0; k <= 39; ++k) {
    double q = 0.0;
    for (std::size_t i = 0; i < r.nodes.size(); ++i) q += r.weights[i] * std::pow(r.nodes[i], k);
    // Odd moments are zero; measure them against the next even moment.
    const double exact = k % 2 ? 0.0 : std::tgamma((k + 1) / 2.0);
    const double scale = k % 2 ? std::tgamma((k + 2) / 2.0) : exact;
    worst = std::max(worst, std::abs(q - exact) / scale);
  }
  double sum = 0.0;
  for (double w : r.weights) sum += w;
  const double sum_err = std::abs(sum - std::sqrt(li::kPi));
  return {worst <= 1e-9 && sum_err <= 1e-10,
          fmt::format("max rel error {:.2e} over degrees 0..39, |sum w - sqrt(pi)| {:.2e}", worst, sum_err)};
}

// ---- 2. latent trait likelihood vs grid --------------------------------

struct TrapezoidGrid {
  std::vector<double> z, w;
  TrapezoidGrid() {
    const int m = 10001;
    const double h = 16.0 / (m - 1);
    for (int j = 0; j < m; ++j) {
      const double x = -8.0 + h * j;
      z.push_back(x);
      w.push_back((j == 0 || j == m - 1 ? 0.5 * h : h) * std::exp(-0.5 * x * x) / std::sqrt(2.0 * li::kPi));
    }
  }
  static double lik(const li::ResponseMatrix& d, const li::ItemParameters& p, std::size_t k, double z) {
    double l = 1.0;
    for (std::size_t i = 0; i < d.n_items(); ++i) {
      const auto x = d.at(k, i);
      if (x == li::ResponseMatrix::kMissing) continue;
      const double pi = 1.0 / (1.0 + std::exp(-(p.beta0[i] + p.beta1[i] * z)));
      l *= x == 1 ? pi : 1.0 - pi;
    }
    return l;
  }
};

Outcome ltm_likelihood_oracle() {
  const TrapezoidGrid g;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst_ll = 0.0, worst_eap = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t p = 2 + rep % 2, n = 5 + rep % 16;
    std::vector<std::int8_t> x(n * p);
    std::vector<std::string> ids, items;
    std::vector<double> w;
    for (std::size_t k = 0; k < n; ++k) {
      ids.push_back("u" + std::to_string(k));
      w.push_back(0.3 + 2.0 * u(rng));
      for (std::size_t i = 0; i < p; ++i) x[k * p + i] = u(rng) < 0.5;
      if (p > 1 && u(rng) < 0.15) x[k * p + 1] = li::ResponseMatrix::kMissing;
    }
    for (std::size_t i = 0; i < p; ++i) items.push_back("i" + std::to_string(i));
    const li::ResponseMatrix d(std::move(x), std::move(ids), items, std::move(w));
    li::FittedLTM fit;
    fit.item_names = items;
    fit.quadrature_order = 61;
    for (std::size_t i = 0; i < p; ++i) {
      fit.params.beta0.push_back(3.0 * u(rng) - 1.5);
      fit.params.beta1.push_back(4.0 * u(rng) - 2.0);
    }
    double oracle = 0.0;
    std::vector<double> means;
    for (std::size_t k = 0; k < n; ++k) {
      double m0 = 0.0, m1 = 0.0;
      for (std::size_t j = 0; j < g.z.size(); ++j) {
        const double l = g.w[j] * TrapezoidGrid::lik(d, fit.params, k, g.z[j]);
        m0 += l;
        m1 += l * g.z[j];
      }
      oracle += d.weights()[k] * std::log(m0);
      means.push_back(m1 / m0);
    }
    worst_ll = std::max(worst_ll, std::abs(li::weighted_marginal_loglik(d, fit.params, li::hermite_rule(61)) - oracle));
    const li::LatentScores s = li::eap_scores(fit, d);
    for (std::size_t k = 0; k < n; ++k) worst_eap = std::max(worst_eap, std::abs(s.raw[k] - means[k]));
  }
  return {worst_ll <= 1e-6 && worst_eap <= 1e-5,
          fmt::format("10 instances: max |loglik diff| {:.2e}, max |EAP diff| {:.2e}", worst_ll, worst_eap)};
}

// ---- 3. EM monotonicity on the fixture ----------------------------------

li::ResponseMatrix fixture_items(const li::Fixture& fx) {
  const auto rates = li::foreign_rate(fx.survey, li::resident_counts(fx.provinces));
  const auto base = li::foreign_base(rates, fx.provinces, fx.survey, {});
  return li::build_item_matrix(fx.survey, rates, li::kForeignLevels, &base);
}

Outcome em_monotonicity() {
  const li::Fixture fx = li::simulate_fixture(1);
  const li::ResponseMatrix items = fixture_items(fx);
  const li::FittedLTM fit = li::em_fit(items);
  double worst = 0.0;
  for (std::size_t t = 1; t < fit.loglik_trace.size(); ++t)
    worst = std::min(worst, fit.loglik_trace[t] - fit.loglik_trace[t - 1]);
  const bool ok = items.n_units() == 1323 && items.n_items() == 13 && worst >= -1e-8 && fit.converged &&
                  fit.n_iterations <= 500;
  return {ok, fmt::format("n={} items={} iterations={} converged={} largest decrease {:.2e}", items.n_units(),
                          items.n_items(), fit.n_iterations, fit.converged, std::max(0.0, -worst))};
}

// ---- 4. LTM parameter recovery -----------------------------------------

Outcome ltm_recovery() {
  const li::ItemParameters truth = li::reference_item_parameters();
  double mae0 = 0.0, mae1 = 0.0, slowest = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto sim = li::simulate_responses(truth, 2000, seed, li::item_names());
    const li::FittedLTM fit = li::em_fit(sim.data);
    slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      mae0 += std::abs(fit.params.beta0[i] - truth.beta0[i]) / (10.0 * truth.size());
      mae1 += std::abs(fit.params.beta1[i] - truth.beta1[i]) / (10.0 * truth.size());
    }
  }
  return {mae0 <= 0.15 && mae1 <= 0.4 && slowest <= 60.0,
          fmt::format("10 seeds, n=2000: MAE beta0 {:.4f}, MAE beta1 {:.4f}, slowest seed {:.2f} s", mae0, mae1,
                      slowest)};
}

// ---- 5. shrinkage identities -------------------------------------------

Outcome shrinkage_identities() {
  const bool exact = li::shrinkage_gamma(1.0, 1.0, 4) == 0.8;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const double s2u = 0.01 + 2.0 * u(rng), s2e = 0.01 + 2.0 * u(rng);
    const std::size_t n = 1 + static_cast<std::size_t>(u(rng) * 30);
    std::vector<double> r(n);
    for (auto& v : r) v = 4.0 * u(rng) - 2.0;
    const double scalar = li::shrinkage_gamma(s2u, s2e, n) * li::mean(r);
    worst = std::max(worst, std::abs(li::conditional_effect_matrix(s2u, s2e, r) - scalar));
  }
  return {exact && worst <= 1e-10,
          fmt::format("gamma(1,1,4) == 0.8: {}; 100 instances max |matrix - scalar| {:.2e}", exact, worst)};
}

// ---- 6. EBP dominance ---------------------------------------------------

Outcome ebp_dominance() {
  constexpr int kDomains = 30, kUnits = 200, kSampled = 10, kReps = 100;
  const double beta0 = 1.0, beta1 = 1.0, sd_u = 0.5, sd_e = 1.0;
  std::mt19937_64 rng(606);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> x(kDomains * kUnits);
  for (double& v : x) v = z(rng);  // fixed covariate of the finite population
  std::vector<double> mse_ebp(kDomains, 0.0), mse_direct(kDomains, 0.0);
  std::vector<int> idx(kUnits);
  for (int rep = 0; rep < kReps; ++rep) {
    li::SampleData s;
    s.y.resize(kDomains * kSampled);
    s.X.resize(kDomains * kSampled, 2);
    li::PopulationFrame f;
    f.X.resize(kDomains * (kUnits - kSampled), 2);
    std::vector<double> truth(kDomains), direct(kDomains);
    Eigen::Index si = 0, fi = 0;
    for (int d = 0; d < kDomains; ++d) {
      const std::string label = fmt::format("d{:02d}", d);
      const double u = sd_u * z(rng);
      std::vector<double> y(kUnits);
      for (int k = 0; k < kUnits; ++k) y[k] = beta0 + beta1 * x[d * kUnits + k] + u + sd_e * z(rng);
      truth[d] = li::median(y);
      for (int k = 0; k < kUnits; ++k) idx[k] = k;
      std::shuffle(idx.begin(), idx.end(), rng);
      std::vector<double> ys;
      for (int k = 0; k < kUnits; ++k) {
        const int unit = idx[k];
        if (k < kSampled) {
          s.y[si] = y[unit];
          s.X(si, 0) = 1.0;
          s.X(si, 1) = x[d * kUnits + unit];
          s.domain.push_back(label);
          ys.push_back(y[unit]);
          ++si;
        } else {
          f.X(fi, 0) = 1.0;
          f.X(fi, 1) = x[d * kUnits + unit];
          f.domain.push_back(label);
          ++fi;
        }
      }
      direct[d] = li::median(ys);
    }
    const li::NestedErrorFit fit = li::fit_nested_error(s);
    const li::EBPResult res = li::ebp_indicator(fit, f, s, li::Statistic::median(), 50, 1000 + rep);
    for (int d = 0; d < kDomains; ++d) {
      const double e = res.rows[d].estimate - truth[d], g = direct[d] - truth[d];
      mse_ebp[d] += e * e / kReps;
      mse_direct[d] += g * g / kReps;
    }
  }
  int better = 0;
  double ratio = 0.0;
  for (int d = 0; d < kDomains; ++d) {
    better += mse_ebp[d] < mse_direct[d];
    ratio += mse_ebp[d] / mse_direct[d] / kDomains;
  }
  return {better >= 0.8 * kDomains && ratio <= 0.8,
          fmt::format("EBP beats direct median in {}/{} domains, mean MSE ratio {:.3f}", better, kDomains, ratio)};
}

// ---- 7. EBP collapse ----------------------------------------------------

std::string ebp_table(const li::EBPResult& r) {
  li::CsvWriter w({"domain", "estimate", "mc_sd"});
  for (const auto& row : r.rows) w.row({row.domain, li::format_number(row.estimate), li::format_number(row.mc_sd)});
  return w.str();
}

Outcome ebp_collapse() {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> z(0.0, 1.0);
  li::SampleData s;
  const int n = 40;
  s.y.resize(n);
  s.X.resize(n, 2);
  for (int i = 0; i < n; ++i) {
    s.X(i, 0) = 1.0;
    s.X(i, 1) = z(rng);
    s.domain.push_back(fmt::format("d{}", i / 8));
    s.y[i] = 0.5 + 0.3 * s.X(i, 1) + 0.2 * (i / 8) + 0.4 * z(rng);
  }
  li::PopulationFrame f;  // d0 and d1 fully sampled, the rest get 5 more units
  f.X.resize(15, 2);
  for (int i = 0; i < 15; ++i) {
    f.X(i, 0) = 1.0;
    f.X(i, 1) = z(rng);
    f.domain.push_back(fmt::format("d{}", 2 + i / 5));
  }
  const li::NestedErrorFit fit = li::fit_nested_error(s);
  const li::EBPResult res = li::ebp_indicator(fit, f, s, li::Statistic::median(), 100, 9);
  bool direct_ok = true;
  for (const char* d : {"d0", "d1"}) {
    std::vector<double> ys;
    for (int i = 0; i < n; ++i)
      if (s.domain[i] == d) ys.push_back(s.y[i]);
    direct_ok = direct_ok && res.find(d)->estimate == li::median(ys) && res.find(d)->mc_sd == 0.0;
  }

  li::NestedErrorFit zero = fit;
  zero.sigma2_u = zero.sigma2_e = 0.0;
  for (auto& e : zero.domains) e.gamma = e.u_hat = 0.0;
  const li::EBPResult det = li::ebp_indicator(zero, f, s, li::Statistic::median(), 30, 9);
  bool regression_ok = true;
  for (int dom = 2; dom < 5; ++dom) {
    const std::string label = fmt::format("d{}", dom);
    std::vector<double> census;
    for (int i = 0; i < n; ++i)
      if (s.domain[i] == label) census.push_back(s.y[i]);
    for (int i = 0; i < 15; ++i)
      if (f.domain[i] == label) census.push_back(f.X.row(i).dot(zero.beta));
    regression_ok = regression_ok && det.find(label)->estimate == li::median(census) && det.find(label)->mc_sd == 0.0;
  }
  const bool bytes_ok = ebp_table(res) == ebp_table(li::ebp_indicator(fit, f, s, li::Statistic::median(), 100, 9));
  return {direct_ok && regression_ok && bytes_ok,
          fmt::format("fully sampled == direct median: {}; zero variances == regression median: {}; "
                      "fixed seed byte-identical: {}",
                      direct_ok, regression_ok, bytes_ok)};
}

// ---- 8. LQMM degenerate collapse ----------------------------------------

Outcome lqmm_degenerate() {
  std::mt19937_64 rng(88);
  std::gamma_distribution<double> gam(2.0, 0.5);
  std::vector<double> y(87);
  for (double& v : y) v = gam(rng);
  li::GroupedData d;
  d.y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  d.X = Eigen::MatrixXd::Ones(d.y.size(), 1);
  d.group.assign(y.size(), "all");
  d.group_weights["all"] = 3.7;
  li::LqmmConfig cfg;
  cfg.pin_psi2_zero = true;
  double worst = 0.0;
  const double lo = *std::min_element(y.begin(), y.end()), hi = *std::max_element(y.begin(), y.end());
  for (double tau : {0.25, 0.5, 0.75}) {
    const li::QuantileMixedFit fit = li::fit_lqmm(d, tau, cfg);
    double best = lo, best_loss = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 100000; ++i) {
      const double g = lo + (hi - lo) * i / 100000.0;
      double loss = 0.0;
      for (double v : y) loss += 3.7 * li::check_loss(v - g, tau);
      if (loss < best_loss) {
        best_loss = loss;
        best = g;
      }
    }
    worst = std::max(worst, std::abs(fit.gamma[0] - best));
  }
  return {worst <= 1e-3, fmt::format("max |intercept - grid argmin| over tau 0.25/0.5/0.75: {:.2e}", worst)};
}

// ---- 9/10. titularity simulations ---------------------------------------

// Region intercepts u_j ~ N(0, psi^2), Gaussian noise, public services with
// probability 0.6, unequal region weights.
li::GroupedData titularity_data(int groups, int per_group, double psi, double noise, std::uint64_t seed,
                                double priv = 0.151, double pub = 0.533) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  std::bernoulli_distribution is_public(0.6);
  li::GroupedData d;
  const int n = groups * per_group;
  d.y.resize(n);
  d.X = Eigen::MatrixXd::Zero(n, 2);
  d.column_names = {"private", "public"};
  for (int j = 0; j < groups; ++j) {
    const std::string label = fmt::format("g{:02d}", j);
    const double u = psi * z(rng);
    d.group_weights[label] = 1.0 + (j % 3);
    for (int k = 0; k < per_group; ++k) {
      const int i = j * per_group + k;
      const bool p = is_public(rng);
      d.X(i, p ? 1 : 0) = 1.0;
      d.y[i] = (p ? pub : priv) + u + noise * z(rng);
      d.group.push_back(label);
    }
  }
  return d;
}

Outcome lqmm_recovery() {
  const li::GroupedData d = titularity_data(20, 60, 0.1, 0.15, 909);
  const auto q25 = li::fit_lqmm(d, 0.25), q50 = li::fit_lqmm(d, 0.5), q75 = li::fit_lqmm(d, 0.75);
  const double e0 = std::abs(q50.gamma[0] - 0.151), e1 = std::abs(q50.gamma[1] - 0.533);
  bool ordered = true;
  for (int p = 0; p < 2; ++p) ordered = ordered && q25.gamma[p] < q50.gamma[p] && q50.gamma[p] < q75.gamma[p];
  return {e0 <= 0.05 && e1 <= 0.05 && ordered,
          fmt::format("tau 0.5: private {:.4f} (err {:.4f}), public {:.4f} (err {:.4f}); ordered across tau: {}",
                      q50.gamma[0], e0, q50.gamma[1], e1, ordered)};
}

Outcome bootstrap_coverage() {
  constexpr int kReps = 200, kB = 200;
  const double truth[2] = {0.151, 0.533};
  int covered[2] = {0, 0};
  for (int rep = 0; rep < kReps; ++rep) {
    const li::GroupedData d = titularity_data(20, 10, 0.1, 0.15, 10000 + rep);
    const li::QuantileMixedFit fit = li::fit_lqmm(d, 0.5);
    const li::BootstrapResult b = li::bootstrap_fits(d, fit, kB, 20000 + rep);
    for (int p = 0; p < 2; ++p) covered[p] += b.ci_low[p] <= truth[p] && truth[p] <= b.ci_high[p];
  }
  const double c0 = covered[0] / double(kReps), c1 = covered[1] / double(kReps);
  const auto in = [](double c) { return c >= 0.90 && c <= 0.99; };
  return {in(c0) && in(c1), fmt::format("{} replicates, 20 regions x 10 units, B={}: coverage private {:.3f}, "
                                        "public {:.3f}",
                                        kReps, kB, c0, c1)};
}

// ---- 11. feature pipeline -----------------------------------------------

Outcome feature_pipeline() {
  bool nested = true;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::vector<double> lambdas = {0.1, 0.25, 0.5, 0.75, 0.9, 1.0};
  for (int rep = 0; rep < 200; ++rep) {
    std::map<std::string, double> rates;
    const int P = 2 + rep % 40;
    for (int p = 0; p < P; ++p) rates[fmt::format("p{}", p)] = u(rng) < 0.2 ? 0.0 : std::floor(u(rng) * 8) / 8;
    std::map<std::string, std::int8_t> prev;
    for (double l : lambdas) {
      const auto cur = li::foreign_indicator(rates, l, &rates);
      for (const auto& [prov, flag] : cur)
        if (!prev.empty() && flag > prev.at(prov)) nested = false;
      prev = cur;
    }
  }
  for (std::uint64_t seed : {1, 2, 3}) {
    const li::ResponseMatrix m = fixture_items(li::simulate_fixture(seed));
    for (std::size_t k = 0; k < m.n_units(); ++k)
      for (std::size_t i = 1; i < li::kForeignLevels.size(); ++i)
        if (m.at(k, i) > m.at(k, i - 1)) nested = false;
  }
  const std::map<std::string, double> example = {{"a", 0.1}, {"b", 0.2}, {"c", 0.3}, {"d", 0.4}};
  const double threshold = li::foreign_threshold(example, 0.5);
  const auto flags = li::foreign_indicator(example, 0.5, &example);
  const bool worked = threshold == 0.25 && flags.at("a") == 0 && flags.at("b") == 0 && flags.at("c") == 1 &&
                      flags.at("d") == 1;
  return {nested && worked, fmt::format("nesting over 200 random rate sets and 3 fixtures: {}; worked example "
                                        "threshold {} (flags 0,0,1,1: {})",
                                        nested, li::format_number(threshold), worked)};
}

// ---- 12. end-to-end CLI -------------------------------------------------

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(LATENT_INDEX_CLI) + " " + args + " >>" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome end_to_end() {
  const fs::path root = fs::temp_directory_path() / "latent_index_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  const auto pipeline = [&](const fs::path& dir) -> std::string {
    const fs::path log = root / (dir.filename().string() + ".log");
    if (run_cli("simulate -o " + dir.string(), log) != 0) return "simulate failed";
    for (const char* stage : {"features", "fit-ltm", "fit-ebp", "fit-lqmm", "report"})
      if (run_cli(std::string(stage) + " -c " + (dir / "config.json").string(), log) != 0)
        return std::string(stage) + " failed, see " + log.string();
    return "";
  };
  const auto t0 = std::chrono::steady_clock::now();
  if (auto e = pipeline(root / "first"); !e.empty()) return {false, e};
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (auto e = pipeline(root / "second"); !e.empty()) return {false, "rerun: " + e};

  const auto scores = nlohmann::json::parse(li::read_file((root / "first/out/ltm_scores.json").string()));
  bool in_unit = true;
  for (const auto& unit : scores.at("units")) {
    const double v = unit.at("scaled").get<double>();
    in_unit = in_unit && v >= 0.0 && v <= 1.0;
  }
  const li::CsvTable report = li::read_csv((root / "first/out/province_report.csv").string());
  const li::CsvTable provinces = li::read_csv((root / "first/provinces.csv").string());
  bool unsampled_row = false;
  for (const auto& row : report.rows)
    unsampled_row = unsampled_row || (row[report.column("n_sampled")] == "0" &&
                                      row[report.column("direct_median")] == "missing" &&
                                      row[report.column("ebp_estimate")] != "missing");
  const bool rows_ok = report.rows.size() == provinces.rows.size();
  std::size_t files = 0, identical = 0;
  for (const auto& e : fs::directory_iterator(root / "first/out")) {
    ++files;
    identical += li::read_file(e.path().string()) ==
                 li::read_file((root / "second/out" / e.path().filename()).string());
  }
  for (const char* f : {"survey.csv", "provinces.csv", "registry.csv", "config.json"}) {
    ++files;
    identical += li::read_file((root / "first" / f).string()) == li::read_file((root / "second" / f).string());
  }
  return {seconds <= 300.0 && in_unit && rows_ok && unsampled_row && identical == files,
          fmt::format("pipeline {:.1f} s single-threaded; scores in [0,1]: {}; {} report rows for {} provinces, "
                      "unsampled province row present: {}; {}/{} files byte-identical on rerun",
                      seconds, in_unit, report.rows.size(), provinces.rows.size(), unsampled_row, identical, files)};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {1, "quadrature exactness", 1.0, quadrature_exactness},
      {2, "latent trait likelihood oracle", 10.0, ltm_likelihood_oracle},
      {3, "EM monotonicity on fixture", 600.0, em_monotonicity},
      {4, "latent trait parameter recovery", 600.0, ltm_recovery},
      {5, "shrinkage identities", 1.0, shrinkage_identities},
      {6, "EBP dominance over direct median", 300.0, ebp_dominance},
      {7, "EBP collapse", 600.0, ebp_collapse},
      {8, "quantile mixed model degenerate collapse", 600.0, lqmm_degenerate},
      {9, "quantile mixed model recovery and ordering", 120.0, lqmm_recovery},
      {10, "cluster bootstrap coverage", 600.0, bootstrap_coverage},
      {11, "feature pipeline", 600.0, feature_pipeline},
      {12, "end-to-end CLI", 600.0, end_to_end},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (s > c.budget_seconds) {
      o.pass = false;
      o.detail += fmt::format("; over time budget of {} s", c.budget_seconds);
    }
    failed += !o.pass;
    std::cout << fmt::format("criterion {:2d} {}: {} ({:.1f} s) {}\n", c.id, o.pass ? "PASS" : "FAIL", c.name, s,
                             o.detail)
              << std::flush;
  }
  std::cout << fmt::format("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
