#ifndef LATENT_INDEX_PIPELINE_HPP_
#define LATENT_INDEX_PIPELINE_HPP_

#include <fmt/format.h>
#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "latent_index/csv.hpp"
#include "latent_index/errors.hpp"
#include "latent_index/features.hpp"
#include "latent_index/fixture.hpp"
#include "latent_index/frame.hpp"
#include "latent_index/item_set.hpp"
#include "latent_index/latent_trait.hpp"
#include "latent_index/quantile_mixed.hpp"
#include "latent_index/sae_ebp.hpp"

namespace latent_index {

namespace fs = std::filesystem;

// Every tunable constant of the batch pipeline. Relative paths are resolved
// against the directory of the config file.
struct PipelineConfig {
  std::string survey = "survey.csv";
  std::string provinces = "provinces.csv";
  std::string registry = "registry.csv";  // empty: allocate frame cells from the sample
  std::string output_dir = "out";
  int threads = 1;

  std::vector<double> lambdas = {kForeignLevels.begin(), kForeignLevels.end()};
  std::string quantile_base = "rates";  // or "resident_counts"
  bool sampled_only = false;
  bool weighted_summaries = false;

  LtmConfig ltm;

  int ebp_B = 200;
  std::uint64_t ebp_seed = 20240101;
  std::string ebp_statistic = "median";  // median | mean | quantile
  double ebp_quantile = 0.5;
  bool reml = false;
  std::vector<std::string> covariates = {kCovariates.begin(), kCovariates.end()};
  bool ebp_rescale = false;

  std::vector<double> taus = {0.25, 0.5, 0.75};
  int lqmm_B = 200;
  std::uint64_t lqmm_seed = 20240102;
  int lqmm_restarts = 5;

  fs::path base_dir = ".";

  fs::path path(const std::string& p) const { return p.empty() ? fs::path() : base_dir / p; }
  fs::path out(const std::string& name) const { return base_dir / output_dir / name; }
};

inline nlohmann::ordered_json config_to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["inputs"] = {{"survey", c.survey}, {"provinces", c.provinces}, {"registry", c.registry}};
  j["output_dir"] = c.output_dir;
  j["threads"] = c.threads;
  j["features"] = {{"lambdas", c.lambdas},
                   {"quantile_base", c.quantile_base},
                   {"sampled_only", c.sampled_only},
                   {"weighted_summaries", c.weighted_summaries}};
  j["ltm"] = {{"quadrature_order", c.ltm.quadrature_order},
              {"max_iter", c.ltm.max_iter},
              {"tol", c.ltm.tol},
              {"ridge", c.ltm.ridge},
              {"max_abs_coef", c.ltm.max_abs_coef}};
  j["ebp"] = {{"B", c.ebp_B},
              {"seed", c.ebp_seed},
              {"statistic", c.ebp_statistic},
              {"quantile", c.ebp_quantile},
              {"reml", c.reml},
              {"covariates", c.covariates},
              {"rescale", c.ebp_rescale}};
  j["lqmm"] = {{"taus", c.taus},
               {"bootstrap_B", c.lqmm_B},
               {"seed", c.lqmm_seed},
               {"restarts", c.lqmm_restarts}};
  return j;
}

namespace detail {

// Reads the keys of one JSON object into targets and rejects anything else,
// so a typo in a config file is an error rather than a silent default.
class ConfigReader {
 public:
  ConfigReader(const nlohmann::json& obj, std::string where) : obj_(obj), where_(std::move(where)) {
    if (!obj_.is_object()) throw ValidationError("config: '" + where_ + "' must be an object");
  }
  template <class T>
  void get(const char* key, T& target) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      target = obj_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ValidationError("config: '" + where_ + "." + key + "' has the wrong type");
    }
  }
  ConfigReader child(const char* key) {
    seen_.insert(key);
    static const nlohmann::json empty = nlohmann::json::object();
    return ConfigReader(obj_.contains(key) ? obj_.at(key) : empty, where_ + "." + key);
  }
  void finish() const {
    for (const auto& [k, v] : obj_.items())
      if (!seen_.contains(k)) throw ValidationError("config: unknown key '" + where_ + "." + k + "'");
  }

 private:
  const nlohmann::json& obj_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline void validate_config(const PipelineConfig& c) {
  const auto bad = [](const std::string& what) { throw ValidationError("config: " + what); };
  if (c.threads < 1) bad("threads must be >= 1");
  if (c.lambdas.empty()) bad("features.lambdas is empty");
  for (double l : c.lambdas)
    if (!(l > 0.0 && l <= 1.0)) bad("features.lambdas must lie in (0, 1]");
  if (c.quantile_base != "rates" && c.quantile_base != "resident_counts")
    bad("features.quantile_base must be 'rates' or 'resident_counts'");
  if (c.ltm.quadrature_order < 1 || c.ltm.quadrature_order > kMaxQuadratureOrder)
    bad("ltm.quadrature_order must lie in [1, " + std::to_string(kMaxQuadratureOrder) + "]");
  if (c.ltm.max_iter < 1 || !(c.ltm.tol > 0.0) || !(c.ltm.ridge >= 0.0) || !(c.ltm.max_abs_coef > 0.0))
    bad("ltm settings out of range");
  if (c.ebp_B < 1) bad("ebp.B must be >= 1");
  if (c.ebp_statistic != "median" && c.ebp_statistic != "mean" && c.ebp_statistic != "quantile")
    bad("ebp.statistic must be 'median', 'mean' or 'quantile'");
  if (!(c.ebp_quantile >= 0.0 && c.ebp_quantile <= 1.0)) bad("ebp.quantile must lie in [0, 1]");
  for (const auto& cov : c.covariates)
    if (std::find(kCovariates.begin(), kCovariates.end(), cov) == kCovariates.end())
      bad("ebp.covariates: unknown covariate '" + cov + "'");
  if (c.taus.empty()) bad("lqmm.taus is empty");
  for (double t : c.taus)
    if (!(t > 0.0 && t < 1.0)) bad("lqmm.taus must lie in (0, 1)");
  if (c.lqmm_B < 50) bad("lqmm.bootstrap_B must be >= 50");
  if (c.lqmm_restarts < 1) bad("lqmm.restarts must be >= 1");
}

inline PipelineConfig config_from_json(const nlohmann::json& j, fs::path base_dir) {
  PipelineConfig c;
  c.base_dir = std::move(base_dir);
  detail::ConfigReader root(j, "config");
  auto in = root.child("inputs");
  in.get("survey", c.survey);
  in.get("provinces", c.provinces);
  in.get("registry", c.registry);
  in.finish();
  root.get("output_dir", c.output_dir);
  root.get("threads", c.threads);
  auto f = root.child("features");
  f.get("lambdas", c.lambdas);
  f.get("quantile_base", c.quantile_base);
  f.get("sampled_only", c.sampled_only);
  f.get("weighted_summaries", c.weighted_summaries);
  f.finish();
  auto l = root.child("ltm");
  l.get("quadrature_order", c.ltm.quadrature_order);
  l.get("max_iter", c.ltm.max_iter);
  l.get("tol", c.ltm.tol);
  l.get("ridge", c.ltm.ridge);
  l.get("max_abs_coef", c.ltm.max_abs_coef);
  l.finish();
  auto e = root.child("ebp");
  e.get("B", c.ebp_B);
  e.get("seed", c.ebp_seed);
  e.get("statistic", c.ebp_statistic);
  e.get("quantile", c.ebp_quantile);
  e.get("reml", c.reml);
  e.get("covariates", c.covariates);
  e.get("rescale", c.ebp_rescale);
  e.finish();
  auto q = root.child("lqmm");
  q.get("taus", c.taus);
  q.get("bootstrap_B", c.lqmm_B);
  q.get("seed", c.lqmm_seed);
  q.get("restarts", c.lqmm_restarts);
  q.finish();
  root.finish();
  validate_config(c);
  return c;
}

inline PipelineConfig load_config(const fs::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path.string()));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": invalid JSON: " + e.what());
  }
  return config_from_json(j, path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

namespace detail {

inline std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

inline void require(const fs::path& p, const char* stage) {
  if (!fs::exists(p))
    throw ValidationError("missing " + p.filename().string() + " (run " + stage + " first)");
}

inline void write_output(const PipelineConfig& c, const std::string& name, const std::string& text) {
  fs::create_directories(c.base_dir / c.output_dir);
  write_file(c.out(name).string(), text);
}

inline std::string tau_label(double tau) { return fmt::format("{}", tau); }

struct Inputs {
  ProvinceFile provinces;
  SurveyDataset survey;
};

inline Inputs load_inputs(const PipelineConfig& c) {
  Inputs in;
  in.provinces = load_provinces(c.path(c.provinces).string());
  in.survey = load_survey(c.path(c.survey).string(), &in.provinces);
  return in;
}

inline std::string missing_or(const std::optional<double>& v, bool display = false) {
  if (!v) return "missing";
  return display ? format_display(*v) : format_number(*v);
}

// Scaled scores from ltm_scores.json aligned with the survey rows.
inline std::vector<double> scaled_scores_for(const PipelineConfig& c, const SurveyDataset& d) {
  const fs::path p = c.out("ltm_scores.json");
  require(p, "fit-ltm");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(p.string()));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(p.string() + ": invalid JSON: " + e.what());
  }
  std::map<std::string, double> by_id;
  for (const auto& u : j.at("units")) by_id[u.at("id").get<std::string>()] = u.at("scaled").get<double>();
  std::vector<double> out;
  for (const auto& id : d.unit_id) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw ValidationError(p.string() + ": no score for unit '" + id + "'");
    out.push_back(it->second);
  }
  return out;
}

}  // namespace detail

// Survey + province file -> item matrix and province table.
inline void cmd_features(const PipelineConfig& c, std::ostream& log) {
  const auto in = detail::load_inputs(c);
  const auto rates = foreign_rate(in.survey, resident_counts(in.provinces));
  const auto base = foreign_base(rates, in.provinces, in.survey,
                                 {c.sampled_only, c.quantile_base == "resident_counts"});
  const ResponseMatrix items = build_item_matrix(in.survey, rates, c.lambdas, &base);
  detail::write_output(c, "items.csv", write_item_matrix(items));

  const auto provs = in.provinces.provinces();
  std::vector<std::string> header = {"province_id", "region", "macro_area", "f_p",
                                     "population_units", "n_sampled", "foreign_rate"};
  std::vector<std::map<std::string, std::int8_t>> flags;
  for (double l : c.lambdas) {
    header.push_back(foreign_item_name(l));
    flags.push_back(foreign_indicator(rates, l, &base));
  }
  std::vector<std::vector<ProvinceSummaryRow>> means;
  for (std::size_t i = 0; i < kServiceItemNames.size(); ++i) {
    header.push_back("mean_" + std::string(kServiceItemNames[i]));
    means.push_back(province_item_mean(in.survey, i, provs));
  }
  CsvWriter w(header);
  for (std::size_t p = 0; p < provs.size(); ++p) {
    const ProvinceInfo& info = in.provinces.rows[p];
    std::vector<std::string> row = {info.province, info.region, info.macro_area,
                                    format_number(info.foreign_residents),
                                    std::to_string(info.population_units),
                                    std::to_string(means[0][p].n_sampled),
                                    format_number(rates.at(info.province))};
    for (const auto& f : flags) row.push_back(std::to_string(f.at(info.province)));
    for (const auto& m : means) row.push_back(detail::missing_or(m[p].value));
    w.row(row);
  }
  detail::write_output(c, "province_features.csv", w.str());

  std::size_t sampled = 0;
  for (const auto& r : means[0]) sampled += r.n_sampled > 0;
  log << fmt::format("features: {} units, {} provinces ({} sampled), {} items\n", in.survey.size(),
                     provs.size(), sampled, items.n_items());
  for (const auto& name : items.degenerate_items())
    log << fmt::format("features: warning: item '{}' is constant across units\n", name);
}

inline std::string ltm_model_json(const FittedLTM& fit) {
  std::string s = "{\n  \"items\": [\n";
  for (std::size_t i = 0; i < fit.item_names.size(); ++i)
    s += fmt::format("    {{\"name\": {}, \"beta0\": {}, \"beta1\": {}}}{}\n",
                     detail::json_string(fit.item_names[i]), format_number(fit.params.beta0[i]),
                     format_number(fit.params.beta1[i]), i + 1 < fit.item_names.size() ? "," : "");
  s += fmt::format("  ],\n  \"loglik\": {},\n  \"converged\": {},\n  \"iterations\": {},\n"
                   "  \"quadrature_order\": {}\n}}\n",
                   format_number(fit.log_likelihood), fit.converged ? "true" : "false",
                   fit.n_iterations, fit.quadrature_order);
  return s;
}

inline std::string ltm_scores_json(const LatentScores& sc) {
  std::string s = "{\n  \"units\": [\n";
  for (std::size_t k = 0; k < sc.unit_ids.size(); ++k)
    s += fmt::format("    {{\"id\": {}, \"raw\": {}, \"scaled\": {}, \"posterior_sd\": {}}}{}\n",
                     detail::json_string(sc.unit_ids[k]), format_number(sc.raw[k]),
                     format_number(sc.scaled[k]), format_number(sc.posterior_sd[k]),
                     k + 1 < sc.unit_ids.size() ? "," : "");
  return s + "  ]\n}\n";
}

inline void cmd_fit_ltm(const PipelineConfig& c, std::ostream& log) {
  const fs::path items_path = c.out("items.csv");
  detail::require(items_path, "features");
  const ResponseMatrix data = load_item_matrix(items_path.string());
  const FittedLTM fit = em_fit(data, c.ltm);
  const LatentScores scores = eap_scores(fit, data);
  detail::write_output(c, "ltm_model.json", ltm_model_json(fit));
  detail::write_output(c, "ltm_scores.json", ltm_scores_json(scores));
  log << fmt::format("fit-ltm: {} units, {} items, loglik {}, {} iterations, converged {}\n",
                     data.n_units(), data.n_items(), format_number(fit.log_likelihood),
                     fit.n_iterations, fit.converged);
  if (!fit.converged)
    log << fmt::format("fit-ltm: warning: EM stopped at max_iter {} before tolerance {}\n",
                       c.ltm.max_iter, format_number(c.ltm.tol));
}

inline Statistic ebp_statistic(const PipelineConfig& c) {
  if (c.ebp_statistic == "mean") return Statistic::mean();
  if (c.ebp_statistic == "quantile") return Statistic::quantile(c.ebp_quantile);
  return Statistic::median();
}

inline void cmd_fit_ebp(const PipelineConfig& c, std::ostream& log) {
  const auto in = detail::load_inputs(c);
  const std::vector<double> y = detail::scaled_scores_for(c, in.survey);
  Registry registry;
  const bool have_registry = !c.registry.empty();
  if (have_registry) registry = load_registry(c.path(c.registry).string(), in.provinces);
  const Registry rest = out_of_sample_counts(in.survey, in.provinces, have_registry ? &registry : nullptr);
  const UnitCovariates sample_cov = sample_covariates(in.survey);
  const UnitCovariates pop_cov = population_covariates(rest, in.provinces);
  const EncodedDesign design = encode_design(sample_cov, pop_cov, c.covariates);

  SampleData sample;
  sample.y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  sample.X = design.sample;
  sample.domain = in.survey.province;
  sample.column_names = design.columns;
  PopulationFrame frame;
  frame.X = design.population;
  frame.domain = pop_cov.province;
  for (const auto& p : in.provinces.rows)
    frame.population_sizes[p.province] = static_cast<std::size_t>(p.population_units);

  NestedErrorOptions opt;
  opt.method = c.reml ? VarianceMethod::kREML : VarianceMethod::kML;
  const NestedErrorFit fit = fit_nested_error(sample, opt);
  const EBPResult res = ebp_indicator(fit, frame, sample, ebp_statistic(c), c.ebp_B, c.ebp_seed);
  const std::vector<double> rescaled = rescale_across_domains(res);

  std::vector<std::string> header = {"domain", "estimate", "estimate_clamped", "mc_sd", "B", "seed"};
  if (c.ebp_rescale) header.push_back("estimate_rescaled");
  CsvWriter w(header);
  for (const auto& p : in.provinces.rows) {
    const EbpRow* r = res.find(p.province);
    if (!r) continue;  // no units at all in this province
    std::vector<std::string> row = {r->domain, format_number(r->estimate),
                                    format_number(r->estimate_clamped), format_number(r->mc_sd),
                                    std::to_string(c.ebp_B), std::to_string(c.ebp_seed)};
    if (c.ebp_rescale)
      row.push_back(format_number(rescaled[static_cast<std::size_t>(r - res.rows.data())]));
    w.row(row);
  }
  detail::write_output(c, "ebp.csv", w.str());

  std::string m = "{\n  \"columns\": [";
  for (std::size_t j = 0; j < design.columns.size(); ++j)
    m += (j ? ", " : "") + detail::json_string(design.columns[j]);
  m += "],\n  \"beta\": [";
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j) m += (j ? ", " : "") + format_number(fit.beta[j]);
  m += "],\n  \"dropped_columns\": [";
  for (std::size_t j = 0; j < design.dropped.size(); ++j)
    m += (j ? ", " : "") + detail::json_string(design.dropped[j]);
  m += fmt::format("],\n  \"sigma2_u\": {},\n  \"sigma2_e\": {},\n  \"loglik\": {},\n"
                   "  \"method\": \"{}\",\n  \"boundary\": {}\n}}\n",
                   format_number(fit.sigma2_u), format_number(fit.sigma2_e),
                   format_number(fit.loglik), c.reml ? "REML" : "ML", fit.boundary ? "true" : "false");
  detail::write_output(c, "ebp_model.json", m);

  log << fmt::format("fit-ebp: {} sampled units, {} frame units, {} domains, sigma2_u {}, sigma2_e {}\n",
                     sample.y.size(), frame.X.rows(), res.rows.size(), format_number(fit.sigma2_u),
                     format_number(fit.sigma2_e));
  for (const auto& d : design.dropped)
    log << fmt::format("fit-ebp: note: design column '{}' is aliased and was dropped\n", d);
}

// Titularity design of the quantile model: private and public indicators
// without intercept, so each coefficient is a level.
inline Eigen::MatrixXd titularity_design(const std::vector<Titularity>& t) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(t.size()), 2);
  for (std::size_t k = 0; k < t.size(); ++k)
    X(static_cast<Eigen::Index>(k), t[k] == Titularity::kPublic ? 1 : 0) = 1.0;
  return X;
}

inline void cmd_fit_lqmm(const PipelineConfig& c, std::ostream& log) {
  const auto in = detail::load_inputs(c);
  const std::vector<double> y = detail::scaled_scores_for(c, in.survey);
  GroupedData data;
  data.y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  data.X = titularity_design(in.survey.titularity);
  data.group = in.survey.region;
  data.column_names = {"private", "public"};
  // Region weights: share of the registry's services located in the region.
  std::map<std::string, double> units;
  for (const auto& p : in.provinces.rows) units[p.region] += static_cast<double>(p.population_units);
  const std::set<std::string> sampled_regions(in.survey.region.begin(), in.survey.region.end());
  double total = 0.0;
  for (const auto& r : sampled_regions) total += units[r];
  for (const auto& r : sampled_regions) data.group_weights[r] = units[r] / total;

  Eigen::MatrixXd levels(2, 2);
  levels << 1, 0, 0, 1;
  const std::vector<std::string> level_names = {"private", "public"};
  std::vector<QuantileMixedFit> fits;
  for (double tau : c.taus) {
    LqmmConfig cfg;
    cfg.restarts = c.lqmm_restarts;
    cfg.restart_seed = derive_seed(c.lqmm_seed, {0});
    const QuantileMixedFit fit = fit_lqmm(data, tau, cfg);
    BootstrapOptions bopt;
    bopt.threads = c.threads;
    const BootstrapResult boot =
        bootstrap_fits(data, fit, c.lqmm_B, derive_seed(c.lqmm_seed, {1}), bopt);
    const std::string t = detail::tau_label(tau);

    CsvWriter fixed({"tau", "term", "estimate", "std_error", "ci_low", "ci_high"});
    for (Eigen::Index p = 0; p < 2; ++p)
      fixed.row({t, data.column_names[static_cast<std::size_t>(p)], format_number(fit.gamma[p]),
                 format_number(boot.std_error[p]), format_number(boot.ci_low[p]),
                 format_number(boot.ci_high[p])});
    detail::write_output(c, "lqmm_tau_" + t + "_fixed.csv", fixed.str());

    CsvWriter marg({"tau", "titularity", "point", "ci_low", "ci_high"});
    const auto m = predict_marginal(fit, levels, &boot);
    for (std::size_t i = 0; i < m.size(); ++i)
      marg.row({t, level_names[i], format_number(m[i].point), format_number(m[i].ci_low),
                format_number(m[i].ci_high)});
    detail::write_output(c, "lqmm_tau_" + t + "_marginal.csv", marg.str());

    CsvWriter cond({"tau", "region", "titularity", "point", "ci_low", "ci_high", "region_effect"});
    for (std::size_t g = 0; g < fit.groups.size(); ++g) {
      const auto q = predict_conditional(fit, levels, fit.groups[g], &boot);
      for (std::size_t i = 0; i < q.size(); ++i)
        cond.row({t, fit.groups[g], level_names[i], format_number(q[i].point),
                  format_number(q[i].ci_low), format_number(q[i].ci_high), format_number(fit.u[g])});
    }
    detail::write_output(c, "lqmm_tau_" + t + "_conditional.csv", cond.str());

    detail::write_output(
        c, "lqmm_tau_" + t + "_model.json",
        fmt::format("{{\n  \"tau\": {},\n  \"psi2\": {},\n  \"sigma\": {},\n  \"loglik\": {},\n"
                    "  \"converged\": {},\n  \"bootstrap_B\": {},\n  \"bootstrap_dropped\": {}\n}}\n",
                    format_number(tau), format_number(fit.psi2), format_number(fit.sigma),
                    format_number(fit.loglik), fit.converged ? "true" : "false", c.lqmm_B,
                    boot.dropped));
    log << fmt::format("fit-lqmm: tau {}: private {}, public {}, psi2 {}, converged {}, "
                       "bootstrap dropped {}/{}\n",
                       t, format_display(fit.gamma[0]), format_display(fit.gamma[1]),
                       format_number(fit.psi2), fit.converged, boot.dropped, c.lqmm_B);
    if (!fit.converged) log << fmt::format("fit-lqmm: warning: tau {} optimizer did not converge\n", t);
    fits.push_back(fit);
  }
  // Separately fitted levels may cross; report it, do not correct it.
  std::vector<std::size_t> order(c.taus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return c.taus[a] < c.taus[b]; });
  for (std::size_t i = 1; i < order.size(); ++i)
    for (Eigen::Index p = 0; p < 2; ++p)
      if (fits[order[i]].gamma[p] < fits[order[i - 1]].gamma[p])
        log << fmt::format("fit-lqmm: warning: {} estimates cross between tau {} and {}\n",
                           data.column_names[static_cast<std::size_t>(p)],
                           detail::tau_label(c.taus[order[i - 1]]), detail::tau_label(c.taus[order[i]]));
}

inline void cmd_report(const PipelineConfig& c, std::ostream& log) {
  const auto in = detail::load_inputs(c);
  const std::vector<double> y = detail::scaled_scores_for(c, in.survey);
  const fs::path ebp_path = c.out("ebp.csv");
  detail::require(ebp_path, "fit-ebp");
  const CsvTable ebp = read_csv(ebp_path.string());
  const std::size_t c_dom = ebp.column("domain"), c_est = ebp.column("estimate"),
                    c_cl = ebp.column("estimate_clamped"), c_sd = ebp.column("mc_sd");
  std::map<std::string, std::size_t> ebp_row;
  for (std::size_t r = 0; r < ebp.rows.size(); ++r) ebp_row[ebp.rows[r][c_dom]] = r;

  const auto provs = in.provinces.provinces();
  const auto med = province_summary(y, in.survey, provs, SummaryStatistic::kMedian, c.weighted_summaries);
  const auto iqr = province_summary(y, in.survey, provs, SummaryStatistic::kIqr, c.weighted_summaries);
  CsvWriter w({"province_id", "region", "macro_area", "n_sampled", "population_units",
               "direct_median", "direct_iqr", "ebp_estimate", "ebp_estimate_clamped", "ebp_mc_sd",
               "direct_median_display", "direct_iqr_display", "ebp_display"});
  std::size_t missing_direct = 0, missing_ebp = 0;
  for (std::size_t p = 0; p < provs.size(); ++p) {
    const ProvinceInfo& info = in.provinces.rows[p];
    std::optional<double> est, clamped, sd;
    if (const auto it = ebp_row.find(info.province); it != ebp_row.end()) {
      est = parse_double(ebp, it->second, c_est);
      clamped = parse_double(ebp, it->second, c_cl);
      sd = parse_double(ebp, it->second, c_sd);
    }
    missing_direct += !med[p].value;
    missing_ebp += !est;
    w.row({info.province, info.region, info.macro_area, std::to_string(med[p].n_sampled),
           std::to_string(info.population_units), detail::missing_or(med[p].value),
           detail::missing_or(iqr[p].value), detail::missing_or(est), detail::missing_or(clamped),
           detail::missing_or(sd), detail::missing_or(med[p].value, true),
           detail::missing_or(iqr[p].value, true), detail::missing_or(clamped, true)});
  }
  detail::write_output(c, "province_report.csv", w.str());
  log << fmt::format("report: {} provinces, {} without sampled units, {} without EBP estimate\n",
                     provs.size(), missing_direct, missing_ebp);
}

// Writes the synthetic fixture and a config pointing at it.
inline void cmd_simulate(const fs::path& dir, std::uint64_t seed, std::ostream& log) {
  const Fixture fx = simulate_fixture(seed);
  fs::create_directories(dir);
  write_file((dir / "survey.csv").string(), write_survey(fx.survey));
  write_file((dir / "provinces.csv").string(), write_provinces(fx.provinces));
  write_file((dir / "registry.csv").string(), write_registry(fx.registry));
  write_file((dir / "config.json").string(), config_to_json(PipelineConfig{}).dump(2) + "\n");
  log << fmt::format("simulate: {} units in {} provinces written to {}\n", fx.survey.size(),
                     fx.provinces.rows.size(), dir.string());
}

}  // namespace latent_index

#endif  // LATENT_INDEX_PIPELINE_HPP_
