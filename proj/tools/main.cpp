#include <CLI11.hpp>

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <string>

#include "latent_index/errors.hpp"
#include "latent_index/pipeline.hpp"

namespace li = latent_index;

namespace {

// 0 success, 2 invalid input or config, 3 numerical failure, 1 anything else
// (I/O failures, internal errors).
int run(int argc, char** argv) {
  CLI::App app{"Latent service index pipeline: features, latent trait, EBP and quantile mixed fits"};
  app.require_subcommand(1);
  std::string config_path = "config.json";

  const auto stage = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("-c,--config", config_path, "pipeline config (JSON)")->capture_default_str();
    return sub;
  };
  auto* features = stage("features", "build the 13-item matrix and the province table");
  auto* fit_ltm = stage("fit-ltm", "fit the latent trait model and score units");
  auto* fit_ebp = stage("fit-ebp", "EBP of the province statistic of the scaled index");
  auto* fit_lqmm = stage("fit-lqmm", "quantile mixed fits of the index on titularity by region");
  auto* report = stage("report", "combined per-province report");

  auto* show = app.add_subcommand("show-config", "print the effective config with all defaults");
  std::string show_path;
  show->add_option("-c,--config", show_path, "config to resolve (defaults only when absent)");

  auto* simulate = app.add_subcommand("simulate", "write the synthetic fixture and a default config");
  std::string out_dir = "fixture";
  std::uint64_t seed = 1;
  simulate->add_option("-o,--out", out_dir, "output directory")->capture_default_str();
  simulate->add_option("-s,--seed", seed, "fixture seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (simulate->parsed()) {
      li::cmd_simulate(out_dir, seed, std::cerr);
    } else if (show->parsed()) {
      const li::PipelineConfig c = show_path.empty() ? li::PipelineConfig{} : li::load_config(show_path);
      std::cout << li::config_to_json(c).dump(2) << "\n";
    } else {
      const li::PipelineConfig c = li::load_config(config_path);
      if (features->parsed()) li::cmd_features(c, std::cerr);
      else if (fit_ltm->parsed()) li::cmd_fit_ltm(c, std::cerr);
      else if (fit_ebp->parsed()) li::cmd_fit_ebp(c, std::cerr);
      else if (fit_lqmm->parsed()) li::cmd_fit_lqmm(c, std::cerr);
      else if (report->parsed()) li::cmd_report(c, std::cerr);
    }
  } catch (const li::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const li::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const li::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
