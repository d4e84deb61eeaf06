// Command-line driver: run / validate / sweep.
#include <iostream>

#include <CLI11.hpp>

#include "lowrank/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Adversarial low-rank MDP laboratory"};
  app.require_subcommand(1);

  std::string out_dir;
  int jobs = 0;
  app.add_option("--out", out_dir, "Output directory (overrides the config)");
  app.add_option("--jobs", jobs, "Worker threads (overrides the config)");

  std::string config_path;
  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory (overrides the config)");
  run->add_option("--jobs", jobs, "Worker threads (overrides the config)");

  std::string target;
  auto* validate = app.add_subcommand("validate", "Check the regularity conditions of an MDP");
  validate->add_option("target", target, "MDP file, config file, or hard-instance params (d=8,S=12,...)")
      ->required();

  std::string param;
  std::string values;
  auto* sweep = app.add_subcommand("sweep", "Rerun a config over a list of parameter values");
  sweep->add_option("config", config_path, "Experiment config (JSON)")->required();
  sweep->add_option("--param", param, "xi, L, eta, c_alpha, c_lambda, K, class_size or perturb_scale")
      ->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--out", out_dir, "Output directory (overrides the config)");
  sweep->add_option("--jobs", jobs, "Worker threads (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : lowrank::cli::kConfigError;
  }

  lowrank::cli::RunOptions options;
  if (!out_dir.empty()) options.out = out_dir;
  if (jobs != 0) options.jobs = jobs;

  if (*run) return lowrank::cli::cmd_run(config_path, options, std::cout, std::cerr);
  if (*validate) return lowrank::cli::cmd_validate(target, std::cout, std::cerr);

  std::vector<std::string> list;
  std::size_t start = 0;
  while (start <= values.size()) {
    const std::size_t comma = values.find(',', start);
    const std::string item = values.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!item.empty()) list.push_back(item);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return lowrank::cli::cmd_sweep(config_path, param, list, options, std::cout, std::cerr);
}
