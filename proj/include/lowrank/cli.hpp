#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lowrank/config.hpp"

namespace lowrank::cli {

/// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kOk = 0,
  kConfigError = 1,
  kRuntimeError = 2,
  kValidationFailed = 3,
};

struct RunOptions {
  std::optional<std::filesystem::path> out;  // replaces the config's output directory
  std::optional<int> jobs;                   // replaces the config's worker count
};

/// Runs the experiment described by `config_path` and writes, under the
/// output directory: runs/<algo>_seed<seed>.csv, summary.csv, diagnostics.csv
/// and manifest.json. The manifest is itself a config that reproduces the run.
int cmd_run(const std::filesystem::path& config_path, const RunOptions& options, std::ostream& out,
            std::ostream& err);

/// Same as cmd_run for an already parsed config.
int run_config(ExperimentConfig config, std::ostream& out, std::ostream& err);

/// `target` is an MDP document, a config file, or hard-instance parameters
/// such as "d=8,S=30,A=5,gamma=0.9,epsilon=0.1,target=0:1" (or "hard" for
/// the defaults). Prints the validation report; exit 3 when a check fails.
int cmd_validate(const std::string& target, std::ostream& out, std::ostream& err);

/// Runs the config once per value (each under <out>/<param>=<value>) and
/// writes the merged sweep_summary.csv keyed by value.
int cmd_sweep(const std::filesystem::path& config_path, const std::string& param,
              const std::vector<std::string>& values, const RunOptions& options, std::ostream& out,
              std::ostream& err);

/// Hard-instance parameters from "key=value" pairs separated by commas.
HardInstanceParams parse_hard_params(const std::string& text);

inline constexpr const char* kDiagnosticsCsvHeader =
    "algo,seed,cum_regret,slope,omd_sum,omd_bound,optimism_sum,optimism_bound,estbias_sum,"
    "max_decomposition_residual,max_bonus,bonus_cap,min_bonus,simplex_ok,min_cov_monotone_eig,elliptical_sum,"
    "elliptical_bound,roll_in_truncations,final_mle_index,true_index";

}  // namespace lowrank::cli
