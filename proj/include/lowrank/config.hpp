#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lowrank/hard_instances.hpp"
#include "lowrank/harness.hpp"
#include "lowrank/io.hpp"

namespace lowrank {

struct InstanceSpec {
  enum class Kind { kHard, kFile, kRandom };
  Kind kind = Kind::kHard;
  // kHard; epsilon defaults to lower_bound_epsilon(d, A, K) when absent.
  HardInstanceParams hard;
  bool epsilon_given = false;
  // kFile
  std::filesystem::path path;
  // kRandom
  int n_states = 10;
  int n_actions = 3;
  int dim = 4;
  double gamma = 0.9;
  std::uint64_t seed = 0;
  double phi_concentration = 1.0;
  double mu_concentration = 1.0;
};

/// Loss generator. Losses are drawn per run seed from its "adversary"
/// sub-stream unless `loss_seed` pins them to one shared stream. On the hard
/// instance the base loss is the instance's 1 - r.
struct AdversarySpec {
  std::string kind = "fixed";  // fixed | switching | stochastic | file
  int period = 0;              // switching; 0 means max(1, K / 10)
  double noise = 0.1;          // stochastic
  std::filesystem::path path;  // file
  std::optional<std::uint64_t> loss_seed;
};

struct ExperimentConfig {
  InstanceSpec instance;
  AdversarySpec adversary;
  int class_size = 1;
  double perturb_scale = 0.3;
  int K = 1;
  std::vector<std::uint64_t> seeds;
  std::vector<Algo> algos{Algo::kPolo};
  ScheduleOverrides overrides;
  bool diagnostics = true;
  std::filesystem::path out = "out";
  int jobs = 1;
};

/// Parses a JSON config. Relative file paths resolve against `base_dir`.
/// Throws ParseError on schema violations or missing referenced files.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Config document for `config`, with every override field replaced by the
/// resolved POLO values when `resolved` is given.
std::string config_to_json(const ExperimentConfig& config, const Schedule* resolved = nullptr);

struct BuiltInstance {
  LowRankMdp mdp;
  std::optional<HardInstance> hard;
};

BuiltInstance build_instance(const ExperimentConfig& config);

/// Loss sequence for one run seed.
LossSequence make_losses(const ExperimentConfig& config, const BuiltInstance& instance, std::uint64_t seed);

ExperimentSetup make_setup(const ExperimentConfig& config);

/// Sets a sweepable parameter (xi, L, eta, c_alpha, c_lambda, K, class_size,
/// perturb_scale). Throws ParseError for unknown names or invalid values.
void set_param(ExperimentConfig& config, const std::string& name, const std::string& value);

}  // namespace lowrank
