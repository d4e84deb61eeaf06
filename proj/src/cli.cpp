#include "lowrank/cli.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace lowrank::cli {

using ordered_json = nlohmann::ordered_json;

namespace {

ordered_json params_json(const HyperParams& p, int n_epochs) {
  ordered_json j;
  j["xi"] = p.xi;
  j["L"] = p.L;
  j["eta"] = p.eta;
  j["c_alpha"] = p.c_alpha;
  j["c_lambda"] = p.c_lambda;
  j["delta"] = p.delta;
  j["xi_bonus"] = p.xi_bonus;
  j["n_epochs"] = n_epochs;
  return j;
}

std::string manifest_json(const ExperimentConfig& cfg, const ExperimentSetup& setup, const Schedule& polo) {
  ordered_json doc = ordered_json::parse(config_to_json(cfg, &polo));
  ordered_json resolved;
  const LowRankMdp& mdp = setup.mdp;
  resolved["instance"] = {{"n_states", mdp.n_states()},
                          {"n_actions", mdp.n_actions()},
                          {"dim", mdp.dim()},
                          {"gamma", mdp.gamma()}};
  if (cfg.instance.kind == InstanceSpec::Kind::kHard) {
    const BuiltInstance built = build_instance(cfg);
    resolved["instance"]["epsilon"] = built.hard->params.epsilon;
  }
  const Schedule theory = rate_optimal_schedule(setup.K, mdp.n_actions(), mdp.dim(), mdp.gamma(),
                                                 polo.params.c_alpha, polo.params.c_lambda);
  resolved["rate_optimal"] = params_json(theory.params, theory.epochs.n_epochs);
  ordered_json per_algo;
  for (Algo a : cfg.algos) {
    const Schedule s = algo_schedule(polo, a);
    per_algo[algo_name(a)] = params_json(s.params, s.epochs.n_epochs);
  }
  resolved["algos"] = per_algo;
  resolved["class_size"] = cfg.class_size;
  doc["resolved"] = resolved;
  return doc.dump(2) + "\n";
}

std::string diagnostics_row(const RunResult& r) {
  const RunDiagnostics& d = r.diag;
  std::ostringstream os;
  os << algo_name(r.algo) << ',' << r.seed << ',' << format_double(r.cum_regret()) << ','
     << format_double(r.regret().slope_loglog) << ',' << format_double(d.omd_sum) << ','
     << format_double(d.omd_bound) << ',' << format_double(d.optimism_sum) << ','
     << format_double(d.optimism_bound) << ',' << format_double(d.estbias_sum) << ','
     << format_double(d.max_decomposition_residual) << ',' << format_double(d.max_bonus) << ','
     << format_double(d.bonus_cap) << ',' << format_double(d.min_bonus) << ',' << (d.simplex_ok ? 1 : 0) << ','
     << format_double(d.min_cov_monotone_eig) << ',' << format_double(d.elliptical_sum) << ','
     << format_double(d.elliptical_bound) << ',' << d.roll_in_truncations << ','
     << (r.final_mle_index ? std::to_string(*r.final_mle_index) : "-1") << ','
     << (r.true_index ? std::to_string(*r.true_index) : "-1");
  return os.str();
}

std::vector<std::string> split_commas(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int run_config(ExperimentConfig cfg, std::ostream& out, std::ostream& err) {
  std::optional<ExperimentSetup> setup;
  Schedule polo;
  try {
    setup.emplace(make_setup(cfg));
    polo = polo_schedule(*setup);
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    err << "error: config: " << e.what() << '\n';
    return kConfigError;
  }

  ExperimentResult result;
  try {
    result = run_experiment(*setup);
  } catch (const std::exception& e) {
    err << "error: run failed: " << e.what() << '\n';
    return kRuntimeError;
  }

  try {
    const std::filesystem::path dir = cfg.out;
    for (const RunResult& r : result.runs) {
      std::ostringstream csv;
      write_episode_csv(r, csv);
      write_file(dir / "runs" / (algo_name(r.algo) + "_seed" + std::to_string(r.seed) + ".csv"), csv.str());
    }
    std::ostringstream summary;
    write_summary_csv(result.summary, summary);
    write_file(dir / "summary.csv", summary.str());
    std::ostringstream diag;
    diag << kDiagnosticsCsvHeader << '\n';
    for (const RunResult& r : result.runs) diag << diagnostics_row(r) << '\n';
    write_file(dir / "diagnostics.csv", diag.str());
    write_file(dir / "manifest.json", manifest_json(cfg, *setup, polo));
    out << summary.str();
  } catch (const std::exception& e) {
    err << "error: writing outputs: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kOk;
}

int cmd_run(const std::filesystem::path& config_path, const RunOptions& options, std::ostream& out,
            std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
    if (options.out) cfg.out = *options.out;
    if (options.jobs) {
      if (*options.jobs < 1) throw ParseError("--jobs must be >= 1");
      cfg.jobs = *options.jobs;
    }
    (void)build_instance(cfg);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return run_config(std::move(cfg), out, err);
}

HardInstanceParams parse_hard_params(const std::string& text) {
  HardInstanceParams p;
  std::string body = text;
  if (body.rfind("hard", 0) == 0) {
    body = body.substr(4);
    if (!body.empty() && (body[0] == ':' || body[0] == ',')) body = body.substr(1);
  }
  for (const std::string& item : split_commas(body)) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ParseError("hard-instance parameter '" + item + "' is not key=value");
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    try {
      std::size_t used = 0;
      if (key == "d") p.d = std::stoi(value, &used);
      else if (key == "S") p.S = std::stoi(value, &used);
      else if (key == "A") p.A = std::stoi(value, &used);
      else if (key == "K") p.K = std::stoi(value, &used);
      else if (key == "gamma") p.gamma = std::stod(value, &used);
      else if (key == "epsilon") p.epsilon = std::stod(value, &used);
      else if (key == "target") {
        const auto colon = value.find(':');
        if (colon == std::string::npos) throw ParseError("target must be i_star:a_star");
        p.target = HardTarget{std::stoi(value.substr(0, colon)), std::stoi(value.substr(colon + 1))};
        used = value.size();
      } else {
        throw ParseError("unknown hard-instance parameter '" + key + "'");
      }
      if (used != value.size()) throw ParseError("malformed value for '" + key + "': " + value);
    } catch (const std::logic_error&) {
      throw ParseError("malformed value for '" + key + "': " + value);
    }
  }
  return p;
}

int cmd_validate(const std::string& target, std::ostream& out, std::ostream& err) {
  std::optional<LowRankMdp> mdp;
  try {
    if (std::filesystem::is_regular_file(target)) {
      const std::string text = read_file(target);
      const auto doc = nlohmann::json::parse(text, nullptr, false);
      if (doc.is_object() && doc.contains("instance")) {
        mdp = build_instance(parse_config(text, std::filesystem::path(target).parent_path())).mdp;
      } else {
        mdp = mdp_from_json(text);
      }
    } else if (target.find('=') != std::string::npos || target.rfind("hard", 0) == 0) {
      const HardInstanceParams p = parse_hard_params(target);
      try {
        mdp = build_hard_instance(p).mdp;
      } catch (const std::invalid_argument& e) {
        throw ParseError(e.what());
      }
    } else {
      throw ParseError("no such file and not hard-instance parameters: " + target);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  const ValidationReport report = validate_low_rank(*mdp);
  out << report.to_string();
  if (report.regularity_bound_only) {
    err << "warning: mu-regularity checked with the bound-only sufficient condition\n";
  }
  out << (report.all_passed() ? "valid\n" : "invalid\n");
  return report.all_passed() ? kOk : kValidationFailed;
}

int cmd_sweep(const std::filesystem::path& config_path, const std::string& param,
              const std::vector<std::string>& values, const RunOptions& options, std::ostream& out,
              std::ostream& err) {
  if (values.empty()) {
    err << "error: sweep needs at least one value\n";
    return kConfigError;
  }
  ExperimentConfig base;
  try {
    base = load_config(config_path);
    if (options.out) base.out = *options.out;
    if (options.jobs) {
      if (*options.jobs < 1) throw ParseError("--jobs must be >= 1");
      base.jobs = *options.jobs;
    }
    for (const std::string& v : values) {
      ExperimentConfig probe = base;
      set_param(probe, param, v);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }

  std::ostringstream merged;
  merged << "param,value," << kSummaryCsvHeader << '\n';
  for (const std::string& v : values) {
    ExperimentConfig cfg = base;
    set_param(cfg, param, v);
    cfg.out = base.out / (param + "=" + v);
    std::ostringstream run_out;
    const int code = run_config(cfg, run_out, err);
    if (code != kOk) return code;
    std::istringstream rows(read_file(cfg.out / "summary.csv"));
    std::string line;
    std::getline(rows, line);  // header
    while (std::getline(rows, line)) {
      if (!line.empty()) merged << param << ',' << v << ',' << line << '\n';
    }
  }
  try {
    write_file(base.out / "sweep_summary.csv", merged.str());
  } catch (const std::exception& e) {
    err << "error: writing outputs: " << e.what() << '\n';
    return kRuntimeError;
  }
  out << merged.str();
  return kOk;
}

}  // namespace lowrank::cli
