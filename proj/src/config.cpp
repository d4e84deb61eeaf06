#include "lowrank/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "lowrank/adversary.hpp"

namespace lowrank {

using nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& what) { throw ParseError("config: " + what); }

void reject_unknown(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!keys.count(key)) fail("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail("field '" + std::string(key) + "' in " + where + " has the wrong type");
  }
}

std::filesystem::path resolve_path(const std::string& raw, const std::filesystem::path& base_dir) {
  std::filesystem::path p(raw);
  if (p.is_relative() && !base_dir.empty()) p = base_dir / p;
  if (!std::filesystem::exists(p)) fail("referenced file does not exist: " + p.string());
  return p;
}

InstanceSpec parse_instance(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) fail("'instance' must be an object");
  InstanceSpec spec;
  const std::string type = get_or<std::string>(j, "type", "hard", "instance");
  if (type == "hard") {
    reject_unknown(j, "instance", {"type", "d", "S", "A", "gamma", "epsilon", "target"});
    spec.kind = InstanceSpec::Kind::kHard;
    spec.hard.d = get_or(j, "d", spec.hard.d, "instance");
    spec.hard.S = get_or(j, "S", spec.hard.S, "instance");
    spec.hard.A = get_or(j, "A", spec.hard.A, "instance");
    spec.hard.gamma = get_or(j, "gamma", spec.hard.gamma, "instance");
    if (j.contains("epsilon")) {
      spec.hard.epsilon = get_or(j, "epsilon", 0.0, "instance");
      spec.epsilon_given = true;
    }
    if (j.contains("target")) {
      const auto t = get_or<std::vector<int>>(j, "target", {}, "instance");
      if (t.size() != 2) fail("instance.target must be [i_star, a_star]");
      spec.hard.target = HardTarget{t[0], t[1]};
    }
  } else if (type == "file") {
    reject_unknown(j, "instance", {"type", "path"});
    spec.kind = InstanceSpec::Kind::kFile;
    if (!j.contains("path")) fail("instance of type 'file' needs 'path'");
    spec.path = resolve_path(get_or<std::string>(j, "path", "", "instance"), base_dir);
  } else if (type == "random") {
    reject_unknown(j, "instance", {"type", "S", "A", "d", "gamma", "seed", "phi_concentration", "mu_concentration"});
    spec.kind = InstanceSpec::Kind::kRandom;
    spec.n_states = get_or(j, "S", spec.n_states, "instance");
    spec.n_actions = get_or(j, "A", spec.n_actions, "instance");
    spec.dim = get_or(j, "d", spec.dim, "instance");
    spec.gamma = get_or(j, "gamma", spec.gamma, "instance");
    spec.seed = get_or<std::uint64_t>(j, "seed", 0, "instance");
    spec.phi_concentration = get_or(j, "phi_concentration", spec.phi_concentration, "instance");
    spec.mu_concentration = get_or(j, "mu_concentration", spec.mu_concentration, "instance");
    if (!(spec.phi_concentration > 0.0) || !(spec.mu_concentration > 0.0)) fail("concentrations must be positive");
  } else {
    fail("unknown instance type '" + type + "' (expected hard, file or random)");
  }
  return spec;
}

AdversarySpec parse_adversary(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) fail("'adversary' must be an object");
  reject_unknown(j, "adversary", {"kind", "period", "noise", "path", "loss_seed"});
  AdversarySpec spec;
  spec.kind = get_or<std::string>(j, "kind", "fixed", "adversary");
  if (spec.kind != "fixed" && spec.kind != "switching" && spec.kind != "stochastic" && spec.kind != "file") {
    fail("unknown adversary kind '" + spec.kind + "'");
  }
  spec.period = get_or(j, "period", 0, "adversary");
  if (spec.period < 0) fail("adversary.period must be >= 0");
  spec.noise = get_or(j, "noise", spec.noise, "adversary");
  if (spec.kind == "file") {
    if (!j.contains("path")) fail("adversary of kind 'file' needs 'path'");
    spec.path = resolve_path(get_or<std::string>(j, "path", "", "adversary"), base_dir);
  }
  if (j.contains("loss_seed")) spec.loss_seed = get_or<std::uint64_t>(j, "loss_seed", 0, "adversary");
  return spec;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    fail(e.what());
  }
  if (!doc.is_object()) fail("top level must be an object");
  // "resolved" is the informational block written into manifests.
  reject_unknown(doc, "config", {"instance", "adversary", "model_class", "K", "seeds", "algos", "overrides",
                                 "diagnostics", "out", "jobs", "resolved"});
  ExperimentConfig cfg;
  if (!doc.contains("K")) fail("missing 'K'");
  cfg.K = get_or(doc, "K", 0, "config");
  if (cfg.K < 1) fail("K must be >= 1");
  cfg.seeds = get_or<std::vector<std::uint64_t>>(doc, "seeds", {}, "config");
  if (cfg.seeds.empty()) fail("'seeds' must be a non-empty list");
  if (doc.contains("instance")) cfg.instance = parse_instance(doc.at("instance"), base_dir);
  if (doc.contains("adversary")) cfg.adversary = parse_adversary(doc.at("adversary"), base_dir);
  if (doc.contains("model_class")) {
    const json& m = doc.at("model_class");
    if (!m.is_object()) fail("'model_class' must be an object");
    reject_unknown(m, "model_class", {"size", "perturb_scale"});
    cfg.class_size = get_or(m, "size", cfg.class_size, "model_class");
    cfg.perturb_scale = get_or(m, "perturb_scale", cfg.perturb_scale, "model_class");
    if (cfg.class_size < 1) fail("model_class.size must be >= 1");
    if (!(cfg.perturb_scale > 0.0 && cfg.perturb_scale <= 1.0)) fail("model_class.perturb_scale must lie in (0, 1]");
  }
  if (doc.contains("algos")) {
    cfg.algos.clear();
    for (const auto& name : get_or<std::vector<std::string>>(doc, "algos", {}, "config")) {
      const auto algo = parse_algo(name);
      if (!algo) fail("unknown algorithm '" + name + "'");
      cfg.algos.push_back(*algo);
    }
    if (cfg.algos.empty()) fail("'algos' must be non-empty");
  }
  if (doc.contains("overrides")) {
    const json& o = doc.at("overrides");
    if (!o.is_object()) fail("'overrides' must be an object");
    reject_unknown(o, "overrides", {"xi", "L", "eta", "c_alpha", "c_lambda"});
    if (o.contains("xi")) cfg.overrides.xi = get_or(o, "xi", 0.0, "overrides");
    if (o.contains("L")) cfg.overrides.L = get_or(o, "L", 0, "overrides");
    if (o.contains("eta")) cfg.overrides.eta = get_or(o, "eta", 0.0, "overrides");
    if (o.contains("c_alpha")) cfg.overrides.c_alpha = get_or(o, "c_alpha", 0.0, "overrides");
    if (o.contains("c_lambda")) cfg.overrides.c_lambda = get_or(o, "c_lambda", 0.0, "overrides");
  }
  cfg.diagnostics = get_or(doc, "diagnostics", cfg.diagnostics, "config");
  cfg.out = get_or<std::string>(doc, "out", cfg.out.string(), "config");
  cfg.jobs = get_or(doc, "jobs", cfg.jobs, "config");
  if (cfg.jobs < 1) fail("jobs must be >= 1");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ParseError("config file not found: " + path.string());
  return parse_config(read_file(path), path.parent_path());
}

std::string config_to_json(const ExperimentConfig& cfg, const Schedule* resolved) {
  ordered_json doc;
  ordered_json inst;
  switch (cfg.instance.kind) {
    case InstanceSpec::Kind::kHard: {
      const auto& h = cfg.instance.hard;
      inst["type"] = "hard";
      inst["d"] = h.d;
      inst["S"] = h.S;
      inst["A"] = h.A;
      inst["gamma"] = h.gamma;
      if (cfg.instance.epsilon_given) inst["epsilon"] = h.epsilon;
      if (h.target) inst["target"] = {h.target->i_star, h.target->a_star};
      break;
    }
    case InstanceSpec::Kind::kFile:
      inst["type"] = "file";
      inst["path"] = std::filesystem::absolute(cfg.instance.path).string();
      break;
    case InstanceSpec::Kind::kRandom:
      inst["type"] = "random";
      inst["S"] = cfg.instance.n_states;
      inst["A"] = cfg.instance.n_actions;
      inst["d"] = cfg.instance.dim;
      inst["gamma"] = cfg.instance.gamma;
      inst["seed"] = cfg.instance.seed;
      inst["phi_concentration"] = cfg.instance.phi_concentration;
      inst["mu_concentration"] = cfg.instance.mu_concentration;
      break;
  }
  doc["instance"] = inst;
  ordered_json adv;
  adv["kind"] = cfg.adversary.kind;
  adv["period"] = cfg.adversary.period;
  adv["noise"] = cfg.adversary.noise;
  if (cfg.adversary.kind == "file") adv["path"] = std::filesystem::absolute(cfg.adversary.path).string();
  if (cfg.adversary.loss_seed) adv["loss_seed"] = *cfg.adversary.loss_seed;
  doc["adversary"] = adv;
  doc["model_class"] = {{"size", cfg.class_size}, {"perturb_scale", cfg.perturb_scale}};
  doc["K"] = cfg.K;
  doc["seeds"] = cfg.seeds;
  std::vector<std::string> algos;
  for (Algo a : cfg.algos) algos.push_back(algo_name(a));
  doc["algos"] = algos;
  ordered_json ov = ordered_json::object();
  if (resolved) {
    const HyperParams& p = resolved->params;
    ov["xi"] = p.xi;
    ov["L"] = p.L;
    ov["eta"] = p.eta;
    ov["c_alpha"] = p.c_alpha;
    ov["c_lambda"] = p.c_lambda;
  } else {
    const auto& o = cfg.overrides;
    if (o.xi) ov["xi"] = *o.xi;
    if (o.L) ov["L"] = *o.L;
    if (o.eta) ov["eta"] = *o.eta;
    if (o.c_alpha) ov["c_alpha"] = *o.c_alpha;
    if (o.c_lambda) ov["c_lambda"] = *o.c_lambda;
  }
  doc["overrides"] = ov;
  doc["diagnostics"] = cfg.diagnostics;
  doc["out"] = cfg.out.string();
  doc["jobs"] = cfg.jobs;
  return doc.dump(2) + "\n";
}

BuiltInstance build_instance(const ExperimentConfig& cfg) {
  const InstanceSpec& spec = cfg.instance;
  switch (spec.kind) {
    case InstanceSpec::Kind::kHard: {
      HardInstanceParams p = spec.hard;
      const int min_k = 2 * (p.d - 4) * p.A;
      if (spec.epsilon_given) {
        // K only matters to the default lower-bound epsilon; an explicit epsilon frees it.
        p.K = std::max(cfg.K, min_k);
      } else {
        p.K = cfg.K;
        if (p.K < min_k) fail("hard instance with derived epsilon needs K >= 2(d-4)A = " + std::to_string(min_k));
        p.epsilon = lower_bound_epsilon(p.d, p.A, p.K);
      }
      try {
        HardInstance h = build_hard_instance(p);
        LowRankMdp mdp = h.mdp;
        return BuiltInstance{std::move(mdp), std::move(h)};
      } catch (const std::invalid_argument& e) {
        fail(e.what());
      }
    }
    case InstanceSpec::Kind::kFile:
      return BuiltInstance{load_mdp(spec.path), std::nullopt};
    case InstanceSpec::Kind::kRandom: {
      RngStream rng = RngStream(spec.seed).substream("instance");
      try {
        return BuiltInstance{random_low_rank(spec.n_states, spec.n_actions, spec.dim, spec.gamma, rng,
                                                     spec.phi_concentration, spec.mu_concentration), std::nullopt};
      } catch (const std::invalid_argument& e) {
        fail(e.what());
      }
    }
  }
  fail("unreachable instance kind");
}

LossSequence make_losses(const ExperimentConfig& cfg, const BuiltInstance& instance, std::uint64_t seed) {
  const AdversarySpec& adv = cfg.adversary;
  const int S = instance.mdp.n_states();
  const int A = instance.mdp.n_actions();
  if (adv.kind == "file") {
    std::istringstream in(read_file(adv.path));
    LossSequence seq = read_loss_sequence(in);
    if (static_cast<int>(seq.size()) != cfg.K) fail("loss file holds " + std::to_string(seq.size()) + " episodes, K is " + std::to_string(cfg.K));
    if (seq.tables().front().n_states() != S || seq.tables().front().n_actions() != A) {
      fail("loss file dimensions do not match the instance");
    }
    return seq;
  }
  RngStream rng = RngStream(adv.loss_seed.value_or(seed)).substream("adversary");
  const LossFunction base = instance.hard && !adv.loss_seed ? instance.hard->loss : random_loss(S, A, rng);
  if (adv.kind == "fixed") return make_fixed(base, cfg.K);
  if (adv.kind == "switching") {
    const LossFunction other = random_loss(S, A, rng);
    const int period = adv.period > 0 ? adv.period : std::max(1, cfg.K / 10);
    return make_switching(base, other, period, cfg.K);
  }
  return make_stochastic(base, adv.noise, cfg.K, rng);
}

ExperimentSetup make_setup(const ExperimentConfig& cfg) {
  BuiltInstance instance = build_instance(cfg);
  ExperimentSetup setup{instance.mdp};
  setup.K = cfg.K;
  setup.seeds = cfg.seeds;
  setup.algos = cfg.algos;
  setup.overrides = cfg.overrides;
  setup.class_size = cfg.class_size;
  setup.perturb_scale = cfg.perturb_scale;
  setup.diagnostics.epoch_diagnostics = cfg.diagnostics;
  setup.jobs = cfg.jobs;
  // Validate the adversary spec once up front so that errors surface as config errors.
  (void)make_losses(cfg, instance, cfg.seeds.front());
  setup.losses = [cfg, instance = std::move(instance)](std::uint64_t seed) {
    return make_losses(cfg, instance, seed);
  };
  return setup;
}

void set_param(ExperimentConfig& cfg, const std::string& name, const std::string& value) {
  auto real = [&] {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      fail("value '" + value + "' for " + name + " is not a number");
    }
    if (used != value.size()) fail("value '" + value + "' for " + name + " is not a number");
    return v;
  };
  auto integer = [&] {
    const double v = real();
    if (v != std::floor(v)) fail("value '" + value + "' for " + name + " must be an integer");
    return static_cast<int>(v);
  };
  if (name == "xi") cfg.overrides.xi = real();
  else if (name == "L") cfg.overrides.L = integer();
  else if (name == "eta") cfg.overrides.eta = real();
  else if (name == "c_alpha") cfg.overrides.c_alpha = real();
  else if (name == "c_lambda") cfg.overrides.c_lambda = real();
  else if (name == "K") {
    cfg.K = integer();
    if (cfg.K < 1) fail("K must be >= 1");
  } else if (name == "class_size") {
    cfg.class_size = integer();
    if (cfg.class_size < 1) fail("class_size must be >= 1");
  } else if (name == "perturb_scale") {
    cfg.perturb_scale = real();
  } else {
    fail("unknown sweep parameter '" + name + "'");
  }
}

}  // namespace lowrank
