#include "emrld/config.hpp"

#include <set>

namespace emrld {

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError("unknown config key '" + where + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + where + key + "' has the wrong type");
  }
}

std::string read_string(const json& j, const char* key, const std::string& fallback, const std::string& where) {
  std::string s = fallback;
  read(j, key, s, where);
  return s;
}

}  // namespace

void RunConfig::validate() const {
  try {
    meta.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (!(sigma > 0.0)) throw ConfigError("policy.sigma must be positive");
  if (hidden < 1) throw ConfigError("policy.hidden must be positive");
  if (n_train_tasks < 1) throw ConfigError("n_train_tasks must be positive");
  if (save_interval < 1) throw ConfigError("save_interval must be positive");
  if (output_dir.empty()) throw ConfigError("output_dir must not be empty");
  if (meta.meta_grad_mode == MetaGradMode::HvpSecondOrder &&
      (meta.algorithm == AlgorithmKind::EMRLD_WS || meta.adapt.adapt_steps > 1)) {
    throw ConfigError("hvp_second_order supports neither the warm start nor adapt_steps > 1");
  }
}

RunConfig default_run_config(EnvKind env) {
  RunConfig c;
  c.env = env;
  switch (env) {
    case EnvKind::Point2D: c.n_train_tasks = 12; break;
    case EnvKind::TwoWheeled: c.n_train_tasks = 24; break;
    case EnvKind::TwoWheeledDrift: c.n_train_tasks = 10; break;
  }
  c.meta.meta_batch = c.n_train_tasks;
  return c;
}

json run_config_to_json(const RunConfig& c) {
  const MetaConfig& m = c.meta;
  json j;
  j["env"] = to_string(c.env);
  j["algorithm"] = to_string(m.algorithm);
  j["seed"] = m.seed;
  j["iterations"] = m.iterations;
  j["meta_batch"] = m.meta_batch;
  j["adapt_batch"] = m.adapt_batch;
  j["gamma"] = m.gamma;
  j["gae_tau"] = m.gae_tau;
  j["adam_lr"] = m.adam_lr;
  j["meta_grad_mode"] = to_string(m.meta_grad_mode);
  j["normalize_advantages"] = m.normalize_advantages;
  j["workers"] = m.workers;
  j["n_train_tasks"] = c.n_train_tasks;
  j["demos"] = c.demos;
  j["output_dir"] = c.output_dir;
  j["save_interval"] = c.save_interval;
  j["record_wall_time"] = c.record_wall_time;
  j["adapt"] = {{"alpha", m.adapt.alpha}, {"w_rl", m.adapt.w_rl}, {"w_bc", m.adapt.w_bc},
                {"adapt_steps", m.adapt.adapt_steps}};
  j["trpo"] = {{"max_kl", m.trpo.max_kl},
               {"cg_iters", m.trpo.cg_iters},
               {"cg_tol", m.trpo.cg_tol},
               {"damping", m.trpo.damping},
               {"backtrack_ratio", m.trpo.backtrack_ratio},
               {"max_backtracks", m.trpo.max_backtracks}};
  j["policy"] = {{"sigma", c.sigma}, {"hidden", c.hidden}};
  return j;
}

RunConfig run_config_from_json(const json& j, const RunConfig& base) {
  reject_unknown(j,
                 {"env", "algorithm", "seed", "iterations", "meta_batch", "adapt_batch", "gamma", "gae_tau", "adam_lr",
                  "meta_grad_mode", "normalize_advantages", "workers", "n_train_tasks", "demos", "output_dir",
                  "save_interval", "record_wall_time", "adapt", "trpo", "policy"},
                 "");
  RunConfig c = base;
  MetaConfig& m = c.meta;
  try {
    if (j.contains("env")) {
      const EnvKind env = parse_env_kind(read_string(j, "env", "", ""));
      if (env != c.env) {
        // Switching environments resets the per-environment task defaults.
        const RunConfig d = default_run_config(env);
        c.env = env;
        c.n_train_tasks = d.n_train_tasks;
        m.meta_batch = d.meta.meta_batch;
      }
    }
    if (j.contains("algorithm")) m.algorithm = parse_algorithm(read_string(j, "algorithm", "", ""));
    if (j.contains("meta_grad_mode")) m.meta_grad_mode = parse_meta_grad_mode(read_string(j, "meta_grad_mode", "", ""));
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  read(j, "seed", m.seed, "");
  read(j, "iterations", m.iterations, "");
  read(j, "meta_batch", m.meta_batch, "");
  read(j, "adapt_batch", m.adapt_batch, "");
  read(j, "gamma", m.gamma, "");
  read(j, "gae_tau", m.gae_tau, "");
  read(j, "adam_lr", m.adam_lr, "");
  read(j, "normalize_advantages", m.normalize_advantages, "");
  read(j, "workers", m.workers, "");
  read(j, "n_train_tasks", c.n_train_tasks, "");
  read(j, "demos", c.demos, "");
  read(j, "output_dir", c.output_dir, "");
  read(j, "save_interval", c.save_interval, "");
  read(j, "record_wall_time", c.record_wall_time, "");
  if (j.contains("adapt")) {
    const json& a = j.at("adapt");
    reject_unknown(a, {"alpha", "w_rl", "w_bc", "adapt_steps"}, "adapt.");
    read(a, "alpha", m.adapt.alpha, "adapt.");
    read(a, "w_rl", m.adapt.w_rl, "adapt.");
    read(a, "w_bc", m.adapt.w_bc, "adapt.");
    read(a, "adapt_steps", m.adapt.adapt_steps, "adapt.");
  }
  if (j.contains("trpo")) {
    const json& t = j.at("trpo");
    reject_unknown(t, {"max_kl", "cg_iters", "cg_tol", "damping", "backtrack_ratio", "max_backtracks"}, "trpo.");
    read(t, "max_kl", m.trpo.max_kl, "trpo.");
    read(t, "cg_iters", m.trpo.cg_iters, "trpo.");
    read(t, "cg_tol", m.trpo.cg_tol, "trpo.");
    read(t, "damping", m.trpo.damping, "trpo.");
    read(t, "backtrack_ratio", m.trpo.backtrack_ratio, "trpo.");
    read(t, "max_backtracks", m.trpo.max_backtracks, "trpo.");
  }
  if (j.contains("policy")) {
    const json& p = j.at("policy");
    reject_unknown(p, {"sigma", "hidden"}, "policy.");
    read(p, "sigma", c.sigma, "policy.");
    read(p, "hidden", c.hidden, "policy.");
  }
  c.validate();
  return c;
}

RunConfig run_config_from_json(const json& j) {
  EnvKind env = EnvKind::Point2D;
  if (j.is_object() && j.contains("env") && j.at("env").is_string()) {
    try {
      env = parse_env_kind(j.at("env").get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  return run_config_from_json(j, default_run_config(env));
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": malformed JSON (" + e.what() + ")");
  }
  return run_config_from_json(j);
}

json checkpoint_to_json(const Checkpoint& ckpt) {
  json j;
  j["schema_version"] = kCheckpointSchemaVersion;
  j["iteration"] = ckpt.state.iteration;
  j["config"] = run_config_to_json(ckpt.config);
  j["policy"] = policy_to_json(ckpt.state.theta);
  j["adam"] = {{"m", vec_to_json(ckpt.state.adam.m)},
               {"v", vec_to_json(ckpt.state.adam.v)},
               {"step", ckpt.state.adam.step}};
  return j;
}

Checkpoint checkpoint_from_json(const json& j) {
  try {
    if (!j.is_object()) throw ConfigError("checkpoint must be a JSON object");
    if (j.value("schema_version", -1) != kCheckpointSchemaVersion) {
      throw ConfigError("unsupported checkpoint schema_version");
    }
    Checkpoint c;
    c.config = run_config_from_json(j.at("config"));
    c.state.theta = policy_from_json(j.at("policy"));
    c.state.iteration = j.at("iteration").get<int>();
    const auto n = c.state.theta.net.num_params();
    c.state.adam = AdamState::zeros(n);
    if (j.contains("adam")) {
      const json& a = j.at("adam");
      c.state.adam.m = vec_from_json(a.at("m"));
      c.state.adam.v = vec_from_json(a.at("v"));
      c.state.adam.step = a.at("step").get<std::int64_t>();
      if (c.state.adam.m.size() != n || c.state.adam.v.size() != n) throw ConfigError("checkpoint adam state has the wrong length");
    }
    const auto& spec = env_spec(c.config.env);
    if (c.state.theta.state_dim() != spec.obs_dim || c.state.theta.action_dim() != spec.action_dim) {
      throw ConfigError("checkpoint policy does not match the " + to_string(c.config.env) + " dimensions");
    }
    return c;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("invalid checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_text_file(path, checkpoint_to_json(ckpt).dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  try {
    return checkpoint_from_json(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": malformed checkpoint (" + e.what() + ")");
  }
}

}  // namespace emrld
