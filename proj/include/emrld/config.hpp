#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "emrld/envs.hpp"
#include "emrld/io.hpp"
#include "emrld/meta.hpp"

namespace emrld {

/// Invalid configuration file, flag or checkpoint.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Everything a `train` run depends on.
///
/// JSON layout (every key optional, unknown keys rejected):
///
///   env, algorithm, seed, iterations, meta_batch, adapt_batch, gamma, gae_tau,
///   adam_lr, meta_grad_mode, normalize_advantages, workers, n_train_tasks,
///   demos, output_dir, save_interval, record_wall_time,
///   adapt  {alpha, w_rl, w_bc, adapt_steps}
///   trpo   {max_kl, cg_iters, cg_tol, damping, backtrack_ratio, max_backtracks}
///   policy {sigma, hidden}
struct RunConfig {
  EnvKind env = EnvKind::Point2D;
  MetaConfig meta{};
  double sigma = 1.0;
  int hidden = 100;
  int n_train_tasks = 12;
  std::string demos;
  std::string output_dir = "runs/emrld";
  int save_interval = 50;
  bool record_wall_time = false;

  void validate() const;
};

/// Per-environment defaults for the task count and meta batch.
RunConfig default_run_config(EnvKind env);

json run_config_to_json(const RunConfig& cfg);
/// Overlays `j` on `base`; throws ConfigError on unknown keys or bad values.
RunConfig run_config_from_json(const json& j, const RunConfig& base);
RunConfig run_config_from_json(const json& j);
RunConfig load_run_config(const std::filesystem::path& path);

inline constexpr int kCheckpointSchemaVersion = 1;

struct Checkpoint {
  RunConfig config;
  MetaState state;
};

json checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const json& j);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace emrld
