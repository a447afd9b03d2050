#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "emrld/envs.hpp"
#include "emrld/nn.hpp"
#include "emrld/rollout.hpp"
#include "emrld/trpo.hpp"

namespace emrld {

/// Raised for malformed or inconsistent demonstration data.
class DemoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Exactly one demonstration trajectory per task, keyed by task id.
struct DemoSet {
  EnvKind kind = EnvKind::Point2D;
  std::map<int, Task> tasks;
  std::map<int, Trajectory> trajectories;

  std::size_t size() const { return trajectories.size(); }
  const Trajectory* find(int task_id) const;
  void insert(int task_id, const Task& task, Trajectory traj);
};

/// Goal-conditioned expert: the policy sees observation ++ task_context.
struct ExpertPolicy {
  EnvKind kind = EnvKind::Point2D;
  GaussianPolicy policy;
  MlpParams value_net;
};

struct ExpertConfig {
  int iterations = 300;
  int episodes_per_task = 10;
  int hidden = 128;
  double sigma = 0.3;
  double gamma = 0.99;
  double gae_tau = 0.97;
  int value_epochs = 5;
  double value_lr = 1e-3;
  /// Potential-based shaping gamma * phi(s') - phi(s) with phi = -scale * goal
  /// distance, added to the environment reward during expert training only.
  double shaping_scale = 30.0;
  TrpoConfig trpo{};
  int workers = 1;
};

struct ExpertTrainingLog {
  std::vector<double> mean_return;  // per iteration, over all tasks
};

/// Multi-task TRPO with a learned value baseline. iterations == 0 returns the
/// freshly initialized policy.
ExpertPolicy train_expert(EnvKind kind, const std::vector<Task>& tasks, const ExpertConfig& cfg, std::uint64_t seed,
                          ExpertTrainingLog* log = nullptr);

enum class CorruptionMode { Optimal, TruncateEnd, DropPrefix };
std::string to_string(CorruptionMode mode);
CorruptionMode parse_corruption_mode(const std::string& name);

struct CorruptionSpec {
  CorruptionMode mode = CorruptionMode::Optimal;
  double noise_std = 0.0;
  double partial_fraction = 1.0;   // fraction of full expert iterations used
  double truncation_margin = 0.1;  // beyond the reward radius
  int prefix_length = 10;

  void validate() const;
};

/// Defaults for sub-optimal data: 30% of expert training, noise 0.3 * sigma,
/// margin 0.1, prefix 10.
CorruptionSpec suboptimal_spec(CorruptionMode mode, double sigma);

/// One mean-action rollout per task (plus optional action noise), then the
/// corruption in `spec`. Task ids are indices into `tasks`.
DemoSet generate_demos(const ExpertPolicy& expert, const std::vector<Task>& tasks, const CorruptionSpec& spec,
                       std::uint64_t seed);

/// Greedy (mean-action) rollout of the expert on one task.
Trajectory expert_rollout(const ExpertPolicy& expert, const Task& task, int task_id);

void save_demos(const std::filesystem::path& path, const DemoSet& set);
DemoSet load_demos(const std::filesystem::path& path);

inline constexpr int kDemoSchemaVersion = 1;

}  // namespace emrld
