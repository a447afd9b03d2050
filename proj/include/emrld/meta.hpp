#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "emrld/demos.hpp"
#include "emrld/envs.hpp"
#include "emrld/losses.hpp"
#include "emrld/nn.hpp"
#include "emrld/rollout.hpp"
#include "emrld/trpo.hpp"

namespace emrld {

enum class AlgorithmKind { EMRLD, EMRLD_WS, MAML, META_BC, GMPS };
std::string to_string(AlgorithmKind kind);
AlgorithmKind parse_algorithm(const std::string& name);
bool uses_demos(AlgorithmKind kind);

enum class MetaGradMode { FirstOrder, HvpSecondOrder };
std::string to_string(MetaGradMode mode);
MetaGradMode parse_meta_grad_mode(const std::string& name);

struct MetaConfig {
  AlgorithmKind algorithm = AlgorithmKind::EMRLD;
  AdaptConfig adapt{};
  TrpoConfig trpo{};
  int meta_batch = 12;
  int adapt_batch = 20;
  double gamma = 0.95;
  double gae_tau = 1.0;
  int iterations = 500;
  double adam_lr = 0.01;
  std::uint64_t seed = 1;
  MetaGradMode meta_grad_mode = MetaGradMode::FirstOrder;
  bool normalize_advantages = false;
  int workers = 1;

  void validate() const;
  AdvantageSettings advantage_settings() const { return {gamma, gae_tau, {normalize_advantages}}; }
};

/// Adaptation weights each algorithm actually applies.
AdaptConfig effective_adapt_config(const MetaConfig& cfg);

struct AdamState {
  Vec m;
  Vec v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState zeros(Eigen::Index n) { return AdamState{Vec::Zero(n), Vec::Zero(n)}; }
};

/// Bias-corrected Adam; returns the updated parameters and state.
std::pair<Vec, AdamState> adam_step(const Vec& params, const Vec& grad, const AdamState& state, double lr);

/// Ingredients of one task's meta-gradient: gradient of the outer loss at the
/// adapted parameters, and the inner (adaptation) loss gradient as a function
/// of the meta-parameters.
struct MetaGradTerm {
  Vec outer_grad;
  std::function<Vec(const Vec&)> inner_grad;
};

/// Sum over tasks of d L_outer(theta - alpha grad L_inner(theta)) / d theta.
/// FirstOrder treats the adaptation Jacobian as the identity; HvpSecondOrder
/// applies (I - alpha H_inner) using central-difference Hessian-vector products.
Vec meta_surrogate_grad(const Vec& theta, std::span<const MetaGradTerm> terms, double alpha, MetaGradMode mode,
                        int adapt_steps = 1);

/// First-order policy-level form: sum of per-task policy-gradient gradients
/// evaluated at the adapted policies.
Vec meta_surrogate_grad(const std::vector<GaussianPolicy>& adapted, const std::vector<std::vector<Trajectory>>& d_vals,
                        const std::vector<std::vector<Vec>>& advantages);

struct MetaState {
  GaussianPolicy theta;
  AdamState adam;
  int iteration = 0;
};

MetaState init_meta_state(EnvKind kind, const MetaConfig& cfg, double sigma = 1.0, int hidden = 100);

struct MetaMetrics {
  int iteration = 0;
  double mean_adapted_return = 0.0;
  double std_adapted_return = 0.0;
  double mean_pre_adapt_return = 0.0;
  TrpoReport trpo{};
  double meta_kl = 0.0;
  /// Environment reward values consumed by the meta-update.
  std::int64_t meta_update_reward_reads = 0;
  /// BC loss before / after the warm start, averaged over tasks (EMRLD_WS).
  double warm_start_bc_before = 0.0;
  double warm_start_bc_after = 0.0;
};

struct MetaIterationResult {
  MetaState next;
  MetaMetrics metrics;
  std::vector<GaussianPolicy> adapted;
};

/// One meta-training iteration over the task list (`meta_batch` tasks chosen
/// by rotation through `tasks`). Task ids are indices into `tasks`.
MetaIterationResult meta_iteration(const MetaState& state, EnvKind kind, const std::vector<Task>& tasks,
                                   const DemoSet* demos, const MetaConfig& cfg);

struct AdaptationCurve {
  std::vector<double> mean;  // index j = after j adaptation steps
  std::vector<double> std;   // across tasks
  std::vector<std::vector<double>> per_task;            // [step][task]
  std::vector<std::vector<Trajectory>> sample_episodes;  // [step][task], first episode
};

/// Test-time evaluation: the return of the j-times-adapted policy for
/// j = 0..max_steps, averaged over tasks.
AdaptationCurve evaluate_meta_policy(const GaussianPolicy& theta, EnvKind kind, const std::vector<Task>& test_tasks,
                                     const DemoSet* demos, const MetaConfig& cfg, int max_steps,
                                     std::uint64_t seed);

}  // namespace emrld
