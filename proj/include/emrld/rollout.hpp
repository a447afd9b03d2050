#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "emrld/envs.hpp"
#include "emrld/nn.hpp"

namespace emrld {

/// One episode. `states[t]` is the observation the action `actions[t]` was
/// taken in; `final_state` is the observation after the last action.
struct Trajectory {
  std::vector<Vec> states;
  std::vector<Vec> actions;
  std::vector<double> rewards;
  std::vector<int> times;
  int task_id = 0;
  Vec final_state;
  DoneReason done_reason = DoneReason::Running;

  std::size_t size() const { return states.size(); }
  bool empty() const { return states.empty(); }
  double total_return() const;
  void validate() const;
};

struct EpisodeOptions {
  bool greedy = false;          // act with the policy mean instead of sampling
  double extra_noise_std = 0.0; // added on top of the chosen action
  Vec context;                  // appended to every observation before the policy sees it
  int task_id = 0;
};

Trajectory run_episode(EnvKind kind, const Task& task, const GaussianPolicy& policy, const EpisodeOptions& options,
                       std::mt19937_64& rng);

/// Samples `n_episodes` episodes; episode e draws from its own stream seeded by
/// (seed, e), so the result does not depend on `workers`.
std::vector<Trajectory> collect_trajectories(EnvKind kind, const Task& task, const GaussianPolicy& policy,
                                             int n_episodes, std::uint64_t seed, int workers = 1,
                                             const EpisodeOptions& options = {});

std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma);

Vec baseline_features(const Vec& state, int t);

struct BaselineWeights {
  Vec w;
  double predict(const Vec& state, int t) const;
};

inline constexpr double kDefaultRidge = 1e-5;

/// Ridge regression of discounted returns onto baseline_features.
BaselineWeights fit_baseline(const std::vector<Trajectory>& trajectories, double gamma, double ridge = kDefaultRidge);

struct AdvantageOptions {
  bool normalize = false;
};

/// GAE per trajectory. The baseline after the last step is taken as zero.
std::vector<Vec> compute_advantages(const std::vector<Trajectory>& trajectories, const BaselineWeights& baseline,
                                    double gamma, double gae_tau, const AdvantageOptions& options = {});

/// Returns (mean, population std) of total episode returns.
std::pair<double, double> return_stats(const std::vector<Trajectory>& trajectories);

/// Column-stacks states (optionally with a context appended) and actions.
Mat stack_states(const std::vector<Trajectory>& trajectories, const Vec& context = Vec());
Mat stack_actions(const std::vector<Trajectory>& trajectories);
Vec stack_advantages(const std::vector<Vec>& advantages);

}  // namespace emrld
