#pragma once

#include <cstdint>
#include <vector>

#include "emrld/nn.hpp"

namespace emrld {

/// Finite MDP. P[a](s, s') is the transition probability, R(s, a) the reward.
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<Mat> P;
  Mat R;
  double gamma = 0.9;
  Vec rho;

  void validate() const;
};

/// Row-stochastic policy matrix pi(s, a).
struct TabularPolicy {
  Mat pi;

  void validate(int n_states, int n_actions) const;
};

struct TaskPolicies {
  TabularPolicy current;  // pi_{k,i}
  TabularPolicy next;     // pi_{k+1,i}
  TabularPolicy demo;     // pi_dem,i
};

struct TaskEnsemble {
  std::vector<TabularMdp> tasks;
  Vec weights;
  std::vector<TaskPolicies> policies;

  void validate() const;
};

struct ValueSet {
  Vec V;
  Mat Q;
  Mat A;
};

ValueSet exact_value_q_adv(const TabularMdp& mdp, const TabularPolicy& policy);

/// Discounted state occupancy, normalized to sum to one.
Vec state_visitation(const TabularMdp& mdp, const TabularPolicy& policy);

/// d(s, a) = d(s) pi(s, a).
Mat visitation_distribution(const TabularMdp& mdp, const TabularPolicy& policy);

/// Expected discounted return from rho.
double policy_value(const TabularMdp& mdp, const TabularPolicy& policy);

struct IdentityCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double gap = 0.0;
};

/// J(pi1) - J(pi2) against E_{d^pi1, pi1}[A^pi2] / (1 - gamma).
IdentityCheck perf_diff_identity_check(const TabularMdp& mdp, const TabularPolicy& pi1, const TabularPolicy& pi2);

/// Weighted total-variation distance E_{s~d}[0.5 sum_a |pi1 - pi2|].
double weighted_tv(const Vec& d, const TabularPolicy& pi1, const TabularPolicy& pi2);

double assumption_delta(const TaskEnsemble& ensemble);

struct BoundTerms {
  double ratio_term = 0.0;
  double tv_step = 0.0;  // E_i D_TV under d^{pi_{k,i}}(next, current)
  double tv_demo = 0.0;  // E_i D_TV under d^{pi_{k+1,i}}(next, demo)
  double c1 = 0.0;
  double delta = 0.0;
};

struct BoundCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  bool holds = false;
  BoundTerms terms{};
};

constexpr double kBoundTolerance = 1e-9;

/// Meta improvement J_meta(next) - J_meta(current) against its lower bound.
/// Throws std::domain_error when an importance ratio is undefined.
BoundCheck improvement_bound_check(const TaskEnsemble& ensemble);

/// Random instances. Distributions are Dirichlet(1) draws with every entry at
/// least `floor`; rewards are uniform in [-1, 1].
TabularMdp random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed, double floor = 1e-3);
TabularPolicy random_policy(int n_states, int n_actions, std::uint64_t seed, double floor = 1e-3);
/// Up to max_states / max_actions / max_tasks, sizes drawn from the seed.
TaskEnsemble random_ensemble(std::uint64_t seed, int max_states = 6, int max_actions = 4, int max_tasks = 3);

}  // namespace emrld
