#pragma once

#include <functional>
#include <utility>

#include "emrld/nn.hpp"

namespace emrld {

struct TrpoConfig {
  double max_kl = 0.01;
  int cg_iters = 10;
  double cg_tol = 1e-10;
  double damping = 1e-5;
  double backtrack_ratio = 0.5;
  int max_backtracks = 10;

  void validate() const;
};

using LinearOperator = std::function<Vec(const Vec&)>;

struct CgResult {
  Vec x;
  int iterations = 0;
  double residual_norm = 0.0;
};

/// Solves A x = b for symmetric positive definite A given only A*v.
/// Stops once ||b - A x|| <= tol or after `iters` iterations.
CgResult conjugate_gradient(const LinearOperator& apply_A, const Vec& b, int iters, double tol);

/// (F + damping I) v, F = mean_s J_mu(s)^T diag(1/sigma^2) J_mu(s). Columns of
/// `states` are policy inputs.
Vec fisher_vector_product(const GaussianPolicy& policy, const Mat& states, const Vec& v, double damping);
/// Same, reusing a forward pass of policy.net over the states.
Vec fisher_vector_product(const GaussianPolicy& policy, const MlpCache& cache, const Vec& v, double damping);

double mean_kl_states(const GaussianPolicy& old_policy, const GaussianPolicy& new_policy, const Mat& states);

/// -mean[exp(log pi_new - log pi_old) * A].
double surrogate_loss(const GaussianPolicy& old_policy, const GaussianPolicy& new_policy, const Mat& states,
                      const Mat& actions, const Vec& advantages);

/// Generic trust-region problem over a flat parameter vector. `gradient` is
/// the gradient of the surrogate (a loss, lower is better) at `params`;
/// `evaluate` returns (surrogate, mean KL from the current policy) at a candidate.
struct TrpoProblem {
  Vec params;
  Vec gradient;
  double surrogate_at_params = 0.0;
  LinearOperator fvp;  // damping already included
  std::function<std::pair<double, double>(const Vec&)> evaluate;
};

struct TrpoReport {
  bool accepted = false;
  int backtracks = 0;
  double surrogate_before = 0.0;
  double surrogate_after = 0.0;
  double kl = 0.0;
  double expected_improvement = 0.0;
};

/// Natural-gradient step with a backtracking line search. Returns the
/// accepted parameters, or `params` unchanged when no candidate both lowers
/// the surrogate and keeps mean KL <= max_kl.
Vec trpo_update(const TrpoProblem& problem, const TrpoConfig& cfg, TrpoReport* report = nullptr);

GaussianPolicy trpo_step(const GaussianPolicy& policy, const Mat& states, const Mat& actions, const Vec& advantages,
                         const TrpoConfig& cfg, TrpoReport* report = nullptr);

}  // namespace emrld
