#pragma once

#include <functional>
#include <vector>

#include "emrld/nn.hpp"
#include "emrld/rollout.hpp"

namespace emrld {

struct LossAndGrad {
  double loss = 0.0;
  FlatGrad grad;
};

/// Task adaptation hyperparameters. Defaults follow the EMRLD table values
/// for optimal demonstrations.
struct AdaptConfig {
  double alpha = 0.01;
  double w_rl = 0.2;
  double w_bc = 1.0;
  int adapt_steps = 1;

  void validate() const;
};

/// Mean negative log-likelihood of (inputs.col(j), actions.col(j)) pairs.
LossAndGrad bc_loss_and_grad(const GaussianPolicy& policy, const Mat& inputs, const Mat& actions);
LossAndGrad bc_loss_and_grad(const GaussianPolicy& policy, const Trajectory& demo);

/// -(1/N) sum_t log pi(a_t|s_t) * A_t over every step of every trajectory.
LossAndGrad pg_loss_and_grad(const GaussianPolicy& policy, const Mat& inputs, const Mat& actions,
                             const Vec& advantages);
LossAndGrad pg_loss_and_grad(const GaussianPolicy& policy, const std::vector<Trajectory>& trajectories,
                             const std::vector<Vec>& advantages);

/// w_rl * grad L_RL(d_tr) + w_bc * grad L_BC(demo). A zero weight skips its term.
FlatGrad adaptation_gradient(const GaussianPolicy& policy, const std::vector<Trajectory>& d_tr,
                             const std::vector<Vec>& advantages, const Trajectory* demo, double w_rl, double w_bc);

/// Recollects adaptation data with the current adapted policy (for adapt_steps > 1).
using Resampler = std::function<std::vector<Trajectory>(const GaussianPolicy& current, int step)>;

struct AdvantageSettings {
  double gamma = 0.95;
  double gae_tau = 1.0;
  AdvantageOptions options{};
};

/// theta - alpha * (w_rl grad L_RL + w_bc grad L_BC), repeated adapt_steps
/// times. Step 1 uses `d_tr` with `baseline`; later steps pull fresh data from
/// `resample` and refit a baseline on it. `demo` may be null when w_bc == 0.
GaussianPolicy adapt_params(const GaussianPolicy& theta, const std::vector<Trajectory>& d_tr, const Trajectory* demo,
                            const AdaptConfig& cfg, const BaselineWeights& baseline, const AdvantageSettings& adv,
                            const Resampler& resample = {});

/// One behavior-cloning gradient step.
GaussianPolicy warm_start(const GaussianPolicy& theta, const Trajectory& demo, double alpha);

}  // namespace emrld
