#include "emrld/losses.hpp"

#include <stdexcept>
#include <string>

namespace emrld {

void AdaptConfig::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("adapt: alpha must be positive");
  if (w_rl < 0.0 || w_bc < 0.0) throw std::invalid_argument("adapt: w_rl and w_bc must be nonnegative");
  if (adapt_steps < 1) throw std::invalid_argument("adapt: adapt_steps must be at least 1");
}

namespace {

// Per-sample log-likelihood gradient w.r.t. the mean: (a - mu) / sigma^2.
Mat score_wrt_mean(const Mat& means, const Mat& actions, const Vec& sigma) {
  Mat s = actions - means;
  for (Eigen::Index i = 0; i < s.rows(); ++i) s.row(i) /= sigma(i) * sigma(i);
  return s;
}

double sum_log_density(const Mat& means, const Mat& actions, const Vec& sigma, Vec* per_sample = nullptr) {
  if (per_sample) per_sample->resize(means.cols());
  double total = 0.0;
  for (Eigen::Index j = 0; j < means.cols(); ++j) {
    const double lp = gaussian_log_density(means.col(j), sigma, actions.col(j));
    if (per_sample) (*per_sample)(j) = lp;
    total += lp;
  }
  return total;
}

}  // namespace

LossAndGrad bc_loss_and_grad(const GaussianPolicy& policy, const Mat& inputs, const Mat& actions) {
  if (inputs.cols() == 0) throw std::invalid_argument("bc loss: empty demonstration");
  if (inputs.cols() != actions.cols()) throw ShapeError("bc loss: state/action count mismatch");
  if (actions.rows() != policy.sigma.size()) throw ShapeError("bc loss: action dimension mismatch");
  const MlpCache cache = mlp_forward_batch(policy.net, inputs);
  const double n = static_cast<double>(inputs.cols());
  LossAndGrad out;
  out.loss = -sum_log_density(cache.output(), actions, policy.sigma) / n;
  const Mat dmean = -score_wrt_mean(cache.output(), actions, policy.sigma) / n;
  out.grad = mlp_backward_batch(policy.net, cache, dmean);
  return out;
}

LossAndGrad bc_loss_and_grad(const GaussianPolicy& policy, const Trajectory& demo) {
  if (demo.empty()) throw std::invalid_argument("bc loss: empty demonstration");
  const std::vector<Trajectory> one{demo};
  return bc_loss_and_grad(policy, stack_states(one), stack_actions(one));
}

LossAndGrad pg_loss_and_grad(const GaussianPolicy& policy, const Mat& inputs, const Mat& actions,
                             const Vec& advantages) {
  if (inputs.cols() != actions.cols() || inputs.cols() != advantages.size()) {
    throw std::invalid_argument("pg loss: states, actions and advantages are misaligned");
  }
  if (inputs.cols() == 0) throw std::invalid_argument("pg loss: no samples");
  const MlpCache cache = mlp_forward_batch(policy.net, inputs);
  const double n = static_cast<double>(inputs.cols());
  Vec logp;
  sum_log_density(cache.output(), actions, policy.sigma, &logp);
  LossAndGrad out;
  out.loss = -logp.dot(advantages) / n;
  Mat dmean = score_wrt_mean(cache.output(), actions, policy.sigma);
  for (Eigen::Index j = 0; j < dmean.cols(); ++j) dmean.col(j) *= -advantages(j) / n;
  out.grad = mlp_backward_batch(policy.net, cache, dmean);
  return out;
}

LossAndGrad pg_loss_and_grad(const GaussianPolicy& policy, const std::vector<Trajectory>& trajectories,
                             const std::vector<Vec>& advantages) {
  if (trajectories.size() != advantages.size()) throw std::invalid_argument("pg loss: one advantage vector per trajectory");
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (static_cast<Eigen::Index>(trajectories[i].size()) != advantages[i].size()) {
      throw std::invalid_argument("pg loss: advantage length differs from trajectory " + std::to_string(i));
    }
  }
  return pg_loss_and_grad(policy, stack_states(trajectories), stack_actions(trajectories),
                          stack_advantages(advantages));
}

FlatGrad adaptation_gradient(const GaussianPolicy& policy, const std::vector<Trajectory>& d_tr,
                             const std::vector<Vec>& advantages, const Trajectory* demo, double w_rl, double w_bc) {
  FlatGrad g = FlatGrad::Zero(policy.net.num_params());
  if (w_rl != 0.0) g += w_rl * pg_loss_and_grad(policy, d_tr, advantages).grad;
  if (w_bc != 0.0) {
    if (demo == nullptr) throw std::invalid_argument("adaptation: w_bc > 0 requires a demonstration");
    g += w_bc * bc_loss_and_grad(policy, *demo).grad;
  }
  return g;
}

GaussianPolicy adapt_params(const GaussianPolicy& theta, const std::vector<Trajectory>& d_tr, const Trajectory* demo,
                            const AdaptConfig& cfg, const BaselineWeights& baseline, const AdvantageSettings& adv,
                            const Resampler& resample) {
  cfg.validate();
  if (cfg.adapt_steps > 1 && !resample) {
    throw std::invalid_argument("adapt: adapt_steps > 1 needs a resampler to recollect data");
  }
  GaussianPolicy current = theta;
  for (int step = 0; step < cfg.adapt_steps; ++step) {
    std::vector<Trajectory> fresh;
    BaselineWeights fresh_baseline;
    if (step > 0) {
      fresh = resample(current, step);
      if (cfg.w_rl != 0.0) fresh_baseline = fit_baseline(fresh, adv.gamma);
    }
    const auto& data = step == 0 ? d_tr : fresh;
    const auto& b = step == 0 ? baseline : fresh_baseline;
    std::vector<Vec> advantages;
    if (cfg.w_rl != 0.0) advantages = compute_advantages(data, b, adv.gamma, adv.gae_tau, adv.options);
    const FlatGrad g = adaptation_gradient(current, data, advantages, demo, cfg.w_rl, cfg.w_bc);
    if (!g.allFinite()) throw NumericalError("adapt: non-finite adaptation gradient");
    current.net = sgd_step(current.net, g, cfg.alpha);
  }
  return current;
}

GaussianPolicy warm_start(const GaussianPolicy& theta, const Trajectory& demo, double alpha) {
  if (demo.empty()) throw std::invalid_argument("warm start: empty demonstration");
  const FlatGrad g = bc_loss_and_grad(theta, demo).grad;
  GaussianPolicy out = theta;
  out.net = sgd_step(theta.net, g, alpha);
  return out;
}

}  // namespace emrld
