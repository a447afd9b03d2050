#include "emrld/trpo.hpp"

#include <cmath>
#include <stdexcept>

#include "emrld/losses.hpp"

namespace emrld {

void TrpoConfig::validate() const {
  if (!(max_kl > 0.0)) throw std::invalid_argument("trpo: max_kl must be positive");
  if (cg_iters < 1) throw std::invalid_argument("trpo: cg_iters must be at least 1");
  if (damping < 0.0) throw std::invalid_argument("trpo: damping must be nonnegative");
  if (!(backtrack_ratio > 0.0 && backtrack_ratio < 1.0)) throw std::invalid_argument("trpo: backtrack_ratio in (0, 1)");
  if (max_backtracks < 1) throw std::invalid_argument("trpo: max_backtracks must be at least 1");
}

CgResult conjugate_gradient(const LinearOperator& apply_A, const Vec& b, int iters, double tol) {
  CgResult out;
  out.x = Vec::Zero(b.size());
  Vec r = b;
  Vec p = r;
  double rr = r.squaredNorm();
  out.residual_norm = std::sqrt(rr);
  for (int i = 0; i < iters && out.residual_norm > tol; ++i) {
    const Vec ap = apply_A(p);
    const double pap = p.dot(ap);
    if (!std::isfinite(pap)) throw NumericalError("conjugate gradient: non-finite curvature");
    if (pap <= 0.0) break;
    const double step = rr / pap;
    out.x += step * p;
    r -= step * ap;
    const double rr_next = r.squaredNorm();
    if (!std::isfinite(rr_next)) throw NumericalError("conjugate gradient: non-finite residual");
    p = r + (rr_next / rr) * p;
    rr = rr_next;
    out.residual_norm = std::sqrt(rr);
    out.iterations = i + 1;
  }
  return out;
}

Vec fisher_vector_product(const GaussianPolicy& policy, const Mat& states, const Vec& v, double damping) {
  if (v.size() != policy.net.num_params()) throw ShapeError("fvp: vector length does not match parameter count");
  if (states.cols() == 0) throw std::invalid_argument("fvp: no states");
  return fisher_vector_product(policy, mlp_forward_batch(policy.net, states), v, damping);
}

Vec fisher_vector_product(const GaussianPolicy& policy, const MlpCache& cache, const Vec& v, double damping) {
  if (v.size() != policy.net.num_params()) throw ShapeError("fvp: vector length does not match parameter count");
  Mat jv = mlp_jvp_batch(policy.net, cache, v);
  const double n = static_cast<double>(jv.cols());
  for (Eigen::Index i = 0; i < jv.rows(); ++i) jv.row(i) /= policy.sigma(i) * policy.sigma(i) * n;
  return mlp_backward_batch(policy.net, cache, jv) + damping * v;
}

double mean_kl_states(const GaussianPolicy& old_policy, const GaussianPolicy& new_policy, const Mat& states) {
  if (states.cols() == 0) return 0.0;
  const Mat mu_old = mlp_forward_batch(old_policy.net, states).output();
  const Mat mu_new = mlp_forward_batch(new_policy.net, states).output();
  double total = 0.0;
  for (Eigen::Index j = 0; j < states.cols(); ++j) total += gaussian_kl(mu_old.col(j), mu_new.col(j), old_policy.sigma);
  return total / static_cast<double>(states.cols());
}

double surrogate_loss(const GaussianPolicy& old_policy, const GaussianPolicy& new_policy, const Mat& states,
                      const Mat& actions, const Vec& advantages) {
  if (states.cols() != actions.cols() || states.cols() != advantages.size()) {
    throw std::invalid_argument("surrogate: misaligned data");
  }
  if (states.cols() == 0) return 0.0;
  const Mat mu_old = mlp_forward_batch(old_policy.net, states).output();
  const Mat mu_new = mlp_forward_batch(new_policy.net, states).output();
  double total = 0.0;
  for (Eigen::Index j = 0; j < states.cols(); ++j) {
    const double lr = gaussian_log_density(mu_new.col(j), new_policy.sigma, actions.col(j)) -
                      gaussian_log_density(mu_old.col(j), old_policy.sigma, actions.col(j));
    total += std::exp(lr) * advantages(j);
  }
  return -total / static_cast<double>(states.cols());
}

Vec trpo_update(const TrpoProblem& problem, const TrpoConfig& cfg, TrpoReport* report) {
  cfg.validate();
  TrpoReport rep;
  rep.surrogate_before = problem.surrogate_at_params;
  rep.surrogate_after = problem.surrogate_at_params;
  auto finish = [&](Vec params) {
    if (report) *report = rep;
    return params;
  };
  if (!problem.gradient.allFinite()) throw NumericalError("trpo: non-finite gradient");
  if (problem.gradient.squaredNorm() == 0.0) return finish(problem.params);

  const Vec neg_grad = -problem.gradient;
  const CgResult cg = conjugate_gradient(problem.fvp, neg_grad, cfg.cg_iters, cfg.cg_tol);
  const Vec& dir = cg.x;
  const double shs = dir.dot(problem.fvp(dir));
  if (!std::isfinite(shs) || shs <= 0.0) return finish(problem.params);
  const double scale = std::sqrt(2.0 * cfg.max_kl / shs);
  const Vec full_step = scale * dir;
  rep.expected_improvement = neg_grad.dot(full_step);

  double frac = 1.0;
  for (int k = 0; k < cfg.max_backtracks; ++k, frac *= cfg.backtrack_ratio) {
    Vec candidate = problem.params + frac * full_step;
    const auto [surr, kl] = problem.evaluate(candidate);
    rep.backtracks = k;
    if (std::isfinite(surr) && std::isfinite(kl) && surr < problem.surrogate_at_params && kl <= cfg.max_kl) {
      rep.accepted = true;
      rep.surrogate_after = surr;
      rep.kl = kl;
      return finish(std::move(candidate));
    }
  }
  rep.backtracks = cfg.max_backtracks;
  return finish(problem.params);
}

GaussianPolicy trpo_step(const GaussianPolicy& policy, const Mat& states, const Mat& actions, const Vec& advantages,
                         const TrpoConfig& cfg, TrpoReport* report) {
  if (states.cols() == 0) throw std::invalid_argument("trpo: no data");
  TrpoProblem problem;
  problem.params = flatten(policy.net);
  problem.gradient = pg_loss_and_grad(policy, states, actions, advantages).grad;
  problem.surrogate_at_params = surrogate_loss(policy, policy, states, actions, advantages);
  const MlpCache cache = mlp_forward_batch(policy.net, states);
  problem.fvp = [&](const Vec& v) { return fisher_vector_product(policy, cache, v, cfg.damping); };
  problem.evaluate = [&](const Vec& candidate) {
    const GaussianPolicy next = with_flat_params(policy, candidate);
    return std::pair{surrogate_loss(policy, next, states, actions, advantages), mean_kl_states(policy, next, states)};
  };
  return with_flat_params(policy, trpo_update(problem, cfg, report));
}

}  // namespace emrld
