#include "emrld/rollout.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "emrld/parallel.hpp"

namespace emrld {

double Trajectory::total_return() const { return std::accumulate(rewards.begin(), rewards.end(), 0.0); }

void Trajectory::validate() const {
  if (actions.size() != states.size() || rewards.size() != states.size() || times.size() != states.size()) {
    throw std::invalid_argument("trajectory fields have unequal lengths");
  }
  if (states.size() > static_cast<std::size_t>(kHorizon)) {
    throw std::invalid_argument("trajectory longer than the horizon");
  }
}

namespace {

Vec policy_input(const Vec& obs, const Vec& context) {
  if (context.size() == 0) return obs;
  Vec in(obs.size() + context.size());
  in << obs, context;
  return in;
}

}  // namespace

Trajectory run_episode(EnvKind kind, const Task& task, const GaussianPolicy& policy, const EpisodeOptions& options,
                       std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Trajectory traj;
  traj.task_id = options.task_id;
  EnvState state = env_reset(kind);
  const int adim = policy.action_dim();
  for (int step = 0; step < kHorizon; ++step) {
    const Vec obs = observe(kind, state);
    const Vec mean = mlp_forward(policy.net, policy_input(obs, options.context));
    Vec action = mean;
    if (!options.greedy) {
      for (int i = 0; i < adim; ++i) action(i) += policy.sigma(i) * normal(rng);
    }
    if (options.extra_noise_std > 0.0) {
      for (int i = 0; i < adim; ++i) action(i) += options.extra_noise_std * normal(rng);
    }
    if (!action.allFinite()) throw NumericalError("policy produced a non-finite action");
    const StepResult res = env_step(kind, state, action, task);
    traj.states.push_back(obs);
    traj.actions.push_back(action);
    traj.rewards.push_back(res.reward);
    traj.times.push_back(state.t);
    state = res.next_state;
    if (res.done) {
      traj.done_reason = res.done_reason;
      break;
    }
  }
  traj.final_state = observe(kind, state);
  return traj;
}

std::vector<Trajectory> collect_trajectories(EnvKind kind, const Task& task, const GaussianPolicy& policy,
                                             int n_episodes, std::uint64_t seed, int workers,
                                             const EpisodeOptions& options) {
  if (n_episodes <= 0) throw std::invalid_argument("collect_trajectories: n_episodes must be positive");
  std::vector<Trajectory> out(static_cast<std::size_t>(n_episodes));
  parallel_for(out.size(), workers, [&](std::size_t e) {
    std::mt19937_64 rng(mix_seed(seed, e));
    out[e] = run_episode(kind, task, policy, options, rng);
  });
  return out;
}

std::vector<double> discounted_returns(const std::vector<double>& rewards, double gamma) {
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("discounted_returns: gamma must lie in [0, 1]");
  std::vector<double> g(rewards.size());
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc = rewards[t] + gamma * acc;
    g[t] = acc;
  }
  return g;
}

Vec baseline_features(const Vec& state, int t) {
  const Eigen::Index d = state.size();
  Vec f(2 * d + 4);
  const double tt = 0.01 * t;
  f.head(d) = state;
  f.segment(d, d) = state.cwiseProduct(state);
  f(2 * d) = tt;
  f(2 * d + 1) = tt * tt;
  f(2 * d + 2) = tt * tt * tt;
  f(2 * d + 3) = 1.0;
  return f;
}

double BaselineWeights::predict(const Vec& state, int t) const {
  if (w.size() == 0) return 0.0;
  return baseline_features(state, t).dot(w);
}

BaselineWeights fit_baseline(const std::vector<Trajectory>& trajectories, double gamma, double ridge) {
  std::size_t rows = 0;
  for (const auto& tr : trajectories) rows += tr.size();
  if (rows == 0) throw std::invalid_argument("fit_baseline: no samples");
  const Eigen::Index dim = trajectories.front().states.front().size() * 2 + 4;
  Mat gram = Mat::Zero(dim, dim);
  Vec rhs = Vec::Zero(dim);
  for (const auto& tr : trajectories) {
    const auto g = discounted_returns(tr.rewards, gamma);
    for (std::size_t t = 0; t < tr.size(); ++t) {
      const Vec f = baseline_features(tr.states[t], tr.times[t]);
      if (f.size() != dim) throw ShapeError("fit_baseline: inconsistent state dimensions");
      gram.selfadjointView<Eigen::Lower>().rankUpdate(f);
      rhs += g[t] * f;
    }
  }
  gram = gram.selfadjointView<Eigen::Lower>();
  gram.diagonal().array() += ridge;
  Eigen::LDLT<Mat> ldlt(gram);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    throw NumericalError("fit_baseline: normal equations are not positive definite");
  }
  if (ridge <= 0.0) {
    const Vec diag = ldlt.vectorD();
    const double scale = std::max(1.0, diag.cwiseAbs().maxCoeff());
    if (diag.cwiseAbs().minCoeff() <= 1e-13 * scale) {
      throw NumericalError("fit_baseline: singular normal equations (use a positive ridge)");
    }
  }
  BaselineWeights b{ldlt.solve(rhs)};
  if (!b.w.allFinite()) throw NumericalError("fit_baseline: non-finite solution");
  return b;
}

std::vector<Vec> compute_advantages(const std::vector<Trajectory>& trajectories, const BaselineWeights& baseline,
                                    double gamma, double gae_tau, const AdvantageOptions& options) {
  if (gae_tau < 0.0 || gae_tau > 1.0) throw std::invalid_argument("compute_advantages: gae_tau must lie in [0, 1]");
  std::vector<Vec> out;
  out.reserve(trajectories.size());
  for (const auto& tr : trajectories) {
    const std::size_t n = tr.size();
    Vec values(n + 1);
    for (std::size_t t = 0; t < n; ++t) values(static_cast<Eigen::Index>(t)) = baseline.predict(tr.states[t], tr.times[t]);
    values(static_cast<Eigen::Index>(n)) = 0.0;
    Vec adv(n);
    double acc = 0.0;
    for (std::size_t t = n; t-- > 0;) {
      const auto i = static_cast<Eigen::Index>(t);
      const double delta = tr.rewards[t] + gamma * values(i + 1) - values(i);
      acc = delta + gamma * gae_tau * acc;
      adv(i) = acc;
    }
    out.push_back(std::move(adv));
  }
  if (options.normalize) {
    const Vec all = stack_advantages(out);
    if (all.size() > 1) {
      const double mean = all.mean();
      const double sd = std::sqrt((all.array() - mean).square().mean());
      for (auto& a : out) a = (a.array() - mean) / (sd + 1e-8);
    }
  }
  return out;
}

std::pair<double, double> return_stats(const std::vector<Trajectory>& trajectories) {
  if (trajectories.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (const auto& t : trajectories) sum += t.total_return();
  const double mean = sum / static_cast<double>(trajectories.size());
  double var = 0.0;
  for (const auto& t : trajectories) var += (t.total_return() - mean) * (t.total_return() - mean);
  return {mean, std::sqrt(var / static_cast<double>(trajectories.size()))};
}

Mat stack_states(const std::vector<Trajectory>& trajectories, const Vec& context) {
  std::size_t n = 0;
  for (const auto& tr : trajectories) n += tr.size();
  if (n == 0) return Mat();
  const Eigen::Index d = trajectories.front().states.front().size();
  Mat m(d + context.size(), static_cast<Eigen::Index>(n));
  Eigen::Index c = 0;
  for (const auto& tr : trajectories) {
    for (const auto& s : tr.states) {
      if (s.size() != d) throw ShapeError("stack_states: inconsistent state dimensions");
      m.col(c).head(d) = s;
      if (context.size() > 0) m.col(c).tail(context.size()) = context;
      ++c;
    }
  }
  return m;
}

Mat stack_actions(const std::vector<Trajectory>& trajectories) {
  std::size_t n = 0;
  for (const auto& tr : trajectories) n += tr.size();
  if (n == 0) return Mat();
  const Eigen::Index d = trajectories.front().actions.front().size();
  Mat m(d, static_cast<Eigen::Index>(n));
  Eigen::Index c = 0;
  for (const auto& tr : trajectories) {
    for (const auto& a : tr.actions) m.col(c++) = a;
  }
  return m;
}

Vec stack_advantages(const std::vector<Vec>& advantages) {
  Eigen::Index n = 0;
  for (const auto& a : advantages) n += a.size();
  Vec out(n);
  Eigen::Index k = 0;
  for (const auto& a : advantages) {
    out.segment(k, a.size()) = a;
    k += a.size();
  }
  return out;
}

}  // namespace emrld
