#include "emrld/meta.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "emrld/parallel.hpp"

namespace emrld {

std::string to_string(AlgorithmKind kind) {
  switch (kind) {
    case AlgorithmKind::EMRLD: return "emrld";
    case AlgorithmKind::EMRLD_WS: return "emrld_ws";
    case AlgorithmKind::MAML: return "maml";
    case AlgorithmKind::META_BC: return "meta_bc";
    case AlgorithmKind::GMPS: return "gmps";
  }
  return "unknown";
}

AlgorithmKind parse_algorithm(const std::string& name) {
  if (name == "emrld") return AlgorithmKind::EMRLD;
  if (name == "emrld_ws" || name == "emrld-ws") return AlgorithmKind::EMRLD_WS;
  if (name == "maml") return AlgorithmKind::MAML;
  if (name == "meta_bc" || name == "meta-bc") return AlgorithmKind::META_BC;
  if (name == "gmps") return AlgorithmKind::GMPS;
  throw std::invalid_argument("unknown algorithm '" + name + "' (expected emrld, emrld_ws, maml, meta_bc or gmps)");
}

bool uses_demos(AlgorithmKind kind) { return kind != AlgorithmKind::MAML; }

std::string to_string(MetaGradMode mode) {
  return mode == MetaGradMode::FirstOrder ? "first_order" : "hvp_second_order";
}

MetaGradMode parse_meta_grad_mode(const std::string& name) {
  if (name == "first_order") return MetaGradMode::FirstOrder;
  if (name == "hvp_second_order") return MetaGradMode::HvpSecondOrder;
  throw std::invalid_argument("unknown meta_grad_mode '" + name + "'");
}

void MetaConfig::validate() const {
  adapt.validate();
  trpo.validate();
  if (meta_batch < 1 || adapt_batch < 1 || iterations < 0 || workers < 1) {
    throw std::invalid_argument("meta config: batch sizes and workers must be positive, iterations nonnegative");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("meta config: gamma must lie in (0, 1)");
  if (gae_tau < 0.0 || gae_tau > 1.0) throw std::invalid_argument("meta config: gae_tau must lie in [0, 1]");
  if (!(adam_lr > 0.0)) throw std::invalid_argument("meta config: adam_lr must be positive");
}

AdaptConfig effective_adapt_config(const MetaConfig& cfg) {
  AdaptConfig a = cfg.adapt;
  switch (cfg.algorithm) {
    case AlgorithmKind::EMRLD:
    case AlgorithmKind::EMRLD_WS: break;
    case AlgorithmKind::MAML: a.w_bc = 0.0; break;
    case AlgorithmKind::META_BC: a.w_rl = 0.0; a.w_bc = 1.0; break;
    case AlgorithmKind::GMPS: a.w_rl = 1.0; a.w_bc = 0.0; break;
  }
  return a;
}

std::pair<Vec, AdamState> adam_step(const Vec& params, const Vec& grad, const AdamState& state, double lr) {
  if (grad.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam: parameter, gradient and moment lengths differ");
  }
  AdamState next = state;
  next.step += 1;
  next.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  next.v = state.beta2 * state.v + (1.0 - state.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(next.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(next.step));
  Vec out = params;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double mhat = next.m(i) / c1;
    const double vhat = next.v(i) / c2;
    out(i) -= lr * mhat / (std::sqrt(vhat) + state.eps);
  }
  return {std::move(out), std::move(next)};
}

Vec meta_surrogate_grad(const Vec& theta, std::span<const MetaGradTerm> terms, double alpha, MetaGradMode mode,
                        int adapt_steps) {
  Vec total = Vec::Zero(theta.size());
  if (mode == MetaGradMode::HvpSecondOrder && adapt_steps > 1) {
    throw std::invalid_argument("meta gradient: hvp_second_order supports a single adaptation step");
  }
  for (const auto& term : terms) {
    if (term.outer_grad.size() != theta.size()) throw ShapeError("meta gradient: outer gradient length mismatch");
    if (mode == MetaGradMode::FirstOrder || alpha == 0.0) {
      total += term.outer_grad;
      continue;
    }
    if (!term.inner_grad) throw std::invalid_argument("meta gradient: hvp mode needs the inner gradient");
    const double unorm = term.outer_grad.norm();
    if (unorm == 0.0) continue;
    const double eps = 1e-5 * std::max(1.0, theta.norm()) / unorm;
    const Vec hv = (term.inner_grad(theta + eps * term.outer_grad) - term.inner_grad(theta - eps * term.outer_grad)) /
                   (2.0 * eps);
    total += term.outer_grad - alpha * hv;
  }
  return total;
}

Vec meta_surrogate_grad(const std::vector<GaussianPolicy>& adapted, const std::vector<std::vector<Trajectory>>& d_vals,
                        const std::vector<std::vector<Vec>>& advantages) {
  if (adapted.empty()) throw std::invalid_argument("meta gradient: no tasks");
  if (adapted.size() != d_vals.size() || adapted.size() != advantages.size()) {
    throw std::invalid_argument("meta gradient: per-task inputs are misaligned");
  }
  Vec total = Vec::Zero(adapted.front().net.num_params());
  for (std::size_t i = 0; i < adapted.size(); ++i) total += pg_loss_and_grad(adapted[i], d_vals[i], advantages[i]).grad;
  return total;
}

MetaState init_meta_state(EnvKind kind, const MetaConfig& cfg, double sigma, int hidden) {
  const auto& spec = env_spec(kind);
  const std::vector<int> sizes{spec.obs_dim, hidden, hidden, spec.action_dim};
  MetaState s;
  s.theta = make_gaussian_policy(sizes, sigma, mix_seed(cfg.seed, 0x1417));
  s.adam = AdamState::zeros(s.theta.net.num_params());
  return s;
}

namespace {

struct TaskWork {
  int id = 0;
  const Trajectory* demo = nullptr;
  // datasets[s] / advantages[s] drive adaptation step s
  std::vector<std::vector<Trajectory>> datasets;
  std::vector<std::vector<Vec>> advantages;
  GaussianPolicy adapted;
  std::vector<Trajectory> d_val;
  std::vector<Vec> adv_val;
  Mat val_states;
  Mat val_actions;
  Vec val_adv;
};

bool rl_in_adaptation(const AdaptConfig& a) { return a.w_rl != 0.0; }

// Warm start (EMRLD_WS only) followed by the adaptation steps on stored data.
GaussianPolicy adapt_with_data(const GaussianPolicy& theta, const TaskWork& w, const AdaptConfig& a, bool warm) {
  GaussianPolicy current = warm ? warm_start(theta, *w.demo, a.alpha) : theta;
  for (std::size_t s = 0; s < w.datasets.size(); ++s) {
    const FlatGrad g = adaptation_gradient(current, w.datasets[s], w.advantages[s], w.demo, a.w_rl, a.w_bc);
    current.net = sgd_step(current.net, g, a.alpha);
  }
  return current;
}

std::vector<Trajectory> pool(const std::vector<TaskWork>& work, bool validation) {
  std::vector<Trajectory> all;
  for (const auto& w : work) {
    const auto& src = validation ? w.d_val : w.datasets.front();
    all.insert(all.end(), src.begin(), src.end());
  }
  return all;
}

}  // namespace

MetaIterationResult meta_iteration(const MetaState& state, EnvKind kind, const std::vector<Task>& tasks,
                                   const DemoSet* demos, const MetaConfig& cfg) {
  cfg.validate();
  if (tasks.empty()) throw std::invalid_argument("meta iteration: no tasks");
  const AdaptConfig ad = effective_adapt_config(cfg);
  const bool warm = cfg.algorithm == AlgorithmKind::EMRLD_WS;
  const bool rl_meta = cfg.algorithm == AlgorithmKind::EMRLD || cfg.algorithm == AlgorithmKind::EMRLD_WS ||
                       cfg.algorithm == AlgorithmKind::MAML;
  const bool needs_demo = ad.w_bc != 0.0 || warm || !rl_meta;
  if (warm && cfg.meta_grad_mode == MetaGradMode::HvpSecondOrder) {
    throw std::invalid_argument("meta iteration: hvp_second_order is not supported together with the warm start");
  }
  const auto adv_cfg = cfg.advantage_settings();
  const std::uint64_t iter_seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(state.iteration) + 1);
  const GaussianPolicy& theta = state.theta;

  const std::size_t n = static_cast<std::size_t>(cfg.meta_batch);
  std::vector<TaskWork> work(n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t idx = (static_cast<std::size_t>(state.iteration) * n + j) % tasks.size();
    work[j].id = static_cast<int>(idx);
    if (needs_demo) {
      if (demos == nullptr) throw DemoError(to_string(cfg.algorithm) + " requires demonstrations");
      work[j].demo = demos->find(work[j].id);
      if (work[j].demo == nullptr) throw DemoError("missing demonstration for task " + std::to_string(work[j].id));
    }
  }

  MetaMetrics metrics;
  metrics.iteration = state.iteration;

  // Pre-adaptation data, from the (warm-started) meta-policy.
  std::vector<GaussianPolicy> starts(n, theta);
  std::vector<double> bc_before(n, 0.0), bc_after(n, 0.0);
  parallel_for(n, cfg.workers, [&](std::size_t j) {
    auto& w = work[j];
    if (warm) {
      bc_before[j] = bc_loss_and_grad(theta, *w.demo).loss;
      starts[j] = warm_start(theta, *w.demo, ad.alpha);
      bc_after[j] = bc_loss_and_grad(starts[j], *w.demo).loss;
    }
    EpisodeOptions opt;
    opt.task_id = w.id;
    w.datasets.push_back(collect_trajectories(kind, tasks[w.id], starts[j], cfg.adapt_batch,
                                              mix_seed(iter_seed, 4 * j), 1, opt));
  });
  if (warm) {
    for (std::size_t j = 0; j < n; ++j) {
      metrics.warm_start_bc_before += bc_before[j] / static_cast<double>(n);
      metrics.warm_start_bc_after += bc_after[j] / static_cast<double>(n);
    }
  }
  metrics.mean_pre_adapt_return = return_stats(pool(work, false)).first;

  BaselineWeights tr_baseline;
  if (rl_in_adaptation(ad)) tr_baseline = fit_baseline(pool(work, false), cfg.gamma);

  // Adaptation (extra steps recollect with the current adapted policy) and validation rollouts.
  parallel_for(n, cfg.workers, [&](std::size_t j) {
    auto& w = work[j];
    EpisodeOptions opt;
    opt.task_id = w.id;
    GaussianPolicy current = starts[j];
    for (int s = 0; s < ad.adapt_steps; ++s) {
      if (s > 0) {
        w.datasets.push_back(collect_trajectories(kind, tasks[w.id], current, cfg.adapt_batch,
                                                  mix_seed(iter_seed, 4 * j + 2 + 4 * n * s), 1, opt));
      }
      std::vector<Vec> adv;
      if (rl_in_adaptation(ad)) {
        const BaselineWeights b = s == 0 ? tr_baseline : fit_baseline(w.datasets.back(), cfg.gamma);
        adv = compute_advantages(w.datasets.back(), b, adv_cfg.gamma, adv_cfg.gae_tau, adv_cfg.options);
      }
      w.advantages.push_back(std::move(adv));
      const FlatGrad g = adaptation_gradient(current, w.datasets.back(), w.advantages.back(), w.demo, ad.w_rl, ad.w_bc);
      if (!g.allFinite()) throw NumericalError("meta iteration: non-finite adaptation gradient");
      current.net = sgd_step(current.net, g, ad.alpha);
    }
    w.adapted = std::move(current);
    w.d_val = collect_trajectories(kind, tasks[w.id], w.adapted, cfg.adapt_batch, mix_seed(iter_seed, 4 * j + 1), 1,
                                   opt);
  });

  {
    const auto [mean, sd] = return_stats(pool(work, true));
    metrics.mean_adapted_return = mean;
    metrics.std_adapted_return = sd;
  }

  MetaIterationResult result;
  result.next = state;
  result.next.iteration = state.iteration + 1;
  const Vec theta_flat = flatten(theta.net);

  if (rl_meta) {
    for (auto& w : work) {
      const BaselineWeights val_baseline = fit_baseline(w.d_val, cfg.gamma);
      w.adv_val = compute_advantages(w.d_val, val_baseline, adv_cfg.gamma, adv_cfg.gae_tau, adv_cfg.options);
      for (const auto& tr : w.d_val) metrics.meta_update_reward_reads += static_cast<std::int64_t>(tr.size());
      w.val_states = stack_states(w.d_val);
      w.val_actions = stack_actions(w.d_val);
      w.val_adv = stack_advantages(w.adv_val);
    }

    TrpoProblem problem;
    problem.params = theta_flat;
    if (cfg.meta_grad_mode == MetaGradMode::FirstOrder) {
      std::vector<GaussianPolicy> adapted;
      std::vector<std::vector<Trajectory>> d_vals;
      std::vector<std::vector<Vec>> advs;
      for (const auto& w : work) {
        adapted.push_back(w.adapted);
        d_vals.push_back(w.d_val);
        advs.push_back(w.adv_val);
      }
      problem.gradient = meta_surrogate_grad(adapted, d_vals, advs);
    } else {
      std::vector<MetaGradTerm> terms;
      for (const auto& w : work) {
        MetaGradTerm term;
        term.outer_grad = pg_loss_and_grad(w.adapted, w.val_states, w.val_actions, w.val_adv).grad;
        term.inner_grad = [&w, &theta, ad](const Vec& p) {
          return adaptation_gradient(with_flat_params(theta, p), w.datasets.front(), w.advantages.front(), w.demo,
                                     ad.w_rl, ad.w_bc);
        };
        terms.push_back(std::move(term));
      }
      problem.gradient = meta_surrogate_grad(theta_flat, terms, ad.alpha, cfg.meta_grad_mode, ad.adapt_steps);
    }
    double surr0 = 0.0;
    for (const auto& w : work) surr0 += surrogate_loss(w.adapted, w.adapted, w.val_states, w.val_actions, w.val_adv);
    problem.surrogate_at_params = surr0;
    const double inv_n = 1.0 / static_cast<double>(n);
    const double damping = cfg.trpo.damping;
    std::vector<MlpCache> caches;
    caches.reserve(n);
    for (const auto& w : work) caches.push_back(mlp_forward_batch(w.adapted.net, w.val_states));
    problem.fvp = [&](const Vec& v) {
      Vec out = damping * v;
      for (std::size_t j = 0; j < n; ++j) out += inv_n * fisher_vector_product(work[j].adapted, caches[j], v, 0.0);
      return out;
    };
    problem.evaluate = [&](const Vec& candidate) {
      const GaussianPolicy cand = with_flat_params(theta, candidate);
      std::vector<double> surr(n), kl(n);
      parallel_for(n, cfg.workers, [&](std::size_t j) {
        const auto& w = work[j];
        const GaussianPolicy re = adapt_with_data(cand, w, ad, warm);
        surr[j] = surrogate_loss(w.adapted, re, w.val_states, w.val_actions, w.val_adv);
        kl[j] = mean_kl_states(w.adapted, re, w.val_states);
      });
      double s = 0.0, k = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        s += surr[j];
        k += kl[j] * inv_n;
      }
      return std::pair{s, k};
    };
    const Vec next = trpo_update(problem, cfg.trpo, &metrics.trpo);
    metrics.meta_kl = metrics.trpo.kl;
    result.next.theta = with_flat_params(theta, next);
  } else {
    // Supervised meta-update: BC loss of the adapted policies on the demonstrations.
    std::vector<MetaGradTerm> terms;
    for (const auto& w : work) {
      MetaGradTerm term;
      term.outer_grad = bc_loss_and_grad(w.adapted, *w.demo).grad;
      term.inner_grad = [&w, &theta, ad](const Vec& p) {
        return adaptation_gradient(with_flat_params(theta, p), w.datasets.front(), w.advantages.front(), w.demo,
                                   ad.w_rl, ad.w_bc);
      };
      terms.push_back(std::move(term));
    }
    const Vec g = meta_surrogate_grad(theta_flat, terms, ad.alpha, cfg.meta_grad_mode, ad.adapt_steps);
    if (!g.allFinite()) throw NumericalError("meta iteration: non-finite supervised meta-gradient");
    AdamState adam = state.adam.m.size() == theta_flat.size() ? state.adam : AdamState::zeros(theta_flat.size());
    auto [next, next_adam] = adam_step(theta_flat, g, adam, cfg.adam_lr);
    result.next.theta = with_flat_params(theta, next);
    result.next.adam = std::move(next_adam);
  }

  for (auto& w : work) result.adapted.push_back(std::move(w.adapted));
  result.metrics = metrics;
  return result;
}

AdaptationCurve evaluate_meta_policy(const GaussianPolicy& theta, EnvKind kind, const std::vector<Task>& test_tasks,
                                     const DemoSet* demos, const MetaConfig& cfg, int max_steps,
                                     std::uint64_t seed) {
  if (max_steps < 0) throw std::invalid_argument("evaluate: max_steps must be nonnegative");
  if (test_tasks.empty()) throw std::invalid_argument("evaluate: no test tasks");
  const AdaptConfig ad = effective_adapt_config(cfg);
  const bool warm = cfg.algorithm == AlgorithmKind::EMRLD_WS;
  const bool needs_demo = max_steps > 0 && (ad.w_bc != 0.0 || warm);
  const auto adv_cfg = cfg.advantage_settings();
  const std::size_t n = test_tasks.size();
  const std::size_t steps = static_cast<std::size_t>(max_steps) + 1;

  std::vector<const Trajectory*> task_demos(n, nullptr);
  if (needs_demo) {
    if (demos == nullptr) throw DemoError(to_string(cfg.algorithm) + " evaluation requires demonstrations");
    for (std::size_t i = 0; i < n; ++i) {
      task_demos[i] = demos->find(static_cast<int>(i));
      if (task_demos[i] == nullptr) throw DemoError("missing demonstration for test task " + std::to_string(i));
    }
  }

  AdaptationCurve curve;
  curve.per_task.assign(steps, std::vector<double>(n, 0.0));
  curve.sample_episodes.assign(steps, std::vector<Trajectory>(n));

  parallel_for(n, cfg.workers, [&](std::size_t i) {
    EpisodeOptions opt;
    opt.task_id = static_cast<int>(i);
    const std::uint64_t task_seed = mix_seed(seed, i);
    GaussianPolicy current = theta;
    auto episodes = collect_trajectories(kind, test_tasks[i], current, cfg.adapt_batch, mix_seed(task_seed, 0), 1, opt);
    curve.per_task[0][i] = return_stats(episodes).first;
    curve.sample_episodes[0][i] = episodes.front();
    for (std::size_t s = 1; s < steps; ++s) {
      if (s == 1 && warm) {
        current = warm_start(current, *task_demos[i], ad.alpha);
        episodes = collect_trajectories(kind, test_tasks[i], current, cfg.adapt_batch, mix_seed(task_seed, 1000), 1,
                                        opt);
      }
      std::vector<Vec> adv;
      if (ad.w_rl != 0.0) {
        const BaselineWeights b = fit_baseline(episodes, cfg.gamma);
        adv = compute_advantages(episodes, b, adv_cfg.gamma, adv_cfg.gae_tau, adv_cfg.options);
      }
      const FlatGrad g = adaptation_gradient(current, episodes, adv, task_demos[i], ad.w_rl, ad.w_bc);
      current.net = sgd_step(current.net, g, ad.alpha);
      episodes = collect_trajectories(kind, test_tasks[i], current, cfg.adapt_batch, mix_seed(task_seed, s), 1, opt);
      curve.per_task[s][i] = return_stats(episodes).first;
      curve.sample_episodes[s][i] = episodes.front();
    }
  });

  for (std::size_t s = 0; s < steps; ++s) {
    double mean = 0.0;
    for (double r : curve.per_task[s]) mean += r / static_cast<double>(n);
    double var = 0.0;
    for (double r : curve.per_task[s]) var += (r - mean) * (r - mean) / static_cast<double>(n);
    curve.mean.push_back(mean);
    curve.std.push_back(std::sqrt(var));
  }
  return curve;
}

}  // namespace emrld
