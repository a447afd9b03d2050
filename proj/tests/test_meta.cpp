#include <doctest.h>

#include "emrld/meta.hpp"
#include "helpers.hpp"

using namespace emrld;
using testutil::rel_err;

namespace {

// Straight line to the goal at full speed. Unit-norm actions clip to the max step.
Trajectory scripted_demo(const Task& task, int id) {
  Trajectory t;
  t.task_id = id;
  EnvState s = env_reset(EnvKind::Point2D);
  for (;;) {
    const Vec obs = observe(EnvKind::Point2D, s);
    Vec a{{task.goal_x - s.x, task.goal_y - s.y}};
    if (a.norm() > kPointMaxStep) a.normalize();
    const StepResult r = env_step(EnvKind::Point2D, s, a, task);
    t.states.push_back(obs);
    t.actions.push_back(a);
    t.rewards.push_back(r.reward);
    t.times.push_back(s.t);
    s = r.next_state;
    if (r.done) {
      t.done_reason = r.done_reason;
      break;
    }
  }
  t.final_state = observe(EnvKind::Point2D, s);
  return t;
}

DemoSet scripted_demos(const std::vector<Task>& tasks) {
  DemoSet d;
  for (std::size_t i = 0; i < tasks.size(); ++i) d.insert(static_cast<int>(i), tasks[i], scripted_demo(tasks[i], static_cast<int>(i)));
  return d;
}

MetaConfig small_config(AlgorithmKind alg) {
  MetaConfig c;
  c.algorithm = alg;
  c.meta_batch = 2;
  c.adapt_batch = 4;
  c.seed = 17;
  return c;
}

}  // namespace

TEST_CASE("adam_step") {
  const Vec p{{1.0, -2.0, 3.0}};
  AdamState s = AdamState::zeros(3);
  s.m = Vec{{0.5, 0.1, -0.2}};
  s.v = Vec{{0.3, 0.2, 0.1}};
  s.step = 4;
  const auto [same, decayed] = adam_step(p, Vec::Zero(3), s, 0.0);
  CHECK(same == p);
  CHECK((decayed.m - 0.9 * s.m).norm() < 1e-15);
  CHECK((decayed.v - 0.999 * s.v).norm() < 1e-15);

  std::mt19937_64 rng(1);
  const Vec g = testutil::random_vec(rng, 50);
  const auto [first, st1] = adam_step(Vec::Zero(50), g, AdamState::zeros(50), 0.01);
  CHECK(first.cwiseAbs().maxCoeff() <= 0.01 + 1e-9);
  for (int i = 0; i < 50; ++i) CHECK(first(i) * g(i) <= 0.0);

  // Reference implementation over 100 steps.
  Vec theta = testutil::random_vec(rng, 10), ref = theta;
  AdamState st = AdamState::zeros(10);
  std::vector<double> m(10, 0.0), v(10, 0.0);
  for (int t = 1; t <= 100; ++t) {
    const Vec grad = testutil::random_vec(rng, 10);
    std::tie(theta, st) = adam_step(theta, grad, st, 0.003);
    for (int i = 0; i < 10; ++i) {
      m[i] = 0.9 * m[i] + 0.1 * grad(i);
      v[i] = 0.999 * v[i] + 0.001 * grad(i) * grad(i);
      const double mh = m[i] / (1 - std::pow(0.9, t)), vh = v[i] / (1 - std::pow(0.999, t));
      ref(i) -= 0.003 * mh / (std::sqrt(vh) + 1e-8);
    }
  }
  CHECK((theta - ref).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(st.step == 100);
}

TEST_CASE("meta_surrogate_grad on a bilevel quadratic") {
  std::mt19937_64 rng(2);
  const int n = 6;
  const double alpha = 0.07;
  const Vec theta = testutil::random_vec(rng, n);
  std::vector<MetaGradTerm> terms;
  Vec analytic = Vec::Zero(n);
  for (int task = 0; task < 3; ++task) {
    const Mat M = testutil::random_mat(rng, n, n);
    const Mat A = M * M.transpose() / n + Mat::Identity(n, n);
    const Mat C = testutil::random_mat(rng, n, n);
    const Mat Cs = C * C.transpose() / n;
    const Vec b = testutil::random_vec(rng, n), d = testutil::random_vec(rng, n);
    const Vec adapted = theta - alpha * (A * theta - b);
    analytic += (Mat::Identity(n, n) - alpha * A) * (Cs * adapted - d);
    terms.push_back({Cs * adapted - d, [A, b](const Vec& p) { return Vec(A * p - b); }});
  }
  const Vec hvp = meta_surrogate_grad(theta, terms, alpha, MetaGradMode::HvpSecondOrder);
  CHECK((hvp - analytic).cwiseAbs().maxCoeff() < 1e-6);

  Vec sum = Vec::Zero(n);
  for (const auto& t : terms) sum += t.outer_grad;
  CHECK(meta_surrogate_grad(theta, terms, alpha, MetaGradMode::FirstOrder) == sum);
  CHECK(meta_surrogate_grad(theta, terms, 0.0, MetaGradMode::HvpSecondOrder) ==
        meta_surrogate_grad(theta, terms, 0.0, MetaGradMode::FirstOrder));
  CHECK_THROWS(meta_surrogate_grad(theta, terms, alpha, MetaGradMode::HvpSecondOrder, 2));
}

TEST_CASE("meta_surrogate_grad matches finite differences through a policy adaptation") {
  std::mt19937_64 rng(3);
  const std::vector<int> sizes{2, 8, 2};
  const GaussianPolicy pol = make_gaussian_policy(sizes, 0.8, 4);
  const Vec theta = flatten(pol.net);
  const double alpha = 0.05;
  const Trajectory demo = testutil::random_trajectory(rng, 10, 2, 2);
  std::vector<Trajectory> val{testutil::random_trajectory(rng, 12, 2, 2)};
  std::vector<Vec> adv{testutil::random_vec(rng, 12)};

  auto inner = [&](const Vec& p) { return bc_loss_and_grad(with_flat_params(pol, p), demo).grad; };
  auto composite = [&](const Vec& p) {
    const Vec adapted = p - alpha * inner(p);
    return pg_loss_and_grad(with_flat_params(pol, adapted), val, adv).loss;
  };
  const Vec adapted = theta - alpha * inner(theta);
  const std::vector<MetaGradTerm> terms{{pg_loss_and_grad(with_flat_params(pol, adapted), val, adv).grad, inner}};
  const Vec hvp = meta_surrogate_grad(theta, terms, alpha, MetaGradMode::HvpSecondOrder);
  CHECK(rel_err(hvp, testutil::central_diff(composite, theta)) < 1e-4);

  // First-order form equals the sum of per-task policy-gradient gradients.
  const GaussianPolicy ap = with_flat_params(pol, adapted);
  CHECK(meta_surrogate_grad({ap, ap}, {val, val}, {adv, adv}) == 2.0 * pg_loss_and_grad(ap, val, adv).grad);
}

TEST_CASE("meta_iteration equivalences and contracts") {
  const auto tasks = make_tasks(EnvKind::Point2D, TaskSplit::Train, 3, 0);
  const DemoSet demos = scripted_demos(tasks);

  MetaConfig emrld = small_config(AlgorithmKind::EMRLD);
  emrld.adapt.w_bc = 0.0;
  MetaConfig maml = small_config(AlgorithmKind::MAML);
  MetaState se = init_meta_state(EnvKind::Point2D, emrld);
  MetaState sm = init_meta_state(EnvKind::Point2D, maml);
  for (int it = 0; it < 3; ++it) {
    const auto re = meta_iteration(se, EnvKind::Point2D, tasks, nullptr, emrld);
    const auto rm = meta_iteration(sm, EnvKind::Point2D, tasks, &demos, maml);
    for (std::size_t j = 0; j < re.adapted.size(); ++j) CHECK(flatten(re.adapted[j].net) == flatten(rm.adapted[j].net));
    CHECK(flatten(re.next.theta.net) == flatten(rm.next.theta.net));
    CHECK(re.metrics.mean_adapted_return == rm.metrics.mean_adapted_return);
    se = re.next;
    sm = rm.next;
  }

  MetaConfig frozen = small_config(AlgorithmKind::EMRLD);
  frozen.trpo.max_kl = 1e-30;
  const MetaState s0 = init_meta_state(EnvKind::Point2D, frozen);
  const auto rf = meta_iteration(s0, EnvKind::Point2D, tasks, &demos, frozen);
  CHECK((flatten(rf.next.theta.net) - flatten(s0.theta.net)).norm() < 1e-10);

  for (AlgorithmKind alg : {AlgorithmKind::EMRLD, AlgorithmKind::EMRLD_WS, AlgorithmKind::MAML}) {
    MetaConfig c = small_config(alg);
    MetaState s = init_meta_state(EnvKind::Point2D, c);
    for (int it = 0; it < 3; ++it) {
      const auto r = meta_iteration(s, EnvKind::Point2D, tasks, &demos, c);
      if (r.metrics.trpo.accepted) {
        CHECK(r.metrics.trpo.kl <= c.trpo.max_kl);
        CHECK(r.metrics.trpo.surrogate_after < r.metrics.trpo.surrogate_before);
      }
      CHECK(r.metrics.meta_update_reward_reads > 0);
      s = r.next;
    }
  }

  for (AlgorithmKind alg : {AlgorithmKind::META_BC, AlgorithmKind::GMPS}) {
    MetaConfig c = small_config(alg);
    MetaState s = init_meta_state(EnvKind::Point2D, c);
    for (int it = 0; it < 2; ++it) {
      const auto r = meta_iteration(s, EnvKind::Point2D, tasks, &demos, c);
      CHECK(r.metrics.meta_update_reward_reads == 0);
      CHECK(r.next.adam.step == it + 1);
      s = r.next;
    }
  }

  MetaConfig ws = small_config(AlgorithmKind::EMRLD_WS);
  ws.adapt.alpha = 1e-3;
  const auto rws = meta_iteration(init_meta_state(EnvKind::Point2D, ws), EnvKind::Point2D, tasks, &demos, ws);
  CHECK(rws.metrics.warm_start_bc_after <= rws.metrics.warm_start_bc_before);

  MetaConfig hvp_ws = small_config(AlgorithmKind::EMRLD_WS);
  hvp_ws.meta_grad_mode = MetaGradMode::HvpSecondOrder;
  CHECK_THROWS(meta_iteration(init_meta_state(EnvKind::Point2D, hvp_ws), EnvKind::Point2D, tasks, &demos, hvp_ws));
  CHECK_THROWS_AS(meta_iteration(s0, EnvKind::Point2D, tasks, nullptr, small_config(AlgorithmKind::EMRLD)), DemoError);

  MetaConfig two = small_config(AlgorithmKind::EMRLD);
  two.workers = 2;
  const auto r1 = meta_iteration(s0, EnvKind::Point2D, tasks, &demos, small_config(AlgorithmKind::EMRLD));
  const auto r2 = meta_iteration(s0, EnvKind::Point2D, tasks, &demos, two);
  CHECK(flatten(r1.next.theta.net) == flatten(r2.next.theta.net));
}

TEST_CASE("sparse reward: one task, MAML never sees a reward") {
  const std::vector<Task> tasks{make_tasks(EnvKind::Point2D, TaskSplit::Train, 3, 0)[1]};
  const DemoSet demos = scripted_demos(tasks);
  MetaConfig e = small_config(AlgorithmKind::EMRLD);
  e.meta_batch = 1;
  e.adapt_batch = 20;
  MetaConfig m = e;
  m.algorithm = AlgorithmKind::MAML;
  MetaState se = init_meta_state(EnvKind::Point2D, e), sm = init_meta_state(EnvKind::Point2D, m);
  double best_e = 0.0, best_m = 0.0;
  for (int it = 0; it < 30; ++it) {
    const auto re = meta_iteration(se, EnvKind::Point2D, tasks, &demos, e);
    const auto rm = meta_iteration(sm, EnvKind::Point2D, tasks, nullptr, m);
    best_e = std::max(best_e, re.metrics.mean_adapted_return);
    best_m = std::max(best_m, rm.metrics.mean_adapted_return);
    se = re.next;
    sm = rm.next;
  }
  CHECK(best_e > 0.0);
  CHECK(best_m == 0.0);
  CHECK(flatten(sm.theta.net) == flatten(init_meta_state(EnvKind::Point2D, m).theta.net));
}

TEST_CASE("trained EMRLD improves with one adaptation step") {
  const auto tasks = make_tasks(EnvKind::Point2D, TaskSplit::Train, 4, 0);
  const DemoSet demos = scripted_demos(tasks);
  MetaConfig e = small_config(AlgorithmKind::EMRLD);
  e.meta_batch = 4;
  e.adapt_batch = 20;
  MetaState se = init_meta_state(EnvKind::Point2D, e);
  double tail = 0.0;
  for (int it = 0; it < 30; ++it) {
    const auto re = meta_iteration(se, EnvKind::Point2D, tasks, &demos, e);
    if (it >= 20) tail += re.metrics.mean_adapted_return / 10;
    se = re.next;
  }
  CHECK(tail > 5.0);

  const auto c0 = evaluate_meta_policy(se.theta, EnvKind::Point2D, tasks, &demos, e, 0, 5);
  CHECK(c0.mean.size() == 1);
  const auto c1 = evaluate_meta_policy(se.theta, EnvKind::Point2D, tasks, &demos, e, 1, 5);
  const auto c1b = evaluate_meta_policy(se.theta, EnvKind::Point2D, tasks, &demos, e, 1, 5);
  CHECK(c1.mean == c1b.mean);
  CHECK(c1.mean[0] == c0.mean[0]);
  CHECK(c1.mean[1] > c1.mean[0]);
  CHECK(c1.sample_episodes[1].size() == tasks.size());
  CHECK(c1.per_task[1].size() == tasks.size());
}
