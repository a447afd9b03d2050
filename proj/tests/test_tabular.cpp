#include <doctest.h>

#include <random>

#include "emrld/parallel.hpp"
#include "emrld/tabular.hpp"

using namespace emrld;

namespace {

// Two states; action a jumps to state a. Reward 1 in state 1.
TabularMdp chain(double gamma) {
  TabularMdp m;
  m.n_states = 2;
  m.n_actions = 2;
  m.P = {Mat{{1, 0}, {1, 0}}, Mat{{0, 1}, {0, 1}}};
  m.R = Mat{{0, 0}, {1, 1}};
  m.gamma = gamma;
  m.rho = Vec{{1, 0}};
  return m;
}

TabularPolicy constant_action(int n_states, int n_actions, int a) {
  TabularPolicy p{Mat::Zero(n_states, n_actions)};
  p.pi.col(a).setOnes();
  return p;
}

// Truncated series (1 - gamma) sum_t gamma^t Pr(s_t = s).
Vec series_visitation(const TabularMdp& m, const TabularPolicy& pi, int terms) {
  Mat Ppi = Mat::Zero(m.n_states, m.n_states);
  for (int a = 0; a < m.n_actions; ++a) Ppi += pi.pi.col(a).asDiagonal() * m.P[a];
  Vec p = m.rho, d = Vec::Zero(m.n_states);
  double w = 1.0 - m.gamma;
  for (int t = 0; t < terms; ++t) {
    d += w * p;
    p = Ppi.transpose() * p;
    w *= m.gamma;
  }
  return d;
}

int sample(const Eigen::Ref<const Vec>& probs, std::mt19937_64& rng) {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  for (Eigen::Index i = 0; i + 1 < probs.size(); ++i) {
    if ((u -= probs(i)) < 0.0) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

TaskEnsemble one_task(const TabularMdp& m, const TabularPolicy& cur, const TabularPolicy& next,
                      const TabularPolicy& demo) {
  TaskEnsemble e;
  e.tasks = {m};
  e.weights = Vec::Ones(1);
  e.policies = {TaskPolicies{cur, next, demo}};
  return e;
}

}  // namespace

TEST_CASE("exact values: trivial cases and hand-solved chain") {
  TabularMdp zero = random_mdp(4, 3, 0.9, 1);
  zero.R.setZero();
  const ValueSet z = exact_value_q_adv(zero, random_policy(4, 3, 2));
  CHECK(z.V.isZero(0.0));
  CHECK(z.Q.isZero(0.0));
  CHECK(z.A.isZero(0.0));

  TabularMdp single;
  single.n_states = 1;
  single.n_actions = 1;
  single.P = {Mat::Ones(1, 1)};
  single.R = Mat::Ones(1, 1);
  single.gamma = 0.5;
  single.rho = Vec::Ones(1);
  CHECK(exact_value_q_adv(single, TabularPolicy{Mat::Ones(1, 1)}).V(0) == doctest::Approx(2.0));

  const TabularMdp m = chain(0.5);
  const TabularPolicy go = constant_action(2, 2, 1), stay = constant_action(2, 2, 0);
  const ValueSet v = exact_value_q_adv(m, go);
  CHECK(v.V(0) == doctest::Approx(1.0));
  CHECK(v.V(1) == doctest::Approx(2.0));
  const IdentityCheck id = perf_diff_identity_check(m, go, stay);
  CHECK(id.lhs == doctest::Approx(1.0));
  CHECK(id.rhs == doctest::Approx(1.0));
  CHECK(id.gap < 1e-12);
  const Vec d = state_visitation(m, go);
  CHECK(d(0) == doctest::Approx(0.5));
  CHECK(d(1) == doctest::Approx(0.5));
}

TEST_CASE("exact value matches Monte Carlo with geometric termination") {
  const TabularMdp m = random_mdp(5, 3, 0.8, 11);
  const TabularPolicy pi = random_policy(5, 3, 12);
  const Vec V = exact_value_q_adv(m, pi).V;
  const int per_state = 200000;
  std::vector<double> mean(5), se(5);
  parallel_for(5, default_worker_count(), [&](std::size_t s0) {
    std::mt19937_64 rng(mix_seed(99, s0));
    std::uniform_real_distribution<double> U(0.0, 1.0);
    double sum = 0.0, sum2 = 0.0;
    for (int e = 0; e < per_state; ++e) {
      int s = static_cast<int>(s0);
      double g = 0.0;
      for (;;) {
        const int a = sample(pi.pi.row(s).transpose(), rng);
        g += m.R(s, a);
        if (U(rng) >= m.gamma) break;
        s = sample(m.P[a].row(s).transpose(), rng);
      }
      sum += g;
      sum2 += g * g;
    }
    mean[s0] = sum / per_state;
    se[s0] = std::sqrt((sum2 / per_state - mean[s0] * mean[s0]) / per_state);
  });
  for (int s = 0; s < 5; ++s) CHECK(std::abs(mean[s] - V(s)) < 3.0 * se[s]);
}

TEST_CASE("advantage and visitation properties") {
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const int S = 1 + static_cast<int>(seed % 6), A = 2 + static_cast<int>(seed % 3);
    const TabularMdp m = random_mdp(S, A, 0.5 + 0.009 * static_cast<double>(seed), seed);
    const TabularPolicy pi = random_policy(S, A, seed + 1000);
    const ValueSet v = exact_value_q_adv(m, pi);
    CHECK(pi.pi.cwiseProduct(v.A).rowwise().sum().cwiseAbs().maxCoeff() < 1e-10);

    const Vec ds = state_visitation(m, pi);
    const Mat dsa = visitation_distribution(m, pi);
    CHECK(std::abs(dsa.sum() - 1.0) < 1e-10);
    CHECK((dsa - ds.asDiagonal() * pi.pi).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((ds - series_visitation(m, pi, 2000)).cwiseAbs().maxCoeff() < 1e-8);
  }
  TabularMdp m = random_mdp(4, 3, 1e-9, 5);
  const TabularPolicy pi = random_policy(4, 3, 6);
  CHECK((visitation_distribution(m, pi) - m.rho.asDiagonal() * pi.pi).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("performance difference identity") {
  const TabularMdp m = random_mdp(6, 4, 0.9, 3);
  const TabularPolicy pi = random_policy(6, 4, 4);
  const IdentityCheck same = perf_diff_identity_check(m, pi, pi);
  CHECK(same.lhs == 0.0);
  CHECK(std::abs(same.rhs) < 1e-12);
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const TabularMdp r = random_mdp(6, 1 + static_cast<int>(seed % 4), 0.5 + 0.0024 * static_cast<double>(seed),
                                    mix_seed(seed, 1));
    const TabularPolicy p1 = random_policy(6, r.n_actions, mix_seed(seed, 2));
    const TabularPolicy p2 = random_policy(6, r.n_actions, mix_seed(seed, 3));
    worst = std::max(worst, perf_diff_identity_check(r, p1, p2).gap);
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("assumption_delta") {
  const TabularMdp m = random_mdp(5, 3, 0.9, 8);
  const TabularPolicy cur = random_policy(5, 3, 9);
  CHECK(std::abs(assumption_delta(one_task(m, cur, cur, cur))) < 1e-12);

  TabularPolicy greedy{Mat::Zero(5, 3)};
  const Mat A = exact_value_q_adv(m, cur).A;
  for (int s = 0; s < 5; ++s) {
    Eigen::Index best;
    A.row(s).maxCoeff(&best);
    greedy.pi(s, best) = 1.0;
  }
  CHECK(assumption_delta(one_task(m, cur, cur, greedy)) >= 0.0);

  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const TaskEnsemble e = random_ensemble(seed);
    double oracle = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < e.tasks.size(); ++i) {
      const Mat Ai = exact_value_q_adv(e.tasks[i], e.policies[i].current).A;
      for (int s = 0; s < e.tasks[i].n_states; ++s) {
        double v = 0.0;
        for (int a = 0; a < e.tasks[i].n_actions; ++a) v += e.policies[i].demo.pi(s, a) * Ai(s, a);
        oracle = std::min(oracle, v);
      }
    }
    CHECK(std::abs(assumption_delta(e) - oracle) < 1e-12);
  }
}

TEST_CASE("improvement bound") {
  const TabularMdp m = random_mdp(4, 3, 0.9, 21);
  const TabularPolicy p = random_policy(4, 3, 22);
  const BoundCheck eq = improvement_bound_check(one_task(m, p, p, p));
  CHECK(eq.lhs == 0.0);
  CHECK(std::abs(eq.rhs) < 1e-12);
  CHECK(eq.holds);

  int holds = 0;
  for (std::uint64_t i = 0; i < 500; ++i) {
    const BoundCheck b = improvement_bound_check(random_ensemble(mix_seed(2024, i)));
    holds += b.holds ? 1 : 0;
    CHECK(b.margin == doctest::Approx(b.lhs - b.rhs));
  }
  CHECK(holds == 500);

  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const TaskEnsemble e = random_ensemble(seed);
    TaskEnsemble scaled = e;
    for (auto& t : scaled.tasks) t.R *= 3.5;
    const BoundCheck a = improvement_bound_check(e), b = improvement_bound_check(scaled);
    CHECK(b.lhs == doctest::Approx(3.5 * a.lhs).epsilon(1e-9));
    CHECK(b.terms.ratio_term == doctest::Approx(3.5 * a.terms.ratio_term).epsilon(1e-9));
    CHECK(b.terms.c1 == doctest::Approx(3.5 * a.terms.c1).epsilon(1e-9));
    CHECK(b.terms.delta == doctest::Approx(3.5 * a.terms.delta).epsilon(1e-9));
    CHECK(a.holds == b.holds);
  }

  TabularPolicy hole = random_policy(4, 3, 23);
  hole.pi.row(0) << 0.0, 0.5, 0.5;
  TabularPolicy other = random_policy(4, 3, 24);
  CHECK_THROWS_AS(improvement_bound_check(one_task(m, hole, other, other)), std::domain_error);
}

TEST_CASE("validation") {
  TabularMdp m = random_mdp(3, 2, 0.9, 1);
  m.P[0](0, 0) += 0.5;
  CHECK_THROWS(m.validate());
  TabularPolicy p = random_policy(3, 2, 1);
  p.pi(1, 1) = -0.1;
  CHECK_THROWS(p.validate(3, 2));
  CHECK_NOTHROW(random_ensemble(7).validate());
}
