#include <doctest.h>

#include "emrld/trpo.hpp"
#include "helpers.hpp"

using namespace emrld;

namespace {

Mat random_spd(std::mt19937_64& rng, int n) {
  const Mat M = testutil::random_mat(rng, n, n);
  return M * M.transpose() / n + Mat::Identity(n, n);
}

struct Batch {
  Mat states, actions;
  Vec adv;
};

Batch random_batch(std::mt19937_64& rng, int n) {
  return {testutil::random_mat(rng, 2, n), testutil::random_mat(rng, 2, n), testutil::random_vec(rng, n)};
}

}  // namespace

TEST_CASE("conjugate_gradient") {
  const auto I = [](const Vec& v) { return v; };
  const Vec b{{3.0, -1.0, 2.0}};
  const CgResult id = conjugate_gradient(I, b, 10, 1e-12);
  CHECK(id.iterations == 1);
  CHECK((id.x - b).norm() < 1e-15);

  const Mat A{{4.0, 1.0}, {1.0, 3.0}};
  const CgResult two = conjugate_gradient([&](const Vec& v) { return Vec(A * v); }, Vec{{1.0, 2.0}}, 10, 1e-12);
  CHECK(two.x(0) == doctest::Approx(1.0 / 11));
  CHECK(two.x(1) == doctest::Approx(7.0 / 11));

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat S = random_spd(rng, 20);
    const Vec rhs = testutil::random_vec(rng, 20);
    const auto op = [&](const Vec& v) { return Vec(S * v); };
    const CgResult r = conjugate_gradient(op, rhs, 20, 1e-12);
    CHECK((S * r.x - rhs).norm() < 1e-8);
    const Vec x_star = S.llt().solve(rhs);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 20; ++k) {
      const Vec e = conjugate_gradient(op, rhs, k, 0.0).x - x_star;
      const double a_norm = std::sqrt(e.dot(S * e));
      CHECK(a_norm <= prev * (1 + 1e-9) + 1e-12);
      prev = a_norm;
    }
  }
}

TEST_CASE("fisher_vector_product") {
  std::mt19937_64 rng(4);
  const std::vector<int> sizes{2, 8, 2};
  const GaussianPolicy pol = make_gaussian_policy(sizes, 0.7, 1);
  const Mat S = testutil::random_mat(rng, 2, 30);
  CHECK(fisher_vector_product(pol, S, Vec::Zero(pol.net.num_params()), 0.0).isZero(0.0));
  for (int k = 0; k < 100; ++k) {
    const Vec v = testutil::random_vec(rng, pol.net.num_params());
    CHECK(v.dot(fisher_vector_product(pol, S, v, 0.0)) >= 0.0);
  }

  // Single linear layer, one state: explicit J^T diag(1/sigma^2) J.
  const std::vector<int> lin{3, 2};
  const GaussianPolicy lp = make_gaussian_policy(lin, 0.5, 2);
  const Vec s{{0.3, -1.2, 2.0}};
  Mat J = Mat::Zero(2, 8);
  for (int i = 0; i < 2; ++i) {
    J.block(i, 3 * i, 1, 3) = s.transpose();
    J(i, 6 + i) = 1.0;
  }
  const Mat F = J.transpose() * (1.0 / (0.25)) * J + 1e-3 * Mat::Identity(8, 8);
  for (int k = 0; k < 5; ++k) {
    const Vec v = testutil::random_vec(rng, 8);
    CHECK((fisher_vector_product(lp, Mat(s), v, 1e-3) - F * v).norm() < 1e-10);
  }
}

TEST_CASE("mean_kl_states") {
  std::mt19937_64 rng(5);
  const std::vector<int> sizes{2, 8, 2};
  const GaussianPolicy pol = make_gaussian_policy(sizes, 1.0, 1);
  const Mat S = testutil::random_mat(rng, 2, 25);
  CHECK(mean_kl_states(pol, pol, S) == 0.0);

  MlpParams one;
  one.weights.push_back(Mat::Zero(2, 1));
  one.biases.push_back(Vec::Zero(2));
  GaussianPolicy a{one, Vec::Ones(2)};
  GaussianPolicy b = a;
  b.net.biases[0](1) = 1.0;
  CHECK(mean_kl_states(a, b, Mat::Ones(1, 1)) == doctest::Approx(0.5));

  // Quadratic model error shrinks like |d|^3.
  const Vec th = flatten(pol.net);
  const Vec dir = testutil::random_vec(rng, th.size()).normalized();
  auto taylor_err = [&](double eps) {
    const Vec d = eps * dir;
    const double kl = mean_kl_states(pol, with_flat_params(pol, th + d), S);
    return std::abs(kl - 0.5 * d.dot(fisher_vector_product(pol, S, d, 0.0)));
  };
  const double e1 = taylor_err(1e-2), e2 = taylor_err(5e-3);
  CHECK(e1 < 1e-5);
  CHECK(e2 < e1 / 5.0);
}

TEST_CASE("surrogate_loss") {
  std::mt19937_64 rng(6);
  const std::vector<int> sizes{2, 8, 2};
  const GaussianPolicy oldp = make_gaussian_policy(sizes, 0.8, 1);
  const GaussianPolicy newp = make_gaussian_policy(sizes, 0.8, 2);
  const Batch b = random_batch(rng, 40);
  CHECK(surrogate_loss(oldp, oldp, b.states, b.actions, b.adv) == doctest::Approx(-b.adv.mean()));
  CHECK(surrogate_loss(oldp, newp, b.states, b.actions, Vec::Zero(40)) == 0.0);
  double s = 0.0;
  for (int j = 0; j < 40; ++j) {
    const Vec st = b.states.col(j), ac = b.actions.col(j);
    s += std::exp(gaussian_log_prob(newp, st, ac) - gaussian_log_prob(oldp, st, ac)) * b.adv(j);
  }
  CHECK(std::abs(surrogate_loss(oldp, newp, b.states, b.actions, b.adv) + s / 40) < 1e-12);
}

TEST_CASE("trpo_step contracts") {
  std::mt19937_64 rng(7);
  const std::vector<int> sizes{2, 16, 2};
  int accepted = 0;
  for (int trial = 0; trial < 30; ++trial) {
    const GaussianPolicy pol = make_gaussian_policy(sizes, 0.5 + 0.05 * trial, 10 + trial);
    const Batch b = random_batch(rng, 60);
    TrpoConfig cfg;
    cfg.max_kl = 0.005 + 0.001 * trial;
    TrpoReport rep;
    const GaussianPolicy next = trpo_step(pol, b.states, b.actions, b.adv, cfg, &rep);
    const double kl = mean_kl_states(pol, next, b.states);
    CHECK(kl <= cfg.max_kl + 1e-12);
    if (rep.accepted) {
      ++accepted;
      CHECK(surrogate_loss(pol, next, b.states, b.actions, b.adv) < surrogate_loss(pol, pol, b.states, b.actions, b.adv));
    } else {
      CHECK(flatten(next.net) == flatten(pol.net));
    }
    CHECK(next.sigma == pol.sigma);
  }
  CHECK(accepted > 20);

  const GaussianPolicy pol = make_gaussian_policy(sizes, 1.0, 1);
  const Batch b = random_batch(rng, 50);
  CHECK(flatten(trpo_step(pol, b.states, b.actions, Vec::Zero(50), TrpoConfig{}).net) == flatten(pol.net));

  TrpoConfig tiny;
  double prev = std::numeric_limits<double>::infinity();
  for (double kl : {1e-2, 1e-4, 1e-6, 1e-8}) {
    tiny.max_kl = kl;
    const double moved = (flatten(trpo_step(pol, b.states, b.actions, b.adv, tiny).net) - flatten(pol.net)).norm();
    CHECK(moved <= prev);
    prev = moved;
  }
  CHECK(prev < 1e-3);
}
