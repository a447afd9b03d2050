#include "emrld/tabular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

#include "emrld/parallel.hpp"

namespace emrld {

namespace {

constexpr double kSumTol = 1e-12;

bool is_distribution(const Vec& p) {
  return p.allFinite() && (p.array() >= 0.0).all() && std::abs(p.sum() - 1.0) <= kSumTol * std::max<double>(1.0, static_cast<double>(p.size()));
}

Mat policy_transition(const TabularMdp& mdp, const TabularPolicy& policy) {
  Mat Ppi = Mat::Zero(mdp.n_states, mdp.n_states);
  for (int s = 0; s < mdp.n_states; ++s) {
    for (int a = 0; a < mdp.n_actions; ++a) Ppi.row(s) += policy.pi(s, a) * mdp.P[static_cast<std::size_t>(a)].row(s);
  }
  return Ppi;
}

Vec dirichlet(int n, std::mt19937_64& rng, double floor) {
  if (floor * n >= 1.0) throw std::invalid_argument("dirichlet floor too large for the support size");
  std::gamma_distribution<double> g(1.0, 1.0);
  Vec x(n);
  for (int i = 0; i < n; ++i) x(i) = g(rng);
  x /= x.sum();
  return (floor + (1.0 - floor * n) * x.array()).matrix();
}

}  // namespace

void TabularMdp::validate() const {
  if (n_states < 1 || n_actions < 1) throw std::invalid_argument("mdp needs at least one state and action");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
  if (static_cast<int>(P.size()) != n_actions) throw ShapeError("transition tensor has the wrong action count");
  if (R.rows() != n_states || R.cols() != n_actions) throw ShapeError("reward matrix has the wrong shape");
  if (rho.size() != n_states || !is_distribution(rho)) throw std::invalid_argument("rho is not a distribution");
  for (int a = 0; a < n_actions; ++a) {
    const Mat& Pa = P[static_cast<std::size_t>(a)];
    if (Pa.rows() != n_states || Pa.cols() != n_states) throw ShapeError("transition matrix has the wrong shape");
    for (int s = 0; s < n_states; ++s) {
      if (!is_distribution(Pa.row(s).transpose())) {
        throw std::invalid_argument("P(" + std::to_string(s) + "," + std::to_string(a) + ",.) is not a distribution");
      }
    }
  }
  if (!R.allFinite()) throw NumericalError("non-finite reward");
}

void TabularPolicy::validate(int n_states, int n_actions) const {
  if (pi.rows() != n_states || pi.cols() != n_actions) throw ShapeError("policy matrix has the wrong shape");
  for (int s = 0; s < n_states; ++s) {
    if (!is_distribution(pi.row(s).transpose())) throw std::invalid_argument("policy row is not a distribution");
  }
}

void TaskEnsemble::validate() const {
  if (tasks.empty()) throw std::invalid_argument("ensemble has no tasks");
  if (weights.size() != static_cast<Eigen::Index>(tasks.size()) || !is_distribution(weights)) {
    throw std::invalid_argument("task weights are not a distribution");
  }
  if (policies.size() != tasks.size()) throw std::invalid_argument("one policy triple per task required");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    tasks[i].validate();
    if (tasks[i].n_states != tasks[0].n_states || tasks[i].n_actions != tasks[0].n_actions) {
      throw ShapeError("tasks must share state and action spaces");
    }
    const int S = tasks[i].n_states, A = tasks[i].n_actions;
    policies[i].current.validate(S, A);
    policies[i].next.validate(S, A);
    policies[i].demo.validate(S, A);
  }
}

ValueSet exact_value_q_adv(const TabularMdp& mdp, const TabularPolicy& policy) {
  const int S = mdp.n_states;
  const Mat Ppi = policy_transition(mdp, policy);
  const Vec Rpi = mdp.R.cwiseProduct(policy.pi).rowwise().sum();
  const Mat M = Mat::Identity(S, S) - mdp.gamma * Ppi;
  ValueSet out;
  out.V = M.partialPivLu().solve(Rpi);
  if (!out.V.allFinite()) throw NumericalError("value system is singular");
  out.Q.resize(S, mdp.n_actions);
  for (int a = 0; a < mdp.n_actions; ++a) {
    out.Q.col(a) = mdp.R.col(a) + mdp.gamma * mdp.P[static_cast<std::size_t>(a)] * out.V;
  }
  out.A = out.Q.colwise() - out.V;
  return out;
}

Vec state_visitation(const TabularMdp& mdp, const TabularPolicy& policy) {
  const int S = mdp.n_states;
  const Mat M = Mat::Identity(S, S) - mdp.gamma * policy_transition(mdp, policy);
  // d^T M = (1 - gamma) rho^T  <=>  M^T d = (1 - gamma) rho
  Vec d = M.transpose().partialPivLu().solve((1.0 - mdp.gamma) * mdp.rho);
  if (!d.allFinite()) throw NumericalError("visitation system is singular");
  return d;
}

Mat visitation_distribution(const TabularMdp& mdp, const TabularPolicy& policy) {
  return policy.pi.array().colwise() * state_visitation(mdp, policy).array();
}

double policy_value(const TabularMdp& mdp, const TabularPolicy& policy) {
  return mdp.rho.dot(exact_value_q_adv(mdp, policy).V);
}

IdentityCheck perf_diff_identity_check(const TabularMdp& mdp, const TabularPolicy& pi1, const TabularPolicy& pi2) {
  IdentityCheck c;
  const ValueSet v2 = exact_value_q_adv(mdp, pi2);
  c.lhs = policy_value(mdp, pi1) - mdp.rho.dot(v2.V);
  c.rhs = visitation_distribution(mdp, pi1).cwiseProduct(v2.A).sum() / (1.0 - mdp.gamma);
  c.gap = std::abs(c.lhs - c.rhs);
  return c;
}

double weighted_tv(const Vec& d, const TabularPolicy& pi1, const TabularPolicy& pi2) {
  return 0.5 * d.dot((pi1.pi - pi2.pi).cwiseAbs().rowwise().sum());
}

double assumption_delta(const TaskEnsemble& ensemble) {
  double delta = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ensemble.tasks.size(); ++i) {
    const Mat A = exact_value_q_adv(ensemble.tasks[i], ensemble.policies[i].current).A;
    delta = std::min(delta, ensemble.policies[i].demo.pi.cwiseProduct(A).rowwise().sum().minCoeff());
  }
  return delta;
}

BoundCheck improvement_bound_check(const TaskEnsemble& ensemble) {
  ensemble.validate();
  const double gamma = ensemble.tasks.front().gamma;
  for (const auto& t : ensemble.tasks) {
    if (t.gamma != gamma) throw std::invalid_argument("tasks must share gamma");
  }
  BoundCheck out;
  BoundTerms& bt = out.terms;
  bt.c1 = 0.0;
  bt.delta = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ensemble.tasks.size(); ++i) {
    const TabularMdp& mdp = ensemble.tasks[i];
    const TaskPolicies& tp = ensemble.policies[i];
    const double p = ensemble.weights(static_cast<Eigen::Index>(i));
    const ValueSet vk = exact_value_q_adv(mdp, tp.current);
    const Vec dk = state_visitation(mdp, tp.current);
    const Vec dk1 = state_visitation(mdp, tp.next);

    for (int s = 0; s < mdp.n_states; ++s) {
      for (int a = 0; a < mdp.n_actions; ++a) {
        if (dk(s) > 0.0 && tp.current.pi(s, a) == 0.0 && tp.next.pi(s, a) > 0.0) {
          throw std::domain_error("importance ratio undefined at task " + std::to_string(i) + ", state " +
                                  std::to_string(s) + ", action " + std::to_string(a));
        }
      }
    }

    out.lhs += p * (mdp.rho.dot(exact_value_q_adv(mdp, tp.next).V) - mdp.rho.dot(vk.V));
    // d(s,a) * ratio collapses to d(s) * pi_next(s,a).
    bt.ratio_term += p * dk.dot(tp.next.pi.cwiseProduct(vk.A).rowwise().sum());
    bt.tv_step += p * weighted_tv(dk, tp.next, tp.current);
    bt.tv_demo += p * weighted_tv(dk1, tp.next, tp.demo);
    bt.c1 = std::max(bt.c1, vk.A.cwiseAbs().maxCoeff());
    bt.delta = std::min(bt.delta, tp.demo.pi.cwiseProduct(vk.A).rowwise().sum().minCoeff());
  }
  const double k = 1.0 / (1.0 - gamma);
  out.rhs = k * bt.ratio_term - 2.0 * bt.c1 * k * bt.tv_step + k * bt.delta - 2.0 * bt.c1 * k * bt.tv_demo;
  out.margin = out.lhs - out.rhs;
  out.holds = out.lhs >= out.rhs - kBoundTolerance;
  return out;
}

TabularMdp random_mdp(int n_states, int n_actions, double gamma, std::uint64_t seed, double floor) {
  std::mt19937_64 rng(seed);
  TabularMdp m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.gamma = gamma;
  m.P.assign(static_cast<std::size_t>(n_actions), Mat(n_states, n_states));
  for (int a = 0; a < n_actions; ++a) {
    for (int s = 0; s < n_states; ++s) m.P[static_cast<std::size_t>(a)].row(s) = dirichlet(n_states, rng, floor).transpose();
  }
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  m.R.resize(n_states, n_actions);
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) m.R(s, a) = u(rng);
  }
  m.rho = dirichlet(n_states, rng, floor);
  m.validate();
  return m;
}

TabularPolicy random_policy(int n_states, int n_actions, std::uint64_t seed, double floor) {
  std::mt19937_64 rng(seed);
  TabularPolicy p{Mat(n_states, n_actions)};
  for (int s = 0; s < n_states; ++s) p.pi.row(s) = dirichlet(n_actions, rng, floor).transpose();
  return p;
}

TaskEnsemble random_ensemble(std::uint64_t seed, int max_states, int max_actions, int max_tasks) {
  std::mt19937_64 rng(seed);
  const int S = std::uniform_int_distribution<int>(1, max_states)(rng);
  const int A = std::uniform_int_distribution<int>(2, std::max(2, max_actions))(rng);
  const int n = std::uniform_int_distribution<int>(1, max_tasks)(rng);
  const double gamma = std::uniform_real_distribution<double>(0.5, 0.99)(rng);
  TaskEnsemble e;
  e.weights = n == 1 ? Vec::Ones(1) : dirichlet(n, rng, 1e-3);
  for (int i = 0; i < n; ++i) {
    const auto base = mix_seed(seed, static_cast<std::uint64_t>(i) * 4);
    e.tasks.push_back(random_mdp(S, A, gamma, base));
    e.policies.push_back({random_policy(S, A, mix_seed(base, 1)), random_policy(S, A, mix_seed(base, 2)),
                          random_policy(S, A, mix_seed(base, 3))});
  }
  return e;
}

}  // namespace emrld
