#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "emrld/nn.hpp"
#include "emrld/rollout.hpp"

namespace testutil {

using emrld::Mat;
using emrld::Vec;

inline Vec central_diff(const std::function<double(const Vec&)>& f, const Vec& x, double h = 1e-5) {
  Vec g(x.size());
  Vec xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double xi = x(i);
    xp(i) = xi + h;
    const double fp = f(xp);
    xp(i) = xi - h;
    const double fm = f(xp);
    xp(i) = xi;
    g(i) = (fp - fm) / (2 * h);
  }
  return g;
}

/// ||a - b|| / max(||a||, ||b||, floor).
inline double rel_err(const Vec& a, const Vec& b, double floor = 1e-8) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), floor});
}

inline Vec random_vec(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> N(0.0, scale);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = N(rng);
  return v;
}

inline Mat random_mat(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  std::normal_distribution<double> N(0.0, scale);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = N(rng);
  return m;
}

/// Trajectory with random states/actions/rewards and consecutive times.
inline emrld::Trajectory random_trajectory(std::mt19937_64& rng, int len, int sdim, int adim) {
  emrld::Trajectory t;
  for (int k = 0; k < len; ++k) {
    t.states.push_back(random_vec(rng, sdim));
    t.actions.push_back(random_vec(rng, adim));
    t.rewards.push_back(std::uniform_real_distribution<double>(-1, 1)(rng));
    t.times.push_back(k);
  }
  t.final_state = random_vec(rng, sdim);
  return t;
}

}  // namespace testutil
