#include "emrld/envs.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace emrld {

std::string to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::Point2D: return "point2d";
    case EnvKind::TwoWheeled: return "two_wheeled";
    case EnvKind::TwoWheeledDrift: return "two_wheeled_drift";
  }
  return "unknown";
}

EnvKind parse_env_kind(std::string_view name) {
  if (name == "point2d") return EnvKind::Point2D;
  if (name == "two_wheeled") return EnvKind::TwoWheeled;
  if (name == "two_wheeled_drift") return EnvKind::TwoWheeledDrift;
  throw std::invalid_argument("unknown environment '" + std::string(name) +
                              "' (expected point2d, two_wheeled or two_wheeled_drift)");
}

std::string to_string(DoneReason reason) {
  switch (reason) {
    case DoneReason::Running: return "running";
    case DoneReason::Goal: return "goal";
    case DoneReason::Timeout: return "timeout";
    case DoneReason::OutOfBounds: return "out_of_bounds";
  }
  return "unknown";
}

const EnvSpec& env_spec(EnvKind kind) {
  static const EnvSpec point{0.2, 0.02, false, 0.0, 0.0, 2, 2, 2};
  static const EnvSpec wheeled{0.5, 0.2, true, 0.22, 2.84, 4, 2, 2};
  static const EnvSpec drift{0.5, 0.1, true, 0.15, 1.5, 4, 2, 1};
  switch (kind) {
    case EnvKind::Point2D: return point;
    case EnvKind::TwoWheeled: return wheeled;
    case EnvKind::TwoWheeledDrift: return drift;
  }
  throw std::invalid_argument("unsupported environment kind");
}

std::vector<Task> make_tasks(EnvKind kind, TaskSplit split, int n, std::uint64_t seed) {
  if (n <= 0) throw std::invalid_argument("make_tasks: n must be positive");
  std::vector<Task> tasks;
  tasks.reserve(static_cast<std::size_t>(n));
  const bool goal_env = kind != EnvKind::TwoWheeledDrift;
  if (split == TaskSplit::Train) {
    for (int k = 0; k < n; ++k) {
      const double frac = n == 1 ? 0.5 : static_cast<double>(k) / (n - 1);
      Task task;
      if (goal_env) {
        const double angle = std::numbers::pi * frac;
        task.goal_x = kGoalRadius * std::cos(angle);
        task.goal_y = kGoalRadius * std::sin(angle);
      } else {
        task.goal_x = kDriftGoalX;
        task.goal_y = kDriftGoalY;
        task.drift = kDriftMin + (kDriftMax - kDriftMin) * frac;
      }
      tasks.push_back(task);
    }
    return tasks;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < n; ++k) {
    Task task;
    if (goal_env) {
      const double angle = std::numbers::pi * unit(rng);
      task.goal_x = kGoalRadius * std::cos(angle);
      task.goal_y = kGoalRadius * std::sin(angle);
    } else {
      task.goal_x = kDriftGoalX;
      task.goal_y = kDriftGoalY;
      task.drift = kDriftMin + (kDriftMax - kDriftMin) * unit(rng);
    }
    tasks.push_back(task);
  }
  return tasks;
}

EnvState env_reset(EnvKind) { return EnvState{}; }

std::pair<double, double> task_goal(EnvKind kind, const Task& task) {
  if (kind == EnvKind::TwoWheeledDrift) return {kDriftGoalX, kDriftGoalY};
  return {task.goal_x, task.goal_y};
}

bool in_goal_region(EnvKind kind, double x, double y, const Task& task) {
  const auto& spec = env_spec(kind);
  const auto [gx, gy] = task_goal(kind, task);
  if (spec.bonus_is_box) {
    return std::abs(x - gx) <= spec.bonus_radius && std::abs(y - gy) <= spec.bonus_radius;
  }
  return std::hypot(x - gx, y - gy) <= spec.bonus_radius;
}

bool in_reward_region(EnvKind kind, double x, double y, const Task& task) {
  const auto [gx, gy] = task_goal(kind, task);
  return in_goal_region(kind, x, y, task) || std::hypot(x - gx, y - gy) <= env_spec(kind).reward_radius;
}

namespace {

double sparse_reward(EnvKind kind, double x, double y, int t, const Task& task, bool& reached) {
  const auto [gx, gy] = task_goal(kind, task);
  const double dist = std::hypot(x - gx, y - gy);
  reached = in_goal_region(kind, x, y, task);
  if (reached) return static_cast<double>(kHorizon - t - 1);
  if (dist <= env_spec(kind).reward_radius) return 1.0 - dist;
  return 0.0;
}

}  // namespace

StepResult env_step(EnvKind kind, const EnvState& state, const Vec& action, const Task& task) {
  if (action.size() != 2) throw std::invalid_argument("env_step: action must have dimension 2");
  if (!action.allFinite()) throw std::invalid_argument("env_step: non-finite action");
  if (state.t >= kHorizon) throw std::invalid_argument("env_step: episode already at horizon");

  StepResult res;
  EnvState next = state;
  next.t = state.t + 1;
  bool out_of_bounds = false;

  if (kind == EnvKind::Point2D) {
    double dx = action(0);
    double dy = action(1);
    const double norm = std::hypot(dx, dy);
    if (norm > kPointMaxStep) {
      dx *= kPointMaxStep / norm;
      dy *= kPointMaxStep / norm;
    }
    next.x = state.x + dx;
    next.y = state.y + dy;
  } else {
    const auto& spec = env_spec(kind);
    const double v = std::clamp(action(0), 0.0, spec.v_max);
    const double omega = std::clamp(action(1), -spec.omega_max, spec.omega_max);
    next.x = state.x + v * std::cos(state.heading) * kWheelDt;
    next.y = state.y + v * std::sin(state.heading) * kWheelDt;
    const double drift = kind == EnvKind::TwoWheeledDrift ? task.drift : 0.0;
    next.heading = state.heading + drift + omega * kWheelDt;
    out_of_bounds = std::abs(next.x) > kArenaHalfSide || std::abs(next.y) > kArenaHalfSide;
  }

  bool reached = false;
  res.reward = sparse_reward(kind, next.x, next.y, state.t, task, reached);
  res.next_state = next;
  if (reached) {
    res.done_reason = DoneReason::Goal;
  } else if (out_of_bounds) {
    res.done_reason = DoneReason::OutOfBounds;
  } else if (next.t >= kHorizon) {
    res.done_reason = DoneReason::Timeout;
  }
  res.done = res.done_reason != DoneReason::Running;
  return res;
}

Vec observe(EnvKind kind, const EnvState& state) {
  if (kind == EnvKind::Point2D) return Vec{{state.x, state.y}};
  return Vec{{state.x, state.y, std::cos(state.heading), std::sin(state.heading)}};
}

Vec task_context(EnvKind kind, const Task& task) {
  if (kind == EnvKind::TwoWheeledDrift) return Vec{{task.drift}};
  return Vec{{task.goal_x, task.goal_y}};
}

double goal_distance(EnvKind kind, const Vec& obs, const Task& task) {
  const auto [gx, gy] = task_goal(kind, task);
  return std::hypot(obs(0) - gx, obs(1) - gy);
}

}  // namespace emrld
