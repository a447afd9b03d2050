#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "emrld/nn.hpp"

namespace emrld {

enum class EnvKind { Point2D, TwoWheeled, TwoWheeledDrift };

std::string to_string(EnvKind kind);
EnvKind parse_env_kind(std::string_view name);

enum class TaskSplit { Train, Test };

inline constexpr int kHorizon = 100;
inline constexpr double kGoalRadius = 2.0;
inline constexpr double kPointMaxStep = 0.1;
inline constexpr double kWheelDt = 0.5;
inline constexpr double kArenaHalfSide = 2.5;
inline constexpr double kDriftGoalX = 2.0;
inline constexpr double kDriftGoalY = 1.0;
inline constexpr double kDriftMin = -0.8;
inline constexpr double kDriftMax = 0.8;

/// One MDP of the task family. Goal envs use `goal_*`; the drift env uses
/// `drift` and keeps the goal fixed at (2, 1).
struct Task {
  double goal_x = 0.0;
  double goal_y = 0.0;
  double drift = 0.0;

  bool operator==(const Task&) const = default;
};

struct EnvState {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  int t = 0;

  bool operator==(const EnvState&) const = default;
};

enum class DoneReason { Running, Goal, Timeout, OutOfBounds };
std::string to_string(DoneReason reason);

struct StepResult {
  EnvState next_state;
  double reward = 0.0;
  bool done = false;
  DoneReason done_reason = DoneReason::Running;
};

/// Per-kind constants.
struct EnvSpec {
  double reward_radius;   // 1 - dist band
  double bonus_radius;    // Point2D: euclidean radius; wheeled: half side of the bonus box
  bool bonus_is_box;
  double v_max;
  double omega_max;
  int obs_dim;
  int action_dim;
  int context_dim;        // task context appended to expert inputs
};

const EnvSpec& env_spec(EnvKind kind);

std::vector<Task> make_tasks(EnvKind kind, TaskSplit split, int n, std::uint64_t seed);

EnvState env_reset(EnvKind kind);

/// Throws std::invalid_argument on a non-finite action or wrong action dimension.
StepResult env_step(EnvKind kind, const EnvState& state, const Vec& action, const Task& task);

/// Policy input. Point2D: (x, y). Wheeled: (x, y, cos heading, sin heading).
Vec observe(EnvKind kind, const EnvState& state);

/// Task context appended to expert inputs: goal (x, y) or (drift).
Vec task_context(EnvKind kind, const Task& task);

/// Goal position the reward is measured against.
std::pair<double, double> task_goal(EnvKind kind, const Task& task);

/// Distance from an observation's (x, y) to the task goal.
double goal_distance(EnvKind kind, const Vec& obs, const Task& task);

/// Whether a position earns any reward (inside the 1 - dist band or the bonus region).
bool in_reward_region(EnvKind kind, double x, double y, const Task& task);

/// Goal termination test (the bonus region).
bool in_goal_region(EnvKind kind, double x, double y, const Task& task);

}  // namespace emrld
