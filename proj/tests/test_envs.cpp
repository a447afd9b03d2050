#include <doctest.h>

#include <numbers>
#include <random>

#include "emrld/envs.hpp"

using namespace emrld;

namespace {

Vec act(double a, double b) { return Vec{{a, b}}; }

EnvState at(double x, double y, int t, double heading = 0.0) {
  EnvState s;
  s.x = x;
  s.y = y;
  s.t = t;
  s.heading = heading;
  return s;
}

}  // namespace

TEST_CASE("make_tasks") {
  const auto train = make_tasks(EnvKind::Point2D, TaskSplit::Train, 12, 0);
  REQUIRE(train.size() == 12);
  for (int k = 0; k < 12; ++k) {
    CHECK(std::hypot(train[k].goal_x, train[k].goal_y) == doctest::Approx(2.0));
    CHECK(std::atan2(train[k].goal_y, train[k].goal_x) == doctest::Approx(std::numbers::pi * k / 11).epsilon(1e-12));
  }
  CHECK(make_tasks(EnvKind::Point2D, TaskSplit::Test, 20, 5) == make_tasks(EnvKind::Point2D, TaskSplit::Test, 20, 5));
  CHECK(make_tasks(EnvKind::Point2D, TaskSplit::Test, 20, 5) != make_tasks(EnvKind::Point2D, TaskSplit::Test, 20, 6));
  for (const auto& t : make_tasks(EnvKind::TwoWheeled, TaskSplit::Test, 20, 5)) {
    CHECK(std::hypot(t.goal_x, t.goal_y) == doctest::Approx(2.0));
    CHECK(t.goal_y >= 0.0);
  }
  const auto drift = make_tasks(EnvKind::TwoWheeledDrift, TaskSplit::Train, 9, 0);
  for (int k = 0; k < 9; ++k) CHECK(drift[k].drift == doctest::Approx(-0.8 + 0.2 * k));
  CHECK_THROWS(make_tasks(EnvKind::Point2D, TaskSplit::Train, 0, 0));
}

TEST_CASE("env_reset") {
  CHECK(env_reset(EnvKind::Point2D) == EnvState{});
  const EnvState w = env_reset(EnvKind::TwoWheeled);
  CHECK(w.x == 0.0);
  CHECK(w.heading == 0.0);
  CHECK(w.t == 0);
}

TEST_CASE("Point2D reward table") {
  const Task goal{2.0, 0.0, 0.0};
  struct Row {
    EnvState s;
    Vec a;
    double x, y, reward;
    DoneReason done;
  };
  const std::vector<Row> rows{
      {at(0, 0, 0), act(0.3, 0.4), 0.06, 0.08, 0.0, DoneReason::Running},
      {at(1.85, 0, 3), act(0.05, 0), 1.9, 0.0, 0.9, DoneReason::Running},
      {at(1.9, 0, 10), act(0.085, 0), 1.985, 0.0, 89.0, DoneReason::Goal},
      {at(1.5, 0, 3), act(0.0, 0), 1.5, 0.0, 0.0, DoneReason::Running},
      {at(0, 0, 99), act(0.0, 0), 0.0, 0.0, 0.0, DoneReason::Timeout},
  };
  for (const auto& r : rows) {
    const StepResult res = env_step(EnvKind::Point2D, r.s, r.a, goal);
    CHECK(res.next_state.x == doctest::Approx(r.x).epsilon(1e-12));
    CHECK(res.next_state.y == doctest::Approx(r.y).epsilon(1e-12));
    CHECK(res.reward == doctest::Approx(r.reward).epsilon(1e-12));
    CHECK(res.done_reason == r.done);
    CHECK(res.done == (r.done != DoneReason::Running));
    CHECK(res.next_state.t == r.s.t + 1);
  }
}

TEST_CASE("TwoWheeled kinematics and rewards") {
  const Task goal{2.0, 0.0, 0.0};
  StepResult r = env_step(EnvKind::TwoWheeled, at(0, 0, 0), act(0.2, 0.0), goal);
  CHECK(r.next_state.x == doctest::Approx(0.1));
  CHECK(r.next_state.y == 0.0);
  CHECK(r.next_state.heading == 0.0);

  r = env_step(EnvKind::TwoWheeled, at(0, 0, 0, std::numbers::pi / 2), act(1.0, 10.0), goal);
  CHECK(r.next_state.y == doctest::Approx(0.11));  // v clamped to 0.22
  CHECK(r.next_state.heading == doctest::Approx(std::numbers::pi / 2 + 2.84 * 0.5));
  r = env_step(EnvKind::TwoWheeled, at(0, 0, 0), act(-1.0, 0.0), goal);
  CHECK(r.next_state.x == 0.0);

  r = env_step(EnvKind::TwoWheeled, at(1.8, 0.15, 10), act(0.0, 0.0), goal);
  CHECK(r.reward == doctest::Approx(89.0));
  CHECK(r.done_reason == DoneReason::Goal);
  r = env_step(EnvKind::TwoWheeled, at(1.7, 0.0, 10), act(0.0, 0.0), goal);
  CHECK(r.reward == doctest::Approx(0.7));
  CHECK_FALSE(r.done);
  r = env_step(EnvKind::TwoWheeled, at(1.4, 0.0, 10), act(0.0, 0.0), goal);
  CHECK(r.reward == 0.0);
  r = env_step(EnvKind::TwoWheeled, at(2.45, -2.45, 4, -std::numbers::pi / 4), act(0.22, 0.0), goal);
  CHECK(r.done_reason == DoneReason::OutOfBounds);
}

TEST_CASE("drift heading update adds the drift unscaled") {
  const Task t{kDriftGoalX, kDriftGoalY, 0.5};
  const StepResult r = env_step(EnvKind::TwoWheeledDrift, at(0, 0, 0), act(0.0, 0.0), t);
  CHECK(r.next_state.heading == doctest::Approx(0.5));
  const StepResult r2 = env_step(EnvKind::TwoWheeledDrift, at(0, 0, 0), act(0.0, 1.0), t);
  CHECK(r2.next_state.heading == doctest::Approx(1.0));
  const StepResult r3 = env_step(EnvKind::TwoWheeledDrift, at(0, 0, 0), act(1.0, 9.0), t);
  CHECK(r3.next_state.x == doctest::Approx(0.075));
  CHECK(r3.next_state.heading == doctest::Approx(0.5 + 0.75));
  const StepResult r4 = env_step(EnvKind::TwoWheeledDrift, at(1.95, 1.08, 20), act(0.0, 0.0), t);
  CHECK(r4.reward == doctest::Approx(79.0));
}

TEST_CASE("drift with zero drift behaves like TwoWheeled with tighter limits") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> v(0.0, 0.15), w(-1.5, 1.5), pos(-2.4, 2.4), head(-3, 3);
  const Task drift{0.0, 0.0, 0.0};
  const Task wheeled{2.0, 1.0, 0.0};
  for (int k = 0; k < 500; ++k) {
    const EnvState s = at(pos(rng), pos(rng), 5, head(rng));
    const Vec a = act(v(rng), w(rng));
    const StepResult rd = env_step(EnvKind::TwoWheeledDrift, s, a, drift);
    const StepResult rw = env_step(EnvKind::TwoWheeled, s, a, wheeled);
    CHECK(rd.next_state == rw.next_state);
    const double dx = std::abs(rd.next_state.x - 2.0), dy = std::abs(rd.next_state.y - 1.0);
    if ((dx > 0.2 || dy > 0.2) || (dx <= 0.1 && dy <= 0.1)) {
      CHECK(rd.reward == rw.reward);
    }
  }
}

TEST_CASE("invariants under random actions") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> N(0.0, 2.0);
  for (EnvKind kind : {EnvKind::Point2D, EnvKind::TwoWheeled, EnvKind::TwoWheeledDrift}) {
    const auto tasks = make_tasks(kind, TaskSplit::Test, 5, 1);
    const double radius = env_spec(kind).reward_radius;
    for (const Task& task : tasks) {
      EnvState s = env_reset(kind);
      int steps = 0;
      for (;;) {
        const Vec a = act(N(rng), N(rng));
        const StepResult r = env_step(kind, s, a, task);
        const StepResult again = env_step(kind, s, a, task);
        CHECK(again.next_state == r.next_state);
        CHECK(again.reward == r.reward);
        if (kind == EnvKind::Point2D) CHECK(std::hypot(r.next_state.x - s.x, r.next_state.y - s.y) <= 0.1 + 1e-12);
        const auto [gx, gy] = task_goal(kind, task);
        if (std::hypot(r.next_state.x - gx, r.next_state.y - gy) > radius) CHECK(r.reward == 0.0);
        ++steps;
        s = r.next_state;
        if (r.done) break;
      }
      CHECK(steps <= kHorizon);
    }
  }
}

TEST_CASE("observations and argument checks") {
  CHECK(observe(EnvKind::Point2D, at(1, 2, 0)).size() == 2);
  const Vec o = observe(EnvKind::TwoWheeled, at(1, 2, 0, 0.3));
  CHECK(o.size() == 4);
  CHECK(o(2) == doctest::Approx(std::cos(0.3)));
  CHECK_THROWS(env_step(EnvKind::Point2D, at(0, 0, 0), Vec::Zero(3), Task{}));
  CHECK_THROWS(env_step(EnvKind::Point2D, at(0, 0, 100), Vec::Zero(2), Task{}));
  CHECK_THROWS(parse_env_kind("cartpole"));
  CHECK(parse_env_kind(to_string(EnvKind::TwoWheeledDrift)) == EnvKind::TwoWheeledDrift);
}
