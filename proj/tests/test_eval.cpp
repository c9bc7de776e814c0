#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "mcbnav/angles.hpp"
#include "mcbnav/eval.hpp"
#include "mcbnav/map_io.hpp"

using namespace mcbnav;
using namespace mcbnav::eval;

namespace {

world::WorldMap empty_room() { return world::parse_map("bounds -4 -4 4 4\n", "room"); }

// Turn in place toward the goal, then drive.
world::Action pursuit(const obs::RawObservation& o) {
  const double w = std::clamp(2.0 * o.goal_bearing, -kPi / 2, kPi / 2);
  const double v = std::abs(o.goal_bearing) < 0.3 ? 0.5 : 0.0;
  return {v, w};
}

TaskRecord record(EventKind e, int steps, int t_max, double vsum = 0.0) {
  TaskRecord r;
  r.outcome = e;
  r.steps = steps;
  r.velocity_sum = vsum;
  r.score = nav_score(e == EventKind::kSuccess, steps, t_max);
  return r;
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("navigation score cases") {
  CHECK(nav_score(true, 50, 200) == 0.5);
  CHECK(nav_score(true, 100, 200) == 0.0);
  CHECK(nav_score(false, 50, 200) == -1.0);
  CHECK(nav_score(false, 200, 200) == -1.0);
  CHECK(nav_score(true, 1, 200) == doctest::Approx(0.99));
}

TEST_CASE("spinning in place never succeeds") {
  const world::WorldMap map = empty_room();
  const auto tasks = make_task_set(map, 3, 10, 0.17);
  EvalConfig cfg;
  const EvalResult r = run_eval([](const obs::RawObservation&) { return world::Action{0.0, 1.0}; }, map,
                                tasks, cfg);
  CHECK(r.sr == 0.0);
  CHECK(r.ans == -1.0);
  CHECK(r.ael == 200.0);
  CHECK(r.av == 0.0);
  for (const TaskRecord& t : r.tasks) {
    CHECK(t.outcome == EventKind::kTimeout);
    CHECK(t.trajectory.size() == 201);
  }
}

TEST_CASE("goal pursuit solves an empty room") {
  const world::WorldMap map = empty_room();
  const auto tasks = make_task_set(map, 4, 30, 0.17);
  const EvalResult r = run_eval(pursuit, map, tasks, EvalConfig{});
  CHECK(r.sr == 1.0);
  CHECK(r.ans > 0.0);
  for (const TaskRecord& t : r.tasks) {
    CHECK(t.collisions == 0);
    CHECK(t.score == nav_score(true, t.steps, 200));
  }
}

TEST_CASE("driving into a wall") {
  const world::WorldMap map = empty_room();
  world::Scenario task;
  task.start = {0, 0, 0};
  task.goal = {-3, 0};
  auto forward = [](const obs::RawObservation&) { return world::Action{0.5, 0.0}; };
  EvalConfig strict;
  const TaskRecord s = run_task(forward, map, task, strict);
  CHECK(s.outcome == EventKind::kCollision);
  CHECK(s.collisions == 1);
  CHECK(s.score == -1.0);
  CHECK(s.steps < 200);

  EvalConfig lenient;
  lenient.strict = false;
  lenient.budget = 3;
  const TaskRecord l = run_task(forward, map, task, lenient);
  CHECK(l.outcome == EventKind::kCollision);
  CHECK(l.collisions == 3);
  CHECK(l.steps == s.steps + 2);
}

TEST_CASE("aggregates match a per-task recount") {
  EvalResult r;
  for (int i = 0; i < 50; ++i) {
    r.tasks.push_back(i < 40 ? record(EventKind::kSuccess, 60, 200, 30.0)
                             : record(EventKind::kCollision, 20, 200, 4.0));
  }
  aggregate(r);
  CHECK(r.sr == 0.8);
  CHECK(r.ans == doctest::Approx((40 * 0.4 - 10.0) / 50.0));
  CHECK(r.ael == doctest::Approx((40 * 60 + 10 * 20) / 50.0));
  CHECK(r.av == doctest::Approx((40 * 30.0 + 10 * 4.0) / (40 * 60 + 10 * 20)));

  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> steps(1, 200), kind(0, 2);
  const EventKind kinds[3] = {EventKind::kSuccess, EventKind::kCollision, EventKind::kTimeout};
  for (int trial = 0; trial < 20; ++trial) {
    EvalResult q;
    int success = 0;
    double score = 0.0;
    for (int i = 0; i < 37; ++i) {
      const EventKind e = kinds[kind(rng)];
      q.tasks.push_back(record(e, steps(rng), 200));
      success += e == EventKind::kSuccess;
      score += e == EventKind::kSuccess ? 1.0 - 2.0 * q.tasks.back().steps / 200.0 : -1.0;
    }
    aggregate(q);
    CHECK(q.sr == doctest::Approx(success / 37.0));
    CHECK(q.ans == doctest::Approx(score / 37.0));
  }
  EvalResult none;
  aggregate(none);
  CHECK(none.sr == 0.0);
}

TEST_CASE("steps to threshold") {
  const LearningCurve curve{{1000, 0.3}, {2000, 0.5}, {3000, 0.4}, {4000, 0.8}};
  CHECK(steps_to_threshold(curve, 0.5) == 2000);
  CHECK(steps_to_threshold(curve, 0.3) == 1000);
  CHECK(steps_to_threshold(curve, 0.7) == 4000);
  CHECK_FALSE(steps_to_threshold(curve, 0.9).has_value());
  CHECK_FALSE(steps_to_threshold({}, 0.1).has_value());
}

TEST_CASE("mean, population deviation and median") {
  const MeanStd m = mean_std({1, 2, 3, 4});
  CHECK(m.mean == 2.5);
  CHECK(m.stddev == doctest::Approx(std::sqrt(1.25)));
  CHECK(mean_std({7}).stddev == 0.0);
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 3, 2}) == 2.5);
}

TEST_CASE("evaluation is deterministic") {
  const world::WorldMap map = world::generate_cluttered_map("c", 5);
  const auto a = make_task_set(map, 50, 20, 0.17);
  const auto b = make_task_set(map, 50, 20, 0.17);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].start == b[i].start);
    CHECK(a[i].goal == b[i].goal);
  }
  const EvalResult r1 = run_eval(pursuit, map, a, EvalConfig{});
  const EvalResult r2 = run_eval(pursuit, map, b, EvalConfig{});
  CHECK(r1.sr == r2.sr);
  CHECK(r1.ans == r2.ans);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(r1.tasks[i].trajectory == r2.tasks[i].trajectory);
  const auto j = task_to_json(r1.tasks[0], 0);
  CHECK(j["trajectory"].size() == r1.tasks[0].trajectory.size());
}

}
