#include <algorithm>
#include <array>
#include <random>
#include <sstream>

#include "doctest.h"
#include "mcbnav/episode.hpp"
#include "oracles.hpp"

using namespace mcbnav;
using namespace mcbnav::episode;
using namespace testing::oracles;

namespace {

constexpr std::array<EventKind, 4> kEvents{EventKind::kNone, EventKind::kSuccess,
                                           EventKind::kCollision, EventKind::kTimeout};

EventKind random_event(std::mt19937_64& rng) {
  return kEvents[std::uniform_int_distribution<int>(0, 3)(rng)];
}

}  // namespace

TEST_SUITE("episode") {

TEST_CASE("begin_episode clears counters") {
  const world::Scenario sc;
  const EpisodeState a = begin_episode(sc);
  CHECK(a.t == 0);
  CHECK(a.collisions == 0);
  CHECK_FALSE(a.prev_collision);
  CHECK(a == begin_episode(sc));
  auto [mid, dir] = on_step(a, EventKind::kCollision, 3, 200);
  CHECK(mid.collisions == 1);
  CHECK(begin_episode(sc) == a);
}

TEST_CASE("classify_event precedence") {
  world::SimOutcome o;
  o.collided = true;
  CHECK(classify_event(o, 5, 200) == EventKind::kCollision);
  CHECK(classify_event(o, 200, 200) == EventKind::kCollision);
  o.collided = false;
  o.goal_reached = true;
  CHECK(classify_event(o, 5, 200) == EventKind::kSuccess);
  o.goal_reached = false;
  CHECK(classify_event(o, 200, 200) == EventKind::kTimeout);
  CHECK(classify_event(o, 199, 200) == EventKind::kNone);
}

TEST_CASE("tabulated transitions") {
  const world::Scenario sc;
  EpisodeState s = begin_episode(sc);

  auto [s1, d1] = on_step(s, EventKind::kCollision, 2, 200);
  CHECK(d1.terminal);
  CHECK(s1.collisions == 1);
  CHECK_FALSE(d1.global_reset);

  auto [s2, d2] = on_step(s1, EventKind::kCollision, 2, 200);
  CHECK(d2.terminal);
  CHECK(s2.collisions == 2);
  CHECK(d2.global_reset);
  CHECK(d2.reason == ResetReason::kBudgetExhausted);

  for (int c = 0; c < 5; ++c) {
    EpisodeState q = s;
    q.collisions = c;
    auto [qs, qd] = on_step(q, EventKind::kSuccess, 5, 200);
    CHECK(qd.terminal);
    CHECK(qd.global_reset);
    CHECK(qd.reason == ResetReason::kSuccess);
  }

  auto [s3, d3] = on_step(s1, EventKind::kNone, 2, 200);
  CHECK(d3.bridge);
  CHECK_FALSE(d3.terminal);
  CHECK_FALSE(d3.global_reset);
  CHECK_FALSE(s3.prev_collision);
}

TEST_CASE("exhaustive truth table") {
  const world::Scenario sc;
  const int t_max = 6;
  int checked = 0;
  for (int k : {1, 2, 3, 5}) {
    for (int c = 0; c < k; ++c) {
      for (bool b : {false, true}) {
        for (EventKind e : kEvents) {
          for (int t = 0; t < t_max; ++t) {
            // b is only reachable after at least one collision.
            if (b && c == 0) continue;
            EpisodeState s = begin_episode(sc);
            s.t = t;
            s.collisions = c;
            s.prev_collision = b;
            const auto [next, dir] = on_step(s, e, k, t_max);
            const Expected x = episode_oracle(c, b, e, t + 1, k, t_max);
            CAPTURE(k);
            CAPTURE(c);
            CAPTURE(b);
            CAPTURE(t);
            CAPTURE(static_cast<int>(e));
            CHECK(dir.terminal == x.d);
            CHECK(dir.bridge == x.bridge);
            CHECK(next.collisions == x.c);
            CHECK(next.prev_collision == x.b);
            CHECK(next.t == t + 1);
            CHECK(dir.global_reset == x.reset);
            if (x.reset) CHECK(dir.reason == x.reason);
            CHECK(next.scenario == s.scenario);
            // Timeout is truncation, and a bridge is never a collision.
            if (e == EventKind::kTimeout) CHECK_FALSE(dir.terminal);
            if (dir.bridge) CHECK(e != EventKind::kCollision);
            ++checked;
          }
        }
      }
    }
  }
  // 2K - 1 reachable (c, b) pairs per budget.
  CHECK(checked == 4 * t_max * (1 + 3 + 5 + 9));
}

TEST_CASE("budget one matches single-collision reset on all short sequences") {
  const world::Scenario sc;
  const int t_max = 8;
  for (int len = 1; len <= 8; ++len) {
    int total = 1;
    for (int i = 0; i < len; ++i) total *= 4;
    for (int code = 0; code < total; ++code) {
      EpisodeState a = begin_episode(sc);
      EpisodeState b = a;
      int x = code;
      for (int i = 0; i < len; ++i) {
        const EventKind e = kEvents[x % 4];
        x /= 4;
        const auto [na, da] = on_step(a, e, 1, t_max);
        const auto [nb, db] = scr_step(b, e, t_max);
        REQUIRE(da == db);
        REQUIRE(na == nb);
        if (da.global_reset) {
          a = begin_episode(sc);
          b = a;
        } else {
          a = na;
          b = nb;
        }
      }
    }
  }
}

TEST_CASE("budget one matches single-collision reset on random sequences") {
  const world::Scenario sc;
  std::mt19937_64 rng(10000);
  for (int n = 0; n < 10000; ++n) {
    EpisodeState a = begin_episode(sc);
    EpisodeState b = a;
    const int len = std::uniform_int_distribution<int>(1, 60)(rng);
    for (int i = 0; i < len; ++i) {
      const EventKind e = random_event(rng);
      const auto [na, da] = on_step(a, e, 1, 50);
      const auto [nb, db] = scr_step(b, e, 50);
      REQUIRE(da == db);
      REQUIRE(na == nb);
      a = da.global_reset ? begin_episode(sc) : na;
      b = db.global_reset ? begin_episode(sc) : nb;
    }
  }
}

TEST_CASE("collision count never exceeds the budget") {
  const world::Scenario sc;
  std::mt19937_64 rng(3);
  std::discrete_distribution<int> pick{60, 2, 30, 0};
  for (int k : {1, 2, 3, 5, 10}) {
    EpisodeState s = begin_episode(sc);
    int collisions = 0;
    for (int i = 0; i < 20000; ++i) {
      EventKind e = kEvents[pick(rng)];
      if (e == EventKind::kNone && s.t + 1 == 40) e = EventKind::kTimeout;
      const auto [n, d] = on_step(s, e, k, 40);
      collisions += e == EventKind::kCollision ? 1 : 0;
      REQUIRE(collisions <= k);
      if (d.global_reset) {
        CHECK((collisions == k) == (d.reason == ResetReason::kBudgetExhausted));
        s = begin_episode(sc);
        collisions = 0;
      } else {
        s = n;
      }
    }
  }
}

TEST_CASE("collision at the horizon is a terminal collision with a reset") {
  const world::Scenario sc;
  EpisodeState s = begin_episode(sc);
  s.t = 199;
  const auto [n, d] = on_step(s, EventKind::kCollision, 5, 200);
  CHECK(d.terminal);
  CHECK(d.global_reset);
  CHECK(n.collisions == 1);
}

TEST_CASE("timeout right after a collision is a bridge") {
  const world::Scenario sc;
  EpisodeState s = begin_episode(sc);
  s.t = 199;
  s.collisions = 1;
  s.prev_collision = true;
  const auto [n, d] = on_step(s, EventKind::kTimeout, 5, 200);
  CHECK(d.bridge);
  CHECK_FALSE(d.terminal);
  CHECK(d.global_reset);
  CHECK(d.reason == ResetReason::kTimeout);
}

TEST_CASE("trace export") {
  TraceRecord r{3, 7, EventKind::kCollision, 2, {true, false, true, ResetReason::kBudgetExhausted}};
  const auto j = to_json(r);
  CHECK(j["event"] == "collision");
  CHECK(j["d"] == 1);
  CHECK(j["control"] == "global_reset:budget_exhausted");
  std::ostringstream os;
  write_trace_jsonl(os, {r, r});
  const std::string text = os.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
}

}
