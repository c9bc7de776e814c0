#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "mcbnav/event.hpp"
#include "mcbnav/world.hpp"

namespace mcbnav::episode {

/// Per-episode counters. `t` counts completed steps (0 at episode start).
struct EpisodeState {
  int t = 0;
  int collisions = 0;
  bool prev_collision = false;
  const world::Scenario* scenario = nullptr;

  bool operator==(const EpisodeState&) const = default;
};

enum class ResetReason { kSuccess, kBudgetExhausted, kTimeout };

constexpr std::string_view to_string(ResetReason r) {
  switch (r) {
    case ResetReason::kSuccess: return "success";
    case ResetReason::kBudgetExhausted: return "budget_exhausted";
    case ResetReason::kTimeout: break;
  }
  return "timeout";
}

struct StepDirective {
  bool terminal = false;  // d
  bool bridge = false;    // non-collision step right after a local collision
  bool global_reset = false;
  ResetReason reason = ResetReason::kTimeout;  // meaningful only with global_reset

  bool operator==(const StepDirective&) const = default;
};

EpisodeState begin_episode(const world::Scenario& scenario);

/// Classifies the outcome of step `t` (1-based). Collision takes precedence
/// over timeout; the simulator never reports collision and goal together.
EventKind classify_event(const world::SimOutcome& outcome, int t, int t_max);

/// Multi-collision budget transition. The step being processed is state.t + 1.
/// Collisions below the budget terminate locally and keep the scene; reaching
/// `budget` collisions, success, or the horizon forces a global reset.
std::pair<EpisodeState, StepDirective> on_step(const EpisodeState& state, EventKind event,
                                               int budget, int t_max);

/// Conventional single-collision reset: any collision or success resets.
std::pair<EpisodeState, StepDirective> scr_step(const EpisodeState& state, EventKind event,
                                                int t_max);

/// Strict evaluation semantics: any collision ends the trial as a failure.
inline std::pair<EpisodeState, StepDirective> strict_step(const EpisodeState& state,
                                                          EventKind event, int t_max) {
  return scr_step(state, event, t_max);
}

struct TraceRecord {
  std::uint64_t episode = 0;
  int t = 0;
  EventKind event = EventKind::kNone;
  int collisions = 0;
  StepDirective directive;
};

nlohmann::json to_json(const TraceRecord& r);
void write_trace_jsonl(std::ostream& os, const std::vector<TraceRecord>& trace);

}  // namespace mcbnav::episode
