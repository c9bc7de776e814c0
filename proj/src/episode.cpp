#include "mcbnav/episode.hpp"

#include <ostream>

namespace mcbnav::episode {

EpisodeState begin_episode(const world::Scenario& scenario) {
  EpisodeState s;
  s.scenario = &scenario;
  return s;
}

EventKind classify_event(const world::SimOutcome& outcome, int t, int t_max) {
  if (outcome.collided) return EventKind::kCollision;
  if (outcome.goal_reached) return EventKind::kSuccess;
  if (t >= t_max) return EventKind::kTimeout;
  return EventKind::kNone;
}

std::pair<EpisodeState, StepDirective> on_step(const EpisodeState& state, EventKind event,
                                               int budget, int t_max) {
  const bool collision = event == EventKind::kCollision;
  EpisodeState next = state;
  next.t = state.t + 1;
  next.collisions = state.collisions + (collision ? 1 : 0);
  next.prev_collision = collision;

  StepDirective d;
  d.terminal = event == EventKind::kSuccess || collision;
  d.bridge = state.prev_collision && !collision;
  if (event == EventKind::kSuccess) {
    d.global_reset = true;
    d.reason = ResetReason::kSuccess;
  } else if (next.collisions >= budget) {
    d.global_reset = true;
    d.reason = ResetReason::kBudgetExhausted;
  } else if (next.t >= t_max) {
    d.global_reset = true;
    d.reason = ResetReason::kTimeout;
  }
  return {next, d};
}

std::pair<EpisodeState, StepDirective> scr_step(const EpisodeState& state, EventKind event,
                                                int t_max) {
  EpisodeState next = state;
  next.t = state.t + 1;
  StepDirective d;
  switch (event) {
    case EventKind::kCollision:
      next.collisions = state.collisions + 1;
      next.prev_collision = true;
      d.terminal = true;
      d.global_reset = true;
      d.reason = ResetReason::kBudgetExhausted;
      return {next, d};
    case EventKind::kSuccess:
      next.prev_collision = false;
      d.terminal = true;
      d.global_reset = true;
      d.reason = ResetReason::kSuccess;
      return {next, d};
    default:
      next.prev_collision = false;
      // A collision always resets, so a bridge can only follow a state that
      // was handed in mid-collision.
      d.bridge = state.prev_collision;
      d.global_reset = next.t >= t_max;
      d.reason = ResetReason::kTimeout;
      return {next, d};
  }
}

nlohmann::json to_json(const TraceRecord& r) {
  nlohmann::json j = {{"episode", r.episode},
                      {"t", r.t},
                      {"event", std::string(to_string(r.event))},
                      {"c", r.collisions},
                      {"d", r.directive.terminal ? 1 : 0},
                      {"bridge", r.directive.bridge ? 1 : 0}};
  j["control"] = r.directive.global_reset
                     ? "global_reset:" + std::string(to_string(r.directive.reason))
                     : std::string("continue_in_scene");
  return j;
}

void write_trace_jsonl(std::ostream& os, const std::vector<TraceRecord>& trace) {
  for (const TraceRecord& r : trace) os << to_json(r).dump() << "\n";
}

}  // namespace mcbnav::episode
