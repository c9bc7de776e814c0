#pragma once

#include <optional>
#include <string_view>

namespace mcbnav {

enum class EventKind { kNone, kSuccess, kCollision, kTimeout };

constexpr std::string_view to_string(EventKind e) {
  switch (e) {
    case EventKind::kSuccess: return "success";
    case EventKind::kCollision: return "collision";
    case EventKind::kTimeout: return "timeout";
    case EventKind::kNone: break;
  }
  return "none";
}

std::optional<EventKind> parse_event_kind(std::string_view s);

}  // namespace mcbnav
