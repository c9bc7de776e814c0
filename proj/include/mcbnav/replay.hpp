#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "mcbnav/event.hpp"
#include "mcbnav/observation.hpp"
#include "mcbnav/world.hpp"

namespace mcbnav::replay {

struct TransitionMeta {
  EventKind event = EventKind::kNone;
  double heading = 0.0;  // robot heading at the start of the step
  std::uint64_t episode = 0;
  bool bridge = false;
};

struct Transition {
  obs::RawObservation state;
  world::Action action;
  double reward = 0.0;
  obs::RawObservation next_state;
  bool terminal = false;
  TransitionMeta meta;
};

/// Heading reference for the pose-change collision filter. Cleared at every
/// global reset.
struct PoseFilterState {
  bool enabled = false;
  double threshold = 0.0;  // radians
  std::optional<double> prev_collision_heading;

  void reset() { prev_collision_heading.reset(); }
};

enum class Admission { kStore, kOmitBridge, kOmitPoseFilter };

std::string_view to_string(Admission a);

/// Wrapped heading change in [0, pi].
double pose_delta(double heading, double prev_heading);

/// Replay admission rule. Bridge steps are never stored; with the filter on,
/// a collision whose heading moved less than the threshold since the previous
/// collision candidate is discarded. Every collision candidate, stored or not,
/// becomes the new reference heading.
Admission admit(const Transition& tr, bool bridge, PoseFilterState& pf);

/// Cumulative counters over every generated transition.
struct CollisionStats {
  std::uint64_t total_generated = 0;
  std::uint64_t collision_candidates = 0;
  std::uint64_t pf_filtered = 0;
  std::uint64_t bridge_omitted = 0;
  std::uint64_t stored_total = 0;
  std::uint64_t stored_collisions = 0;

  /// Both conservation identities hold.
  bool consistent() const;
  CollisionStats& operator+=(const CollisionStats& o);
  bool operator==(const CollisionStats&) const = default;
};

struct StatsReport {
  double candidate_ratio = 0.0;         // candidates / generated
  double candidate_ratio_stored = 0.0;  // candidates / stored_total
  double pf_filtered_ratio = 0.0;       // filtered / candidates
  double stored_collision_ratio = 0.0;  // stored collisions / stored_total
};

StatsReport stats_report(const CollisionStats& stats);

/// CSV with percentage columns named after the replay-statistics table.
std::string stats_csv_header();
std::string stats_csv_row(const std::string& label, const CollisionStats& stats);

/// FIFO ring buffer of transitions with uniform minibatch sampling.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  const CollisionStats& stats() const { return stats_; }

  /// Runs the admission rule, updates statistics, stores on kStore.
  Admission offer(const Transition& tr, bool bridge, PoseFilterState& pf);

  /// Appends a transition already admitted for storage, evicting the oldest at
  /// capacity.
  void push(const Transition& tr);

  /// Oldest-first element access.
  const Transition& at(std::size_t i) const;

  /// Indices of `batch_size` distinct stored transitions, uniformly sampled.
  /// Empty optional when the buffer holds fewer than batch_size entries.
  std::optional<std::vector<std::size_t>> sample_indices(std::size_t batch_size,
                                                         std::mt19937_64& rng) const;

  std::optional<std::vector<const Transition*>> sample_minibatch(std::size_t batch_size,
                                                                 std::mt19937_64& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next write slot once full
  std::vector<Transition> items_;
  CollisionStats stats_;
};

}  // namespace mcbnav::replay
