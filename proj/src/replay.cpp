#include "mcbnav/replay.hpp"

#include <cstdio>
#include <stdexcept>
#include <unordered_set>

#include "mcbnav/angles.hpp"

namespace mcbnav::replay {

std::string_view to_string(Admission a) {
  switch (a) {
    case Admission::kStore: return "store";
    case Admission::kOmitBridge: return "omit_bridge";
    case Admission::kOmitPoseFilter: break;
  }
  return "omit_pose_filter";
}

double pose_delta(double heading, double prev_heading) {
  return angle_distance(heading, prev_heading);
}

Admission admit(const Transition& tr, bool bridge, PoseFilterState& pf) {
  if (bridge) return Admission::kOmitBridge;
  if (tr.meta.event != EventKind::kCollision) return Admission::kStore;
  const std::optional<double> prev = pf.prev_collision_heading;
  pf.prev_collision_heading = tr.meta.heading;
  if (pf.enabled && prev && pose_delta(tr.meta.heading, *prev) < pf.threshold) {
    return Admission::kOmitPoseFilter;
  }
  return Admission::kStore;
}

bool CollisionStats::consistent() const {
  return stored_collisions == collision_candidates - pf_filtered &&
         stored_total == total_generated - pf_filtered - bridge_omitted;
}

CollisionStats& CollisionStats::operator+=(const CollisionStats& o) {
  total_generated += o.total_generated;
  collision_candidates += o.collision_candidates;
  pf_filtered += o.pf_filtered;
  bridge_omitted += o.bridge_omitted;
  stored_total += o.stored_total;
  stored_collisions += o.stored_collisions;
  return *this;
}

StatsReport stats_report(const CollisionStats& s) {
  auto ratio = [](std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  return {ratio(s.collision_candidates, s.total_generated),
          ratio(s.collision_candidates, s.stored_total),
          ratio(s.pf_filtered, s.collision_candidates),
          ratio(s.stored_collisions, s.stored_total)};
}

std::string stats_csv_header() {
  return "label,total_generated,collision_candidates,candidate_ratio_pct,"
         "candidate_ratio_stored_pct,pf_filtered,pf_filtered_ratio_pct,bridge_omitted,"
         "stored_total,stored_collisions,stored_collision_ratio_pct";
}

std::string stats_csv_row(const std::string& label, const CollisionStats& s) {
  const StatsReport r = stats_report(s);
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s,%llu,%llu,%.4f,%.4f,%llu,%.4f,%llu,%llu,%llu,%.4f",
                label.c_str(), static_cast<unsigned long long>(s.total_generated),
                static_cast<unsigned long long>(s.collision_candidates),
                100.0 * r.candidate_ratio, 100.0 * r.candidate_ratio_stored,
                static_cast<unsigned long long>(s.pf_filtered), 100.0 * r.pf_filtered_ratio,
                static_cast<unsigned long long>(s.bridge_omitted),
                static_cast<unsigned long long>(s.stored_total),
                static_cast<unsigned long long>(s.stored_collisions),
                100.0 * r.stored_collision_ratio);
  return buf;
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw std::invalid_argument("replay capacity must be positive");
}

Admission ReplayBuffer::offer(const Transition& tr, bool bridge, PoseFilterState& pf) {
  const Admission decision = admit(tr, bridge, pf);
  ++stats_.total_generated;
  const bool collision = tr.meta.event == EventKind::kCollision;
  if (collision) ++stats_.collision_candidates;
  switch (decision) {
    case Admission::kOmitBridge: ++stats_.bridge_omitted; break;
    case Admission::kOmitPoseFilter: ++stats_.pf_filtered; break;
    case Admission::kStore: {
      Transition stored = tr;
      stored.meta.bridge = false;
      push(stored);
      break;
    }
  }
  return decision;
}

void ReplayBuffer::push(const Transition& tr) {
  if (items_.size() < capacity_) {
    items_.push_back(tr);
  } else {
    items_[head_] = tr;
    head_ = (head_ + 1) % capacity_;
  }
  ++stats_.stored_total;
  if (tr.meta.event == EventKind::kCollision) ++stats_.stored_collisions;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= items_.size()) throw std::out_of_range("replay index out of range");
  return items_[(head_ + i) % items_.size()];
}

std::optional<std::vector<std::size_t>> ReplayBuffer::sample_indices(
    std::size_t batch_size, std::mt19937_64& rng) const {
  const std::size_t n = items_.size();
  if (batch_size == 0 || n < batch_size) return std::nullopt;
  // Floyd's algorithm: batch_size distinct indices, uniform over subsets.
  std::vector<std::size_t> out;
  out.reserve(batch_size);
  std::unordered_set<std::size_t> chosen;
  chosen.reserve(batch_size * 2);
  for (std::size_t j = n - batch_size; j < n; ++j) {
    std::uniform_int_distribution<std::size_t> pick(0, j);
    std::size_t t = pick(rng);
    if (!chosen.insert(t).second) {
      t = j;
      chosen.insert(t);
    }
    out.push_back(t);
  }
  return out;
}

std::optional<std::vector<const Transition*>> ReplayBuffer::sample_minibatch(
    std::size_t batch_size, std::mt19937_64& rng) const {
  auto idx = sample_indices(batch_size, rng);
  if (!idx) return std::nullopt;
  std::vector<const Transition*> batch;
  batch.reserve(idx->size());
  for (std::size_t i : *idx) batch.push_back(&items_[i]);
  return batch;
}

}  // namespace mcbnav::replay
