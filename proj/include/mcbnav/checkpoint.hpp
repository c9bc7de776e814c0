#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcbnav/sac.hpp"

namespace mcbnav::sac {

// Checkpoint layout (little-endian):
//   8 bytes   magic "MCBNAVCK"
//   u32       format version
//   i64       learner step
//   f64       lidar transform offset
//   f64       log temperature
//   u32       network count (actor, q1, q2, q1_target, q2_target)
//   per network: u32 layer count L, u32 x (L + 1) sizes, f64 parameters in
//                layer order (weight column-major, then bias)
//   u64       FNV-1a hash of all preceding bytes

inline constexpr std::uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<char> serialize_checkpoint(const SacParams& params);
/// Validates magic, version, and hash before building any state.
SacParams deserialize_checkpoint(const std::vector<char>& bytes);

void save_checkpoint(const SacParams& params, const std::string& path);
SacParams load_checkpoint(const std::string& path);

}  // namespace mcbnav::sac
