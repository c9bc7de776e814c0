#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcbnav/observation.hpp"
#include "mcbnav/sac.hpp"
#include "mcbnav/world.hpp"

namespace mcbnav::experiment {

enum class Method { kScr, kMcb, kMcbPf };

std::string_view to_string(Method m);
Method parse_method(std::string_view s);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string name = "desk";
  Method method = Method::kMcb;
  int budget = 2;          // K; forced to 1 for SCR
  double tau_deg = 3.0;    // pose-filter threshold; used by MCB-PF only
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::int64_t total_steps = 15000;
  std::int64_t eval_every = 1000;
  int t_max = 200;
  std::string train_map = "desk_cluttered.map";
  std::string eval_map;    // empty: the training map
  std::uint64_t task_seed = 50;
  int eval_tasks = 50;
  bool eval_deterministic = true;
  std::size_t replay_capacity = 1000000;
  bool save_checkpoints = true;
  bool trace_episodes = true;
  world::SimConfig sim;
  world::ScenarioConfig scenario;
  obs::RewardParams reward;
  sac::SacConfig sac;
};

/// Desk-scale defaults: 15k steps, eval every 1k, 5 seeds.
ExperimentConfig desk_profile();
/// Long-running profile: 50k steps, eval every 2.5k, 10 seeds.
ExperimentConfig full_profile();

/// Canonical form: SCR becomes budget 1 without filter, MCB drops the filter.
/// Validates invariants; throws ConfigError.
ExperimentConfig resolve(ExperimentConfig cfg);

bool pose_filter_enabled(const ExperimentConfig& cfg);

/// "SCR", "MCB-K2", "MCB-K2-PF3".
std::string method_label(const ExperimentConfig& cfg);

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Unknown keys are rejected. Missing keys keep the values of `base`.
ExperimentConfig from_json(const nlohmann::json& j, ExperimentConfig base = desk_profile());
ExperimentConfig load_config(const std::string& path);

/// Hash of everything that influences a training run except the seed list
/// and naming, so SCR and MCB with K = 1 hash identically.
std::string config_hash(const ExperimentConfig& cfg);

/// Finds a map file: as given, relative to `base_dir`, then the bundled maps.
std::string locate_map(const std::string& path, const std::string& base_dir = "");

}  // namespace mcbnav::experiment
