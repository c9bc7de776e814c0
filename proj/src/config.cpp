#include "mcbnav/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "mcbnav/angles.hpp"

#ifndef MCBNAV_MAP_DIR
#define MCBNAV_MAP_DIR "maps"
#endif

namespace mcbnav::experiment {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads known keys from an object, rejecting anything else.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + " must be an object");
  }
  ~ObjectReader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + key + "' in " + where_);
    }
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string_view to_string(Method m) {
  switch (m) {
    case Method::kScr: return "SCR";
    case Method::kMcb: return "MCB";
    case Method::kMcbPf: break;
  }
  return "MCB-PF";
}

Method parse_method(std::string_view s) {
  if (s == "SCR" || s == "scr") return Method::kScr;
  if (s == "MCB" || s == "mcb") return Method::kMcb;
  if (s == "MCB-PF" || s == "mcb-pf" || s == "MCB_PF") return Method::kMcbPf;
  throw ConfigError("unknown method '" + std::string(s) + "' (expected SCR, MCB or MCB-PF)");
}

ExperimentConfig desk_profile() { return ExperimentConfig{}; }

ExperimentConfig full_profile() {
  ExperimentConfig cfg;
  cfg.name = "full";
  cfg.total_steps = 50000;
  cfg.eval_every = 2500;
  cfg.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  return cfg;
}

bool pose_filter_enabled(const ExperimentConfig& cfg) { return cfg.method == Method::kMcbPf; }

ExperimentConfig resolve(ExperimentConfig cfg) {
  if (cfg.method == Method::kScr) cfg.budget = 1;
  if (cfg.budget < 1) throw ConfigError("collision budget K must be at least 1");
  if (cfg.method == Method::kMcbPf && !(cfg.tau_deg > 0.0)) {
    throw ConfigError("MCB-PF requires a positive tau_deg");
  }
  if (cfg.method != Method::kMcbPf) cfg.tau_deg = 0.0;
  if (cfg.total_steps <= 0 || cfg.eval_every <= 0) {
    throw ConfigError("total_steps and eval_every must be positive");
  }
  if (cfg.total_steps % cfg.eval_every != 0) throw ConfigError("eval_every must divide total_steps");
  if (cfg.t_max < 1) throw ConfigError("t_max must be positive");
  if (cfg.eval_tasks < 1) throw ConfigError("eval_tasks must be positive");
  if (cfg.replay_capacity == 0) throw ConfigError("replay_capacity must be positive");
  if (cfg.seeds.empty()) throw ConfigError("at least one seed is required");
  if (!(cfg.sac.gamma > 0.0 && cfg.sac.gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (!(cfg.sac.rho > 0.0 && cfg.sac.rho < 1.0)) throw ConfigError("rho must lie in (0, 1)");
  if (cfg.sac.batch_size < 1) throw ConfigError("batch_size must be positive");
  if (cfg.sim.lidar.beams < 1) throw ConfigError("lidar beams must be positive");
  if (!(cfg.reward.success > 0.0 && cfg.reward.collision < 0.0)) {
    throw ConfigError("reward requires success > 0 > collision");
  }
  if (cfg.eval_map.empty()) cfg.eval_map = cfg.train_map;
  return cfg;
}

std::string method_label(const ExperimentConfig& cfg) {
  if (cfg.method == Method::kScr) return "SCR";
  std::string label = "MCB-K" + std::to_string(cfg.budget);
  if (cfg.method == Method::kMcbPf) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", cfg.tau_deg);
    label += "-PF" + std::string(buf);
  }
  return label;
}

json to_json(const ExperimentConfig& c) {
  const sac::SacConfig& s = c.sac;
  return {
      {"name", c.name},
      {"method", std::string(to_string(c.method))},
      {"budget", c.budget},
      {"tau_deg", c.tau_deg},
      {"seeds", c.seeds},
      {"total_steps", c.total_steps},
      {"eval_every", c.eval_every},
      {"t_max", c.t_max},
      {"train_map", c.train_map},
      {"eval_map", c.eval_map},
      {"task_seed", c.task_seed},
      {"eval_tasks", c.eval_tasks},
      {"eval_deterministic", c.eval_deterministic},
      {"replay_capacity", c.replay_capacity},
      {"save_checkpoints", c.save_checkpoints},
      {"trace_episodes", c.trace_episodes},
      {"sim",
       {{"dt", c.sim.dt},
        {"robot_radius", c.sim.robot_radius},
        {"goal_radius", c.sim.goal_radius},
        {"substeps", c.sim.substeps},
        {"contact_refinements", c.sim.contact_refinements},
        {"lidar_beams", c.sim.lidar.beams},
        {"lidar_fov_deg", rad_to_deg(c.sim.lidar.fov)},
        {"lidar_max_range", c.sim.lidar.max_range}}},
      {"scenario",
       {{"min_goal_distance", c.scenario.min_goal_distance},
        {"max_goal_distance", c.scenario.max_goal_distance},
        {"max_attempts", c.scenario.max_attempts}}},
      {"reward",
       {{"success", c.reward.success},
        {"collision", c.reward.collision},
        {"progress_scale", c.reward.progress_scale}}},
      {"sac",
       {{"hidden", s.hidden},
        {"gamma", s.gamma},
        {"actor_lr", s.actor_lr},
        {"critic_lr", s.critic_lr},
        {"alpha_lr", s.alpha_lr},
        {"offset_lr", s.offset_lr},
        {"rho", s.rho},
        {"batch_size", s.batch_size},
        {"warmup", s.warmup},
        {"auto_alpha", s.auto_alpha},
        {"init_alpha", s.init_alpha},
        {"target_entropy", s.target_entropy},
        {"log_std_min", s.log_std_min},
        {"log_std_max", s.log_std_max},
        {"final_layer_scale", s.final_layer_scale},
        {"offset_init", s.offset_init},
        {"offset_max", s.offset_max},
        {"transform_epsilon", s.transform.epsilon}}},
  };
}

ExperimentConfig from_json(const json& j, ExperimentConfig c) {
  ObjectReader r(j, "config");
  r.read("name", c.name);
  std::string method(to_string(c.method));
  r.read("method", method);
  c.method = parse_method(method);
  r.read("budget", c.budget);
  r.read("tau_deg", c.tau_deg);
  r.read("seeds", c.seeds);
  r.read("total_steps", c.total_steps);
  r.read("eval_every", c.eval_every);
  r.read("t_max", c.t_max);
  r.read("train_map", c.train_map);
  r.read("eval_map", c.eval_map);
  r.read("task_seed", c.task_seed);
  r.read("eval_tasks", c.eval_tasks);
  r.read("eval_deterministic", c.eval_deterministic);
  r.read("replay_capacity", c.replay_capacity);
  r.read("save_checkpoints", c.save_checkpoints);
  r.read("trace_episodes", c.trace_episodes);
  if (const json* sim = r.child("sim")) {
    ObjectReader rs(*sim, "sim");
    rs.read("dt", c.sim.dt);
    rs.read("robot_radius", c.sim.robot_radius);
    rs.read("goal_radius", c.sim.goal_radius);
    rs.read("substeps", c.sim.substeps);
    rs.read("contact_refinements", c.sim.contact_refinements);
    rs.read("lidar_beams", c.sim.lidar.beams);
    double fov_deg = rad_to_deg(c.sim.lidar.fov);
    rs.read("lidar_fov_deg", fov_deg);
    c.sim.lidar.fov = deg_to_rad(fov_deg);
    rs.read("lidar_max_range", c.sim.lidar.max_range);
  }
  if (const json* sc = r.child("scenario")) {
    ObjectReader rs(*sc, "scenario");
    rs.read("min_goal_distance", c.scenario.min_goal_distance);
    rs.read("max_goal_distance", c.scenario.max_goal_distance);
    rs.read("max_attempts", c.scenario.max_attempts);
  }
  if (const json* rw = r.child("reward")) {
    ObjectReader rr(*rw, "reward");
    rr.read("success", c.reward.success);
    rr.read("collision", c.reward.collision);
    rr.read("progress_scale", c.reward.progress_scale);
  }
  if (const json* sj = r.child("sac")) {
    ObjectReader rs(*sj, "sac");
    sac::SacConfig& s = c.sac;
    rs.read("hidden", s.hidden);
    rs.read("gamma", s.gamma);
    rs.read("actor_lr", s.actor_lr);
    rs.read("critic_lr", s.critic_lr);
    rs.read("alpha_lr", s.alpha_lr);
    rs.read("offset_lr", s.offset_lr);
    rs.read("rho", s.rho);
    rs.read("batch_size", s.batch_size);
    rs.read("warmup", s.warmup);
    rs.read("auto_alpha", s.auto_alpha);
    rs.read("init_alpha", s.init_alpha);
    rs.read("target_entropy", s.target_entropy);
    rs.read("log_std_min", s.log_std_min);
    rs.read("log_std_max", s.log_std_max);
    rs.read("final_layer_scale", s.final_layer_scale);
    rs.read("offset_init", s.offset_init);
    rs.read("offset_max", s.offset_max);
    rs.read("transform_epsilon", s.transform.epsilon);
  }
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  std::string profile = "desk";
  if (j.contains("profile")) {
    profile = j.at("profile").get<std::string>();
    j.erase("profile");
  }
  ExperimentConfig base;
  if (profile == "desk") {
    base = desk_profile();
  } else if (profile == "full") {
    base = full_profile();
  } else {
    throw ConfigError("unknown profile '" + profile + "' (expected desk or full)");
  }
  return from_json(j, base);
}

std::string config_hash(const ExperimentConfig& cfg) {
  const ExperimentConfig r = resolve(cfg);
  json j = to_json(r);
  j.erase("name");
  j.erase("seeds");
  j.erase("method");
  j.erase("save_checkpoints");
  j.erase("trace_episodes");
  j["pose_filter"] = pose_filter_enabled(r);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(j.dump())));
  return buf;
}

std::string locate_map(const std::string& path, const std::string& base_dir) {
  std::vector<fs::path> candidates{fs::path(path)};
  if (!base_dir.empty()) candidates.push_back(fs::path(base_dir) / path);
  candidates.push_back(fs::path(MCBNAV_MAP_DIR) / path);
  candidates.push_back(fs::path(MCBNAV_MAP_DIR) / fs::path(path).filename());
  for (const fs::path& p : candidates) {
    if (fs::is_regular_file(p)) return p.string();
  }
  throw ConfigError("map file '" + path + "' not found");
}

}  // namespace mcbnav::experiment
