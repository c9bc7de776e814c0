#include "mcbnav/trainer.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>

#include "mcbnav/angles.hpp"
#include "mcbnav/checkpoint.hpp"
#include "mcbnav/episode.hpp"
#include "mcbnav/map_io.hpp"

#ifndef MCBNAV_VERSION
#define MCBNAV_VERSION "unknown"
#endif

namespace mcbnav::experiment {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Optional file sinks for one run. All writes are no-ops without a run dir.
class RunFiles {
 public:
  RunFiles(const std::string& dir, const std::string& hash) : hash_(hash) {
    if (dir.empty()) return;
    dir_ = dir;
    fs::create_directories(dir_);
    metrics_.open(dir_ / "metrics.csv", std::ios::trunc);
    stats_.open(dir_ / "replay_stats.csv", std::ios::trunc);
    log_.open(dir_ / "train_log.csv", std::ios::trunc);
    scenarios_.open(dir_ / "scenarios.jsonl", std::ios::trunc);
    if (!metrics_ || !stats_ || !log_ || !scenarios_) {
      throw std::runtime_error("cannot create run files in '" + dir + "'");
    }
    metrics_ << metrics_csv_header() << "\n";
    stats_ << "step," << replay::stats_csv_header() << ",config_hash\n";
    log_ << "step,episode,event,reward,updated,critic1,critic2,actor,alpha,offset,config_hash\n";
  }

  bool enabled() const { return !dir_.empty(); }
  const fs::path& dir() const { return dir_; }
  std::ofstream& metrics() { return metrics_; }
  std::ofstream& stats() { return stats_; }
  std::ofstream& log() { return log_; }
  std::ofstream& scenarios() { return scenarios_; }

  void open_trace() {
    if (enabled()) trace_.open(dir_ / "episodes.jsonl", std::ios::trunc);
  }
  std::ofstream& trace() { return trace_; }

  void flush_all() {
    for (std::ofstream* f : {&metrics_, &stats_, &log_, &scenarios_, &trace_}) {
      if (f->is_open()) f->flush();
    }
  }
  const std::string& hash() const { return hash_; }

 private:
  fs::path dir_;
  std::string hash_;
  std::ofstream metrics_;
  std::ofstream stats_;
  std::ofstream log_;
  std::ofstream scenarios_;
  std::ofstream trace_;
};

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

SeedStreams split_seed(std::uint64_t master) {
  return {splitmix64(master ^ 0x5ce9a210ULL), splitmix64(master ^ 0x9011c7ULL),
          splitmix64(master ^ 0x5a3b1e5ULL), splitmix64(master ^ 0x1a17ULL)};
}

eval::LearningCurve RunResult::curve() const {
  eval::LearningCurve c;
  for (const CheckpointRecord& r : checkpoints) c.push_back(r.point);
  return c;
}

std::string metrics_csv_header() { return "step,sr,av,ael,ans,seed,method,k,tau_deg,config_hash"; }

std::string metrics_csv_row(const eval::CurvePoint& p, std::uint64_t seed,
                            const std::string& method, int budget, double tau_deg,
                            const std::string& hash) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld,%.6f,%.6f,%.6f,%.6f,%llu,%s,%d,%g,%s",
                static_cast<long long>(p.step), p.sr, p.av, p.ael, p.ans,
                static_cast<unsigned long long>(seed), method.c_str(), budget, tau_deg,
                hash.c_str());
  return buf;
}

eval::Policy make_policy(const sac::SacParams& params, const sac::SacConfig& cfg) {
  auto shared = std::make_shared<const sac::SacParams>(params);
  return [shared, cfg](const obs::RawObservation& o) { return sac::mean_action(*shared, o, cfg); };
}

RunResult train_seed(const ExperimentConfig& raw_cfg, std::uint64_t seed, const TrainerOptions& opts) {
  const ExperimentConfig cfg = resolve(raw_cfg);
  const std::string hash = config_hash(cfg);
  const std::string label = method_label(cfg);
  const world::WorldMap train_map = world::load_map(locate_map(cfg.train_map));
  const world::WorldMap eval_map = world::load_map(locate_map(cfg.eval_map));
  const std::vector<world::Scenario> tasks = eval::make_task_set(
      eval_map, cfg.task_seed, cfg.eval_tasks, cfg.sim.robot_radius, cfg.scenario);

  const SeedStreams streams = split_seed(seed);
  std::mt19937_64 scenario_rng(streams.scenario);
  std::mt19937_64 sampler_rng(streams.sampler);
  std::mt19937_64 init_rng(streams.init);
  sac::SacAgent agent(sac::init_params(obs::state_dim(cfg.sim.lidar.beams), cfg.sac, init_rng),
                      cfg.sac, streams.policy);

  replay::ReplayBuffer buffer(cfg.replay_capacity);
  replay::PoseFilterState pf;
  pf.enabled = pose_filter_enabled(cfg);
  pf.threshold = deg_to_rad(cfg.tau_deg);

  RunFiles files(opts.run_dir, hash);
  if (files.enabled()) {
    json meta = {{"config", to_json(cfg)},   {"config_hash", hash}, {"seed", seed},
                 {"method_label", label},    {"version", MCBNAV_VERSION}};
    std::ofstream(files.dir() / "config.json") << meta.dump(2) << "\n";
    std::ofstream tasks_file(files.dir() / "eval_tasks.jsonl");
    world::write_scenarios_jsonl(tasks_file, tasks);
    if (cfg.save_checkpoints) fs::create_directories(files.dir() / "checkpoints");
    fs::remove(files.dir() / "status.json");
    if (cfg.trace_episodes) files.open_trace();
  }

  RunResult result;
  result.seed = seed;
  result.method = label;
  result.config_hash = hash;

  eval::EvalConfig eval_cfg;
  eval_cfg.sim = cfg.sim;
  eval_cfg.t_max = cfg.t_max;
  eval_cfg.strict = true;

  auto new_scenario = [&]() {
    world::Scenario s = world::sample_scenario(train_map, scenario_rng, cfg.sim.robot_radius, cfg.scenario);
    if (files.enabled()) {
      json j = world::scenario_to_json(s);
      j["episode"] = result.episodes;
      files.scenarios() << j.dump() << "\n";
    }
    return s;
  };

  auto scenario = std::make_unique<world::Scenario>(new_scenario());
  episode::EpisodeState ep = episode::begin_episode(*scenario);
  world::RobotPose pose = scenario->start;
  world::Action velocities;
  world::LidarScan scan = world::raycast_scan(train_map, pose, cfg.sim.lidar);
  const std::size_t min_fill =
      static_cast<std::size_t>(std::max(cfg.sac.warmup, cfg.sac.batch_size));

  for (std::int64_t step = 1; step <= cfg.total_steps; ++step) {
    const obs::RawObservation o = obs::observe(scan, pose, scenario->goal, velocities);
    const world::Action action = agent.act(o, false);
    const world::SimOutcome out = world::advance(train_map, pose, action, scenario->goal, cfg.sim);
    const EventKind event = episode::classify_event(out, ep.t + 1, cfg.t_max);
    const auto [next_ep, directive] = episode::on_step(ep, event, cfg.budget, cfg.t_max);
    const obs::RawObservation o2 = obs::observe(out.scan, out.next_pose, scenario->goal, action);

    replay::Transition tr;
    tr.state = o;
    tr.action = action;
    tr.reward = obs::compute_reward(event, o.goal_distance, o2.goal_distance, cfg.reward);
    tr.next_state = o2;
    tr.terminal = directive.terminal;
    tr.meta = {event, pose.theta, static_cast<std::uint64_t>(result.episodes), directive.bridge};
    buffer.offer(tr, directive.bridge, pf);

    sac::Losses losses;
    bool updated = false;
    if (buffer.size() >= min_fill) {
      auto batch = buffer.sample_minibatch(static_cast<std::size_t>(cfg.sac.batch_size), sampler_rng);
      try {
        losses = agent.update(sac::make_batch(*batch, cfg.sac.limits));
      } catch (const sac::NumericalError&) {
        if (files.enabled()) {
          sac::save_checkpoint(agent.params(), (files.dir() / "nan_dump.ckpt").string());
        }
        throw;
      }
      updated = true;
    }

    if (files.enabled()) {
      char buf[320];
      std::snprintf(buf, sizeof(buf), "%lld,%lld,%s,%.17g,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%s",
                    static_cast<long long>(step), static_cast<long long>(result.episodes),
                    std::string(to_string(event)).c_str(), tr.reward, updated ? 1 : 0,
                    losses.critic1, losses.critic2, losses.actor, agent.params().alpha(),
                    agent.params().offset, hash.c_str());
      files.log() << buf << "\n";
      if (files.trace().is_open()) {
        json j = episode::to_json({static_cast<std::uint64_t>(result.episodes), next_ep.t, event,
                                   next_ep.collisions, directive});
        j["step"] = step;
        j["config_hash"] = hash;
        files.trace() << j.dump() << "\n";
      }
    }

    if (directive.global_reset) {
      ++result.episodes;
      scenario = std::make_unique<world::Scenario>(new_scenario());
      ep = episode::begin_episode(*scenario);
      pf.reset();
      pose = scenario->start;
      velocities = {};
      scan = world::raycast_scan(train_map, pose, cfg.sim.lidar);
    } else {
      ep = next_ep;
      pose = out.next_pose;
      velocities = action;
      scan = out.scan;
    }

    if (step % cfg.eval_every == 0) {
      const sac::SacParams& params = agent.params();
      eval::EvalResult er;
      if (cfg.eval_deterministic) {
        er = eval::run_eval(make_policy(params, cfg.sac), eval_map, tasks, eval_cfg);
      } else {
        // Sampled evaluation draws from a copy so training noise is unaffected.
        auto sampler = std::make_shared<sac::SacAgent>(params, cfg.sac, streams.policy ^ static_cast<std::uint64_t>(step));
        er = eval::run_eval([sampler](const obs::RawObservation& obs) { return sampler->act(obs, false); },
                            eval_map, tasks, eval_cfg);
      }
      CheckpointRecord rec{{step, er.sr, er.av, er.ael, er.ans}, buffer.stats()};
      result.checkpoints.push_back(rec);
      if (step == cfg.total_steps) result.final_tasks = er.tasks;
      if (files.enabled()) {
        files.metrics() << metrics_csv_row(rec.point, seed, label, cfg.budget, cfg.tau_deg, hash) << "\n";
        files.stats() << step << "," << replay::stats_csv_row(label, rec.stats) << "," << hash << "\n";
        if (cfg.save_checkpoints) {
          char name[64];
          std::snprintf(name, sizeof(name), "step_%07lld.ckpt", static_cast<long long>(step));
          sac::save_checkpoint(params, (files.dir() / "checkpoints" / name).string());
        }
        files.flush_all();
      }
      if (opts.on_checkpoint) opts.on_checkpoint(rec);
    }
  }
  result.stats = buffer.stats();

  if (files.enabled()) {
    std::ofstream traj(files.dir() / "trajectories.jsonl", std::ios::trunc);
    for (std::size_t i = 0; i < result.final_tasks.size(); ++i) {
      json j = eval::task_to_json(result.final_tasks[i], i);
      j["goal"] = {tasks[i].goal.x(), tasks[i].goal.y()};
      j["map"] = tasks[i].map_ref;
      j["config_hash"] = hash;
      traj << j.dump() << "\n";
    }
    files.flush_all();
    json status = {{"complete", true},
                   {"config_hash", hash},
                   {"seed", seed},
                   {"method_label", label},
                   {"episodes", result.episodes}};
    std::ofstream(files.dir() / "status.json") << status.dump(2) << "\n";
  }
  return result;
}

bool run_complete(const std::string& run_dir, const std::string& hash) {
  const fs::path status = fs::path(run_dir) / "status.json";
  if (!fs::is_regular_file(status)) return false;
  try {
    std::ifstream f(status);
    const json j = json::parse(f);
    return j.value("complete", false) && j.value("config_hash", std::string()) == hash;
  } catch (const json::exception&) {
    return false;
  }
}

RunResult read_run(const std::string& run_dir) {
  const fs::path dir(run_dir);
  RunResult r;
  {
    std::ifstream f(dir / "config.json");
    if (!f) throw std::runtime_error("run '" + run_dir + "' has no config.json");
    const json meta = json::parse(f);
    r.seed = meta.at("seed").get<std::uint64_t>();
    r.method = meta.at("method_label").get<std::string>();
    r.config_hash = meta.at("config_hash").get<std::string>();
  }
  std::ifstream metrics(dir / "metrics.csv");
  std::ifstream stats(dir / "replay_stats.csv");
  if (!metrics || !stats) throw std::runtime_error("run '" + run_dir + "' is missing metrics");
  std::string line;
  std::getline(metrics, line);
  std::getline(stats, line);
  std::string mline;
  while (std::getline(metrics, mline)) {
    if (mline.empty()) continue;
    const auto m = split_csv(mline);
    CheckpointRecord rec;
    rec.point = {std::stoll(m.at(0)), std::stod(m.at(1)), std::stod(m.at(2)), std::stod(m.at(3)),
                 std::stod(m.at(4))};
    if (std::getline(stats, line)) {
      const auto s = split_csv(line);
      rec.stats.total_generated = std::stoull(s.at(2));
      rec.stats.collision_candidates = std::stoull(s.at(3));
      rec.stats.pf_filtered = std::stoull(s.at(6));
      rec.stats.bridge_omitted = std::stoull(s.at(8));
      rec.stats.stored_total = std::stoull(s.at(9));
      rec.stats.stored_collisions = std::stoull(s.at(10));
    }
    r.checkpoints.push_back(rec);
  }
  if (!r.checkpoints.empty()) r.stats = r.checkpoints.back().stats;
  if (std::ifstream status{dir / "status.json"}) {
    const json j = json::parse(status);
    r.episodes = j.value("episodes", std::int64_t{0});
  }
  return r;
}

}  // namespace mcbnav::experiment
