#include "mcbnav/experiment.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "mcbnav/checkpoint.hpp"
#include "mcbnav/map_io.hpp"

namespace mcbnav::experiment {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Job {
  ExperimentConfig cfg;
  std::uint64_t seed;
  std::string dir;
};

void run_job(const Job& job, bool quiet) {
  TrainerOptions topts;
  topts.run_dir = job.dir;
  const std::string label = method_label(job.cfg);
  if (!quiet) {
    topts.on_checkpoint = [&](const CheckpointRecord& r) {
      std::fprintf(stderr, "[%s seed %llu] step %lld sr %.3f ans %.3f\n", label.c_str(),
                   static_cast<unsigned long long>(job.seed), static_cast<long long>(r.point.step),
                   r.point.sr, r.point.ans);
    };
  }
  train_seed(job.cfg, job.seed, topts);
}

// Runs jobs in up to `workers` child processes. With one worker everything
// stays in-process so exceptions keep their type.
void run_jobs(const std::vector<Job>& jobs, int workers, bool quiet) {
  if (workers <= 1 || jobs.size() <= 1) {
    for (const Job& j : jobs) run_job(j, quiet);
    return;
  }
  std::fflush(nullptr);
  std::size_t next = 0;
  int running = 0;
  std::vector<std::string> failed;
  std::map<pid_t, std::size_t> live;
  while (next < jobs.size() || running > 0) {
    while (running < workers && next < jobs.size()) {
      const pid_t pid = fork();
      if (pid < 0) throw std::runtime_error("fork failed");
      if (pid == 0) {
        int code = 0;
        try {
          run_job(jobs[next], quiet);
        } catch (const std::exception& e) {
          std::fprintf(stderr, "worker for %s failed: %s\n", jobs[next].dir.c_str(), e.what());
          code = 3;
        }
        std::fflush(nullptr);
        _exit(code);
      }
      live[pid] = next++;
      ++running;
    }
    int status = 0;
    const pid_t done = waitpid(-1, &status, 0);
    if (done < 0) throw std::runtime_error("waitpid failed");
    auto it = live.find(done);
    if (it == live.end()) continue;
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) failed.push_back(jobs[it->second].dir);
    live.erase(it);
    --running;
  }
  if (!failed.empty()) {
    std::string msg = "training failed for:";
    for (const std::string& d : failed) msg += " " + d;
    throw std::runtime_error(msg);
  }
}

std::string read_file(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string tau_text(std::optional<double> tau) {
  if (!tau) return "none";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", *tau);
  return buf;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write '" + p.string() + "'");
  f << text;
}

}  // namespace

std::string run_root() {
  const char* env = std::getenv("MCBNAV_RUN_ROOT");
  return env && *env ? std::string(env) : std::string("runs");
}

std::string run_dir_for(const std::string& root, const ExperimentConfig& cfg, std::uint64_t seed) {
  return (fs::path(root) / cfg.name / method_label(cfg) / ("seed_" + std::to_string(seed))).string();
}

std::vector<std::string> train_all(const ExperimentConfig& raw, const TrainOptions& opts) {
  const ExperimentConfig cfg = resolve(raw);
  const std::string root = opts.root.empty() ? run_root() : opts.root;
  const std::string hash = config_hash(cfg);
  std::vector<std::string> dirs;
  std::vector<Job> jobs;
  for (std::uint64_t seed : cfg.seeds) {
    const std::string dir = run_dir_for(root, cfg, seed);
    dirs.push_back(dir);
    if (opts.reuse && run_complete(dir, hash)) continue;
    jobs.push_back({cfg, seed, dir});
  }
  run_jobs(jobs, opts.jobs, opts.quiet);
  return dirs;
}

eval::EvalResult evaluate_checkpoint(const std::string& checkpoint, const ExperimentConfig& raw,
                                     const world::WorldMap& map,
                                     const std::vector<world::Scenario>& tasks) {
  const ExperimentConfig cfg = resolve(raw);
  const sac::SacParams params = sac::load_checkpoint(checkpoint);
  eval::EvalConfig ec;
  ec.sim = cfg.sim;
  ec.t_max = cfg.t_max;
  ec.strict = true;
  return eval::run_eval(make_policy(params, cfg.sac), map, tasks, ec);
}

double AblationCell::mean_final_sr() const { return eval::mean_std(final_sr).mean; }

std::vector<SrRange> sr_ranges(const std::vector<AblationCell>& cells) {
  std::vector<SrRange> out;
  std::vector<std::optional<double>> order;
  for (const AblationCell& c : cells) {
    if (std::find(order.begin(), order.end(), c.tau_deg) == order.end()) order.push_back(c.tau_deg);
  }
  for (const auto& tau : order) {
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const AblationCell& c : cells) {
      if (c.tau_deg != tau) continue;
      const double m = c.mean_final_sr();
      lo = first ? m : std::min(lo, m);
      hi = first ? m : std::max(hi, m);
      first = false;
    }
    out.push_back({tau, hi - lo});
  }
  return out;
}

ExperimentConfig cell_config(const ExperimentConfig& base, int budget, std::optional<double> tau_deg) {
  ExperimentConfig c = base;
  c.budget = budget;
  if (tau_deg) {
    c.method = Method::kMcbPf;
    c.tau_deg = *tau_deg;
  } else {
    c.method = Method::kMcb;
  }
  return resolve(c);
}

std::vector<AblationCell> run_ablation(const ExperimentConfig& base, const AblationGrid& grid,
                                       const TrainOptions& opts) {
  const std::string root = opts.root.empty() ? run_root() : opts.root;
  std::vector<Job> jobs;
  std::vector<std::pair<AblationCell, std::vector<std::string>>> layout;
  for (const auto& tau : grid.taus) {
    for (int k : grid.budgets) {
      const ExperimentConfig cfg = cell_config(base, k, tau);
      const std::string hash = config_hash(cfg);
      AblationCell cell;
      cell.budget = k;
      cell.tau_deg = tau;
      std::vector<std::string> dirs;
      for (std::uint64_t seed : cfg.seeds) {
        const std::string dir = run_dir_for(root, cfg, seed);
        dirs.push_back(dir);
        if (!(opts.reuse && run_complete(dir, hash))) jobs.push_back({cfg, seed, dir});
      }
      layout.emplace_back(cell, dirs);
    }
  }
  run_jobs(jobs, opts.jobs, opts.quiet);

  std::vector<AblationCell> cells;
  for (auto& [cell, dirs] : layout) {
    for (const std::string& d : dirs) {
      const RunResult r = read_run(d);
      cell.final_sr.push_back(r.checkpoints.empty() ? 0.0 : r.checkpoints.back().point.sr);
      cell.pooled += r.stats;
    }
    cells.push_back(cell);
  }

  const fs::path out = fs::path(root) / base.name / "ablation";
  fs::create_directories(out);
  std::ostringstream cells_csv, range_csv, stats_csv;
  cells_csv << "k,tau_deg,seeds,mean_final_sr,std_final_sr\n";
  for (const AblationCell& c : cells) {
    const eval::MeanStd ms = eval::mean_std(c.final_sr);
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d,%s,%zu,%.6f,%.6f\n", c.budget, tau_text(c.tau_deg).c_str(),
                  c.final_sr.size(), ms.mean, ms.stddev);
    cells_csv << buf;
  }
  range_csv << "tau_deg,sr_range\n";
  for (const SrRange& r : sr_ranges(cells)) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s,%.6f\n", tau_text(r.tau_deg).c_str(), r.range);
    range_csv << buf;
  }
  stats_csv << "k,tau_deg," << replay::stats_csv_header() << "\n";
  for (const AblationCell& c : cells) {
    const ExperimentConfig cfg = cell_config(base, c.budget, c.tau_deg);
    stats_csv << c.budget << "," << tau_text(c.tau_deg) << ","
              << replay::stats_csv_row(method_label(cfg), c.pooled) << "\n";
  }
  write_text(out / "ablation_cells.csv", cells_csv.str());
  write_text(out / "sr_range.csv", range_csv.str());
  write_text(out / "replay_stats.csv", stats_csv.str());
  return cells;
}

ExportReport export_bundle(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  struct Found {
    fs::path dir;
    RunResult run;
    json config;
  };
  // Keyed by (method label, seed) so argument order does not change the bundle.
  std::map<std::pair<std::string, std::uint64_t>, Found> runs;
  // Seeds each method's config asked for.
  std::map<std::string, std::set<std::uint64_t>> expected;
  std::set<std::string> gaps;

  for (const std::string& d : run_dirs) {
    const fs::path dir(d);
    if (!fs::is_regular_file(dir / "config.json")) {
      gaps.insert("missing run: " + d);
      continue;
    }
    json meta;
    try {
      meta = json::parse(read_file(dir / "config.json"));
    } catch (const json::exception&) {
      gaps.insert("unreadable config: " + d);
      continue;
    }
    const std::string hash = meta.value("config_hash", std::string());
    const std::string label = meta.value("method_label", std::string());
    const std::uint64_t seed = meta.value("seed", std::uint64_t{0});
    if (meta.contains("config") && meta["config"].contains("seeds")) {
      for (const auto& s : meta["config"]["seeds"]) expected[label].insert(s.get<std::uint64_t>());
    }
    if (!run_complete(d, hash)) {
      gaps.insert("incomplete run: " + label + " seed " + std::to_string(seed));
      continue;
    }
    Found f{dir, read_run(d), meta["config"]};
    runs[{label, seed}] = std::move(f);
  }
  for (const auto& [label, seeds] : expected) {
    for (std::uint64_t s : seeds) {
      if (!runs.count({label, s})) gaps.insert("missing seed: " + label + " seed " + std::to_string(s));
    }
  }

  const fs::path out(out_dir);
  fs::create_directories(out);

  std::ostringstream curves, thresholds, summary, stats, traj;
  curves << metrics_csv_header() << "\n";
  thresholds << "method,seed,threshold,step,config_hash\n";
  summary << "method,threshold,seeds,reached,median_step,mean_step,std_step\n";
  stats << "seed," << replay::stats_csv_header() << ",config_hash\n";
  const std::vector<double> levels{0.5, 0.7, 0.8};
  std::map<std::string, std::map<double, std::vector<double>>> reached;
  std::map<std::string, std::size_t> seed_count;
  std::set<std::string> map_files;

  for (const auto& [key, f] : runs) {
    const auto& [label, seed] = key;
    ++seed_count[label];
    const int k = f.config.value("budget", 0);
    const double tau = pose_filter_enabled(from_json(f.config)) ? f.config.value("tau_deg", 0.0) : 0.0;
    for (const CheckpointRecord& c : f.run.checkpoints) {
      curves << metrics_csv_row(c.point, seed, label, k, tau, f.run.config_hash) << "\n";
    }
    const eval::LearningCurve curve = f.run.curve();
    for (double lv : levels) {
      const auto s = eval::steps_to_threshold(curve, lv);
      thresholds << label << "," << seed << "," << lv << "," << (s ? std::to_string(*s) : "")
                 << "," << f.run.config_hash << "\n";
      if (s) reached[label][lv].push_back(static_cast<double>(*s));
    }
    stats << seed << "," << replay::stats_csv_row(label, f.run.stats) << "," << f.run.config_hash
          << "\n";
    std::istringstream lines(read_file(f.dir / "trajectories.jsonl"));
    std::string line;
    while (std::getline(lines, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      j["method"] = label;
      j["seed"] = seed;
      traj << j.dump() << "\n";
    }
    for (const char* field : {"train_map", "eval_map"}) {
      const std::string m = f.config.value(field, std::string());
      if (!m.empty()) map_files.insert(m);
    }
  }
  for (const auto& [label, n] : seed_count) {
    for (double lv : levels) {
      const std::vector<double>& v = reached[label][lv];
      char buf[256];
      if (v.empty()) {
        std::snprintf(buf, sizeof(buf), "%s,%g,%zu,0,,,\n", label.c_str(), lv, n);
      } else {
        const eval::MeanStd ms = eval::mean_std(v);
        std::snprintf(buf, sizeof(buf), "%s,%g,%zu,%zu,%.1f,%.3f,%.3f\n", label.c_str(), lv, n,
                      v.size(), eval::median(v), ms.mean, ms.stddev);
      }
      summary << buf;
    }
  }

  json maps = json::object();
  for (const std::string& m : map_files) {
    try {
      maps[m] = world::map_to_json(world::load_map(locate_map(m)));
    } catch (const std::exception& e) {
      gaps.insert("map not found: " + m);
    }
  }

  json manifest = {{"series", runs.size()}, {"gaps", json::array()}, {"runs", json::array()}};
  for (const std::string& g : gaps) manifest["gaps"].push_back(g);
  for (const auto& [key, f] : runs) {
    manifest["runs"].push_back({{"method", key.first}, {"seed", key.second},
                                {"config_hash", f.run.config_hash},
                                {"checkpoints", f.run.checkpoints.size()}});
  }
  manifest["files"] = {"curves.csv", "thresholds.csv", "threshold_summary.csv",
                       "trajectories.jsonl", "replay_stats.csv", "maps.json"};

  write_text(out / "curves.csv", curves.str());
  write_text(out / "thresholds.csv", thresholds.str());
  write_text(out / "threshold_summary.csv", summary.str());
  write_text(out / "replay_stats.csv", stats.str());
  write_text(out / "trajectories.jsonl", traj.str());
  write_text(out / "maps.json", maps.dump(2) + "\n");
  write_text(out / "manifest.json", manifest.dump(2) + "\n");

  ExportReport report;
  report.series = runs.size();
  report.gaps.assign(gaps.begin(), gaps.end());
  return report;
}

}  // namespace mcbnav::experiment
