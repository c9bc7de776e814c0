// mcbnav: train, evaluate, ablate and export collision-budget navigation runs.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mcbnav/checkpoint.hpp"
#include "mcbnav/config.hpp"
#include "mcbnav/experiment.hpp"
#include "mcbnav/map_io.hpp"

namespace fs = std::filesystem;
using namespace mcbnav;
using namespace mcbnav::experiment;

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

// Flags that override fields of the loaded config.
struct Overrides {
  std::string config;
  std::string profile;
  std::string name;
  std::string method;
  std::optional<int> budget;
  std::optional<double> tau;
  std::vector<std::uint64_t> seeds;
  std::optional<std::int64_t> steps;
  std::optional<std::int64_t> eval_every;
  std::string map;
  std::optional<int> eval_tasks;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config, "JSON experiment config");
    app->add_option("--profile", profile, "desk or full defaults")->check(CLI::IsMember({"desk", "full"}));
    app->add_option("--name", name, "experiment name (run directory prefix)");
    app->add_option("--method", method, "SCR, MCB or MCB-PF");
    app->add_option("-k,--budget", budget, "collision budget K");
    app->add_option("--tau", tau, "pose-filter threshold in degrees (MCB-PF)");
    app->add_option("--seeds", seeds, "master seeds");
    app->add_option("--steps", steps, "training steps per seed");
    app->add_option("--eval-every", eval_every, "steps between evaluation checkpoints");
    app->add_option("--map", map, "training and evaluation map file");
    app->add_option("--eval-tasks", eval_tasks, "evaluation task count");
  }

  ExperimentConfig build() const {
    ExperimentConfig cfg = profile == "full" ? full_profile() : desk_profile();
    if (!config.empty()) cfg = load_config(config);
    if (!name.empty()) cfg.name = name;
    if (!method.empty()) cfg.method = parse_method(method);
    if (budget) cfg.budget = *budget;
    if (tau) cfg.tau_deg = *tau;
    if (!seeds.empty()) cfg.seeds = seeds;
    if (steps) cfg.total_steps = *steps;
    if (eval_every) cfg.eval_every = *eval_every;
    if (!map.empty()) {
      cfg.train_map = map;
      cfg.eval_map = map;
    }
    if (eval_tasks) cfg.eval_tasks = *eval_tasks;
    return resolve(cfg);
  }
};

ExperimentConfig config_from_run(const fs::path& run_dir) {
  std::ifstream f(run_dir / "config.json");
  if (!f) throw ConfigError("'" + run_dir.string() + "' has no config.json");
  return resolve(from_json(nlohmann::json::parse(f).at("config")));
}

std::int64_t step_from_name(const fs::path& ckpt, std::int64_t fallback) {
  static const std::regex re("step_(\\d+)\\.ckpt");
  std::smatch m;
  const std::string name = ckpt.filename().string();
  if (std::regex_match(name, m, re)) return std::stoll(m[1]);
  return fallback;
}

// Run directories below each argument (a directory holding config.json, or
// any ancestor of such directories).
std::vector<std::string> discover_runs(const std::vector<std::string>& args) {
  std::vector<std::string> out;
  for (const std::string& a : args) {
    const fs::path p(a);
    if (!fs::is_directory(p) || fs::is_regular_file(p / "config.json")) {
      out.push_back(a);
      continue;
    }
    std::vector<std::string> found;
    for (const auto& e : fs::recursive_directory_iterator(p)) {
      if (e.is_regular_file() && e.path().filename() == "config.json") {
        found.push_back(e.path().parent_path().string());
      }
    }
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
  }
  return out;
}

std::optional<double> parse_tau(const std::string& s) {
  if (s == "none") return std::nullopt;
  try {
    return std::stod(s);
  } catch (const std::exception&) {
    throw ConfigError("bad tau value '" + s + "' (number or 'none')");
  }
}

int cmd_train(const Overrides& ov, const TrainOptions& topts) {
  const ExperimentConfig cfg = ov.build();
  std::fprintf(stderr, "%s: %zu seed(s), %lld steps, config %s\n", method_label(cfg).c_str(),
               cfg.seeds.size(), static_cast<long long>(cfg.total_steps), config_hash(cfg).c_str());
  for (const std::string& d : train_all(cfg, topts)) std::cout << d << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string run;
  std::string tasks;
  std::string out = "eval.csv";
};

int cmd_eval(const Overrides& ov, const EvalArgs& args) {
  if (args.checkpoint.empty() == args.run.empty()) {
    throw ConfigError("eval needs exactly one of --checkpoint or --run");
  }
  ExperimentConfig cfg;
  std::vector<fs::path> ckpts;
  if (!args.run.empty()) {
    const fs::path run(args.run);
    cfg = config_from_run(run);
    if (fs::is_directory(run / "checkpoints")) {
      for (const auto& e : fs::directory_iterator(run / "checkpoints")) {
        if (e.path().extension() == ".ckpt" && e.path().filename().string().rfind("step_", 0) == 0) {
          ckpts.push_back(e.path());
        }
      }
    }
    std::sort(ckpts.begin(), ckpts.end());
    if (ckpts.empty()) throw std::runtime_error("no checkpoints under '" + args.run + "'");
  } else {
    const fs::path parent = fs::path(args.checkpoint).parent_path().parent_path();
    cfg = (ov.config.empty() && fs::is_regular_file(parent / "config.json")) ? config_from_run(parent)
                                                                             : ov.build();
    ckpts.push_back(args.checkpoint);
  }
  const world::WorldMap map = world::load_map(locate_map(cfg.eval_map));
  std::vector<world::Scenario> tasks;
  if (!args.tasks.empty()) {
    std::ifstream f(args.tasks);
    if (!f) throw ConfigError("cannot open task set '" + args.tasks + "'");
    tasks = world::read_scenarios_jsonl(f);
  } else {
    tasks = eval::make_task_set(map, cfg.task_seed, cfg.eval_tasks, cfg.sim.robot_radius, cfg.scenario);
  }

  // Read every checkpoint up front so a bad file leaves no partial output.
  std::vector<std::int64_t> steps;
  for (const fs::path& c : ckpts) steps.push_back(step_from_name(c, sac::load_checkpoint(c.string()).step));

  const bool fresh = !fs::exists(args.out) || fs::file_size(args.out) == 0;
  std::ofstream out(args.out, std::ios::app);
  if (!out) throw std::runtime_error("cannot write '" + args.out + "'");
  if (fresh) out << metrics_csv_header() << "\n";
  const std::uint64_t seed = cfg.seeds.empty() ? 0 : cfg.seeds.front();
  std::uint64_t run_seed = seed;
  if (!args.run.empty()) {
    std::ifstream f(fs::path(args.run) / "config.json");
    run_seed = nlohmann::json::parse(f).value("seed", seed);
  }
  const std::string hash = config_hash(cfg);
  for (std::size_t i = 0; i < ckpts.size(); ++i) {
    const eval::EvalResult r = evaluate_checkpoint(ckpts[i].string(), cfg, map, tasks);
    const eval::CurvePoint p{steps[i], r.sr, r.av, r.ael, r.ans};
    const std::string row = metrics_csv_row(p, run_seed, method_label(cfg), cfg.budget, cfg.tau_deg, hash);
    out << row << "\n";
    std::cout << row << "\n";
  }
  return 0;
}

struct AblateArgs {
  std::vector<int> budgets{2, 3, 5, 10, 50};
  std::vector<std::string> taus{"none", "0.5", "1", "2", "3", "10"};
};

int cmd_ablate(const Overrides& ov, const AblateArgs& args, const TrainOptions& topts) {
  ExperimentConfig base = ov.build();
  AblationGrid grid;
  grid.budgets = args.budgets;
  grid.taus.clear();
  for (const std::string& t : args.taus) grid.taus.push_back(parse_tau(t));
  if (grid.budgets.empty() || grid.taus.empty()) throw ConfigError("empty ablation grid");
  const auto cells = run_ablation(base, grid, topts);
  std::printf("k,tau_deg,mean_final_sr\n");
  for (const AblationCell& c : cells) {
    std::printf("%d,%s,%.4f\n", c.budget, c.tau_deg ? std::to_string(*c.tau_deg).c_str() : "none",
                c.mean_final_sr());
  }
  return 0;
}

int cmd_export(const std::vector<std::string>& inputs, const std::string& out) {
  const ExportReport rep = export_bundle(discover_runs(inputs), out);
  std::fprintf(stderr, "exported %zu series to %s\n", rep.series, out.c_str());
  for (const std::string& g : rep.gaps) std::fprintf(stderr, "gap: %s\n", g.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collision-budget navigation training workbench"};
  app.set_version_flag("--version", MCBNAV_VERSION);
  app.require_subcommand(1);

  TrainOptions topts;
  auto add_run_opts = [&](CLI::App* sub) {
    sub->add_option("--root", topts.root, "run root (default $MCBNAV_RUN_ROOT or ./runs)");
    sub->add_option("-j,--jobs", topts.jobs, "worker processes")->check(CLI::PositiveNumber);
    sub->add_flag("--reuse", topts.reuse, "skip seeds with a completed run of the same config");
    sub->add_flag("-q,--quiet", topts.quiet, "no per-checkpoint progress");
  };

  Overrides train_ov;
  CLI::App* train = app.add_subcommand("train", "train every configured seed");
  train_ov.attach(train);
  add_run_opts(train);

  Overrides eval_ov;
  EvalArgs eval_args;
  CLI::App* ev = app.add_subcommand("eval", "strict evaluation of checkpoints");
  eval_ov.attach(ev);
  ev->add_option("--checkpoint", eval_args.checkpoint, "checkpoint file");
  ev->add_option("--run", eval_args.run, "run directory; evaluates every checkpoint in step order");
  ev->add_option("--tasks", eval_args.tasks, "task set JSON lines (default: config task seed)");
  ev->add_option("-o,--out", eval_args.out, "CSV to append to");

  Overrides ablate_ov;
  AblateArgs ablate_args;
  CLI::App* ablate = app.add_subcommand("ablate", "budget x pose-filter grid");
  ablate_ov.attach(ablate);
  add_run_opts(ablate);
  ablate->add_option("--ks", ablate_args.budgets, "budgets");
  ablate->add_option("--taus", ablate_args.taus, "filter thresholds in degrees, 'none' for unfiltered");

  std::vector<std::string> export_inputs;
  std::string export_out = "bundle";
  CLI::App* exp = app.add_subcommand("export", "consolidate runs into a plotting bundle");
  exp->add_option("runs", export_inputs, "run directories or roots to search")->required();
  exp->add_option("-o,--out", export_out, "bundle directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (*train) return cmd_train(train_ov, topts);
    if (*ev) return cmd_eval(eval_ov, eval_args);
    if (*ablate) return cmd_ablate(ablate_ov, ablate_args, topts);
    if (*exp) return cmd_export(export_inputs, export_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const world::MapError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfigError;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kRuntimeError;
  }
  return 0;
}
