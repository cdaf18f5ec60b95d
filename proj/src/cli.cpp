#include "elign/cli.hpp"

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>

#include "elign/error.hpp"
#include "elign/trainer.hpp"

namespace elign::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UserError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

fs::path output_root() {
  const char* env = std::getenv(kOutputRootEnv);
  return env && *env ? fs::path(env) : fs::path("runs");
}

void prepare_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !(fs::is_directory(dir) && fs::is_empty(dir))) {
    if (!force) throw UserError("output directory " + dir.string() + " already exists; pass --force to replace it");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

json resolve_flat(const std::string& config_path, const std::vector<std::string>& overrides) {
  json flat = config_path.empty() ? json::object() : load_config_file(config_path);
  apply_overrides(flat, overrides);
  return flat;
}

std::string run_name(const TrainConfig& c) {
  return std::string(to_string(c.task.kind)) + "_" + to_string(c.reward_mode) + "_s" + std::to_string(c.seed);
}

fs::path checkpoint_dir(const fs::path& given) {
  if (fs::exists(given / "checkpoint" / "config.json")) return given / "checkpoint";
  return given;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  out << j.dump(2) << '\n';
}

// Trains one configuration into `dir`: config.json, metrics.csv,
// checkpoint/, summary.json.
RunResult train_into(const fs::path& dir, const TrainConfig& config, std::ostream& log, bool quiet) {
  write_json(dir / "config.json", to_json(config));
  std::ofstream metrics(dir / "metrics.csv");
  write_metrics_header(metrics, config);
  RunResult result = run(config, [&](const EpochReport& r) {
    write_metrics_row(metrics, r);
    metrics.flush();
    if (!quiet)
      log << "epoch " << r.epoch << " eval_reward " << r.eval.mean_reward << " occupancy "
          << r.eval.occupancy_per_step << " (" << r.wall_seconds << " s)\n";
  });
  save_checkpoint(dir / "checkpoint", result.checkpoint);
  json summary;
  summary["epochs"] = result.reports.size();
  summary["best_epoch"] = result.best_epoch;
  summary["best_eval_reward"] = result.best_eval_reward;
  summary["final_eval"] = to_json(result.final_eval);
  write_json(dir / "summary.json", summary);
  return result;
}

struct Options {
  std::string config;
  std::string output;
  std::vector<std::string> overrides;
  bool force = false;
  bool quiet = false;
  std::vector<std::string> checkpoints;
  int episodes = 0;  // 0: per-command default
  int episode_length = 0;
  std::uint64_t seed = 0;
  std::vector<double> sigmas{2.0};
  std::vector<int> counts;
};

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const TrainConfig config = config_from_json(resolve_flat(o.config, o.overrides));
  const fs::path dir = o.output.empty() ? output_root() / run_name(config) : fs::path(o.output);
  prepare_dir(dir, o.force);
  const RunResult r = train_into(dir, config, err, o.quiet);
  json j;
  j["run_dir"] = dir.string();
  j["epochs"] = r.reports.size();
  j["final_eval"] = to_json(r.final_eval);
  out << j.dump() << '\n';
  return kSuccess;
}

int cmd_eval(const Options& o, std::ostream& out) {
  const fs::path dir = checkpoint_dir(o.checkpoints.front());
  const Checkpoint c = load_checkpoint(dir);
  const int length = o.episode_length > 0 ? o.episode_length : c.config.episode_length;
  json j = to_json(evaluate(c, c.config.task, o.episodes, length, o.seed));
  j["checkpoint"] = dir.string();
  out << j.dump() << '\n';
  return kSuccess;
}

int cmd_zero_shot(const Options& o, std::ostream& out) {
  if (o.checkpoints.size() < 2) throw UserError("zero-shot needs at least two --checkpoint directories");
  std::vector<Checkpoint> runs;
  for (const auto& p : o.checkpoints) runs.push_back(load_checkpoint(checkpoint_dir(p)));
  std::vector<const Checkpoint*> ptrs;
  for (const auto& r : runs) ptrs.push_back(&r);
  const TrainConfig& cfg = runs.front().config;
  const int length = o.episode_length > 0 ? o.episode_length : cfg.episode_length;
  const ZeroShotResult z = zero_shot_swap(ptrs, cfg.task, o.episodes, length, o.seed);
  json j;
  j["teams"] = z.teams;
  j["per_team"] = json::array();
  for (const auto& s : z.per_team) j["per_team"].push_back(to_json(s));
  j["aggregate"] = to_json(z.aggregate);
  out << j.dump() << '\n';
  return kSuccess;
}

int cmd_noise_ablation(const Options& o, std::ostream& out) {
  const TrainConfig config = config_from_json(resolve_flat(o.config, o.overrides));
  const fs::path dir = o.output.empty() ? output_root() / ("noise_ablation_" + run_name(config)) : fs::path(o.output);
  prepare_dir(dir, o.force);
  write_json(dir / "config.json", to_json(config));
  const auto rows = noise_ablation(config, o.sigmas);
  std::ofstream csv(dir / "noise_ablation.csv");
  const std::string header = "sigma,final_dynamics_mse,final_reward_time_mse,final_eval_reward,reward_delta\n";
  csv << header;
  out << header;
  for (const auto& r : rows) {
    const std::string line = json(r.sigma).dump() + ',' + json(r.final_dynamics_mse).dump() + ',' +
                             json(r.final_reward_time_mse).dump() + ',' + json(r.final_eval_reward).dump() +
                             ',' + json(r.reward_delta).dump() + '\n';
    csv << line;
    out << line;
  }
  return kSuccess;
}

int cmd_scale_sweep(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.counts.empty()) throw UserError("scale-sweep needs --counts");
  const json base = resolve_flat(o.config, o.overrides);
  std::vector<TrainConfig> configs;
  for (int n : o.counts) {
    json flat = base;
    flat["n_agents"] = n;
    // Landmark count follows the agent count for the navigation tasks.
    flat.erase("n_landmarks");
    configs.push_back(config_from_json(flat));
  }
  const fs::path dir = o.output.empty() ? output_root() / ("scale_sweep_" + run_name(configs.front()))
                                        : fs::path(o.output);
  prepare_dir(dir, o.force);
  std::ofstream csv(dir / "scale_sweep.csv");
  const std::string header =
      "n_agents,final_mean_reward,final_std_error,occupancy_per_step,collision_per_step,epochs\n";
  csv << header;
  out << header;
  for (const auto& c : configs) {
    const fs::path sub = dir / ("n" + std::to_string(c.task.n_agents));
    fs::create_directories(sub);
    const RunResult r = train_into(sub, c, err, o.quiet);
    const auto& e = r.final_eval;
    const std::string line = std::to_string(c.task.n_agents) + ',' + json(e.mean_reward).dump() + ',' +
                             (e.std_error ? json(*e.std_error).dump() : "") + ',' +
                             json(e.occupancy_per_step).dump() + ',' + json(e.collision_per_step).dump() +
                             ',' + std::to_string(r.reports.size()) + '\n';
    csv << line;
    out << line;
  }
  return kSuccess;
}

json vec_json(Vec2 v) { return json::array({v.x, v.y}); }

// One JSON line per environment step of greedy rollouts.
int cmd_export_traces(const Options& o, std::ostream& out) {
  const Checkpoint c = load_checkpoint(checkpoint_dir(o.checkpoints.front()));
  const TaskSpec& task = c.config.task;
  const int length = o.episode_length > 0 ? o.episode_length : c.config.episode_length;
  std::ofstream file;
  if (!o.output.empty()) {
    file.open(o.output);
    if (!file) throw UserError("cannot open " + o.output);
  }
  std::ostream& sink = o.output.empty() ? out : file;
  std::mt19937_64 reset_rng(o.seed);
  std::mt19937_64 unused(0);
  const std::size_t n = c.learners.size();
  std::vector<Action> actions(n);
  for (int ep = 0; ep < o.episodes; ++ep) {
    WorldState state = reset(task, reset_rng);
    for (int t = 0; t < length; ++t) {
      for (std::size_t i = 0; i < n; ++i)
        actions[i] = c.learners[i].select_action(observe(state, i, task).values, sac::ActionMode::greedy, unused);
      WorldState next = apply_actions(state, actions);
      const auto rewards = extrinsic_reward(state, actions, next, task);
      json j;
      j["episode"] = ep;
      j["step"] = t;
      j["agents"] = json::array();
      j["velocities"] = json::array();
      for (const auto& a : state.agents) {
        j["agents"].push_back(vec_json(a.position));
        j["velocities"].push_back(vec_json(a.velocity));
      }
      j["landmarks"] = json::array();
      for (const auto& l : state.landmarks) j["landmarks"].push_back(vec_json(l.position));
      if (state.goal) j["goal"] = *state.goal;
      j["actions"] = json::array();
      for (Action a : actions) j["actions"].push_back(to_index(a));
      j["rewards"] = rewards;
      j["occupancy"] = step_metrics(next, task).occupancy_count;
      sink << j.dump() << '\n';
      state = std::move(next);
    }
  }
  return kSuccess;
}

void error_record(std::ostream& err, const std::string& message, const char* kind) {
  json j;
  j["error"] = message;
  j["kind"] = kind;
  err << j.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Decentralized multi-agent training with intrinsic rewards", "elign"};
  app.require_subcommand(1);
  Options o;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "TOML or JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--override", o.overrides, "key=value applied on top of the config")->take_all();
  };
  auto add_output = [&](CLI::App* sub) {
    sub->add_option("--output", o.output, "Output directory (default under $ELIGN_OUTPUT_ROOT or ./runs)");
    sub->add_flag("--force", o.force, "Replace an existing output directory");
  };
  auto add_rollout = [&](CLI::App* sub) {
    sub->add_option("--episodes", o.episodes, "Number of greedy episodes")->check(CLI::PositiveNumber);
    sub->add_option("--episode-length", o.episode_length, "Steps per episode (default from the run config)");
    sub->add_option("--seed", o.seed, "Episode seed");
  };

  auto* train = app.add_subcommand("train", "Train one configuration");
  add_config(train);
  add_output(train);
  train->add_flag("--quiet", o.quiet, "No per-epoch progress on stderr");

  auto* eval = app.add_subcommand("eval", "Greedy evaluation of a checkpoint");
  eval->add_option("--checkpoint", o.checkpoints, "Run or checkpoint directory")->required()->expected(1);
  add_rollout(eval);

  auto* zero = app.add_subcommand("zero-shot", "Evaluate teams mixed across independently trained runs");
  zero->add_option("--checkpoint", o.checkpoints, "Run or checkpoint directory (repeat)")->required();
  add_rollout(zero);

  auto* noise = app.add_subcommand("noise-ablation", "Train with reward-time dynamics noise");
  add_config(noise);
  add_output(noise);
  noise->add_option("--sigma", o.sigmas, "Noise standard deviations")->delimiter(',');

  auto* sweep = app.add_subcommand("scale-sweep", "Train one run per team size");
  add_config(sweep);
  add_output(sweep);
  sweep->add_option("--counts", o.counts, "Team sizes, e.g. 3,5")->delimiter(',')->required();
  sweep->add_flag("--quiet", o.quiet, "No per-epoch progress on stderr");

  auto* traces = app.add_subcommand("export-traces", "Write greedy rollouts as JSON lines");
  traces->add_option("--checkpoint", o.checkpoints, "Run or checkpoint directory")->required()->expected(1);
  traces->add_option("--output", o.output, "Output file (default stdout)");
  add_rollout(traces);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (o.episodes == 0) o.episodes = traces->parsed() ? 1 : 1000;

    if (train->parsed()) return cmd_train(o, out, err);
    if (eval->parsed()) return cmd_eval(o, out);
    if (zero->parsed()) return cmd_zero_shot(o, out);
    if (noise->parsed()) return cmd_noise_ablation(o, out);
    if (sweep->parsed()) return cmd_scale_sweep(o, out, err);
    if (traces->parsed()) return cmd_export_traces(o, out);
    return kInternalError;
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    error_record(err, e.what(), "user");
    err << app.help();
    return kUserError;
  } catch (const ConfigError& e) {
    error_record(err, e.what(), "user");
    return kUserError;
  } catch (const UserError& e) {
    error_record(err, e.what(), "user");
    return kUserError;
  } catch (const std::exception& e) {
    error_record(err, e.what(), "internal");
    return kInternalError;
  }
}

}  // namespace elign::cli
