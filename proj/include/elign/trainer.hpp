#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "elign/config.hpp"
#include "elign/dynamics.hpp"
#include "elign/sac.hpp"

namespace elign {

struct EvalSummary {
  int episodes = 0;
  double mean_reward = 0.0;                // team-mean episode extrinsic return
  std::optional<double> std_error;         // empty for a single episode
  std::vector<double> mean_agent_reward;   // per agent (team then adversaries)
  double occupancy_per_step = 0.0;
  double collision_per_step = 0.0;
  double mean_agent_target_dist = 0.0;
  std::optional<double> mean_adv_agent_dist;
};

struct EpochReport {
  int epoch = 0;
  std::vector<double> mean_episode_reward;  // per agent, training rollouts
  std::vector<double> mean_intrinsic;       // per team agent, re-scored sample
  std::vector<double> dynamics_mse;         // per team agent, ||o' - f||^2 before the pass
  std::vector<double> reward_time_mse;      // per team agent, per-entry, noise included
  std::size_t policy_updates = 0;           // per agent this epoch
  EvalSummary eval;
  double wall_seconds = 0.0;
};

// Everything needed to resume or evaluate: configuration, learners, and the
// team's dynamics models (index k belongs to team agent k).
struct Checkpoint {
  TrainConfig config;
  std::vector<sac::AgentLearner> learners;
  std::vector<DynamicsModel> dynamics;
};

Checkpoint make_initial_checkpoint(const TrainConfig& config);

class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  // One pass of: rollouts -> dynamics -> re-scoring into D' -> policy
  // updates -> evaluation.
  EpochReport run_epoch();

  // Best-so-far eval reward unchanged (by more than 1e-6) for `patience`
  // epochs, or max_epochs reached.
  bool finished() const;

  const Checkpoint& checkpoint() const { return ckpt_; }
  Checkpoint release_checkpoint() { return std::move(ckpt_); }
  const TrainConfig& config() const { return ckpt_.config; }
  int epochs_run() const { return epoch_; }
  double best_eval_reward() const { return best_eval_; }
  int best_epoch() const { return best_epoch_; }

 private:
  void collect_episode();
  void train_dynamics(EpochReport& report);
  void rescore(EpochReport& report);
  void update_policies(EpochReport& report);

  Checkpoint ckpt_;
  ObservationLayout layout_;
  std::mt19937_64 rng_;
  int epoch_ = 0;
  double best_eval_ = 0.0;
  int best_epoch_ = -1;
  int since_best_ = 0;
  std::vector<double> episode_return_sum_;
};

struct RunResult {
  Checkpoint checkpoint;
  std::vector<EpochReport> reports;
  EvalSummary final_eval;
  int best_epoch = 0;
  double best_eval_reward = 0.0;
};

RunResult run(const TrainConfig& config,
              const std::function<void(const EpochReport&)>& on_epoch = {});

// Greedy rollouts of `policies` (one learner per agent slot). Episodes are
// seeded from `seed` so repeated calls see identical resets.
EvalSummary evaluate_policies(std::span<const sac::AgentLearner* const> policies, const TaskSpec& task,
                              int n_episodes, int episode_length, std::uint64_t seed);

EvalSummary evaluate(const Checkpoint& checkpoint, const TaskSpec& task, int n_episodes,
                     int episode_length, std::uint64_t seed);

// Uniform random actions for every agent.
EvalSummary random_policy_baseline(const TaskSpec& task, int n_episodes, int episode_length,
                                   std::uint64_t seed);

struct ZeroShotResult {
  // teams[r][k]: index of the run supplying agent slot k in team r; team r
  // takes slot k from run (k + r) mod R.
  std::vector<std::vector<std::size_t>> teams;
  std::vector<EvalSummary> per_team;
  EvalSummary aggregate;  // mean of per-team summaries
};

// Needs >= 2 checkpoints with matching configs apart from the seed.
ZeroShotResult zero_shot_swap(std::span<const Checkpoint* const> checkpoints, const TaskSpec& task,
                              int n_episodes, int episode_length, std::uint64_t seed);

// Per team agent: the per-entry squared error of reward-time predictions
// (noise included) of the current models over every transition in D. Each
// epoch re-scores a uniform sample of D, so this is the population value
// behind the per-epoch reward_time_mse column.
std::vector<double> reward_time_mse(const Checkpoint& checkpoint);

struct NoiseAblationRow {
  double sigma = 0.0;
  double final_dynamics_mse = 0.0;     // last epoch, team mean, training loss
  double final_reward_time_mse = 0.0;  // final models over all of D, team mean, per entry
  double final_eval_reward = 0.0;
  double reward_delta = 0.0;           // vs the sigma = 0 run
};

// One run per sigma plus a sigma = 0 baseline (first row).
std::vector<NoiseAblationRow> noise_ablation(const TrainConfig& config, std::span<const double> sigmas);

// metrics.csv: fixed header, one row per epoch, doubles in shortest
// round-trip form. Wall-clock time is deliberately not part of it.
void write_metrics_header(std::ostream& out, const TrainConfig& config);
void write_metrics_row(std::ostream& out, const EpochReport& report);

nlohmann::json to_json(const EvalSummary& s);

// Directory layout: config.json, agent_<k>/{actor,critic1,critic2,
// target_critic1,target_critic2}.net, agent_<k>/dynamics.net for team agents.
void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace elign
