#include "elign/trainer.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>

#include "elign/checkpoint.hpp"
#include "elign/error.hpp"

namespace elign {

namespace {

// splitmix64 finalizer; gives well-separated seeds for independent streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kRolloutStream = 1;
constexpr std::uint64_t kEpochEvalStream = 2;
constexpr std::uint64_t kFinalEvalStream = 3;
constexpr std::uint64_t kNoiseProbeStream = 4;
constexpr std::uint64_t kLearnerStream = 100;
constexpr std::uint64_t kDynamicsStream = 10'000;

std::vector<NeighborMask> masks_for(const std::vector<std::size_t>& ids,
                                    const std::vector<ObservationVector>& before,
                                    const std::vector<ObservationVector>& after) {
  std::vector<NeighborMask> out;
  out.reserve(ids.size());
  for (std::size_t j : ids) out.push_back({j, before[j].visibility, after[j].visibility});
  return out;
}

// Sparse runs still tally the self-prediction error so the metrics stream
// carries the same columns for every mode.
RewardMode scoring_mode(RewardMode mode) {
  return mode == RewardMode::sparse ? RewardMode::elign_self : mode;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

using ActionChooser = std::function<Action(std::size_t agent, const ObservationVector& obs)>;

EvalSummary rollout_summary(const TaskSpec& task, int n_episodes, int episode_length,
                            std::uint64_t seed, const ActionChooser& choose) {
  require(n_episodes >= 1, "evaluation needs at least one episode");
  require(episode_length >= 1, "episode_length must be >= 1");
  task.validate();
  std::mt19937_64 reset_rng(seed);
  const std::size_t n = static_cast<std::size_t>(task.total_agents());
  const std::size_t team = static_cast<std::size_t>(task.n_agents);

  EvalSummary s;
  s.episodes = n_episodes;
  s.mean_agent_reward.assign(n, 0.0);
  std::vector<double> team_returns;
  team_returns.reserve(static_cast<std::size_t>(n_episodes));
  double occupancy = 0.0;
  double collisions = 0.0;
  double target_dist = 0.0;
  double adv_dist = 0.0;
  std::vector<Action> actions(n);

  for (int ep = 0; ep < n_episodes; ++ep) {
    WorldState state = reset(task, reset_rng);
    std::vector<double> ret(n, 0.0);
    for (int t = 0; t < episode_length; ++t) {
      for (std::size_t i = 0; i < n; ++i) actions[i] = choose(i, observe(state, i, task));
      WorldState next = apply_actions(state, actions);
      const auto r = extrinsic_reward(state, actions, next, task);
      for (std::size_t i = 0; i < n; ++i) ret[i] += r[i];
      const StepMetrics m = step_metrics(next, task);
      occupancy += m.occupancy_count;
      collisions += m.collision_count;
      target_dist += mean(m.min_agent_target_dist);
      if (m.min_adv_agent_dist) adv_dist += *m.min_adv_agent_dist;
      state = std::move(next);
    }
    for (std::size_t i = 0; i < n; ++i) s.mean_agent_reward[i] += ret[i];
    team_returns.push_back(std::accumulate(ret.begin(), ret.begin() + static_cast<long>(team), 0.0) /
                           static_cast<double>(team));
  }

  const double episodes = static_cast<double>(n_episodes);
  const double steps = episodes * episode_length;
  for (auto& v : s.mean_agent_reward) v /= episodes;
  s.mean_reward = mean(team_returns);
  if (n_episodes > 1) {
    double ss = 0.0;
    for (double r : team_returns) ss += (r - s.mean_reward) * (r - s.mean_reward);
    s.std_error = std::sqrt(ss / (episodes - 1.0)) / std::sqrt(episodes);
  }
  s.occupancy_per_step = occupancy / steps;
  s.collision_per_step = collisions / steps;
  s.mean_agent_target_dist = target_dist / steps;
  if (n > team) s.mean_adv_agent_dist = adv_dist / steps;
  return s;
}

}  // namespace

Checkpoint make_initial_checkpoint(const TrainConfig& config) {
  config.validate();
  Checkpoint c;
  c.config = config;
  const ObservationLayout layout(config.task);
  const int dim = static_cast<int>(layout.dim());
  const std::size_t n = static_cast<std::size_t>(config.task.total_agents());
  c.learners.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    c.learners.emplace_back(dim, config.sac, derive_seed(config.seed, kLearnerStream + i));
  for (std::size_t k = 0; k < static_cast<std::size_t>(config.task.n_agents); ++k)
    c.dynamics.push_back(make_dynamics_model(k, dim, config.dynamics_hidden, config.dynamics_lr,
                                             derive_seed(config.seed, kDynamicsStream + k),
                                             config.noise_sigma));
  return c;
}

Trainer::Trainer(TrainConfig config)
    : ckpt_(make_initial_checkpoint(config)),
      layout_(ckpt_.config.task),
      rng_(derive_seed(ckpt_.config.seed, kRolloutStream)) {}

void Trainer::collect_episode() {
  const TaskSpec& task = ckpt_.config.task;
  const std::size_t n = ckpt_.learners.size();
  WorldState state = reset(task, rng_);
  std::vector<Action> actions(n);
  std::vector<ObservationVector> obs(n);
  std::vector<ObservationVector> next_obs(n);
  for (std::size_t i = 0; i < n; ++i) obs[i] = observe(state, i, task);

  for (int t = 0; t < ckpt_.config.episode_length; ++t) {
    for (std::size_t i = 0; i < n; ++i)
      actions[i] = ckpt_.learners[i].select_action(obs[i].values, sac::ActionMode::sample, rng_);
    WorldState next = apply_actions(state, actions);
    const auto rewards = extrinsic_reward(state, actions, next, task);
    for (std::size_t i = 0; i < n; ++i) next_obs[i] = observe(next, i, task);
    const NeighborSets nb = neighbor_sets(state, task);
    for (std::size_t i = 0; i < n; ++i) {
      Transition tr;
      tr.obs = obs[i].values;
      tr.action = actions[i];
      tr.reward = rewards[i];
      tr.next_obs = next_obs[i].values;
      // Episodes end on the time limit only, which is not a terminal state.
      tr.done = false;
      tr.team_neighbors = masks_for(nb.team[i], obs, next_obs);
      tr.adv_neighbors = masks_for(nb.adv[i], obs, next_obs);
      ckpt_.learners[i].push_transition(std::move(tr), sac::BufferKind::D);
      episode_return_sum_[i] += rewards[i];
    }
    state = std::move(next);
    std::swap(obs, next_obs);
  }
}

void Trainer::train_dynamics(EpochReport& report) {
  const auto& cfg = ckpt_.config;
  for (std::size_t k = 0; k < ckpt_.dynamics.size(); ++k) {
    const auto sample = ckpt_.learners[k].buffer_d.sample(
        static_cast<std::size_t>(cfg.effective_dynamics_samples()), rng_);
    double mse = 0.0;
    for (int pass = 0; pass < cfg.dynamics_passes; ++pass)
      mse = train_epoch(ckpt_.dynamics[k], sample, static_cast<std::size_t>(cfg.dynamics_batch), rng_);
    report.dynamics_mse[k] = mse;
  }
}

void Trainer::rescore(EpochReport& report) {
  const auto& cfg = ckpt_.config;
  const std::size_t samples = static_cast<std::size_t>(cfg.effective_reward_samples());
  const std::size_t dim = layout_.dim();
  const RewardMode scoring = scoring_mode(cfg.reward_mode);

  for (std::size_t i = 0; i < ckpt_.learners.size(); ++i) {
    auto& learner = ckpt_.learners[i];
    const auto sample = learner.buffer_d.sample(samples, rng_);
    std::vector<Transition> rescored;
    rescored.reserve(sample.size());

    if (!cfg.task.is_team(i)) {
      for (const Transition* t : sample)
        rescored.push_back({t->obs, t->action, t->reward, t->next_obs, t->done, {}, {}});
    } else {
      const DynamicsModel& model = ckpt_.dynamics[i];
      const Predictor f = [&](std::span<const double> o, Action a) { return predict(model, o, a, rng_); };
      double r_in_sum = 0.0;
      double sq = 0.0;
      std::size_t entries = 0;
      for (const Transition* t : sample) {
        const IntrinsicScore score = intrinsic_reward(scoring, *t, i, layout_, f);
        sq += score.squared_error_sum;
        entries += score.entries;
        double reward = t->reward;
        if (cfg.reward_mode != RewardMode::sparse) {
          reward = total_reward(t->reward, score.r_in, dim, i).r_total;
          r_in_sum += score.r_in;
        }
        rescored.push_back({t->obs, t->action, reward, t->next_obs, t->done, {}, {}});
      }
      report.mean_intrinsic[i] = r_in_sum / static_cast<double>(sample.size());
      report.reward_time_mse[i] = entries > 0 ? sq / static_cast<double>(entries) : 0.0;
    }
    for (auto& t : rescored) learner.push_transition(std::move(t), sac::BufferKind::Dprime);
  }
}

void Trainer::update_policies(EpochReport& report) {
  const int updates = ckpt_.config.updates_per_epoch();
  for (auto& learner : ckpt_.learners) {
    if (learner.buffer_dprime.size() < learner.config.batch_size) continue;
    for (int u = 0; u < updates; ++u) learner.update_from_buffer(rng_);
    report.policy_updates = static_cast<std::size_t>(updates);
  }
}

EpochReport Trainer::run_epoch() {
  const auto start = std::chrono::steady_clock::now();
  const auto& cfg = ckpt_.config;
  const std::size_t n = ckpt_.learners.size();
  const std::size_t team = static_cast<std::size_t>(cfg.task.n_agents);

  EpochReport report;
  report.epoch = epoch_;
  report.mean_intrinsic.assign(team, 0.0);
  report.dynamics_mse.assign(team, 0.0);
  report.reward_time_mse.assign(team, 0.0);

  episode_return_sum_.assign(n, 0.0);
  for (int b = 0; b < cfg.episodes_per_epoch; ++b) collect_episode();
  report.mean_episode_reward = episode_return_sum_;
  for (auto& v : report.mean_episode_reward) v /= cfg.episodes_per_epoch;

  train_dynamics(report);
  rescore(report);
  update_policies(report);

  report.eval = evaluate(ckpt_, cfg.task, cfg.eval_episodes, cfg.episode_length,
                         derive_seed(cfg.seed, kEpochEvalStream));
  if (best_epoch_ < 0 || report.eval.mean_reward > best_eval_ + 1e-6) {
    best_eval_ = report.eval.mean_reward;
    best_epoch_ = epoch_;
    since_best_ = 0;
  } else {
    ++since_best_;
  }
  ++epoch_;
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

bool Trainer::finished() const {
  return epoch_ >= ckpt_.config.max_epochs || since_best_ >= ckpt_.config.convergence_patience;
}

RunResult run(const TrainConfig& config, const std::function<void(const EpochReport&)>& on_epoch) {
  Trainer trainer(config);
  RunResult result;
  while (!trainer.finished()) {
    EpochReport r = trainer.run_epoch();
    if (on_epoch) on_epoch(r);
    result.reports.push_back(std::move(r));
  }
  result.best_epoch = trainer.best_epoch();
  result.best_eval_reward = trainer.best_eval_reward();
  result.checkpoint = trainer.release_checkpoint();
  result.final_eval = evaluate(result.checkpoint, config.task, config.final_eval_episodes,
                               config.episode_length, derive_seed(config.seed, kFinalEvalStream));
  return result;
}

EvalSummary evaluate_policies(std::span<const sac::AgentLearner* const> policies, const TaskSpec& task,
                              int n_episodes, int episode_length, std::uint64_t seed) {
  require(policies.size() == static_cast<std::size_t>(task.total_agents()),
          "evaluate: one policy per agent slot required");
  const int dim = static_cast<int>(ObservationLayout(task).dim());
  for (const auto* p : policies)
    if (p->obs_dim() != dim) throw ConfigError("checkpoint is incompatible with the task layout");
  std::mt19937_64 unused(0);
  return rollout_summary(task, n_episodes, episode_length, seed,
                         [&](std::size_t i, const ObservationVector& o) {
                           return policies[i]->select_action(o.values, sac::ActionMode::greedy, unused);
                         });
}

EvalSummary evaluate(const Checkpoint& checkpoint, const TaskSpec& task, int n_episodes,
                     int episode_length, std::uint64_t seed) {
  std::vector<const sac::AgentLearner*> policies;
  for (const auto& l : checkpoint.learners) policies.push_back(&l);
  return evaluate_policies(policies, task, n_episodes, episode_length, seed);
}

EvalSummary random_policy_baseline(const TaskSpec& task, int n_episodes, int episode_length,
                                   std::uint64_t seed) {
  std::mt19937_64 action_rng(derive_seed(seed, kRolloutStream));
  std::uniform_int_distribution<int> pick(0, kNumActions - 1);
  return rollout_summary(task, n_episodes, episode_length, seed,
                         [&](std::size_t, const ObservationVector&) {
                           return action_from_index(pick(action_rng));
                         });
}

ZeroShotResult zero_shot_swap(std::span<const Checkpoint* const> checkpoints, const TaskSpec& task,
                              int n_episodes, int episode_length, std::uint64_t seed) {
  if (checkpoints.size() < 2) throw ConfigError("zero-shot evaluation needs at least two runs");
  auto comparable = [](const TrainConfig& c) {
    nlohmann::json j = to_json(c);
    j.erase("seed");
    j.erase("task_seed");
    return j;
  };
  const nlohmann::json reference = comparable(checkpoints.front()->config);
  for (const auto* c : checkpoints)
    if (comparable(c->config) != reference)
      throw ConfigError("zero-shot runs must share one configuration apart from the seed");

  const std::size_t runs = checkpoints.size();
  const std::size_t slots = static_cast<std::size_t>(task.total_agents());
  ZeroShotResult result;
  for (std::size_t r = 0; r < runs; ++r) {
    std::vector<std::size_t> team(slots);
    std::vector<const sac::AgentLearner*> policies(slots);
    for (std::size_t k = 0; k < slots; ++k) {
      team[k] = (k + r) % runs;
      policies[k] = &checkpoints[team[k]]->learners.at(k);
    }
    result.teams.push_back(team);
    result.per_team.push_back(evaluate_policies(policies, task, n_episodes, episode_length, seed));
  }

  EvalSummary& agg = result.aggregate;
  const double teams = static_cast<double>(runs);
  agg.episodes = n_episodes * static_cast<int>(runs);
  agg.mean_agent_reward.assign(slots, 0.0);
  std::vector<double> means;
  bool has_adv = false;
  double adv = 0.0;
  for (const auto& s : result.per_team) {
    means.push_back(s.mean_reward);
    agg.occupancy_per_step += s.occupancy_per_step / teams;
    agg.collision_per_step += s.collision_per_step / teams;
    agg.mean_agent_target_dist += s.mean_agent_target_dist / teams;
    for (std::size_t k = 0; k < slots; ++k) agg.mean_agent_reward[k] += s.mean_agent_reward[k] / teams;
    if (s.mean_adv_agent_dist) {
      has_adv = true;
      adv += *s.mean_adv_agent_dist / teams;
    }
  }
  agg.mean_reward = mean(means);
  if (runs > 1) {
    double ss = 0.0;
    for (double m : means) ss += (m - agg.mean_reward) * (m - agg.mean_reward);
    agg.std_error = std::sqrt(ss / (teams - 1.0)) / std::sqrt(teams);
  }
  if (has_adv) agg.mean_adv_agent_dist = adv;
  return result;
}

std::vector<double> reward_time_mse(const Checkpoint& checkpoint) {
  const auto& cfg = checkpoint.config;
  const ObservationLayout layout(cfg.task);
  const RewardMode scoring = scoring_mode(cfg.reward_mode);
  std::mt19937_64 rng(derive_seed(cfg.seed, kNoiseProbeStream));
  std::vector<double> out;
  for (std::size_t k = 0; k < checkpoint.dynamics.size(); ++k) {
    const DynamicsModel& model = checkpoint.dynamics[k];
    const Predictor f = [&](std::span<const double> o, Action a) { return predict(model, o, a, rng); };
    const ReplayBuffer& d = checkpoint.learners[k].buffer_d;
    double sq = 0.0;
    std::size_t entries = 0;
    for (std::size_t m = 0; m < d.size(); ++m) {
      const IntrinsicScore score = intrinsic_reward(scoring, d.at(m), k, layout, f);
      sq += score.squared_error_sum;
      entries += score.entries;
    }
    out.push_back(entries > 0 ? sq / static_cast<double>(entries) : 0.0);
  }
  return out;
}

std::vector<NoiseAblationRow> noise_ablation(const TrainConfig& config, std::span<const double> sigmas) {
  if (config.reward_mode != RewardMode::elign_self && config.reward_mode != RewardMode::elign_team &&
      config.reward_mode != RewardMode::elign_adv)
    throw ConfigError("noise ablation needs an elign reward mode");
  for (double s : sigmas)
    if (!(s >= 0.0)) throw ConfigError("noise sigma must be >= 0");

  std::vector<double> all{0.0};
  all.insert(all.end(), sigmas.begin(), sigmas.end());
  std::vector<NoiseAblationRow> rows;
  for (double sigma : all) {
    TrainConfig c = config;
    c.noise_sigma = sigma;
    const RunResult r = run(c);
    NoiseAblationRow row;
    row.sigma = sigma;
    row.final_dynamics_mse = mean(r.reports.back().dynamics_mse);
    row.final_reward_time_mse = mean(reward_time_mse(r.checkpoint));
    row.final_eval_reward = r.final_eval.mean_reward;
    row.reward_delta = rows.empty() ? 0.0 : row.final_eval_reward - rows.front().final_eval_reward;
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return ec == std::errc() ? std::string(buf, p) : std::string("nan");
}

}  // namespace

void write_metrics_header(std::ostream& out, const TrainConfig& config) {
  out << "epoch,policy_updates,eval_mean_reward,eval_std_error,eval_occupancy_per_step,"
         "eval_collision_per_step,eval_agent_target_dist,eval_adv_agent_dist";
  for (int i = 0; i < config.task.total_agents(); ++i) out << ",train_reward_" << i;
  for (int k = 0; k < config.task.n_agents; ++k)
    out << ",intrinsic_" << k << ",dynamics_mse_" << k << ",reward_time_mse_" << k;
  out << '\n';
}

void write_metrics_row(std::ostream& out, const EpochReport& r) {
  out << r.epoch << ',' << r.policy_updates << ',' << fmt_double(r.eval.mean_reward) << ','
      << (r.eval.std_error ? fmt_double(*r.eval.std_error) : "") << ','
      << fmt_double(r.eval.occupancy_per_step) << ',' << fmt_double(r.eval.collision_per_step) << ','
      << fmt_double(r.eval.mean_agent_target_dist) << ','
      << (r.eval.mean_adv_agent_dist ? fmt_double(*r.eval.mean_adv_agent_dist) : "");
  for (double v : r.mean_episode_reward) out << ',' << fmt_double(v);
  for (std::size_t k = 0; k < r.dynamics_mse.size(); ++k)
    out << ',' << fmt_double(r.mean_intrinsic[k]) << ',' << fmt_double(r.dynamics_mse[k]) << ','
        << fmt_double(r.reward_time_mse[k]);
  out << '\n';
}

nlohmann::json to_json(const EvalSummary& s) {
  nlohmann::json j;
  j["episodes"] = s.episodes;
  j["mean_reward"] = s.mean_reward;
  j["std_error"] = s.std_error ? nlohmann::json(*s.std_error) : nlohmann::json(nullptr);
  j["mean_agent_reward"] = s.mean_agent_reward;
  j["occupancy_per_step"] = s.occupancy_per_step;
  j["collision_per_step"] = s.collision_per_step;
  j["mean_agent_target_dist"] = s.mean_agent_target_dist;
  j["mean_adv_agent_dist"] =
      s.mean_adv_agent_dist ? nlohmann::json(*s.mean_adv_agent_dist) : nlohmann::json(nullptr);
  return j;
}

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& c) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "config.json");
    out << to_json(c.config).dump(2) << '\n';
  }
  for (std::size_t i = 0; i < c.learners.size(); ++i) {
    const auto agent_dir = dir / ("agent_" + std::to_string(i));
    sac::save_learner(agent_dir, c.learners[i]);
    if (i < c.dynamics.size())
      nn::save_network(agent_dir / "dynamics.net",
                       {c.dynamics[i].spec, c.dynamics[i].params, c.dynamics[i].optimizer});
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("no checkpoint directory at " + dir.string());
  Checkpoint c = make_initial_checkpoint(config_from_json(load_config_file(dir / "config.json")));
  for (std::size_t i = 0; i < c.learners.size(); ++i) {
    const auto agent_dir = dir / ("agent_" + std::to_string(i));
    sac::load_learner(agent_dir, c.learners[i]);
    if (i < c.dynamics.size()) {
      nn::NetworkFile f = nn::load_network(agent_dir / "dynamics.net");
      if (!(f.spec == c.dynamics[i].spec)) throw ConfigError("dynamics checkpoint does not match config");
      c.dynamics[i].params = std::move(f.params);
      if (f.optimizer) c.dynamics[i].optimizer = std::move(*f.optimizer);
    }
  }
  return c;
}

}  // namespace elign
