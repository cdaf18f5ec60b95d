#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "elign/intrinsic.hpp"
#include "elign/sac.hpp"
#include "elign/tasks.hpp"

namespace elign {

struct TrainConfig {
  TaskSpec task;
  RewardMode reward_mode = RewardMode::elign_team;
  int episodes_per_epoch = 64;    // B, episodes collected per epoch
  int episode_length = 25;
  int max_epochs = 150;
  int convergence_patience = 100;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;       // reward-time dynamics noise
  double update_ratio = 1.0 / 64.0;  // policy updates per collected env step
  int reward_samples = 0;         // transitions re-scored per agent per epoch; 0 = B * T
  int dynamics_samples = 0;       // transitions per dynamics pass; 0 = B * T
  int dynamics_batch = 256;
  int dynamics_passes = 1;
  double dynamics_lr = 1e-3;
  std::vector<int> dynamics_hidden{128, 128};
  int eval_episodes = 32;         // greedy episodes per epoch evaluation
  int final_eval_episodes = 1000;
  sac::SacConfig sac;

  void validate() const;

  int steps_per_epoch() const { return episodes_per_epoch * episode_length; }
  int updates_per_epoch() const;
  int effective_reward_samples() const { return reward_samples > 0 ? reward_samples : steps_per_epoch(); }
  int effective_dynamics_samples() const {
    return dynamics_samples > 0 ? dynamics_samples : steps_per_epoch();
  }
};

// Flat key/value representation. Every TrainConfig field has one key; task
// keys are `task`, `n_agents`, `n_adversaries`, `n_landmarks`, `tau`,
// `symmetry_breaking`, `task_seed`. Missing keys keep their defaults, where
// task-count defaults follow the selected task kind. Unknown keys are errors.
nlohmann::json to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& flat);

// Minimal TOML reader for flat documents: `key = value` lines with strings,
// integers, floats (incl. inf), booleans and one-line arrays; `#` comments.
nlohmann::json parse_flat_toml(std::string_view text);

// Loads .toml or .json by extension.
nlohmann::json load_config_file(const std::filesystem::path& path);

// Applies `key=value` overrides (value parsed as a TOML scalar/array, bare
// words as strings) on top of a flat document.
void apply_overrides(nlohmann::json& flat, const std::vector<std::string>& overrides);

}  // namespace elign
