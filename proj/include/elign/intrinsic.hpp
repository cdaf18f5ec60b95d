#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "elign/tasks.hpp"
#include "elign/transition.hpp"

namespace elign {

enum class RewardMode : std::uint8_t {
  sparse,
  curio_self,
  curio_team,
  elign_self,
  elign_team,
  elign_adv,
};

const char* to_string(RewardMode mode);
RewardMode reward_mode_from_string(const std::string& name);
bool uses_dynamics(RewardMode mode);

// Throws ConfigError when the mode cannot apply to the task (elign_adv
// without adversaries).
void check_mode_for_task(RewardMode mode, const TaskSpec& spec);

// team[i]: same-side agents within tau of i, i included, ascending.
// adv[i]:  opposite-side agents within tau of i, ascending.
struct NeighborSets {
  std::vector<std::vector<std::size_t>> team;
  std::vector<std::vector<std::size_t>> adv;
};

NeighborSets neighbor_sets(const WorldState& state, const TaskSpec& spec);

// o_{i ∩ j}: obs_i with every slot-group zeroed whose entity is hidden in `mask`.
std::vector<double> intersect(const ObservationLayout& layout, std::span<const double> obs_i,
                              const Visibility& mask);
std::vector<double> intersect(const ObservationLayout& layout, const ObservationVector& obs_i,
                              const ObservationVector& obs_j);

// -||next_obs - prediction||_2
double elign_self(std::span<const double> next_obs, std::span<const double> prediction);

using Predictor = std::function<std::vector<double>(std::span<const double> obs, Action action)>;

// Prediction error of one neighbor term: the mask is the agent's own
// pre-step visibility intersected with the neighbor's pre-step visibility,
// applied identically to the input observation and the target next
// observation.
struct NeighborError {
  std::size_t neighbor = 0;
  double norm = 0.0;         // ||target - prediction||_2
  double squared_sum = 0.0;  // sum of squared entries
};

NeighborError neighbor_error(const Transition& t, std::size_t agent, const NeighborMask& neighbor,
                             const ObservationLayout& layout, const Predictor& f);

// Individual reward terms. `t` must carry the agent's neighbor snapshots
// (team_neighbors containing the agent itself).
double elign_self(const Transition& t, std::size_t agent, const ObservationLayout& layout,
                  const Predictor& f);
double elign_team(const Transition& t, std::size_t agent, const ObservationLayout& layout,
                  const Predictor& f);
double elign_adv(const Transition& t, std::size_t agent, const ObservationLayout& layout,
                 const Predictor& f);
double curio_self(const Transition& t, std::size_t agent, const ObservationLayout& layout,
                  const Predictor& f);
double curio_team(const Transition& t, std::size_t agent, const ObservationLayout& layout,
                  const Predictor& f);

struct IntrinsicScore {
  double r_in = 0.0;
  double squared_error_sum = 0.0;  // over every entry of every neighbor term
  std::size_t entries = 0;
};

// r_in for `mode` (0 for sparse) plus the prediction-error tally behind it.
IntrinsicScore intrinsic_reward(RewardMode mode, const Transition& t, std::size_t agent,
                                const ObservationLayout& layout, const Predictor& f);

struct IntrinsicRewardRecord {
  std::size_t agent = 0;
  double r_in = 0.0;
  double r_ex = 0.0;
  double beta = 0.0;
  double r_total = 0.0;
};

// beta = 1 / obs_dim, r_total = r_ex + beta * r_in.
IntrinsicRewardRecord total_reward(double r_ex, double r_in, std::size_t obs_dim,
                                   std::size_t agent = 0);

}  // namespace elign
