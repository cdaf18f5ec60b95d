#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "elign/world.hpp"

namespace elign {

enum class TaskKind : std::uint8_t { coop_nav, hetero_nav, phy_decep, keep_away, pred_prey };

const char* to_string(TaskKind kind);
TaskKind task_kind_from_string(const std::string& name);

inline constexpr double kFullObservability = std::numeric_limits<double>::infinity();

struct TaskSpec {
  TaskKind kind = TaskKind::coop_nav;
  int n_agents = 3;
  int n_adversaries = 0;
  int n_landmarks = 3;
  double tau = 0.5;
  bool symmetry_breaking = false;
  std::uint64_t seed = 0;

  // Conventional team sizes per task kind (coop 3v0, hetero 4v0, phy_decep 2v1,
  // keep_away 2v2, pred_prey 2v2), partial observability.
  static TaskSpec defaults(TaskKind kind);

  // Throws ConfigError when counts break the task's conventions.
  void validate() const;

  int total_agents() const { return n_agents + n_adversaries; }
  bool is_team(std::size_t agent) const { return agent < static_cast<std::size_t>(n_agents); }
  bool has_goal() const { return kind == TaskKind::phy_decep || kind == TaskKind::keep_away; }

  friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

// Entity size conventions.
inline constexpr double kBaseAgentSize = 0.05;
inline constexpr double kBaseLandmarkSize = 0.05;
inline constexpr double kGoalLandmarkSize = 0.08;   // phy_decep / keep_away
inline constexpr double kObstacleSize = 0.2;        // pred_prey
inline constexpr double kBaseMaxSpeed = 1.0;        // hetero_nav reference speed
inline constexpr double kPreyMaxSpeed = 1.3;        // pred_prey cooperating agents
inline constexpr double kPredatorMaxSpeed = 1.0;    // pred_prey adversaries
inline constexpr double kPredatorSize = 0.075;
inline constexpr double kAgentAccel = 5.0;

struct AgentProfile {
  double size = kBaseAgentSize;
  double accel = kAgentAccel;
  std::optional<double> max_speed;
};

// hetero_nav only: first N/2 agents big and slow, the rest small and fast.
// Throws ConfigError for other kinds or an odd agent count.
std::vector<AgentProfile> heterogeneous_profile(const TaskSpec& spec);

// Profiles for all agents (team then adversaries) of any task.
std::vector<AgentProfile> agent_profiles(const TaskSpec& spec);
double landmark_size(const TaskSpec& spec);

WorldState reset(const TaskSpec& spec, std::mt19937_64& rng);

// Observation layout shared by every observer of a task:
//   [p_0 .. p_{N-1}, v_0 .. v_{N-1}, l_0 .. l_{L-1}]
// with N = team + adversaries in world order and L landmarks. The observer's
// own slots hold its own state. Entity e < N is agent e, e >= N is landmark
// e - N; an agent's slot-group is its position and velocity, a landmark's is
// its position.
class ObservationLayout {
 public:
  ObservationLayout(std::size_t n_agents, std::size_t n_landmarks);
  explicit ObservationLayout(const TaskSpec& spec);

  std::size_t dim() const { return entity_of_index_.size(); }
  std::size_t n_agents() const { return n_agents_; }
  std::size_t n_landmarks() const { return n_landmarks_; }
  std::size_t n_entities() const { return n_agents_ + n_landmarks_; }

  std::size_t entity_of_index(std::size_t k) const { return entity_of_index_[k]; }
  std::vector<std::size_t> group_indices(std::size_t entity) const;

  std::size_t position_offset(std::size_t entity) const;
  std::size_t velocity_offset(std::size_t agent) const { return 2 * n_agents_ + 2 * agent; }

  friend bool operator==(const ObservationLayout&, const ObservationLayout&) = default;

 private:
  std::size_t n_agents_;
  std::size_t n_landmarks_;
  std::vector<std::size_t> entity_of_index_;
};

// Per-entity visibility, entity-indexed (agents then landmarks).
using Visibility = std::vector<bool>;

struct ObservationVector {
  std::vector<double> values;
  Visibility visibility;

  friend bool operator==(const ObservationVector&, const ObservationVector&) = default;
};

// Entities within distance <= tau of the observer (inclusive) plus the
// observer itself.
Visibility visibility(const WorldState& state, std::size_t observer, double tau);

ObservationVector observe(const WorldState& state, std::size_t observer, const TaskSpec& spec);

// One reward per agent, team first then adversaries.
std::vector<double> extrinsic_reward(const WorldState& before, std::span<const Action> actions,
                                     const WorldState& after, const TaskSpec& spec);

struct StepMetrics {
  int occupancy_count = 0;   // landmarks overlapped by >= 1 team agent
  int collision_count = 0;   // overlapping team/adversary pairs
  std::vector<double> min_agent_target_dist;  // per team agent
  std::optional<double> min_adv_agent_dist;   // empty without adversaries
};

StepMetrics step_metrics(const WorldState& state, const TaskSpec& spec);

}  // namespace elign
