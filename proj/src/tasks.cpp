#include "elign/tasks.hpp"

#include <algorithm>
#include <numbers>

#include "elign/error.hpp"

namespace elign {

const char* to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::coop_nav: return "coop_nav";
    case TaskKind::hetero_nav: return "hetero_nav";
    case TaskKind::phy_decep: return "phy_decep";
    case TaskKind::keep_away: return "keep_away";
    case TaskKind::pred_prey: return "pred_prey";
  }
  return "?";
}

TaskKind task_kind_from_string(const std::string& name) {
  for (auto k : {TaskKind::coop_nav, TaskKind::hetero_nav, TaskKind::phy_decep,
                 TaskKind::keep_away, TaskKind::pred_prey})
    if (name == to_string(k)) return k;
  throw ConfigError("unknown task kind '" + name + "'");
}

TaskSpec TaskSpec::defaults(TaskKind kind) {
  TaskSpec s;
  s.kind = kind;
  switch (kind) {
    case TaskKind::coop_nav: s.n_agents = 3; s.n_adversaries = 0; s.n_landmarks = 3; break;
    case TaskKind::hetero_nav: s.n_agents = 4; s.n_adversaries = 0; s.n_landmarks = 4; break;
    case TaskKind::phy_decep: s.n_agents = 2; s.n_adversaries = 1; s.n_landmarks = 2; break;
    case TaskKind::keep_away: s.n_agents = 2; s.n_adversaries = 2; s.n_landmarks = 2; break;
    case TaskKind::pred_prey: s.n_agents = 2; s.n_adversaries = 2; s.n_landmarks = 2; break;
  }
  return s;
}

void TaskSpec::validate() const {
  const std::string name = to_string(kind);
  if (n_agents < 1) throw ConfigError(name + ": n_agents must be >= 1");
  if (n_adversaries < 0) throw ConfigError(name + ": n_adversaries must be >= 0");
  if (n_landmarks < 1) throw ConfigError(name + ": n_landmarks must be >= 1");
  if (!(tau > 0.0)) throw ConfigError(name + ": tau must be positive");
  switch (kind) {
    case TaskKind::coop_nav:
    case TaskKind::hetero_nav:
      if (n_adversaries != 0) throw ConfigError(name + " has no adversaries");
      if (n_landmarks != n_agents) throw ConfigError(name + " needs one landmark per agent");
      if (kind == TaskKind::hetero_nav && n_agents % 2 != 0)
        throw ConfigError("hetero_nav needs an even number of agents");
      break;
    case TaskKind::phy_decep:
    case TaskKind::keep_away:
      if (n_adversaries < 1) throw ConfigError(name + " needs at least one adversary");
      if (n_landmarks < 2) throw ConfigError(name + " needs at least two landmarks");
      break;
    case TaskKind::pred_prey:
      if (n_adversaries < 1) throw ConfigError(name + " needs at least one adversary");
      break;
  }
}

std::vector<AgentProfile> heterogeneous_profile(const TaskSpec& spec) {
  if (spec.kind != TaskKind::hetero_nav)
    throw ConfigError("heterogeneous_profile only applies to hetero_nav");
  if (spec.n_agents % 2 != 0) throw ConfigError("hetero_nav needs an even number of agents");
  std::vector<AgentProfile> out(static_cast<std::size_t>(spec.n_agents));
  const int half = spec.n_agents / 2;
  for (int i = 0; i < spec.n_agents; ++i) {
    auto& p = out[static_cast<std::size_t>(i)];
    if (i < half) {
      p.size = 2.0 * kBaseAgentSize;
      p.max_speed = 0.5 * kBaseMaxSpeed;
    } else {
      p.size = 0.5 * kBaseAgentSize;
      p.max_speed = 2.0 * kBaseMaxSpeed;
    }
  }
  return out;
}

std::vector<AgentProfile> agent_profiles(const TaskSpec& spec) {
  if (spec.kind == TaskKind::hetero_nav) return heterogeneous_profile(spec);
  std::vector<AgentProfile> out(static_cast<std::size_t>(spec.total_agents()));
  if (spec.kind == TaskKind::pred_prey) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (spec.is_team(i)) {
        out[i].max_speed = kPreyMaxSpeed;
      } else {
        out[i].size = kPredatorSize;
        out[i].max_speed = kPredatorMaxSpeed;
      }
    }
  }
  return out;
}

double landmark_size(const TaskSpec& spec) {
  switch (spec.kind) {
    case TaskKind::phy_decep:
    case TaskKind::keep_away: return kGoalLandmarkSize;
    case TaskKind::pred_prey: return kObstacleSize;
    default: return kBaseLandmarkSize;
  }
}

namespace {

Vec2 uniform_in_bounds(std::mt19937_64& rng, double half_extent, double size) {
  std::uniform_real_distribution<double> u(-(half_extent - size), half_extent - size);
  const double x = u(rng);
  const double y = u(rng);
  return {x, y};
}

Vec2 on_circle(std::mt19937_64& rng, double radius) {
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi);
  const double theta = u(rng);
  return {radius * std::cos(theta), radius * std::sin(theta)};
}

// Rejection-sample landmark positions so no two landmarks overlap.
template <typename Sampler>
void place_landmarks(std::vector<Entity>& landmarks, Sampler sample) {
  for (std::size_t i = 0; i < landmarks.size(); ++i) {
    for (int attempt = 0;; ++attempt) {
      landmarks[i].position = sample();
      bool clash = false;
      for (std::size_t j = 0; j < i && !clash; ++j) clash = overlapping(landmarks[i], landmarks[j]);
      if (!clash || attempt > 1000) break;
    }
  }
}

}  // namespace

WorldState reset(const TaskSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  WorldState s;
  s.half_extent = 1.0;
  const auto profiles = agent_profiles(spec);
  s.agents.resize(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    s.agents[i].size = profiles[i].size;
    s.agents[i].accel = profiles[i].accel;
    s.agents[i].max_speed = profiles[i].max_speed;
    s.agents[i].movable = true;
  }
  s.landmarks.resize(static_cast<std::size_t>(spec.n_landmarks));
  for (auto& l : s.landmarks) {
    l.size = landmark_size(spec);
    l.movable = false;
    l.accel = 0.0;
  }

  const std::size_t team = static_cast<std::size_t>(spec.n_agents);
  const double lsize = landmark_size(spec);
  double max_adv_size = 0.0;
  for (std::size_t i = team; i < s.agents.size(); ++i)
    max_adv_size = std::max(max_adv_size, s.agents[i].size);

  if (!spec.symmetry_breaking) {
    for (auto& a : s.agents) a.position = uniform_in_bounds(rng, s.half_extent, a.size);
    place_landmarks(s.landmarks, [&] { return uniform_in_bounds(rng, s.half_extent, lsize); });
  } else {
    switch (spec.kind) {
      case TaskKind::coop_nav:
      case TaskKind::hetero_nav:
      case TaskKind::phy_decep: {
        // Everyone at the origin; landmarks on the largest circle that keeps
        // them inside the world.
        const double r = s.half_extent - lsize;
        place_landmarks(s.landmarks, [&] { return on_circle(rng, r); });
        break;
      }
      case TaskKind::pred_prey: {
        const double r = s.half_extent - max_adv_size;
        for (std::size_t i = team; i < s.agents.size(); ++i) s.agents[i].position = on_circle(rng, r);
        place_landmarks(s.landmarks, [&] { return uniform_in_bounds(rng, s.half_extent, lsize); });
        break;
      }
      case TaskKind::keep_away: {
        const double r = s.half_extent - std::max(lsize, max_adv_size);
        for (std::size_t i = team; i < s.agents.size(); ++i) s.agents[i].position = on_circle(rng, r);
        place_landmarks(s.landmarks, [&] { return on_circle(rng, r); });
        break;
      }
    }
  }

  if (spec.has_goal()) {
    std::uniform_int_distribution<std::size_t> pick(0, s.landmarks.size() - 1);
    s.goal = pick(rng);
  }
  return s;
}

ObservationLayout::ObservationLayout(std::size_t n_agents, std::size_t n_landmarks)
    : n_agents_(n_agents), n_landmarks_(n_landmarks) {
  entity_of_index_.resize(4 * n_agents + 2 * n_landmarks);
  for (std::size_t k = 0; k < n_agents; ++k) {
    entity_of_index_[2 * k] = entity_of_index_[2 * k + 1] = k;
    entity_of_index_[2 * n_agents + 2 * k] = entity_of_index_[2 * n_agents + 2 * k + 1] = k;
  }
  for (std::size_t l = 0; l < n_landmarks; ++l)
    entity_of_index_[4 * n_agents + 2 * l] = entity_of_index_[4 * n_agents + 2 * l + 1] =
        n_agents + l;
}

ObservationLayout::ObservationLayout(const TaskSpec& spec)
    : ObservationLayout(static_cast<std::size_t>(spec.total_agents()),
                        static_cast<std::size_t>(spec.n_landmarks)) {}

std::size_t ObservationLayout::position_offset(std::size_t entity) const {
  require(entity < n_entities(), "entity index out of range");
  return entity < n_agents_ ? 2 * entity : 4 * n_agents_ + 2 * (entity - n_agents_);
}

std::vector<std::size_t> ObservationLayout::group_indices(std::size_t entity) const {
  const std::size_t p = position_offset(entity);
  if (entity < n_agents_) {
    const std::size_t v = velocity_offset(entity);
    return {p, p + 1, v, v + 1};
  }
  return {p, p + 1};
}

Visibility visibility(const WorldState& state, std::size_t observer, double tau) {
  require(observer < state.agents.size(), "observer index out of range");
  const Vec2 me = state.agents[observer].position;
  Visibility vis(state.agents.size() + state.landmarks.size(), false);
  for (std::size_t k = 0; k < state.agents.size(); ++k)
    vis[k] = k == observer || distance(me, state.agents[k].position) <= tau;
  for (std::size_t l = 0; l < state.landmarks.size(); ++l)
    vis[state.agents.size() + l] = distance(me, state.landmarks[l].position) <= tau;
  return vis;
}

ObservationVector observe(const WorldState& state, std::size_t observer, const TaskSpec& spec) {
  require(state.agents.size() == static_cast<std::size_t>(spec.total_agents()) &&
              state.landmarks.size() == static_cast<std::size_t>(spec.n_landmarks),
          "observe: state does not match task spec");
  const ObservationLayout layout(spec);
  ObservationVector obs;
  obs.visibility = visibility(state, observer, spec.tau);
  obs.values.assign(layout.dim(), 0.0);
  const std::size_t n = state.agents.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (!obs.visibility[k]) continue;
    const auto& a = state.agents[k];
    const std::size_t p = layout.position_offset(k);
    const std::size_t v = layout.velocity_offset(k);
    obs.values[p] = a.position.x;
    obs.values[p + 1] = a.position.y;
    obs.values[v] = a.velocity.x;
    obs.values[v + 1] = a.velocity.y;
  }
  for (std::size_t l = 0; l < state.landmarks.size(); ++l) {
    if (!obs.visibility[n + l]) continue;
    const std::size_t p = layout.position_offset(n + l);
    obs.values[p] = state.landmarks[l].position.x;
    obs.values[p + 1] = state.landmarks[l].position.y;
  }
  return obs;
}

namespace {

void check_state(const WorldState& s, const TaskSpec& spec, const char* what) {
  if (s.agents.size() != static_cast<std::size_t>(spec.total_agents()) ||
      s.landmarks.size() != static_cast<std::size_t>(spec.n_landmarks))
    throw ContractViolation(std::string(what) + ": state does not match task spec");
  if (spec.has_goal() && (!s.goal || *s.goal >= s.landmarks.size()))
    throw ContractViolation(std::string(what) + ": task needs a goal landmark");
}

}  // namespace

std::vector<double> extrinsic_reward(const WorldState& before, std::span<const Action> actions,
                                     const WorldState& after, const TaskSpec& spec) {
  check_state(before, spec, "extrinsic_reward");
  check_state(after, spec, "extrinsic_reward");
  require(actions.size() == after.agents.size(), "extrinsic_reward: action count mismatch");

  const std::size_t team = static_cast<std::size_t>(spec.n_agents);
  const std::size_t n = after.agents.size();
  std::vector<double> r(n, 0.0);

  auto team_on = [&](const Entity& landmark) {
    for (std::size_t i = 0; i < team; ++i)
      if (overlapping(after.agents[i], landmark)) return true;
    return false;
  };

  switch (spec.kind) {
    case TaskKind::coop_nav:
    case TaskKind::hetero_nav: {
      double occupied = 0.0;
      for (const auto& l : after.landmarks) occupied += team_on(l) ? 1.0 : 0.0;
      for (std::size_t i = 0; i < team; ++i) r[i] = occupied;
      break;
    }
    case TaskKind::phy_decep: {
      const Entity& goal = after.landmarks[*after.goal];
      bool adv_on_goal = false;
      for (std::size_t k = team; k < n; ++k) {
        const bool on = overlapping(after.agents[k], goal);
        r[k] = on ? 1.0 : 0.0;
        adv_on_goal = adv_on_goal || on;
      }
      const double shared = (team_on(goal) ? 1.0 : 0.0) - (adv_on_goal ? 1.0 : 0.0);
      for (std::size_t i = 0; i < team; ++i) r[i] = shared;
      break;
    }
    case TaskKind::keep_away: {
      const double shared = team_on(after.landmarks[*after.goal]) ? 1.0 : 0.0;
      for (std::size_t i = 0; i < team; ++i) r[i] = shared;
      for (std::size_t k = team; k < n; ++k)
        for (std::size_t i = 0; i < team; ++i)
          if (overlapping(after.agents[k], after.agents[i])) r[k] += 1.0;
      break;
    }
    case TaskKind::pred_prey: {
      for (std::size_t k = team; k < n; ++k) {
        for (std::size_t i = 0; i < team; ++i) {
          if (overlapping(after.agents[k], after.agents[i])) {
            r[i] -= 1.0;
            r[k] += 1.0;
          }
        }
      }
      break;
    }
  }
  return r;
}

StepMetrics step_metrics(const WorldState& state, const TaskSpec& spec) {
  check_state(state, spec, "step_metrics");
  const std::size_t team = static_cast<std::size_t>(spec.n_agents);
  const std::size_t n = state.agents.size();
  StepMetrics m;

  for (const auto& l : state.landmarks) {
    for (std::size_t i = 0; i < team; ++i) {
      if (overlapping(state.agents[i], l)) {
        ++m.occupancy_count;
        break;
      }
    }
  }
  for (std::size_t i = 0; i < team; ++i)
    for (std::size_t k = team; k < n; ++k)
      if (overlapping(state.agents[i], state.agents[k])) ++m.collision_count;

  // Target: the goal landmark where the task has one, else the nearest landmark.
  m.min_agent_target_dist.resize(team);
  for (std::size_t i = 0; i < team; ++i) {
    const Vec2 p = state.agents[i].position;
    if (spec.has_goal()) {
      m.min_agent_target_dist[i] = distance(p, state.landmarks[*state.goal].position);
    } else {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& l : state.landmarks) best = std::min(best, distance(p, l.position));
      m.min_agent_target_dist[i] = best;
    }
  }
  if (n > team) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < team; ++i)
      for (std::size_t k = team; k < n; ++k)
        best = std::min(best, distance(state.agents[i].position, state.agents[k].position));
    m.min_adv_agent_dist = best;
  }
  return m;
}

}  // namespace elign
