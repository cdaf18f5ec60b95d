#include "elign/world.hpp"

#include <algorithm>
#include <string>

#include "elign/error.hpp"

namespace elign {

Action action_from_index(int index) {
  require(index >= 0 && index < kNumActions, "action index out of range: " + std::to_string(index));
  return static_cast<Action>(index);
}

Vec2 direction(Action a) {
  switch (a) {
    case Action::stay: return {0.0, 0.0};
    case Action::up: return {0.0, 1.0};
    case Action::down: return {0.0, -1.0};
    case Action::left: return {-1.0, 0.0};
    case Action::right: return {1.0, 0.0};
  }
  return {};
}

Entity step_entity(const Entity& e, Action a, double half_extent, const PhysicsParams& physics) {
  Entity out = e;
  if (!e.movable) return out;

  const Vec2 force = e.accel * direction(a);
  out.velocity = (1.0 - physics.damping) * e.velocity + physics.dt * force;
  if (e.max_speed) {
    const double speed = out.velocity.norm();
    if (speed > *e.max_speed) out.velocity = (*e.max_speed / speed) * out.velocity;
  }
  out.position = e.position + physics.dt * out.velocity;

  const double limit = half_extent - e.size;
  auto clamp_axis = [limit](double& p, double& v) {
    if (p > limit) {
      p = limit;
      v = 0.0;
    } else if (p < -limit) {
      p = -limit;
      v = 0.0;
    }
  };
  clamp_axis(out.position.x, out.velocity.x);
  clamp_axis(out.position.y, out.velocity.y);
  return out;
}

WorldState apply_actions(const WorldState& state, std::span<const Action> actions,
                         const PhysicsParams& physics) {
  require(actions.size() == state.agents.size(),
          "apply_actions: expected " + std::to_string(state.agents.size()) + " actions, got " +
              std::to_string(actions.size()));
  WorldState next = state;
  for (std::size_t i = 0; i < state.agents.size(); ++i)
    next.agents[i] = step_entity(state.agents[i], actions[i], state.half_extent, physics);
  next.step_index = state.step_index + 1;
  return next;
}

bool overlapping(const Entity& a, const Entity& b) {
  return distance(a.position, b.position) < a.size + b.size;
}

DistanceMatrix pairwise_distance(const WorldState& state) {
  DistanceMatrix m;
  m.n = state.agents.size();
  m.values.assign(m.n * m.n, 0.0);
  for (std::size_t i = 0; i < m.n; ++i) {
    for (std::size_t j = i + 1; j < m.n; ++j) {
      const double d = distance(state.agents[i].position, state.agents[j].position);
      m.values[i * m.n + j] = d;
      m.values[j * m.n + i] = d;
    }
  }
  return m;
}

}  // namespace elign
