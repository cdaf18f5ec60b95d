#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace elign {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
  friend bool operator==(Vec2, Vec2) = default;

  double norm() const { return std::sqrt(x * x + y * y); }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

struct Entity {
  Vec2 position;
  Vec2 velocity;
  double size = 0.05;
  bool movable = true;
  std::optional<double> max_speed;
  double accel = 5.0;

  friend bool operator==(const Entity&, const Entity&) = default;
};

// Team agents come first in `agents`, adversaries after them; the order is
// fixed for an episode because observation slots are indexed by it.
struct WorldState {
  std::vector<Entity> agents;
  std::vector<Entity> landmarks;
  std::int64_t step_index = 0;
  double half_extent = 1.0;
  std::optional<std::size_t> goal;  // goal landmark, for tasks that have one

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

enum class Action : std::uint8_t { stay = 0, up = 1, down = 2, left = 3, right = 4 };
inline constexpr int kNumActions = 5;

Action action_from_index(int index);
inline int to_index(Action a) { return static_cast<int>(a); }
Vec2 direction(Action a);

struct PhysicsParams {
  double dt = 0.1;
  double damping = 0.25;
};

// One simulation step: force = accel * dir(action); v <- v(1 - damping) + f dt;
// speed clip; x <- x + v dt; clamp to [-(half_extent - size), half_extent - size]
// per axis, zeroing velocity on a clamped axis. Landmarks never move.
WorldState apply_actions(const WorldState& state, std::span<const Action> actions,
                         const PhysicsParams& physics = {});

// Single-entity version of the same update; apply_actions is built on it.
Entity step_entity(const Entity& e, Action a, double half_extent, const PhysicsParams& physics = {});

bool overlapping(const Entity& a, const Entity& b);

// Symmetric agent-center distance matrix, row-major n x n.
struct DistanceMatrix {
  std::size_t n = 0;
  std::vector<double> values;

  double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
};

DistanceMatrix pairwise_distance(const WorldState& state);

}  // namespace elign
