#pragma once

#include <cstddef>
#include <vector>

#include "elign/tasks.hpp"
#include "elign/world.hpp"

namespace elign {

// Visibility snapshot of one neighbor, entity-indexed like ObservationLayout.
struct NeighborMask {
  std::size_t agent = 0;
  Visibility before;  // neighbor's visibility at the pre-action step
  Visibility after;   // ... and at the post-action step

  friend bool operator==(const NeighborMask&, const NeighborMask&) = default;
};

// One agent's experience for one environment step. `team_neighbors` includes
// the agent itself; both neighbor lists are empty on re-scored copies.
struct Transition {
  std::vector<double> obs;
  Action action = Action::stay;
  double reward = 0.0;
  std::vector<double> next_obs;
  bool done = false;
  std::vector<NeighborMask> team_neighbors;
  std::vector<NeighborMask> adv_neighbors;

  friend bool operator==(const Transition&, const Transition&) = default;
};

}  // namespace elign
