#include "elign/intrinsic.hpp"

#include <cmath>

#include "elign/error.hpp"

namespace elign {

const char* to_string(RewardMode mode) {
  switch (mode) {
    case RewardMode::sparse: return "sparse";
    case RewardMode::curio_self: return "curio_self";
    case RewardMode::curio_team: return "curio_team";
    case RewardMode::elign_self: return "elign_self";
    case RewardMode::elign_team: return "elign_team";
    case RewardMode::elign_adv: return "elign_adv";
  }
  return "?";
}

RewardMode reward_mode_from_string(const std::string& name) {
  for (auto m : {RewardMode::sparse, RewardMode::curio_self, RewardMode::curio_team,
                 RewardMode::elign_self, RewardMode::elign_team, RewardMode::elign_adv})
    if (name == to_string(m)) return m;
  throw ConfigError("unknown reward_mode '" + name + "'");
}

bool uses_dynamics(RewardMode mode) { return mode != RewardMode::sparse; }

void check_mode_for_task(RewardMode mode, const TaskSpec& spec) {
  if (mode == RewardMode::elign_adv && spec.n_adversaries == 0)
    throw ConfigError(std::string("elign_adv requires adversaries; ") + to_string(spec.kind) +
                      " has none");
}

NeighborSets neighbor_sets(const WorldState& state, const TaskSpec& spec) {
  const std::size_t n = state.agents.size();
  require(n == static_cast<std::size_t>(spec.total_agents()), "neighbor_sets: state/spec mismatch");
  NeighborSets s;
  s.team.resize(n);
  s.adv.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const bool near =
          j == i || distance(state.agents[i].position, state.agents[j].position) <= spec.tau;
      if (!near) continue;
      if (spec.is_team(i) == spec.is_team(j))
        s.team[i].push_back(j);
      else
        s.adv[i].push_back(j);
    }
  }
  return s;
}

std::vector<double> intersect(const ObservationLayout& layout, std::span<const double> obs_i,
                              const Visibility& mask) {
  require(obs_i.size() == layout.dim(), "intersect: observation dim does not match layout");
  require(mask.size() == layout.n_entities(), "intersect: mask size does not match layout");
  std::vector<double> out(obs_i.begin(), obs_i.end());
  for (std::size_t k = 0; k < out.size(); ++k)
    if (!mask[layout.entity_of_index(k)]) out[k] = 0.0;
  return out;
}

std::vector<double> intersect(const ObservationLayout& layout, const ObservationVector& obs_i,
                              const ObservationVector& obs_j) {
  return intersect(layout, obs_i.values, obs_j.visibility);
}

double elign_self(std::span<const double> next_obs, std::span<const double> prediction) {
  require(next_obs.size() == prediction.size(), "elign_self: dimension mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < next_obs.size(); ++k) {
    const double d = next_obs[k] - prediction[k];
    s += d * d;
  }
  return -std::sqrt(s);
}

namespace {

const NeighborMask& self_mask(const Transition& t, std::size_t agent) {
  for (const auto& m : t.team_neighbors)
    if (m.agent == agent) return m;
  throw ContractViolation("transition lacks the agent's own neighbor snapshot");
}

Visibility combined(const Visibility& a, const Visibility& b) {
  require(a.size() == b.size(), "visibility snapshots differ in size");
  Visibility out(a.size());
  for (std::size_t e = 0; e < a.size(); ++e) out[e] = a[e] && b[e];
  return out;
}

double mean_norm(const Transition& t, std::size_t agent, std::span<const NeighborMask> set,
                 const ObservationLayout& layout, const Predictor& f, IntrinsicScore* tally) {
  if (set.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& m : set) {
    const NeighborError e = neighbor_error(t, agent, m, layout, f);
    sum += e.norm;
    if (tally) {
      tally->squared_error_sum += e.squared_sum;
      tally->entries += layout.dim();
    }
  }
  return sum / static_cast<double>(set.size());
}

}  // namespace

NeighborError neighbor_error(const Transition& t, std::size_t agent, const NeighborMask& neighbor,
                             const ObservationLayout& layout, const Predictor& f) {
  if (!f) throw ContractViolation("intrinsic reward needs a dynamics model");
  const Visibility mask = combined(self_mask(t, agent).before, neighbor.before);
  const std::vector<double> input = intersect(layout, t.obs, mask);
  const std::vector<double> target = intersect(layout, t.next_obs, mask);
  const std::vector<double> pred = f(input, t.action);
  require(pred.size() == target.size(), "dynamics prediction has the wrong dimension");
  NeighborError e;
  e.neighbor = neighbor.agent;
  for (std::size_t k = 0; k < target.size(); ++k) {
    const double d = target[k] - pred[k];
    e.squared_sum += d * d;
  }
  e.norm = std::sqrt(e.squared_sum);
  return e;
}

double elign_self(const Transition& t, std::size_t agent, const ObservationLayout& layout,
                  const Predictor& f) {
  return -neighbor_error(t, agent, self_mask(t, agent), layout, f).norm;
}

double elign_team(const Transition& t, std::size_t agent, const ObservationLayout& layout,
                  const Predictor& f) {
  return -mean_norm(t, agent, t.team_neighbors, layout, f, nullptr);
}

double elign_adv(const Transition& t, std::size_t agent, const ObservationLayout& layout,
                 const Predictor& f) {
  return mean_norm(t, agent, t.adv_neighbors, layout, f, nullptr);
}

double curio_self(const Transition& t, std::size_t agent, const ObservationLayout& layout,
                  const Predictor& f) {
  return -elign_self(t, agent, layout, f);
}

double curio_team(const Transition& t, std::size_t agent, const ObservationLayout& layout,
                  const Predictor& f) {
  return -elign_team(t, agent, layout, f);
}

IntrinsicScore intrinsic_reward(RewardMode mode, const Transition& t, std::size_t agent,
                                const ObservationLayout& layout, const Predictor& f) {
  IntrinsicScore s;
  switch (mode) {
    case RewardMode::sparse: break;
    case RewardMode::elign_self:
    case RewardMode::curio_self: {
      const NeighborError e = neighbor_error(t, agent, self_mask(t, agent), layout, f);
      s.r_in = mode == RewardMode::elign_self ? -e.norm : e.norm;
      s.squared_error_sum = e.squared_sum;
      s.entries = layout.dim();
      break;
    }
    case RewardMode::elign_team:
    case RewardMode::curio_team: {
      const double m = mean_norm(t, agent, t.team_neighbors, layout, f, &s);
      s.r_in = mode == RewardMode::elign_team ? -m : m;
      break;
    }
    case RewardMode::elign_adv: s.r_in = mean_norm(t, agent, t.adv_neighbors, layout, f, &s); break;
  }
  return s;
}

IntrinsicRewardRecord total_reward(double r_ex, double r_in, std::size_t obs_dim,
                                   std::size_t agent) {
  require(obs_dim >= 1, "total_reward: obs_dim must be >= 1");
  IntrinsicRewardRecord r;
  r.agent = agent;
  r.r_ex = r_ex;
  r.r_in = r_in;
  r.beta = 1.0 / static_cast<double>(obs_dim);
  r.r_total = r_ex + r.beta * r_in;
  return r;
}

}  // namespace elign
