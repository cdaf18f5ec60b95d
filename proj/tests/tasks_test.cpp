#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "elign/error.hpp"
#include "elign/tasks.hpp"
#include "support/oracles.hpp"

using namespace elign;

namespace {

constexpr TaskKind kAllKinds[] = {TaskKind::coop_nav, TaskKind::hetero_nav, TaskKind::phy_decep,
                                  TaskKind::keep_away, TaskKind::pred_prey};

WorldState bare_state(std::vector<Vec2> agents, std::vector<Vec2> landmarks) {
  WorldState s;
  for (Vec2 p : agents) {
    Entity e;
    e.position = p;
    s.agents.push_back(e);
  }
  for (Vec2 p : landmarks) {
    Entity e;
    e.position = p;
    e.movable = false;
    s.landmarks.push_back(e);
  }
  return s;
}

}  // namespace

TEST(TaskSpec, DefaultsValidateAndCountsFollowConventions) {
  for (TaskKind k : kAllKinds) {
    const TaskSpec s = TaskSpec::defaults(k);
    EXPECT_NO_THROW(s.validate()) << to_string(k);
    EXPECT_EQ(task_kind_from_string(to_string(k)), k);
  }
  TaskSpec bad = TaskSpec::defaults(TaskKind::coop_nav);
  bad.n_adversaries = 1;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = TaskSpec::defaults(TaskKind::coop_nav);
  bad.n_landmarks = 2;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = TaskSpec::defaults(TaskKind::phy_decep);
  bad.n_landmarks = 1;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = TaskSpec::defaults(TaskKind::coop_nav);
  bad.tau = 0.0;
  EXPECT_THROW(bad.validate(), ConfigError);
  EXPECT_THROW(task_kind_from_string("soccer"), ConfigError);
}

TEST(Reset, VelocitiesZeroAndDeterministic) {
  for (TaskKind k : kAllKinds) {
    for (bool sym : {false, true}) {
      TaskSpec spec = TaskSpec::defaults(k);
      spec.symmetry_breaking = sym;
      std::mt19937_64 a(5);
      std::mt19937_64 b(5);
      const WorldState s1 = reset(spec, a);
      EXPECT_EQ(s1, reset(spec, b));
      for (const auto& e : s1.agents) EXPECT_EQ(e.velocity, (Vec2{0.0, 0.0}));
      EXPECT_EQ(s1.goal.has_value(), spec.has_goal());
    }
  }
}

TEST(Reset, StandardPlacementsInBoundsWithDisjointLandmarks) {
  std::mt19937_64 rng(1);
  for (TaskKind k : kAllKinds) {
    const TaskSpec spec = TaskSpec::defaults(k);
    for (int trial = 0; trial < 200; ++trial) {
      const WorldState s = reset(spec, rng);
      for (const auto& e : s.agents) {
        EXPECT_LE(std::abs(e.position.x), 1.0 - e.size);
        EXPECT_LE(std::abs(e.position.y), 1.0 - e.size);
      }
      for (std::size_t i = 0; i < s.landmarks.size(); ++i)
        for (std::size_t j = i + 1; j < s.landmarks.size(); ++j)
          EXPECT_FALSE(overlapping(s.landmarks[i], s.landmarks[j]));
    }
  }
}

TEST(Reset, SymmetryBreakingCoopNavIsEquidistant) {
  TaskSpec spec = TaskSpec::defaults(TaskKind::coop_nav);
  spec.symmetry_breaking = true;
  std::mt19937_64 rng(2);
  const WorldState s = reset(spec, rng);
  double lo = 1e9;
  double hi = -1e9;
  for (const auto& a : s.agents) {
    EXPECT_EQ(a.position, (Vec2{0.0, 0.0}));
    for (const auto& l : s.landmarks) {
      const double d = std::hypot(a.position.x - l.position.x, a.position.y - l.position.y);
      lo = std::min(lo, d);
      hi = std::max(hi, d);
    }
  }
  EXPECT_LT(hi - lo, 1e-9);
  EXPECT_NEAR(hi, 1.0 - kBaseLandmarkSize, 1e-12);
  EXPECT_EQ(step_metrics(s, spec).occupancy_count, 0);
}

TEST(Layout, DimensionFormulaAndSharedIndexing) {
  for (TaskKind k : kAllKinds) {
    const TaskSpec spec = TaskSpec::defaults(k);
    const ObservationLayout layout(spec);
    const std::size_t n = static_cast<std::size_t>(spec.total_agents());
    EXPECT_EQ(layout.dim(), 4 + 2 * static_cast<std::size_t>(spec.n_landmarks) + 4 * (n - 1));
    for (std::size_t idx = 0; idx < layout.dim(); ++idx) EXPECT_EQ(layout.entity_of_index(idx), oracle::entity_of(idx, n));
  }
}

TEST(Observe, MatchesBruteForceAndZeroConsistency) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 500; ++trial) {
    const TaskSpec spec = oracle::random_task(rng);
    const WorldState s = oracle::random_state(spec, rng);
    const ObservationLayout layout(spec);
    for (std::size_t i = 0; i < s.agents.size(); ++i) {
      const ObservationVector o = observe(s, i, spec);
      ASSERT_EQ(o.values, oracle::observation(s, i, spec.tau));
      ASSERT_EQ(o.visibility, oracle::visible(s, i, spec.tau));
      EXPECT_TRUE(o.visibility[i]);
      for (std::size_t e = 0; e < layout.n_entities(); ++e) {
        if (o.visibility[e]) continue;
        for (std::size_t k : layout.group_indices(e)) EXPECT_EQ(o.values[k], 0.0);
      }
    }
  }
}

TEST(Observe, FullObservabilityShowsEverything) {
  std::mt19937_64 rng(6);
  TaskSpec spec = TaskSpec::defaults(TaskKind::pred_prey);
  spec.tau = kFullObservability;
  const WorldState s = oracle::random_state(spec, rng);
  const auto o = observe(s, 1, spec);
  EXPECT_TRUE(std::all_of(o.visibility.begin(), o.visibility.end(), [](bool v) { return v; }));
}

TEST(Observe, ThresholdHidesFarAgentAndKeepsBoundary) {
  TaskSpec spec = TaskSpec::defaults(TaskKind::coop_nav);
  spec.n_agents = 2;
  spec.n_landmarks = 1;
  const WorldState s = bare_state({{0.0, 0.0}, {0.6, 0.0}}, {{0.3, 0.4}});
  const auto o = observe(s, 0, spec);
  const ObservationLayout layout(spec);
  EXPECT_FALSE(o.visibility[1]);
  for (std::size_t k : layout.group_indices(1)) EXPECT_EQ(o.values[k], 0.0);
  EXPECT_TRUE(o.visibility[2]);
  EXPECT_EQ(o.values[layout.position_offset(2)], 0.3);
  EXPECT_EQ(o.values[layout.position_offset(2) + 1], 0.4);
}

TEST(Observe, VisibilityIsMonotoneInTau) {
  std::mt19937_64 rng(8);
  const double taus[] = {0.1, 0.3, 0.5, 0.8, 1.5, kFullObservability};
  for (int trial = 0; trial < 300; ++trial) {
    const TaskSpec spec = oracle::random_task(rng);
    const WorldState s = oracle::random_state(spec, rng);
    for (std::size_t i = 0; i < s.agents.size(); ++i) {
      for (std::size_t a = 0; a + 1 < std::size(taus); ++a) {
        const auto lo = visibility(s, i, taus[a]);
        const auto hi = visibility(s, i, taus[a + 1]);
        for (std::size_t e = 0; e < lo.size(); ++e) EXPECT_TRUE(!lo[e] || hi[e]);
      }
    }
  }
}

TEST(ExtrinsicReward, CoopNavCountsOccupiedLandmarks) {
  TaskSpec spec = TaskSpec::defaults(TaskKind::coop_nav);
  WorldState before = bare_state({{0.9, 0.9}, {-0.9, 0.9}, {0.0, -0.9}}, {{0.0, 0.0}, {0.5, 0.0}, {-0.5, 0.0}});
  const std::vector<Action> stay(3, Action::stay);
  for (double r : extrinsic_reward(before, stay, before, spec)) EXPECT_EQ(r, 0.0);

  WorldState after = before;
  after.agents[0].position = {0.0, 0.02};
  after.agents[1].position = {0.52, 0.0};
  const auto r = extrinsic_reward(before, stay, after, spec);
  int occupied = 0;
  for (const auto& l : after.landmarks) {
    bool any = false;
    for (const auto& a : after.agents) any = any || std::hypot(a.position.x - l.position.x, a.position.y - l.position.y) < a.size + l.size;
    occupied += any;
  }
  ASSERT_EQ(occupied, 2);
  for (double x : r) EXPECT_EQ(x, 2.0);
}

TEST(ExtrinsicReward, PredPreySingleCapture) {
  TaskSpec spec = TaskSpec::defaults(TaskKind::pred_prey);
  std::mt19937_64 rng(3);
  WorldState s = reset(spec, rng);
  s.agents[0].position = {0.0, 0.0};
  s.agents[1].position = {0.8, 0.8};
  s.agents[2].position = {0.05, 0.0};
  s.agents[3].position = {-0.8, -0.8};
  const std::vector<Action> stay(4, Action::stay);
  EXPECT_EQ(extrinsic_reward(s, stay, s, spec), (std::vector<double>{-1.0, 0.0, 1.0, 0.0}));
  const auto m = step_metrics(s, spec);
  EXPECT_EQ(m.collision_count, 1);
}

TEST(ExtrinsicReward, GoalTasks) {
  std::mt19937_64 rng(5);
  TaskSpec pd = TaskSpec::defaults(TaskKind::phy_decep);
  WorldState s = reset(pd, rng);
  s.goal = 0;
  s.landmarks[0].position = {0.0, 0.0};
  s.landmarks[1].position = {0.7, 0.7};
  s.agents[0].position = {0.0, 0.0};
  s.agents[1].position = {-0.7, 0.7};
  s.agents[2].position = {0.7, -0.7};
  const std::vector<Action> stay3(3, Action::stay);
  EXPECT_EQ(extrinsic_reward(s, stay3, s, pd), (std::vector<double>{1.0, 1.0, 0.0}));
  s.agents[2].position = {0.01, 0.0};
  EXPECT_EQ(extrinsic_reward(s, stay3, s, pd), (std::vector<double>{0.0, 0.0, 1.0}));

  TaskSpec ka = TaskSpec::defaults(TaskKind::keep_away);
  WorldState k = reset(ka, rng);
  k.goal = 1;
  k.landmarks[1].position = {0.5, 0.5};
  k.landmarks[0].position = {-0.5, -0.5};
  k.agents[0].position = {0.5, 0.5};
  k.agents[1].position = {0.0, 0.0};
  k.agents[2].position = {0.02, 0.0};
  k.agents[3].position = {0.9, -0.9};
  const std::vector<Action> stay4(4, Action::stay);
  EXPECT_EQ(extrinsic_reward(k, stay4, k, ka), (std::vector<double>{1.0, 1.0, 1.0, 0.0}));
}

TEST(ExtrinsicReward, TeamRewardsAreSharedOnNavigationTasks) {
  std::mt19937_64 rng(12);
  for (TaskKind kind : {TaskKind::coop_nav, TaskKind::hetero_nav}) {
    const TaskSpec spec = TaskSpec::defaults(kind);
    for (int trial = 0; trial < 300; ++trial) {
      const auto st = oracle::random_step(spec, rng);
      for (const auto& t : st.transitions) EXPECT_EQ(t.reward, st.transitions.front().reward);
    }
  }
}

TEST(StepMetrics, SetSemanticsAndBruteForceDistances) {
  TaskSpec spec = TaskSpec::defaults(TaskKind::coop_nav);
  WorldState s = bare_state({{0.0, 0.0}, {0.01, 0.0}, {0.9, 0.9}}, {{0.0, 0.0}, {0.5, 0.0}, {-0.5, 0.0}});
  EXPECT_EQ(step_metrics(s, spec).occupancy_count, 1);

  std::mt19937_64 rng(9);
  const TaskSpec pp = TaskSpec::defaults(TaskKind::pred_prey);
  for (int trial = 0; trial < 200; ++trial) {
    const WorldState w = oracle::random_state(pp, rng);
    const auto m = step_metrics(w, pp);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < pp.n_agents; ++i)
      for (int k = pp.n_agents; k < pp.total_agents(); ++k)
        best = std::min(best, std::hypot(w.agents[i].position.x - w.agents[k].position.x,
                                         w.agents[i].position.y - w.agents[k].position.y));
    ASSERT_TRUE(m.min_adv_agent_dist.has_value());
    EXPECT_NEAR(*m.min_adv_agent_dist, best, 1e-15);
    EXPECT_LE(m.occupancy_count, pp.n_landmarks);
  }
}

TEST(HeterogeneousProfile, HalfSlowBigHalfFastSmall) {
  TaskSpec spec = TaskSpec::defaults(TaskKind::hetero_nav);
  const auto p = heterogeneous_profile(spec);
  ASSERT_EQ(p.size(), 4u);
  EXPECT_GT(p[0].size, p[2].size);
  EXPECT_LT(*p[0].max_speed, *p[3].max_speed);
  EXPECT_EQ(p[0].size, 2 * kBaseAgentSize);
  EXPECT_EQ(p[3].size, 0.5 * kBaseAgentSize);
  spec.n_agents = 3;
  spec.n_landmarks = 3;
  EXPECT_THROW(heterogeneous_profile(spec), ConfigError);
}
