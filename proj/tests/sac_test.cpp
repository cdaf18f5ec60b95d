#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>

#include "elign/error.hpp"
#include "elign/replay_buffer.hpp"
#include "elign/sac.hpp"
#include "support/oracles.hpp"

using namespace elign;
using namespace elign::sac;

namespace {

SacConfig small_config() {
  SacConfig c;
  c.hidden = {16, 16};
  c.batch_size = 32;
  c.buffer_capacity = 1000;
  return c;
}

Transition random_transition(int dim, std::mt19937_64& rng, double reward = 0.0) {
  std::uniform_real_distribution<double> u(-1, 1);
  std::uniform_int_distribution<int> a(0, kNumActions - 1);
  Transition t;
  t.obs.resize(static_cast<std::size_t>(dim));
  t.next_obs.resize(static_cast<std::size_t>(dim));
  for (auto& x : t.obs) x = u(rng);
  for (auto& x : t.next_obs) x = u(rng);
  t.action = action_from_index(a(rng));
  t.reward = reward;
  return t;
}

std::vector<const Transition*> pointers(const std::vector<Transition>& v) {
  std::vector<const Transition*> p;
  for (const auto& t : v) p.push_back(&t);
  return p;
}

}  // namespace

TEST(ReplayBuffer, FifoEvictionAndRoundTrip) {
  ReplayBuffer b(3);
  std::mt19937_64 rng(1);
  std::vector<Transition> pushed;
  for (int k = 0; k < 4; ++k) {
    pushed.push_back(random_transition(4, rng, k));
    b.push(pushed.back());
  }
  EXPECT_EQ(b.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(b.at(i), pushed[i + 1]);
  EXPECT_EQ(*b.latest(1).front(), pushed.back());

  ReplayBuffer one(5);
  one.push(pushed[0]);
  for (const Transition* t : one.sample(10, rng)) EXPECT_EQ(*t, pushed[0]);
  EXPECT_THROW(ReplayBuffer(5).sample(1, rng), ContractViolation);
}

TEST(Learner, ShapesMirrorAndEntropyNearLogFive) {
  std::mt19937_64 rng(2);
  const AgentLearner l(10, SacConfig{}, 3);
  EXPECT_TRUE(l.target_critic1.same_shape(l.critic1));
  EXPECT_TRUE(l.target_critic2.same_shape(l.critic2));
  EXPECT_TRUE(l.target_critic1 == l.critic1);
  EXPECT_EQ(l.actor_spec.output_dim(), kNumActions);
  EXPECT_EQ(l.config.gamma, 0.95);
  EXPECT_EQ(l.config.entropy_coeff, 0.1);
  EXPECT_EQ(l.config.batch_size, 1024u);
  EXPECT_EQ(l.buffer_d.capacity(), 1000000u);
  double h = 0.0;
  for (int k = 0; k < 200; ++k) {
    const auto p = l.action_probabilities(random_transition(10, rng).obs);
    for (double x : p) h -= x * std::log(x);
  }
  EXPECT_NEAR(h / 200.0, std::log(5.0), 0.2);
}

TEST(Learner, GreedyTieBreaksToFirstIndexAndFollowsArgmax) {
  std::mt19937_64 rng(3);
  AgentLearner l(4, small_config(), 1);
  l.actor = nn::MlpParams::zeros(l.actor_spec);
  EXPECT_EQ(l.select_action(std::vector<double>(4, 0.3), ActionMode::greedy, rng), Action::stay);
  l.actor.layers.back().bias(3) = 100.0;
  EXPECT_EQ(l.select_action(std::vector<double>(4, 0.3), ActionMode::greedy, rng), Action::left);
  int hits = 0;
  for (int k = 0; k < 1000; ++k) hits += l.select_action(std::vector<double>(4, 0.3), ActionMode::sample, rng) == Action::left;
  EXPECT_GT(hits, 990);
  l.actor.layers.back().bias(1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(l.select_action(std::vector<double>(4, 0.3), ActionMode::greedy, rng), NumericError);
}

TEST(Learner, SampledSequencesAreSeeded) {
  const AgentLearner l(4, small_config(), 5);
  auto draw = [&] {
    std::mt19937_64 rng(9);
    std::vector<Action> out;
    for (int k = 0; k < 50; ++k) out.push_back(l.select_action(std::vector<double>{0.1, 0.2, 0.3, 0.4}, ActionMode::sample, rng));
    return out;
  };
  EXPECT_EQ(draw(), draw());
}

TEST(Learner, UpdateNeedsAFullBatch) {
  std::mt19937_64 rng(4);
  AgentLearner l(4, small_config(), 2);
  for (int k = 0; k < 31; ++k) l.push_transition(random_transition(4, rng), BufferKind::Dprime);
  EXPECT_THROW(l.update_from_buffer(rng), ContractViolation);
  l.push_transition(random_transition(4, rng), BufferKind::Dprime);
  EXPECT_NO_THROW(l.update_from_buffer(rng));
  EXPECT_THROW(l.push_transition(random_transition(3, rng), BufferKind::D), ContractViolation);
}

TEST(SoftTargets, MatchHandComputation) {
  std::mt19937_64 rng(6);
  AgentLearner l(3, small_config(), 4);
  std::vector<Transition> data;
  for (int k = 0; k < 8; ++k) data.push_back(random_transition(3, rng, 0.5 * k));
  data[2].done = true;
  const Batch b = make_batch(pointers(data));
  const auto y = soft_targets(l, b);
  for (std::size_t c = 0; c < data.size(); ++c) {
    const auto pi = nn::forward(l.actor, l.actor_spec, data[c].next_obs);
    const auto q1 = nn::forward(l.target_critic1, l.critic_spec, data[c].next_obs);
    const auto q2 = nn::forward(l.target_critic2, l.critic_spec, data[c].next_obs);
    double v = 0.0;
    for (int a = 0; a < kNumActions; ++a)
      v += pi[a] * (std::min(q1[a], q2[a]) - l.config.entropy_coeff * std::log(pi[a]));
    const double want = data[c].reward + (data[c].done ? 0.0 : l.config.gamma * v);
    EXPECT_NEAR(y(static_cast<Eigen::Index>(c)), want, 1e-12);
  }
}

TEST(Losses, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const int dim = 3 + trial % 4;
    AgentLearner l(dim, small_config(), static_cast<std::uint64_t>(trial));
    oracle::randomize_biases(l.actor, rng);
    oracle::randomize_biases(l.critic1, rng);
    std::vector<Transition> data;
    for (int k = 0; k < 16; ++k) data.push_back(random_transition(dim, rng, k % 3));
    const Batch b = make_batch(pointers(data));
    const auto y = soft_targets(l, b);

    const auto cg = critic_loss(l.critic1, l.critic_spec, b, y);
    const auto cnum = oracle::numeric_gradient(
        l.critic1, [&](const nn::MlpParams& p) { return critic_loss(p, l.critic_spec, b, y).loss; });
    const auto ca = cg.grad.flatten();
    EXPECT_LT(oracle::max_relative_error(ca, cnum, 1e-6), 1e-3) << "critic, trial " << trial;

    const Eigen::MatrixXd q = nn::forward_batch(l.critic1, l.critic_spec, b.obs);
    const auto ag = actor_loss(l.actor, l.actor_spec, b, q, 0.1);
    const auto anum = oracle::numeric_gradient(
        l.actor, [&](const nn::MlpParams& p) { return actor_loss(p, l.actor_spec, b, q, 0.1).loss; });
    const auto aa = ag.grad.flatten();
    EXPECT_LT(oracle::max_relative_error(aa, anum, 1e-6), 1e-3) << "actor, trial " << trial;
  }
}

TEST(Update, BanditLimitRecoversConstantReward) {
  std::mt19937_64 rng(8);
  SacConfig cfg = small_config();
  cfg.gamma = 0.0;
  cfg.entropy_coeff = 0.0;
  cfg.critic_lr = 1e-2;
  AgentLearner l(3, cfg, 1);
  for (int k = 0; k < 256; ++k) l.push_transition(random_transition(3, rng, 0.7), BufferKind::Dprime);
  for (int u = 0; u < 3000; ++u) l.update_from_buffer(rng);
  for (std::size_t k = 0; k < 20; ++k) {
    const Transition& t = l.buffer_dprime.at(k);
    const auto q1 = nn::forward(l.critic1, l.critic_spec, t.obs);
    EXPECT_NEAR(q1[static_cast<std::size_t>(to_index(t.action))], 0.7, 1e-2);
  }
}

TEST(Update, PolicyStaysADistributionAndTargetsDriftBoundedly) {
  std::mt19937_64 rng(9);
  AgentLearner l(4, small_config(), 3);
  for (int k = 0; k < 200; ++k) l.push_transition(random_transition(4, rng, k % 2), BufferKind::Dprime);
  for (int u = 0; u < 20; ++u) {
    const auto before = l.target_critic1.flatten();
    const LossReport r = l.update_from_buffer(rng);
    EXPECT_TRUE(std::isfinite(r.critic1_loss) && std::isfinite(r.actor_loss));
    const auto after = l.target_critic1.flatten();
    const auto online_after = l.critic1.flatten();
    for (std::size_t k = 0; k < after.size(); ++k) {
      const double bound = l.config.soft_update_coeff * std::abs(online_after[k] - before[k]) + 1e-15;
      EXPECT_LE(std::abs(after[k] - before[k]), bound);
    }
    const auto p = l.action_probabilities(l.buffer_dprime.at(0).obs);
    double s = 0.0;
    for (double x : p) s += x;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Update, DeterministicForFixedMinibatch) {
  std::mt19937_64 rng(10);
  std::vector<Transition> data;
  for (int k = 0; k < 32; ++k) data.push_back(random_transition(4, rng, 1.0));
  auto run = [&] {
    AgentLearner l(4, small_config(), 6);
    for (int u = 0; u < 5; ++u) l.update(pointers(data));
    return l.actor.flatten();
  };
  EXPECT_EQ(run(), run());
}

TEST(Learner, SaveLoadRoundTrip) {
  std::mt19937_64 rng(11);
  AgentLearner l(4, small_config(), 6);
  for (int k = 0; k < 64; ++k) l.push_transition(random_transition(4, rng, 1.0), BufferKind::Dprime);
  for (int u = 0; u < 3; ++u) l.update_from_buffer(rng);
  const auto dir = std::filesystem::temp_directory_path() / "elign_sac_roundtrip";
  std::filesystem::remove_all(dir);
  save_learner(dir, l);
  AgentLearner back(4, small_config(), 99);
  load_learner(dir, back);
  EXPECT_TRUE(back.actor == l.actor);
  EXPECT_TRUE(back.critic2 == l.critic2);
  EXPECT_TRUE(back.target_critic1 == l.target_critic1);
  EXPECT_EQ(back.actor_opt.step, l.actor_opt.step);
  EXPECT_TRUE(back.critic1_opt.second_moment == l.critic1_opt.second_moment);
  AgentLearner wrong(5, small_config(), 1);
  EXPECT_THROW(load_learner(dir, wrong), ConfigError);
  std::filesystem::remove_all(dir);
}
