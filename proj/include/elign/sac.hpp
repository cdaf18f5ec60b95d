#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "elign/nn.hpp"
#include "elign/replay_buffer.hpp"
#include "elign/transition.hpp"

namespace elign::sac {

struct SacConfig {
  std::vector<int> hidden{128, 128};
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double gamma = 0.95;
  double soft_update_coeff = 0.01;
  double entropy_coeff = 0.1;
  std::size_t batch_size = 1024;
  std::size_t buffer_capacity = 1'000'000;
};

enum class ActionMode { sample, greedy };
enum class BufferKind { D, Dprime };

struct LossReport {
  double critic1_loss = 0.0;
  double critic2_loss = 0.0;
  double actor_loss = 0.0;
  double entropy = 0.0;  // mean policy entropy on the batch observations
};

// Column-major view of a minibatch.
struct Batch {
  Eigen::MatrixXd obs;       // obs_dim x B
  Eigen::MatrixXd next_obs;  // obs_dim x B
  std::vector<int> actions;
  Eigen::RowVectorXd rewards;
  Eigen::RowVectorXd not_done;  // 1 - done
};

Batch make_batch(std::span<const Transition* const> transitions);

// One decentralized agent: softmax actor, twin critics with targets, and the
// two replay buffers (D: extrinsic, D': re-scored).
struct AgentLearner {
  AgentLearner(int obs_dim, const SacConfig& config, std::uint64_t seed);

  SacConfig config;
  nn::MlpSpec actor_spec;
  nn::MlpSpec critic_spec;
  nn::MlpParams actor;
  nn::MlpParams critic1;
  nn::MlpParams critic2;
  nn::MlpParams target_critic1;
  nn::MlpParams target_critic2;
  nn::AdamState actor_opt;
  nn::AdamState critic1_opt;
  nn::AdamState critic2_opt;
  ReplayBuffer buffer_d;
  ReplayBuffer buffer_dprime;

  int obs_dim() const { return actor_spec.input_dim(); }

  std::vector<double> action_probabilities(std::span<const double> obs) const;

  // Greedy picks the largest logit, lowest index on ties. Throws NumericError
  // on non-finite logits.
  Action select_action(std::span<const double> obs, ActionMode mode, std::mt19937_64& rng) const;

  void push_transition(Transition t, BufferKind which);
  const ReplayBuffer& buffer(BufferKind which) const;

  // One discrete-SAC step on the given minibatch: critics regress to the soft
  // Bellman target, the actor minimizes E_a[alpha log pi - min Q], then both
  // target critics move by soft_update_coeff.
  LossReport update(std::span<const Transition* const> batch);

  // Samples config.batch_size transitions from D'. Throws ContractViolation
  // while D' holds fewer than batch_size entries.
  LossReport update_from_buffer(std::mt19937_64& rng);
};

// Soft Bellman targets y = r + gamma (1 - done) sum_a pi(a|o') (min Qbar(o', a) - alpha log pi(a|o')).
Eigen::RowVectorXd soft_targets(const AgentLearner& learner, const Batch& batch);

struct LossAndGrad {
  double loss = 0.0;
  nn::MlpParams grad;
};

// mean_b (Q(o_b, a_b) - y_b)^2
LossAndGrad critic_loss(const nn::MlpParams& critic, const nn::MlpSpec& spec, const Batch& batch,
                        const Eigen::RowVectorXd& targets);

// mean_b sum_a pi(a|o_b) (alpha log pi(a|o_b) - q_min(a, b)); q_min is 5 x B.
LossAndGrad actor_loss(const nn::MlpParams& actor, const nn::MlpSpec& spec, const Batch& batch,
                       const Eigen::MatrixXd& q_min, double alpha);

void save_learner(const std::filesystem::path& dir, const AgentLearner& learner);
// Replaces the networks and optimizer states of `learner` with the saved ones.
void load_learner(const std::filesystem::path& dir, AgentLearner& learner);

}  // namespace elign::sac
