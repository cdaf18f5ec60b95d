#include "elign/sac.hpp"

#include <cmath>

#include "elign/checkpoint.hpp"
#include "elign/error.hpp"

namespace elign::sac {

namespace {

nn::MlpSpec head_spec(int obs_dim, const std::vector<int>& hidden, nn::Activation output) {
  nn::MlpSpec s;
  s.layer_sizes.push_back(obs_dim);
  for (int h : hidden) s.layer_sizes.push_back(h);
  s.layer_sizes.push_back(kNumActions);
  s.output = output;
  s.validate();
  return s;
}

}  // namespace

Batch make_batch(std::span<const Transition* const> transitions) {
  require(!transitions.empty(), "empty minibatch");
  const Eigen::Index dim = static_cast<Eigen::Index>(transitions.front()->obs.size());
  const Eigen::Index n = static_cast<Eigen::Index>(transitions.size());
  Batch b;
  b.obs.resize(dim, n);
  b.next_obs.resize(dim, n);
  b.actions.resize(transitions.size());
  b.rewards.resize(n);
  b.not_done.resize(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const Transition& t = *transitions[static_cast<std::size_t>(c)];
    require(static_cast<Eigen::Index>(t.obs.size()) == dim &&
                static_cast<Eigen::Index>(t.next_obs.size()) == dim,
            "minibatch observations differ in size");
    b.obs.col(c) = Eigen::Map<const Eigen::VectorXd>(t.obs.data(), dim);
    b.next_obs.col(c) = Eigen::Map<const Eigen::VectorXd>(t.next_obs.data(), dim);
    b.actions[static_cast<std::size_t>(c)] = to_index(t.action);
    b.rewards(c) = t.reward;
    b.not_done(c) = t.done ? 0.0 : 1.0;
  }
  return b;
}

AgentLearner::AgentLearner(int obs_dim, const SacConfig& cfg, std::uint64_t seed)
    : config(cfg),
      actor_spec(head_spec(obs_dim, cfg.hidden, nn::Activation::softmax)),
      critic_spec(head_spec(obs_dim, cfg.hidden, nn::Activation::identity)),
      actor(nn::init_params(actor_spec, seed)),
      critic1(nn::init_params(critic_spec, seed + 1)),
      critic2(nn::init_params(critic_spec, seed + 2)),
      target_critic1(critic1),
      target_critic2(critic2),
      actor_opt(nn::make_adam(actor, cfg.actor_lr)),
      critic1_opt(nn::make_adam(critic1, cfg.critic_lr)),
      critic2_opt(nn::make_adam(critic2, cfg.critic_lr)),
      buffer_d(cfg.buffer_capacity),
      buffer_dprime(cfg.buffer_capacity) {}

std::vector<double> AgentLearner::action_probabilities(std::span<const double> obs) const {
  return nn::forward(actor, actor_spec, obs);
}

Action AgentLearner::select_action(std::span<const double> obs, ActionMode mode,
                                   std::mt19937_64& rng) const {
  require(static_cast<int>(obs.size()) == obs_dim(), "select_action: observation dim mismatch");
  Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(obs.data(), obs.size());
  const nn::ForwardCache cache = nn::forward_cached(actor, actor_spec, x);
  if (!cache.logits.allFinite())
    throw NumericError("policy produced non-finite logits", actor.layers.size() - 1);

  if (mode == ActionMode::greedy) {
    int best = 0;
    for (int a = 1; a < kNumActions; ++a)
      if (cache.logits(a, 0) > cache.logits(best, 0)) best = a;
    return action_from_index(best);
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double draw = u(rng);
  double cumulative = 0.0;
  for (int a = 0; a < kNumActions; ++a) {
    cumulative += cache.output(a, 0);
    if (draw < cumulative) return action_from_index(a);
  }
  return action_from_index(kNumActions - 1);
}

void AgentLearner::push_transition(Transition t, BufferKind which) {
  require(static_cast<int>(t.obs.size()) == obs_dim() &&
              static_cast<int>(t.next_obs.size()) == obs_dim(),
          "push_transition: observation dim mismatch");
  (which == BufferKind::D ? buffer_d : buffer_dprime).push(std::move(t));
}

const ReplayBuffer& AgentLearner::buffer(BufferKind which) const {
  return which == BufferKind::D ? buffer_d : buffer_dprime;
}

Eigen::RowVectorXd soft_targets(const AgentLearner& learner, const Batch& batch) {
  const nn::ForwardCache pi = nn::forward_cached(learner.actor, learner.actor_spec, batch.next_obs);
  const Eigen::MatrixXd log_pi = nn::log_softmax_columns(pi.logits);
  const Eigen::MatrixXd q1 = nn::forward_batch(learner.target_critic1, learner.critic_spec, batch.next_obs);
  const Eigen::MatrixXd q2 = nn::forward_batch(learner.target_critic2, learner.critic_spec, batch.next_obs);
  const Eigen::MatrixXd soft_q = q1.cwiseMin(q2) - learner.config.entropy_coeff * log_pi;
  const Eigen::RowVectorXd v = (pi.output.array() * soft_q.array()).colwise().sum();
  return batch.rewards + learner.config.gamma * batch.not_done.cwiseProduct(v);
}

LossAndGrad critic_loss(const nn::MlpParams& critic, const nn::MlpSpec& spec, const Batch& batch,
                        const Eigen::RowVectorXd& targets) {
  const nn::ForwardCache cache = nn::forward_cached(critic, spec, batch.obs);
  const Eigen::Index n = batch.obs.cols();
  Eigen::MatrixXd upstream = Eigen::MatrixXd::Zero(cache.output.rows(), n);
  double loss = 0.0;
  for (Eigen::Index c = 0; c < n; ++c) {
    const int a = batch.actions[static_cast<std::size_t>(c)];
    const double diff = cache.output(a, c) - targets(c);
    loss += diff * diff;
    upstream(a, c) = 2.0 * diff / static_cast<double>(n);
  }
  LossAndGrad out;
  out.loss = loss / static_cast<double>(n);
  out.grad = nn::backward(critic, spec, cache, upstream).params;
  return out;
}

LossAndGrad actor_loss(const nn::MlpParams& actor, const nn::MlpSpec& spec, const Batch& batch,
                       const Eigen::MatrixXd& q_min, double alpha) {
  const nn::ForwardCache cache = nn::forward_cached(actor, spec, batch.obs);
  const Eigen::MatrixXd log_pi = nn::log_softmax_columns(cache.logits);
  const double n = static_cast<double>(batch.obs.cols());
  const Eigen::MatrixXd inner = alpha * log_pi - q_min;
  LossAndGrad out;
  out.loss = (cache.output.array() * inner.array()).sum() / n;
  // d/dp [p (alpha log p - q)] = alpha log p + alpha - q
  const Eigen::MatrixXd upstream = ((inner.array() + alpha) / n).matrix();
  out.grad = nn::backward(actor, spec, cache, upstream).params;
  return out;
}

LossReport AgentLearner::update(std::span<const Transition* const> transitions) {
  const Batch batch = make_batch(transitions);
  require(batch.obs.rows() == obs_dim(), "update: observation dim mismatch");
  LossReport report;

  const Eigen::RowVectorXd y = soft_targets(*this, batch);
  const LossAndGrad c1 = critic_loss(critic1, critic_spec, batch, y);
  const LossAndGrad c2 = critic_loss(critic2, critic_spec, batch, y);
  nn::adam_step(critic1, c1.grad, critic1_opt);
  nn::adam_step(critic2, c2.grad, critic2_opt);
  report.critic1_loss = c1.loss;
  report.critic2_loss = c2.loss;

  const Eigen::MatrixXd q_min = nn::forward_batch(critic1, critic_spec, batch.obs)
                                    .cwiseMin(nn::forward_batch(critic2, critic_spec, batch.obs));
  const LossAndGrad a = actor_loss(actor, actor_spec, batch, q_min, config.entropy_coeff);
  nn::adam_step(actor, a.grad, actor_opt);
  report.actor_loss = a.loss;

  const nn::ForwardCache pi = nn::forward_cached(actor, actor_spec, batch.obs);
  const Eigen::MatrixXd log_pi = nn::log_softmax_columns(pi.logits);
  report.entropy = -(pi.output.array() * log_pi.array()).sum() / static_cast<double>(batch.obs.cols());

  nn::soft_update(target_critic1, critic1, config.soft_update_coeff);
  nn::soft_update(target_critic2, critic2, config.soft_update_coeff);
  return report;
}

LossReport AgentLearner::update_from_buffer(std::mt19937_64& rng) {
  if (buffer_dprime.size() < config.batch_size)
    throw ContractViolation("D' holds " + std::to_string(buffer_dprime.size()) +
                            " transitions, fewer than the batch size " +
                            std::to_string(config.batch_size));
  const auto sample = buffer_dprime.sample(config.batch_size, rng);
  return update(sample);
}

void save_learner(const std::filesystem::path& dir, const AgentLearner& l) {
  std::filesystem::create_directories(dir);
  nn::save_network(dir / "actor.net", {l.actor_spec, l.actor, l.actor_opt});
  nn::save_network(dir / "critic1.net", {l.critic_spec, l.critic1, l.critic1_opt});
  nn::save_network(dir / "critic2.net", {l.critic_spec, l.critic2, l.critic2_opt});
  nn::save_network(dir / "target_critic1.net", {l.critic_spec, l.target_critic1, std::nullopt});
  nn::save_network(dir / "target_critic2.net", {l.critic_spec, l.target_critic2, std::nullopt});
}

void load_learner(const std::filesystem::path& dir, AgentLearner& l) {
  auto load = [&](const char* name, const nn::MlpSpec& expected) {
    nn::NetworkFile f = nn::load_network(dir / name);
    if (!(f.spec == expected))
      throw ConfigError(std::string("checkpoint network ") + name + " does not match the configuration");
    return f;
  };
  auto actor = load("actor.net", l.actor_spec);
  auto c1 = load("critic1.net", l.critic_spec);
  auto c2 = load("critic2.net", l.critic_spec);
  auto t1 = load("target_critic1.net", l.critic_spec);
  auto t2 = load("target_critic2.net", l.critic_spec);
  l.actor = std::move(actor.params);
  if (actor.optimizer) l.actor_opt = std::move(*actor.optimizer);
  l.critic1 = std::move(c1.params);
  if (c1.optimizer) l.critic1_opt = std::move(*c1.optimizer);
  l.critic2 = std::move(c2.params);
  if (c2.optimizer) l.critic2_opt = std::move(*c2.optimizer);
  l.target_critic1 = std::move(t1.params);
  l.target_critic2 = std::move(t2.params);
}

}  // namespace elign::sac
