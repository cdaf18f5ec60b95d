#include "elign/dynamics.hpp"

#include <algorithm>
#include <numeric>

#include "elign/error.hpp"

namespace elign {

DynamicsModel make_dynamics_model(std::size_t owner, int obs_dim, std::vector<int> hidden,
                                  double learning_rate, std::uint64_t seed, double noise_sigma) {
  require(obs_dim >= 1, "dynamics model needs a positive observation dim");
  require(noise_sigma >= 0.0, "noise_sigma must be >= 0");
  DynamicsModel m;
  m.spec.layer_sizes.push_back(obs_dim + kNumActions);
  for (int h : hidden) m.spec.layer_sizes.push_back(h);
  m.spec.layer_sizes.push_back(obs_dim);
  m.spec.output = nn::Activation::identity;
  m.spec.validate();
  m.params = nn::init_params(m.spec, seed);
  m.optimizer = nn::make_adam(m.params, learning_rate);
  m.owner = owner;
  m.noise_sigma = noise_sigma;
  return m;
}

Eigen::VectorXd dynamics_input(std::span<const double> obs, Action action) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(obs.size()) + kNumActions);
  for (std::size_t k = 0; k < obs.size(); ++k) x(static_cast<Eigen::Index>(k)) = obs[k];
  x(static_cast<Eigen::Index>(obs.size()) + to_index(action)) = 1.0;
  return x;
}

std::vector<double> predict_clean(const DynamicsModel& model, std::span<const double> obs,
                                  Action action) {
  require(static_cast<int>(obs.size()) == model.obs_dim(),
          "dynamics predict: observation dim mismatch");
  const Eigen::MatrixXd y = nn::forward_batch(model.params, model.spec, dynamics_input(obs, action));
  return {y.data(), y.data() + y.size()};
}

std::vector<double> predict(const DynamicsModel& model, std::span<const double> obs, Action action,
                            std::mt19937_64& rng) {
  auto out = predict_clean(model, obs, action);
  if (model.noise_sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, model.noise_sigma);
    for (auto& v : out) v += noise(rng);
  }
  return out;
}

std::vector<double> masked_predict(const DynamicsModel& model, std::span<const double> obs_masked,
                                   Action action, std::mt19937_64& rng) {
  return predict(model, obs_masked, action, rng);
}

namespace {

void check_sample(const DynamicsModel& model, std::span<const Transition* const> sample) {
  if (sample.empty()) throw ContractViolation("dynamics training needs a non-empty sample");
  for (const Transition* t : sample)
    require(static_cast<int>(t->obs.size()) == model.obs_dim() &&
                static_cast<int>(t->next_obs.size()) == model.obs_dim(),
            "dynamics sample has the wrong observation dim");
}

void fill_batch(std::span<const Transition* const> sample, std::span<const std::size_t> rows,
                int obs_dim, Eigen::MatrixXd& x, Eigen::MatrixXd& y) {
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  x.setZero(obs_dim + kNumActions, n);
  y.resize(obs_dim, n);
  for (Eigen::Index c = 0; c < n; ++c) {
    const Transition& t = *sample[rows[static_cast<std::size_t>(c)]];
    for (int k = 0; k < obs_dim; ++k) {
      x(k, c) = t.obs[static_cast<std::size_t>(k)];
      y(k, c) = t.next_obs[static_cast<std::size_t>(k)];
    }
    x(obs_dim + to_index(t.action), c) = 1.0;
  }
}

}  // namespace

double dynamics_mse(const DynamicsModel& model, std::span<const Transition* const> sample) {
  check_sample(model, sample);
  std::vector<std::size_t> rows(sample.size());
  std::iota(rows.begin(), rows.end(), 0);
  Eigen::MatrixXd x, y;
  fill_batch(sample, rows, model.obs_dim(), x, y);
  const Eigen::MatrixXd pred = nn::forward_batch(model.params, model.spec, x);
  return (pred - y).colwise().squaredNorm().sum() / static_cast<double>(sample.size());
}

DynamicsLoss dynamics_loss(const DynamicsModel& model, std::span<const Transition* const> batch) {
  check_sample(model, batch);
  std::vector<std::size_t> rows(batch.size());
  std::iota(rows.begin(), rows.end(), 0);
  Eigen::MatrixXd x, y;
  fill_batch(batch, rows, model.obs_dim(), x, y);
  const nn::ForwardCache cache = nn::forward_cached(model.params, model.spec, x);
  const double n = static_cast<double>(batch.size());
  // loss = mean_b ||pred_b - y_b||^2
  const Eigen::MatrixXd diff = cache.output - y;
  const Eigen::MatrixXd upstream = (2.0 / n) * diff;
  return {diff.colwise().squaredNorm().sum() / n, nn::backward(model.params, model.spec, cache, upstream).params};
}

double train_epoch(DynamicsModel& model, std::span<const Transition* const> sample,
                   std::size_t batch_size, std::mt19937_64& rng) {
  check_sample(model, sample);
  require(batch_size >= 1, "batch_size must be >= 1");
  const double before = dynamics_mse(model, sample);

  std::vector<std::size_t> order(sample.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<const Transition*> batch;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    batch.clear();
    for (std::size_t r = start; r < end; ++r) batch.push_back(sample[order[r]]);
    const DynamicsLoss g = dynamics_loss(model, batch);
    nn::adam_step(model.params, g.grad, model.optimizer);
  }
  return before;
}

}  // namespace elign
