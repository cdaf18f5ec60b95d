#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "elign/nn.hpp"
#include "elign/transition.hpp"
#include "elign/world.hpp"

namespace elign {

// Per-agent forward model f(o, a) -> o'. Input is [obs || one_hot(action)].
struct DynamicsModel {
  nn::MlpSpec spec;
  nn::MlpParams params;
  nn::AdamState optimizer;
  std::size_t owner = 0;
  double noise_sigma = 0.0;  // Gaussian noise added at reward-time prediction

  int obs_dim() const { return spec.output_dim(); }
};

DynamicsModel make_dynamics_model(std::size_t owner, int obs_dim, std::vector<int> hidden,
                                  double learning_rate, std::uint64_t seed,
                                  double noise_sigma = 0.0);

// [obs || one_hot(action)] as a column vector.
Eigen::VectorXd dynamics_input(std::span<const double> obs, Action action);

// Noise-free prediction.
std::vector<double> predict_clean(const DynamicsModel& model, std::span<const double> obs,
                                  Action action);

// Prediction with i.i.d. N(0, noise_sigma) per output entry when noise is on.
std::vector<double> predict(const DynamicsModel& model, std::span<const double> obs, Action action,
                            std::mt19937_64& rng);

// Same as predict on an observation whose hidden groups are already zeroed.
std::vector<double> masked_predict(const DynamicsModel& model, std::span<const double> obs_masked,
                                   Action action, std::mt19937_64& rng);

// Mean over the sample of ||o' - f(o, a)||^2 with the current parameters.
double dynamics_mse(const DynamicsModel& model, std::span<const Transition* const> sample);

struct DynamicsLoss {
  double loss = 0.0;  // mean_b ||o'_b - f(o_b, a_b)||^2
  nn::MlpParams grad;
};

DynamicsLoss dynamics_loss(const DynamicsModel& model, std::span<const Transition* const> batch);

// One shuffled pass of minibatch Adam steps on the squared-error loss.
// Returns the sample's mean squared prediction error measured with the
// parameters as they were before the pass. Noise is never applied here.
double train_epoch(DynamicsModel& model, std::span<const Transition* const> sample,
                   std::size_t batch_size, std::mt19937_64& rng);

}  // namespace elign
