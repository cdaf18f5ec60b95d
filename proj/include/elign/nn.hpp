#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace elign::nn {

enum class Activation : std::uint8_t { relu, identity, softmax };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& name);

// Layer sizes include the input and output dimension, e.g. {17, 128, 128, 12}.
struct MlpSpec {
  std::vector<int> layer_sizes;
  Activation hidden = Activation::relu;
  Activation output = Activation::identity;

  // Throws ContractViolation on fewer than two sizes, a size < 1, or a
  // non-relu hidden activation.
  void validate() const;

  int input_dim() const { return layer_sizes.front(); }
  int output_dim() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return layer_sizes.size() - 1; }

  bool operator==(const MlpSpec&) const = default;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

struct MlpParams {
  std::vector<DenseLayer> layers;

  std::size_t parameter_count() const;
  bool same_shape(const MlpParams& other) const;
  bool all_finite() const;

  // Flattened view in layer order (W row-major, then b) for tests and io.
  std::vector<double> flatten() const;
  void assign_flat(std::span<const double> values);

  static MlpParams zeros_like(const MlpParams& other);
  static MlpParams zeros(const MlpSpec& spec);
};

bool operator==(const MlpParams& a, const MlpParams& b);

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
MlpParams init_params(const MlpSpec& spec, std::uint64_t seed);

// Column-major batch: every column of `inputs` is one sample.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // [0] = input, then hidden outputs
  Eigen::MatrixXd logits;                    // pre-activation of the last layer
  Eigen::MatrixXd output;                    // after the output head
};

ForwardCache forward_cached(const MlpParams& params, const MlpSpec& spec,
                            const Eigen::MatrixXd& inputs);
Eigen::MatrixXd forward_batch(const MlpParams& params, const MlpSpec& spec,
                              const Eigen::MatrixXd& inputs);
std::vector<double> forward(const MlpParams& params, const MlpSpec& spec,
                            std::span<const double> input);

struct Gradients {
  MlpParams params;
  Eigen::MatrixXd input;  // d(loss)/d(input), same layout as the inputs
};

// `upstream` is d(loss)/d(output) for the head's output (probabilities for a
// softmax head). Gradients are summed over the batch columns.
Gradients backward(const MlpParams& params, const MlpSpec& spec,
                   const ForwardCache& cache, const Eigen::MatrixXd& upstream);
Gradients backward(const MlpParams& params, const MlpSpec& spec,
                   std::span<const double> input,
                   std::span<const double> upstream);

// Column-wise numerically stable softmax / log-softmax.
Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits);
Eigen::MatrixXd log_softmax_columns(const Eigen::MatrixXd& logits);

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  MlpParams first_moment;
  MlpParams second_moment;
  std::int64_t step = 0;
};

AdamState make_adam(const MlpParams& like, double learning_rate);

// Bias-corrected Adam. Throws NumericError naming the first layer whose
// gradient holds a non-finite entry; params and state are left untouched.
void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state);

// target <- (1 - coeff) * target + coeff * online
void soft_update(MlpParams& target, const MlpParams& online, double coeff);

}  // namespace elign::nn
