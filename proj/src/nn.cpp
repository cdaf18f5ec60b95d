#include "elign/nn.hpp"

#include <cmath>
#include <random>
#include <string>

#include "elign/error.hpp"

namespace elign::nn {

const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::identity: return "identity";
    case Activation::softmax: return "softmax";
  }
  return "?";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "identity") return Activation::identity;
  if (name == "softmax") return Activation::softmax;
  throw ContractViolation("unknown activation '" + name + "'");
}

void MlpSpec::validate() const {
  require(layer_sizes.size() >= 2, "MlpSpec needs at least two layer sizes");
  for (int s : layer_sizes) require(s >= 1, "MlpSpec layer sizes must be >= 1");
  require(hidden == Activation::relu, "hidden activation must be relu");
}

std::size_t MlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

bool MlpParams::same_shape(const MlpParams& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& a = layers[i];
    const auto& b = other.layers[i];
    if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() ||
        a.bias.size() != b.bias.size())
      return false;
  }
  return true;
}

bool MlpParams::all_finite() const {
  for (const auto& l : layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

std::vector<double> MlpParams::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) out.push_back(l.weight(r, c));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) out.push_back(l.bias(r));
  }
  return out;
}

void MlpParams::assign_flat(std::span<const double> values) {
  require(values.size() == parameter_count(), "assign_flat: size mismatch");
  std::size_t k = 0;
  for (auto& l : layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = values[k++];
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = values[k++];
  }
}

MlpParams MlpParams::zeros_like(const MlpParams& other) {
  MlpParams p;
  p.layers.reserve(other.layers.size());
  for (const auto& l : other.layers)
    p.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  return p;
}

MlpParams MlpParams::zeros(const MlpSpec& spec) {
  spec.validate();
  MlpParams p;
  for (std::size_t i = 0; i < spec.num_layers(); ++i) {
    const int in = spec.layer_sizes[i];
    const int out = spec.layer_sizes[i + 1];
    p.layers.push_back({Eigen::MatrixXd::Zero(out, in), Eigen::VectorXd::Zero(out)});
  }
  return p;
}

bool operator==(const MlpParams& a, const MlpParams& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i)
    if (a.layers[i].weight != b.layers[i].weight || a.layers[i].bias != b.layers[i].bias)
      return false;
  return true;
}

MlpParams init_params(const MlpSpec& spec, std::uint64_t seed) {
  MlpParams p = MlpParams::zeros(spec);
  std::mt19937_64 rng(seed);
  for (auto& l : p.layers) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(l.weight.cols()));
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = dist(rng);
  }
  return p;
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double m = logits.col(c).maxCoeff();
    out.col(c) = (logits.col(c).array() - m).exp().matrix();
    out.col(c) /= out.col(c).sum();
  }
  return out;
}

Eigen::MatrixXd log_softmax_columns(const Eigen::MatrixXd& logits) {
  Eigen::MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index c = 0; c < logits.cols(); ++c) {
    const double m = logits.col(c).maxCoeff();
    const double lse = m + std::log((logits.col(c).array() - m).exp().sum());
    out.col(c) = (logits.col(c).array() - lse).matrix();
  }
  return out;
}

namespace {

void check_params(const MlpParams& params, const MlpSpec& spec) {
  require(params.layers.size() == spec.num_layers(), "params/spec layer count mismatch");
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    require(l.weight.cols() == spec.layer_sizes[i] && l.weight.rows() == spec.layer_sizes[i + 1] &&
                l.bias.size() == spec.layer_sizes[i + 1],
            "params shape does not match spec at layer " + std::to_string(i));
  }
}

}  // namespace

ForwardCache forward_cached(const MlpParams& params, const MlpSpec& spec,
                            const Eigen::MatrixXd& inputs) {
  check_params(params, spec);
  require(inputs.rows() == spec.input_dim(),
          "forward: input dim " + std::to_string(inputs.rows()) + " != " +
              std::to_string(spec.input_dim()));
  ForwardCache cache;
  cache.activations.reserve(params.layers.size());
  cache.activations.push_back(inputs);
  const std::size_t last = params.layers.size() - 1;
  for (std::size_t i = 0; i < last; ++i) {
    const auto& l = params.layers[i];
    Eigen::MatrixXd z = l.weight * cache.activations.back();
    z.colwise() += l.bias;
    cache.activations.push_back(z.cwiseMax(0.0));
  }
  const auto& out = params.layers[last];
  cache.logits = out.weight * cache.activations.back();
  cache.logits.colwise() += out.bias;
  switch (spec.output) {
    case Activation::softmax: cache.output = softmax_columns(cache.logits); break;
    case Activation::relu: cache.output = cache.logits.cwiseMax(0.0); break;
    case Activation::identity: cache.output = cache.logits; break;
  }
  return cache;
}

Eigen::MatrixXd forward_batch(const MlpParams& params, const MlpSpec& spec,
                              const Eigen::MatrixXd& inputs) {
  return forward_cached(params, spec, inputs).output;
}

std::vector<double> forward(const MlpParams& params, const MlpSpec& spec,
                            std::span<const double> input) {
  Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(input.data(), input.size());
  Eigen::MatrixXd y = forward_batch(params, spec, x);
  return {y.data(), y.data() + y.size()};
}

Gradients backward(const MlpParams& params, const MlpSpec& spec, const ForwardCache& cache,
                   const Eigen::MatrixXd& upstream) {
  check_params(params, spec);
  require(upstream.rows() == spec.output_dim() && upstream.cols() == cache.output.cols(),
          "backward: upstream gradient shape mismatch");

  Eigen::MatrixXd delta;
  switch (spec.output) {
    case Activation::softmax: {
      // dz = p * (g - <p, g>)
      const Eigen::RowVectorXd inner = (cache.output.array() * upstream.array()).colwise().sum();
      delta = (cache.output.array() * (upstream.rowwise() - inner).array()).matrix();
      break;
    }
    case Activation::relu:
      delta = (upstream.array() * (cache.logits.array() > 0.0).cast<double>()).matrix();
      break;
    case Activation::identity: delta = upstream; break;
  }

  Gradients g;
  g.params = MlpParams::zeros_like(params);
  for (std::size_t i = params.layers.size(); i-- > 0;) {
    const Eigen::MatrixXd& a_in = cache.activations[i];
    g.params.layers[i].weight.noalias() = delta * a_in.transpose();
    g.params.layers[i].bias = delta.rowwise().sum();
    Eigen::MatrixXd d_in = params.layers[i].weight.transpose() * delta;
    if (i == 0) {
      g.input = std::move(d_in);
    } else {
      // a_in = relu(z_in); relu'(z) = [a > 0]
      delta = (d_in.array() * (a_in.array() > 0.0).cast<double>()).matrix();
    }
  }
  return g;
}

Gradients backward(const MlpParams& params, const MlpSpec& spec, std::span<const double> input,
                   std::span<const double> upstream) {
  Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(input.data(), input.size());
  Eigen::MatrixXd u = Eigen::Map<const Eigen::VectorXd>(upstream.data(), upstream.size());
  require(static_cast<int>(upstream.size()) == spec.output_dim(),
          "backward: upstream length mismatch");
  return backward(params, spec, forward_cached(params, spec, x), u);
}

AdamState make_adam(const MlpParams& like, double learning_rate) {
  require(learning_rate > 0.0, "learning rate must be positive");
  AdamState s;
  s.learning_rate = learning_rate;
  s.first_moment = MlpParams::zeros_like(like);
  s.second_moment = MlpParams::zeros_like(like);
  return s;
}

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state) {
  require(params.same_shape(grads), "adam_step: gradient shape mismatch");
  require(params.same_shape(state.first_moment) && params.same_shape(state.second_moment),
          "adam_step: optimizer state shape mismatch");
  for (std::size_t i = 0; i < grads.layers.size(); ++i) {
    if (!grads.layers[i].weight.allFinite() || !grads.layers[i].bias.allFinite())
      throw NumericError("non-finite gradient in layer " + std::to_string(i), i);
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double lr = state.learning_rate;
  const double eps = state.epsilon;

  auto update = [&](auto& p, const auto& g, auto& m, auto& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].weight, grads.layers[i].weight, state.first_moment.layers[i].weight,
           state.second_moment.layers[i].weight);
    update(params.layers[i].bias, grads.layers[i].bias, state.first_moment.layers[i].bias,
           state.second_moment.layers[i].bias);
  }
}

void soft_update(MlpParams& target, const MlpParams& online, double coeff) {
  require(target.same_shape(online), "soft_update: shape mismatch");
  require(coeff > 0.0 && coeff <= 1.0, "soft_update: coeff must lie in (0, 1]");
  if (coeff == 1.0) {
    target = online;
    return;
  }
  for (std::size_t i = 0; i < target.layers.size(); ++i) {
    target.layers[i].weight = (1.0 - coeff) * target.layers[i].weight + coeff * online.layers[i].weight;
    target.layers[i].bias = (1.0 - coeff) * target.layers[i].bias + coeff * online.layers[i].bias;
  }
}

}  // namespace elign::nn
