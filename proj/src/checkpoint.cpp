#include "elign/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "elign/error.hpp"

namespace elign::nn {

namespace {

constexpr std::array<char, 8> kMagic = {'E', 'L', 'G', 'N', 'N', 'E', 'T', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<unsigned char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b.data()), b.size());
}

std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), b.size());
  if (!in) throw ConfigError("network file truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_values(std::ostream& out, const std::vector<double>& values) {
  for (double d : values) put_u64(out, std::bit_cast<std::uint64_t>(d));
}

std::vector<double> get_values(std::istream& in, std::size_t n) {
  std::vector<double> v(n);
  for (auto& d : v) d = std::bit_cast<double>(get_u64(in));
  return v;
}

}  // namespace

void write_network(std::ostream& out, const NetworkFile& file) {
  file.spec.validate();
  require(MlpParams::zeros(file.spec).same_shape(file.params), "write_network: params/spec mismatch");

  nlohmann::json header;
  header["layer_sizes"] = file.spec.layer_sizes;
  header["hidden_activation"] = to_string(file.spec.hidden);
  header["output_activation"] = to_string(file.spec.output);
  auto shapes = nlohmann::json::array();
  for (const auto& l : file.params.layers) shapes.push_back({l.weight.rows(), l.weight.cols()});
  header["shapes"] = shapes;
  header["has_optimizer"] = file.optimizer.has_value();
  if (file.optimizer) {
    const auto& o = *file.optimizer;
    // Scalars go through the value stream's bit pattern, not JSON text.
    header["optimizer"] = {{"learning_rate_bits", std::bit_cast<std::uint64_t>(o.learning_rate)},
                           {"beta1_bits", std::bit_cast<std::uint64_t>(o.beta1)},
                           {"beta2_bits", std::bit_cast<std::uint64_t>(o.beta2)},
                           {"epsilon_bits", std::bit_cast<std::uint64_t>(o.epsilon)},
                           {"learning_rate", o.learning_rate},
                           {"step", o.step}};
  }
  const std::string text = header.dump();

  out.write(kMagic.data(), kMagic.size());
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_values(out, file.params.flatten());
  if (file.optimizer) {
    put_values(out, file.optimizer->first_moment.flatten());
    put_values(out, file.optimizer->second_moment.flatten());
  }
  if (!out) throw std::runtime_error("write_network: stream failure");
}

NetworkFile read_network(std::istream& in) {
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw ConfigError("not an elign network file");
  const std::uint64_t len = get_u64(in);
  if (len > (1u << 24)) throw ConfigError("network header too large");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw ConfigError("network header truncated");

  NetworkFile file;
  try {
    const auto header = nlohmann::json::parse(text);
    file.spec.layer_sizes = header.at("layer_sizes").get<std::vector<int>>();
    file.spec.hidden = activation_from_string(header.at("hidden_activation").get<std::string>());
    file.spec.output = activation_from_string(header.at("output_activation").get<std::string>());
    file.spec.validate();
    file.params = MlpParams::zeros(file.spec);
    file.params.assign_flat(get_values(in, file.params.parameter_count()));
    if (header.at("has_optimizer").get<bool>()) {
      const auto& o = header.at("optimizer");
      AdamState s = make_adam(file.params,
                              std::bit_cast<double>(o.at("learning_rate_bits").get<std::uint64_t>()));
      s.beta1 = std::bit_cast<double>(o.at("beta1_bits").get<std::uint64_t>());
      s.beta2 = std::bit_cast<double>(o.at("beta2_bits").get<std::uint64_t>());
      s.epsilon = std::bit_cast<double>(o.at("epsilon_bits").get<std::uint64_t>());
      s.step = o.at("step").get<std::int64_t>();
      s.first_moment.assign_flat(get_values(in, file.params.parameter_count()));
      s.second_moment.assign_flat(get_values(in, file.params.parameter_count()));
      file.optimizer = std::move(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad network header: ") + e.what());
  } catch (const ContractViolation& e) {
    throw ConfigError(std::string("bad network header: ") + e.what());
  }
  return file;
}

void save_network(const std::filesystem::path& path, const NetworkFile& file) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_network(out, file);
}

NetworkFile load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return read_network(in);
}

}  // namespace elign::nn
