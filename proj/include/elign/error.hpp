#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace elign {

// Caller broke a documented precondition (dimension mismatch, bad index, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Malformed or inconsistent user configuration.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A NaN/Inf showed up where the math requires finite values.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::size_t layer)
      : std::runtime_error(what), layer_(layer) {}

  std::size_t layer() const noexcept { return layer_; }

 private:
  std::size_t layer_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

}  // namespace elign
