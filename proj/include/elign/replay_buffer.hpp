#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "elign/transition.hpp"

namespace elign {

// Fixed-capacity FIFO ring of transitions. Index 0 is the oldest entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void push(Transition t);

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return data_.empty(); }

  const Transition& at(std::size_t i) const;

  // Uniform with replacement. Pointers stay valid until the next push.
  std::vector<const Transition*> sample(std::size_t n, std::mt19937_64& rng) const;

  // The `n` most recent entries, oldest first.
  std::vector<const Transition*> latest(std::size_t n) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // slot overwritten next once full
  std::vector<Transition> data_;
};

}  // namespace elign
