#include "elign/replay_buffer.hpp"

#include <algorithm>

#include "elign/error.hpp"

namespace elign {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  require(capacity >= 1, "replay buffer capacity must be >= 1");
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
    return;
  }
  data_[head_] = std::move(t);
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  require(i < data_.size(), "replay buffer index out of range");
  return data_[(head_ + i) % data_.size()];
}

std::vector<const Transition*> ReplayBuffer::sample(std::size_t n, std::mt19937_64& rng) const {
  require(!data_.empty(), "cannot sample from an empty replay buffer");
  std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
  std::vector<const Transition*> out(n);
  for (auto& p : out) p = &data_[pick(rng)];
  return out;
}

std::vector<const Transition*> ReplayBuffer::latest(std::size_t n) const {
  n = std::min(n, data_.size());
  std::vector<const Transition*> out;
  out.reserve(n);
  for (std::size_t i = data_.size() - n; i < data_.size(); ++i) out.push_back(&at(i));
  return out;
}

}  // namespace elign
