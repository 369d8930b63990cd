#include "marl/replay.hpp"

#include <stdexcept>

namespace marl {

ReplayBuffer::ReplayBuffer(size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw std::invalid_argument("ReplayBuffer: zero capacity");
  ring_.reserve(capacity <= 4096 ? capacity : 4096);
}

void ReplayBuffer::push(Transition t) {
  if (size_ < capacity_) {
    ring_.push_back(std::move(t));
    ++size_;
  } else {
    ring_[head_] = std::move(t);
  }
  head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(size_t i) const {
  if (i >= size_) throw std::out_of_range("ReplayBuffer::at");
  if (size_ < capacity_) return ring_[i];
  return ring_[(head_ + i) % capacity_];
}

std::vector<Transition> ReplayBuffer::sample(size_t batch_size, Rng& rng) const {
  if (batch_size == 0 || batch_size > size_)
    throw std::invalid_argument("ReplayBuffer::sample: batch larger than buffer");
  std::vector<Transition> out;
  out.reserve(batch_size);
  for (size_t i = 0; i < batch_size; ++i)
    out.push_back(ring_[rng.uniform_int(size_)]);
  return out;
}

}  // namespace marl
