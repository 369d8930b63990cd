#pragma once

#include <cstddef>
#include <vector>

#include "marl/action.hpp"
#include "marl/rng.hpp"

namespace marl {

// One environment step for all agents.
struct Transition {
  std::vector<std::vector<double>> obs;
  std::vector<HybridAction> act;
  std::vector<double> reward;
  std::vector<std::vector<double>> next_obs;
  std::vector<bool> done;
};

// Fixed-capacity ring; eviction is strictly oldest-first. Sampling is uniform
// with replacement and returns copies, so later training steps can never
// mutate stored data through a batch.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(size_t capacity);

  void push(Transition t);
  std::vector<Transition> sample(size_t batch_size, Rng& rng) const;

  size_t size() const { return size_; }
  size_t capacity() const { return capacity_; }
  // Index 0 is the oldest stored transition.
  const Transition& at(size_t i) const;

 private:
  size_t capacity_;
  size_t head_ = 0;  // next write slot
  size_t size_ = 0;
  std::vector<Transition> ring_;
};

}  // namespace marl
