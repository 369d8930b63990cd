#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "marl/action.hpp"
#include "marl/array.hpp"
#include "marl/replay.hpp"
#include "marl/rng.hpp"

namespace marl {

// One sampled batch rearranged column-wise per agent. Arrays are copies, so
// an update can never write back into the replay buffer.
struct JointBatch {
  int rows = 0;
  std::vector<Array> obs;       // per agent: rows x obs_dim
  std::vector<Array> next_obs;  // per agent: rows x obs_dim
  std::vector<std::vector<HybridAction>> act;  // [agent][row]
  Array reward;  // rows x n_agents
  Array done;    // rows x n_agents, 1.0 marks an episode end

  int n_agents() const { return static_cast<int>(obs.size()); }
};

JointBatch make_joint_batch(const std::vector<Transition>& sample);

// Next-step actions from every agent's target policy: [agent][row].
using JointActions = std::vector<std::vector<HybridAction>>;

// Training surface shared by the SAC and DDPG families so mixed-algorithm
// populations (e.g. predators and prey trained differently) can share one
// loop. Execution is always local: act() sees a single observation.
class Agent {
 public:
  virtual ~Agent() = default;

  virtual const char* name() const = 0;
  virtual int obs_dim() const = 0;
  // One decision from one observation. explore enables the algorithm's own
  // exploration (stochastic sampling or epsilon-greedy); without it the
  // action is deterministic and consumes no randomness.
  virtual HybridAction act(const std::vector<double>& obs, Rng& rng,
                           bool explore) const = 0;
  // This agent's next-step action for every batch row, from its target
  // policy. Used by every agent's critic bootstrap, whatever its family.
  virtual void next_actions(const Array& next_obs, Rng& rng,
                            std::vector<HybridAction>& out) const = 0;
  virtual double critic_update(const JointBatch& jb, const JointActions& next_act,
                               Rng& rng) = 0;
  virtual double actor_update(const JointBatch& jb, Rng& rng) = 0;
  virtual void soft_update_targets() = 0;

  // End of one delayed-update cycle: soft updates plus clock tick. The clock
  // drives epsilon schedules and is persisted in checkpoints.
  void finish_cycle() {
    soft_update_targets();
    ++updates_;
  }
  int64_t updates() const { return updates_; }
  void set_updates(int64_t u) { updates_ = u; }

 protected:
  int64_t updates_ = 0;
};

struct TrainReport {
  std::vector<double> critic_loss;  // per agent, from the cycle's last update
  std::vector<double> actor_loss;
};

// One delayed-update cycle: delay critic updates for every agent, then delay
// actor updates for every agent, then one soft update of all targets. Each
// update draws a fresh batch.
TrainReport train_cycle(const std::vector<std::unique_ptr<Agent>>& agents,
                        const ReplayBuffer& buffer, size_t batch_size, int delay,
                        Rng& rng);

}  // namespace marl
