#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "marl/adam.hpp"
#include "marl/agent.hpp"
#include "marl/nn.hpp"
#include "marl/tape.hpp"

namespace marl {

// Linear decay from start at update 0 to end at update `horizon`, constant
// afterwards.
struct EpsilonSchedule {
  double start = 1.0;
  double end = 0.1;
  int64_t horizon = 10000;

  double at(int64_t u) const {
    if (u >= horizon) return end;
    return start + (end - start) * (static_cast<double>(u) / static_cast<double>(horizon));
  }
};

struct DdpgConfig {
  double gamma = 0.95;
  double tau = 0.01;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  int hidden = 64;
  bool centralized = true;
  EpsilonSchedule eps;
};

// Hybrid deterministic actor-critic agent. The actor emits four discrete
// action values plus four continuous parameters, both heads in [0,1];
// execution pairs the argmax value with its parameter. Critics consume
// actions as inputs: each agent contributes an 8-wide block, one-hot discrete
// plus the parameter in the chosen slot. During actor updates this agent's
// block is replaced by the actor's value vector and all four parameters, so
// the critic's gradient reaches both output groups directly while the relaxed
// input stays inside the unit cube the critic was fitted on.
class DdpgAgent : public Agent {
 public:
  DdpgAgent(std::string name, int index, std::vector<int> obs_dims, DdpgConfig config,
            Rng& rng);

  const char* name() const override { return name_.c_str(); }
  int obs_dim() const override { return obs_dims_[index_]; }
  HybridAction act(const std::vector<double>& obs, Rng& rng,
                   bool explore) const override;
  void next_actions(const Array& next_obs, Rng& rng,
                    std::vector<HybridAction>& out) const override;
  double critic_update(const JointBatch& jb, const JointActions& next_act,
                       Rng& rng) override;
  double actor_update(const JointBatch& jb, Rng& rng) override;
  void soft_update_targets() override;

  double epsilon() const { return cfg.eps.at(updates()); }

  // Bootstrap targets (rows x 1), tape-free: y = r + gamma*(1-done)*Q'(s',a')
  // with a' greedy from every agent's target actor.
  Array td_targets(const JointBatch& jb, const JointActions& next_act) const;
  // Batch mean of (Q - y)^2 at current critic params.
  double critic_loss(const JointBatch& jb, const Array& y) const;
  // Loss plus analytic gradients in MlpParams::all() order, no optimizer step.
  double critic_grads(const JointBatch& jb, const Array& y,
                      std::vector<Array>& g) const;
  double critic_apply(const JointBatch& jb, const Array& y);
  // Negated batch-mean critic value at the actor-substituted joint action.
  double actor_loss(const JointBatch& jb) const;
  // Loss plus analytic gradients in DdpgActor::all() order, no optimizer step.
  double actor_grads(const JointBatch& jb, std::vector<Array>& g) const;
  double actor_apply(const JointBatch& jb);

  Array critic_input_stored(const JointBatch& jb) const;
  Array critic_input_next(const JointBatch& jb, const JointActions& next_act) const;
  int critic_in_dim() const;

  DdpgActor actor, actor_target;
  MlpParams critic, critic_target;
  std::vector<AdamState> actor_opt, critic_opt;
  DdpgConfig cfg;

 private:
  int build_critic_loss(Tape& t, const JointBatch& jb, const Array& y,
                        std::vector<int>& leaves) const;
  int build_actor_loss(Tape& t, const JointBatch& jb,
                       std::vector<int>& actor_leaves) const;

  std::string name_;
  int index_;
  std::vector<int> obs_dims_;
};

}  // namespace marl
