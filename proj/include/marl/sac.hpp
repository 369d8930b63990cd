#pragma once

#include <string>
#include <vector>

#include "marl/adam.hpp"
#include "marl/agent.hpp"
#include "marl/nn.hpp"
#include "marl/tape.hpp"

namespace marl {

struct SacConfig {
  double gamma = 0.95;
  double tau = 0.01;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double alpha_d = 0.05;  // discrete entropy weight
  double alpha_c = 0.05;  // continuous entropy weight
  int mc_samples = 1;     // entropy draws inside the bootstrap target
  int hidden = 64;
  bool centralized = true;
};

// Hybrid soft actor-critic agent with twin multi-head critics. Centralized
// mode trains the critics on every agent's observation plus every agent's
// continuous parameter; decentralized mode sees only this agent's columns.
// The critic's 4-wide output is indexed by this agent's own discrete action,
// so no discrete choice ever enters a critic as an input.
//
// Continuous actions live in tanh space (-1,1) inside the policy and map
// affinely to the environment parameter p = (a+1)/2 in [0,1]; critics consume
// the [0,1] parameterization, matching what the replay buffer stores.
class SacAgent : public Agent {
 public:
  SacAgent(std::string name, int index, std::vector<int> obs_dims, SacConfig config,
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

  // Bootstrap targets (rows x 1), built without a tape so no gradient can
  // reach the target networks: y = r + gamma*(1-done)*(min twin target Q at
  // the sampled next action - weighted policy entropy at the next state).
  Array td_targets(const JointBatch& jb, const JointActions& next_act,
                   Rng& rng) const;
  // Mean of the twin Bellman losses, each 0.5*(Q - y)^2 batch-averaged.
  double critic_loss(const JointBatch& jb, const Array& y) const;
  // Loss plus analytic gradients in MlpParams::all() order, no optimizer step.
  double critic_grads(const JointBatch& jb, const Array& y, std::vector<Array>& g1,
                      std::vector<Array>& g2) const;
  // Same loss with one backward pass and one Adam step on both critics.
  double critic_apply(const JointBatch& jb, const Array& y);

  // Per-row per-branch reparameterization noise, rows x 4.
  Array draw_noise(int rows, Rng& rng) const;
  // Exact expectation over the four discrete branches of
  //   alpha_d*log pi_d + alpha_c*log pi_c - min twin Q
  // at fixed noise xi, batch-averaged. Critics are held constant.
  double actor_loss(const JointBatch& jb, const Array& xi) const;
  // Loss plus analytic gradients in SacActor::all() order, no optimizer step.
  double actor_grads(const JointBatch& jb, const Array& xi,
                     std::vector<Array>& g) const;
  double actor_apply(const JointBatch& jb, const Array& xi);

  // Joint critic input, one row per batch row: centralized layout is all
  // observations then all agents' parameters; decentralized keeps only this
  // agent's pair.
  Array critic_input_stored(const JointBatch& jb) const;
  Array critic_input_next(const JointBatch& jb, const JointActions& next_act) const;
  int critic_in_dim() const;

  SacActor actor, actor_target;
  MlpParams critic1, critic2, target1, target2;
  std::vector<AdamState> actor_opt, critic1_opt, critic2_opt;
  SacConfig cfg;

 private:
  int build_critic_loss(Tape& t, const JointBatch& jb, const Array& y,
                        std::vector<int>& leaves1, std::vector<int>& leaves2) const;
  int build_actor_loss(Tape& t, const JointBatch& jb, const Array& xi,
                       std::vector<int>& actor_leaves) const;

  std::string name_;
  int index_;
  std::vector<int> obs_dims_;
};

}  // namespace marl
