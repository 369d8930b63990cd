#include "marl/agent.hpp"

#include <stdexcept>

namespace marl {

JointBatch make_joint_batch(const std::vector<Transition>& sample) {
  if (sample.empty()) throw std::invalid_argument("make_joint_batch: empty sample");
  const int rows = static_cast<int>(sample.size());
  const int n = static_cast<int>(sample[0].obs.size());

  JointBatch jb;
  jb.rows = rows;
  jb.obs.reserve(n);
  jb.next_obs.reserve(n);
  jb.act.assign(n, std::vector<HybridAction>(rows));
  jb.reward = Array(rows, n);
  jb.done = Array(rows, n);

  for (int j = 0; j < n; ++j) {
    const int d = static_cast<int>(sample[0].obs[j].size());
    jb.obs.emplace_back(rows, d);
    jb.next_obs.emplace_back(rows, d);
  }
  for (int r = 0; r < rows; ++r) {
    const Transition& t = sample[r];
    if (static_cast<int>(t.obs.size()) != n)
      throw std::invalid_argument("make_joint_batch: ragged agent count");
    for (int j = 0; j < n; ++j) {
      Array& o = jb.obs[j];
      Array& no = jb.next_obs[j];
      if (static_cast<int>(t.obs[j].size()) != o.cols ||
          static_cast<int>(t.next_obs[j].size()) != o.cols)
        throw std::invalid_argument("make_joint_batch: ragged observation");
      for (int c = 0; c < o.cols; ++c) {
        o.at(r, c) = t.obs[j][c];
        no.at(r, c) = t.next_obs[j][c];
      }
      jb.act[j][r] = t.act[j];
      jb.reward.at(r, j) = t.reward[j];
      jb.done.at(r, j) = t.done[j] ? 1.0 : 0.0;
    }
  }
  return jb;
}

TrainReport train_cycle(const std::vector<std::unique_ptr<Agent>>& agents,
                        const ReplayBuffer& buffer, size_t batch_size, int delay,
                        Rng& rng) {
  const int n = static_cast<int>(agents.size());
  TrainReport rep;
  rep.critic_loss.assign(n, 0.0);
  rep.actor_loss.assign(n, 0.0);

  for (int k = 0; k < delay; ++k) {
    for (int i = 0; i < n; ++i) {
      JointBatch jb = make_joint_batch(buffer.sample(batch_size, rng));
      JointActions next_act(n);
      for (int j = 0; j < n; ++j)
        agents[j]->next_actions(jb.next_obs[j], rng, next_act[j]);
      rep.critic_loss[i] = agents[i]->critic_update(jb, next_act, rng);
    }
  }
  for (int k = 0; k < delay; ++k) {
    for (int i = 0; i < n; ++i) {
      JointBatch jb = make_joint_batch(buffer.sample(batch_size, rng));
      rep.actor_loss[i] = agents[i]->actor_update(jb, rng);
    }
  }
  for (int i = 0; i < n; ++i) agents[i]->finish_cycle();
  return rep;
}

}  // namespace marl
