#include "marl/ddpg.hpp"

#include <utility>

namespace marl {
namespace {

constexpr int kActBlock = 2 * kNumDirections;  // one-hot ++ parameter slot

int joint_critic_in(const std::vector<int>& obs_dims, int index, bool centralized) {
  if (!centralized) return obs_dims.at(index) + kActBlock;
  int total = 0;
  for (int d : obs_dims) total += d;
  return total + kActBlock * static_cast<int>(obs_dims.size());
}

void encode_action(const HybridAction& a, double* dst) {
  for (int k = 0; k < kActBlock; ++k) dst[k] = 0.0;
  dst[a.discrete] = 1.0;
  dst[kNumDirections + a.discrete] = a.param;
}

std::vector<int> make_leaves(Tape& t, const std::vector<const Array*>& arrays) {
  std::vector<int> ids;
  ids.reserve(arrays.size());
  for (const Array* a : arrays) ids.push_back(t.leaf(*a));
  return ids;
}

std::vector<AdamState> make_opt(const std::vector<Array*>& params, double lr) {
  std::vector<AdamState> opt;
  opt.reserve(params.size());
  for (Array* p : params) opt.push_back(AdamState::like(*p, lr));
  return opt;
}

void step_all(const std::vector<Array*>& params, Tape& t,
              const std::vector<int>& leaves, std::vector<AdamState>& opt) {
  for (size_t k = 0; k < params.size(); ++k)
    adam_step(*params[k], t.grad(leaves[k]), opt[k]);
}

}  // namespace

// Draw order: actor then critic; targets start as exact copies.
DdpgAgent::DdpgAgent(std::string name, int index, std::vector<int> obs_dims,
                     DdpgConfig config, Rng& rng)
    : actor(DdpgActor::init(obs_dims.at(index), config.hidden, rng)),
      actor_target(actor),
      critic(MlpParams::init({joint_critic_in(obs_dims, index, config.centralized),
                              config.hidden, config.hidden, 1},
                             rng)),
      critic_target(critic),
      cfg(config),
      name_(std::move(name)),
      index_(index),
      obs_dims_(std::move(obs_dims)) {
  actor_opt = make_opt(actor.all(), cfg.actor_lr);
  critic_opt = make_opt(critic.all(), cfg.critic_lr);
}

int DdpgAgent::critic_in_dim() const {
  return joint_critic_in(obs_dims_, index_, cfg.centralized);
}

HybridAction DdpgAgent::act(const std::vector<double>& obs, Rng& rng,
                            bool explore) const {
  if (explore && rng.uniform01() < epsilon()) {
    const int d = static_cast<int>(rng.uniform_int(kNumDirections));
    return make_action(d, rng.uniform01());
  }
  Array row(1, static_cast<int>(obs.size()), obs);
  return ddpg_greedy(ddpg_actor_eval(actor, row), 0);
}

void DdpgAgent::next_actions(const Array& next_obs, Rng&,
                             std::vector<HybridAction>& out) const {
  DdpgActorEval e = ddpg_actor_eval(actor_target, next_obs);
  out.resize(next_obs.rows);
  for (int r = 0; r < next_obs.rows; ++r) out[r] = ddpg_greedy(e, r);
}

Array DdpgAgent::critic_input_stored(const JointBatch& jb) const {
  const int B = jb.rows;
  Array in(B, critic_in_dim());
  if (!cfg.centralized) {
    const Array& o = jb.obs[index_];
    for (int r = 0; r < B; ++r) {
      for (int c = 0; c < o.cols; ++c) in.at(r, c) = o.at(r, c);
      encode_action(jb.act[index_][r], &in.at(r, o.cols));
    }
    return in;
  }
  const int n = jb.n_agents();
  int obs_total = 0;
  for (int j = 0; j < n; ++j) obs_total += jb.obs[j].cols;
  for (int r = 0; r < B; ++r) {
    int c = 0;
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < jb.obs[j].cols; ++k) in.at(r, c++) = jb.obs[j].at(r, k);
    for (int j = 0; j < n; ++j)
      encode_action(jb.act[j][r], &in.at(r, obs_total + kActBlock * j));
  }
  return in;
}

Array DdpgAgent::critic_input_next(const JointBatch& jb,
                                   const JointActions& next_act) const {
  const int B = jb.rows;
  Array in(B, critic_in_dim());
  if (!cfg.centralized) {
    const Array& o = jb.next_obs[index_];
    for (int r = 0; r < B; ++r) {
      for (int c = 0; c < o.cols; ++c) in.at(r, c) = o.at(r, c);
      encode_action(next_act[index_][r], &in.at(r, o.cols));
    }
    return in;
  }
  const int n = jb.n_agents();
  int obs_total = 0;
  for (int j = 0; j < n; ++j) obs_total += jb.next_obs[j].cols;
  for (int r = 0; r < B; ++r) {
    int c = 0;
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < jb.next_obs[j].cols; ++k)
        in.at(r, c++) = jb.next_obs[j].at(r, k);
    for (int j = 0; j < n; ++j)
      encode_action(next_act[j][r], &in.at(r, obs_total + kActBlock * j));
  }
  return in;
}

Array DdpgAgent::td_targets(const JointBatch& jb,
                            const JointActions& next_act) const {
  Array q = mlp_forward_raw(critic_target, critic_input_next(jb, next_act));
  Array y(jb.rows, 1);
  for (int r = 0; r < jb.rows; ++r)
    y.at(r, 0) = jb.reward.at(r, index_) +
                 cfg.gamma * (1.0 - jb.done.at(r, index_)) * q.at(r, 0);
  return y;
}

int DdpgAgent::build_critic_loss(Tape& t, const JointBatch& jb, const Array& y,
                                 std::vector<int>& leaves) const {
  const int x = t.leaf(critic_input_stored(jb));
  const int yl = t.leaf(y);
  leaves = make_leaves(t, std::as_const(critic).all());
  const int q = mlp_apply(t, leaves, x);
  return t.mean(t.square(t.sub(q, yl)));
}

double DdpgAgent::critic_loss(const JointBatch& jb, const Array& y) const {
  Tape t;
  std::vector<int> leaves;
  return t.scalar(build_critic_loss(t, jb, y, leaves));
}

double DdpgAgent::critic_grads(const JointBatch& jb, const Array& y,
                               std::vector<Array>& g) const {
  Tape t;
  std::vector<int> leaves;
  const int loss = build_critic_loss(t, jb, y, leaves);
  t.backward(loss);
  g.clear();
  for (int id : leaves) g.push_back(t.grad(id));
  return t.scalar(loss);
}

double DdpgAgent::critic_apply(const JointBatch& jb, const Array& y) {
  Tape t;
  std::vector<int> leaves;
  const int loss = build_critic_loss(t, jb, y, leaves);
  t.backward(loss);
  step_all(critic.all(), t, leaves, critic_opt);
  return t.scalar(loss);
}

double DdpgAgent::critic_update(const JointBatch& jb, const JointActions& next_act,
                                Rng&) {
  return critic_apply(jb, td_targets(jb, next_act));
}

int DdpgAgent::build_actor_loss(Tape& t, const JointBatch& jb,
                                std::vector<int>& actor_leaves) const {
  const int B = jb.rows;
  const int obs = t.leaf(jb.obs[index_]);
  DdpgActorGraph g = ddpg_actor_graph(t, actor, obs);
  actor_leaves = g.leaves;

  const std::vector<int> cl = make_leaves(t, std::as_const(critic).all());

  int input = -1;
  if (cfg.centralized) {
    const int n = jb.n_agents();
    int obs_total = 0;
    for (int j = 0; j < n; ++j) obs_total += jb.obs[j].cols;
    Array lhs(B, obs_total + kActBlock * index_);
    for (int r = 0; r < B; ++r) {
      int c = 0;
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < jb.obs[j].cols; ++k) lhs.at(r, c++) = jb.obs[j].at(r, k);
      for (int j = 0; j < index_; ++j)
        encode_action(jb.act[j][r], &lhs.at(r, obs_total + kActBlock * j));
    }
    input = t.concat_cols(t.concat_cols(t.leaf(std::move(lhs)), g.disc), g.params);
    if (index_ + 1 < n) {
      Array rhs(B, kActBlock * (n - 1 - index_));
      for (int r = 0; r < B; ++r)
        for (int j = index_ + 1; j < n; ++j)
          encode_action(jb.act[j][r], &rhs.at(r, kActBlock * (j - index_ - 1)));
      input = t.concat_cols(input, t.leaf(std::move(rhs)));
    }
  } else {
    input = t.concat_cols(t.concat_cols(obs, g.disc), g.params);
  }

  const int q = mlp_apply(t, cl, input);
  return t.mul_const(t.mean(q), -1.0);
}

double DdpgAgent::actor_loss(const JointBatch& jb) const {
  Tape t;
  std::vector<int> leaves;
  return t.scalar(build_actor_loss(t, jb, leaves));
}

double DdpgAgent::actor_grads(const JointBatch& jb, std::vector<Array>& g) const {
  Tape t;
  std::vector<int> leaves;
  const int loss = build_actor_loss(t, jb, leaves);
  t.backward(loss);
  g.clear();
  for (int id : leaves) g.push_back(t.grad(id));
  return t.scalar(loss);
}

double DdpgAgent::actor_apply(const JointBatch& jb) {
  Tape t;
  std::vector<int> leaves;
  const int loss = build_actor_loss(t, jb, leaves);
  t.backward(loss);
  step_all(actor.all(), t, leaves, actor_opt);
  return t.scalar(loss);
}

double DdpgAgent::actor_update(const JointBatch& jb, Rng&) {
  return actor_apply(jb);
}

void DdpgAgent::soft_update_targets() {
  soft_update(actor_target.all(), std::as_const(actor).all(), cfg.tau);
  soft_update(critic_target.all(), std::as_const(critic).all(), cfg.tau);
}

}  // namespace marl
