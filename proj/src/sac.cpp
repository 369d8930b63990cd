#include "marl/sac.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>

namespace marl {
namespace {

int joint_critic_in(const std::vector<int>& obs_dims, int index, bool centralized) {
  if (!centralized) return obs_dims.at(index) + 1;
  int total = 0;
  for (int d : obs_dims) total += d;
  return total + static_cast<int>(obs_dims.size());
}

std::vector<int> make_leaves(Tape& t, const std::vector<const Array*>& arrays) {
  std::vector<int> ids;
  ids.reserve(arrays.size());
  for (const Array* a : arrays) ids.push_back(t.leaf(*a));
  return ids;
}

int concat_pieces(Tape& t, const std::vector<int>& pieces) {
  int out = -1;
  for (int p : pieces) out = (out < 0) ? p : t.concat_cols(out, p);
  return out;
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

// Draw order is part of the determinism contract: actor first, then the two
// critics. Targets start as exact copies of the live nets.
SacAgent::SacAgent(std::string name, int index, std::vector<int> obs_dims,
                   SacConfig config, Rng& rng)
    : actor(SacActor::init(obs_dims.at(index), config.hidden, rng)),
      actor_target(actor),
      critic1(MlpParams::init({joint_critic_in(obs_dims, index, config.centralized),
                               config.hidden, config.hidden, kNumDirections},
                              rng)),
      critic2(MlpParams::init({joint_critic_in(obs_dims, index, config.centralized),
                               config.hidden, config.hidden, kNumDirections},
                              rng)),
      target1(critic1),
      target2(critic2),
      cfg(config),
      name_(std::move(name)),
      index_(index),
      obs_dims_(std::move(obs_dims)) {
  actor_opt = make_opt(actor.all(), cfg.actor_lr);
  critic1_opt = make_opt(critic1.all(), cfg.critic_lr);
  critic2_opt = make_opt(critic2.all(), cfg.critic_lr);
}

int SacAgent::critic_in_dim() const {
  return joint_critic_in(obs_dims_, index_, cfg.centralized);
}

HybridAction SacAgent::act(const std::vector<double>& obs, Rng& rng,
                           bool explore) const {
  Array row(1, static_cast<int>(obs.size()), obs);
  SacActorEval e = sac_actor_eval(actor, row);
  if (explore) {
    HybridSample s = sample_hybrid(e, 0, rng);
    return make_action(s.discrete, 0.5 * (s.action + 1.0));
  }
  int best = 0;
  for (int d = 1; d < kNumDirections; ++d)
    if (e.probs.at(0, d) > e.probs.at(0, best)) best = d;
  const double a = std::tanh(e.mu.at(0, best));
  return make_action(best, 0.5 * (a + 1.0));
}

void SacAgent::next_actions(const Array& next_obs, Rng& rng,
                            std::vector<HybridAction>& out) const {
  SacActorEval e = sac_actor_eval(actor_target, next_obs);
  out.resize(next_obs.rows);
  for (int r = 0; r < next_obs.rows; ++r) {
    HybridSample s = sample_hybrid(e, r, rng);
    out[r] = make_action(s.discrete, 0.5 * (s.action + 1.0));
  }
}

Array SacAgent::critic_input_stored(const JointBatch& jb) const {
  const int B = jb.rows;
  Array in(B, critic_in_dim());
  if (!cfg.centralized) {
    const Array& o = jb.obs[index_];
    for (int r = 0; r < B; ++r) {
      for (int c = 0; c < o.cols; ++c) in.at(r, c) = o.at(r, c);
      in.at(r, o.cols) = jb.act[index_][r].param;
    }
    return in;
  }
  const int n = jb.n_agents();
  for (int r = 0; r < B; ++r) {
    int c = 0;
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < jb.obs[j].cols; ++k) in.at(r, c++) = jb.obs[j].at(r, k);
    for (int j = 0; j < n; ++j) in.at(r, c++) = jb.act[j][r].param;
  }
  return in;
}

Array SacAgent::critic_input_next(const JointBatch& jb,
                                  const JointActions& next_act) const {
  const int B = jb.rows;
  Array in(B, critic_in_dim());
  if (!cfg.centralized) {
    const Array& o = jb.next_obs[index_];
    for (int r = 0; r < B; ++r) {
      for (int c = 0; c < o.cols; ++c) in.at(r, c) = o.at(r, c);
      in.at(r, o.cols) = next_act[index_][r].param;
    }
    return in;
  }
  const int n = jb.n_agents();
  for (int r = 0; r < B; ++r) {
    int c = 0;
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < jb.next_obs[j].cols; ++k)
        in.at(r, c++) = jb.next_obs[j].at(r, k);
    for (int j = 0; j < n; ++j) in.at(r, c++) = next_act[j][r].param;
  }
  return in;
}

Array SacAgent::td_targets(const JointBatch& jb, const JointActions& next_act,
                           Rng& rng) const {
  const int B = jb.rows;
  Array in = critic_input_next(jb, next_act);
  Array q1 = mlp_forward_raw(target1, in);
  Array q2 = mlp_forward_raw(target2, in);
  SacActorEval e = sac_actor_eval(actor_target, jb.next_obs[index_]);

  Array y(B, 1);
  for (int r = 0; r < B; ++r) {
    const int d = next_act[index_][r].discrete;
    const double qmin = std::min(q1.at(r, d), q2.at(r, d));
    const double h =
        hybrid_entropy(e, r, cfg.alpha_d, cfg.alpha_c, cfg.mc_samples, rng);
    y.at(r, 0) = jb.reward.at(r, index_) +
                 cfg.gamma * (1.0 - jb.done.at(r, index_)) * (qmin - h);
  }
  return y;
}

int SacAgent::build_critic_loss(Tape& t, const JointBatch& jb, const Array& y,
                                std::vector<int>& leaves1,
                                std::vector<int>& leaves2) const {
  const int B = jb.rows;
  Array mask(B, kNumDirections);
  for (int r = 0; r < B; ++r) mask.at(r, jb.act[index_][r].discrete) = 1.0;

  const int x = t.leaf(critic_input_stored(jb));
  const int sel = t.leaf(std::move(mask));
  const int ones = t.leaf(Array::full(kNumDirections, 1, 1.0));
  const int yl = t.leaf(y);

  leaves1 = make_leaves(t, std::as_const(critic1).all());
  leaves2 = make_leaves(t, std::as_const(critic2).all());

  auto bellman = [&](const std::vector<int>& leaves) {
    const int qall = mlp_apply(t, leaves, x);
    const int q = t.matmul(t.mul(qall, sel), ones);  // pick this agent's head
    return t.mul_const(t.mean(t.square(t.sub(q, yl))), 0.5);
  };
  return t.mul_const(t.add(bellman(leaves1), bellman(leaves2)), 0.5);
}

double SacAgent::critic_loss(const JointBatch& jb, const Array& y) const {
  Tape t;
  std::vector<int> l1, l2;
  return t.scalar(build_critic_loss(t, jb, y, l1, l2));
}

double SacAgent::critic_grads(const JointBatch& jb, const Array& y,
                              std::vector<Array>& g1, std::vector<Array>& g2) const {
  Tape t;
  std::vector<int> l1, l2;
  const int loss = build_critic_loss(t, jb, y, l1, l2);
  t.backward(loss);
  g1.clear();
  g2.clear();
  for (int id : l1) g1.push_back(t.grad(id));
  for (int id : l2) g2.push_back(t.grad(id));
  return t.scalar(loss);
}

double SacAgent::critic_apply(const JointBatch& jb, const Array& y) {
  Tape t;
  std::vector<int> l1, l2;
  const int loss = build_critic_loss(t, jb, y, l1, l2);
  t.backward(loss);
  step_all(critic1.all(), t, l1, critic1_opt);
  step_all(critic2.all(), t, l2, critic2_opt);
  return t.scalar(loss);
}

double SacAgent::critic_update(const JointBatch& jb, const JointActions& next_act,
                               Rng& rng) {
  return critic_apply(jb, td_targets(jb, next_act, rng));
}

Array SacAgent::draw_noise(int rows, Rng& rng) const {
  Array xi(rows, kNumDirections);
  for (double& v : xi.data) v = rng.normal();
  return xi;
}

int SacAgent::build_actor_loss(Tape& t, const JointBatch& jb, const Array& xi,
                               std::vector<int>& actor_leaves) const {
  const int B = jb.rows;
  if (xi.rows != B || xi.cols != kNumDirections)
    throw std::invalid_argument("sac actor_loss: noise shape mismatch");

  const int obs = t.leaf(jb.obs[index_]);
  SacActorGraph g = sac_actor_graph(t, actor, obs);
  actor_leaves = g.leaves;

  const std::vector<int> c1 = make_leaves(t, std::as_const(critic1).all());
  const std::vector<int> c2 = make_leaves(t, std::as_const(critic2).all());

  // Constant joint-input pieces around this agent's substituted parameter.
  const int n = jb.n_agents();
  int left = -1, right = -1;
  if (cfg.centralized) {
    int obs_total = 0;
    for (int j = 0; j < n; ++j) obs_total += jb.obs[j].cols;
    Array lhs(B, obs_total + index_);
    for (int r = 0; r < B; ++r) {
      int c = 0;
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < jb.obs[j].cols; ++k) lhs.at(r, c++) = jb.obs[j].at(r, k);
      for (int j = 0; j < index_; ++j) lhs.at(r, c++) = jb.act[j][r].param;
    }
    left = t.leaf(std::move(lhs));
    if (index_ + 1 < n) {
      Array rhs(B, n - 1 - index_);
      for (int r = 0; r < B; ++r)
        for (int j = index_ + 1; j < n; ++j)
          rhs.at(r, j - index_ - 1) = jb.act[j][r].param;
      right = t.leaf(std::move(rhs));
    }
  } else {
    left = obs;
  }

  int total = -1;
  for (int d = 0; d < kNumDirections; ++d) {
    Array xi_col(B, 1);
    for (int r = 0; r < B; ++r) xi_col.at(r, 0) = xi.at(r, d);
    const int xid = t.leaf(std::move(xi_col));

    const int mu_d = t.slice_cols(g.mu, d, d + 1);
    const int ls_d = t.slice_cols(g.log_sigma, d, d + 1);
    const int x = t.add(mu_d, t.mul(t.exp_(ls_d), xid));
    const int a =
        t.clip(t.tanh_(x), -1.0 + kActionEdge, 1.0 - kActionEdge);
    // log-density of the squashed sample; the -xi^2/2 term is constant under
    // reparameterization, so it enters as data
    const int corr =
        t.log_(t.add_const(t.mul_const(t.square(a), -1.0), 1.0 + kSquashEps));
    int logp_c = t.add(t.mul_const(t.square(xid), -0.5),
                       t.add_const(t.mul_const(ls_d, -1.0), -kHalfLog2Pi));
    logp_c = t.sub(logp_c, corr);

    std::vector<int> pieces;
    pieces.push_back(left);
    pieces.push_back(t.add_const(t.mul_const(a, 0.5), 0.5));  // env-space param
    if (right >= 0) pieces.push_back(right);
    const int input = concat_pieces(t, pieces);

    const int q1 = t.slice_cols(mlp_apply(t, c1, input), d, d + 1);
    const int q2 = t.slice_cols(mlp_apply(t, c2, input), d, d + 1);
    const int qmin = t.min2(q1, q2);

    const int lp_d = t.slice_cols(g.log_probs, d, d + 1);
    const int inner = t.sub(t.add(t.mul_const(lp_d, cfg.alpha_d),
                                  t.mul_const(logp_c, cfg.alpha_c)),
                            qmin);
    const int term = t.mul(t.slice_cols(g.probs, d, d + 1), inner);
    total = (total < 0) ? term : t.add(total, term);
  }
  return t.mean(total);
}

double SacAgent::actor_loss(const JointBatch& jb, const Array& xi) const {
  Tape t;
  std::vector<int> leaves;
  return t.scalar(build_actor_loss(t, jb, xi, leaves));
}

double SacAgent::actor_grads(const JointBatch& jb, const Array& xi,
                             std::vector<Array>& g) const {
  Tape t;
  std::vector<int> leaves;
  const int loss = build_actor_loss(t, jb, xi, leaves);
  t.backward(loss);
  g.clear();
  for (int id : leaves) g.push_back(t.grad(id));
  return t.scalar(loss);
}

double SacAgent::actor_apply(const JointBatch& jb, const Array& xi) {
  Tape t;
  std::vector<int> leaves;
  const int loss = build_actor_loss(t, jb, xi, leaves);
  t.backward(loss);
  step_all(actor.all(), t, leaves, actor_opt);
  return t.scalar(loss);
}

double SacAgent::actor_update(const JointBatch& jb, Rng& rng) {
  return actor_apply(jb, draw_noise(jb.rows, rng));
}

void SacAgent::soft_update_targets() {
  soft_update(actor_target.all(), std::as_const(actor).all(), cfg.tau);
  soft_update(target1.all(), std::as_const(critic1).all(), cfg.tau);
  soft_update(target2.all(), std::as_const(critic2).all(), cfg.tau);
}

}  // namespace marl
