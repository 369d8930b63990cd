#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <cstring>
#include <memory>
#include <utility>

#include "marl/ddpg.hpp"
#include "marl/sac.hpp"
#include "oracles.hpp"

using namespace marl;
using marl::test::fd_params;
using marl::test::ParamGradCheck;
using marl::test::rel_err;

namespace {

std::vector<Transition> random_transitions(const std::vector<int>& dims, int rows,
                                           Rng& rng, double done_prob = 0.2) {
  const int n = static_cast<int>(dims.size());
  std::vector<Transition> ts(rows);
  for (Transition& t : ts) {
    t.obs.resize(n);
    t.next_obs.resize(n);
    t.act.resize(n);
    t.reward.resize(n);
    t.done.resize(n);
    for (int j = 0; j < n; ++j) {
      t.obs[j].resize(dims[j]);
      t.next_obs[j].resize(dims[j]);
      for (double& v : t.obs[j]) v = rng.uniform(-1.5, 1.5);
      for (double& v : t.next_obs[j]) v = rng.uniform(-1.5, 1.5);
      t.act[j] = make_action(static_cast<int>(rng.uniform_int(4)), rng.uniform01());
      t.reward[j] = rng.uniform(-2.0, 2.0);
      t.done[j] = rng.uniform01() < done_prob;
    }
  }
  return ts;
}

DdpgConfig small_cfg(bool centralized, int hidden = 6) {
  DdpgConfig c;
  c.hidden = hidden;
  c.centralized = centralized;
  return c;
}

void make_constant_net(MlpParams& p, double c) {
  for (Array* a : p.all())
    for (double& v : a->data) v = 0.0;
  for (double& v : p.b.back().data) v = c;
}

bool same_params(const std::vector<const Array*>& a, const std::vector<const Array*>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i]->data != b[i]->data) return false;
  return true;
}

std::array<uint64_t, 4> rng_state(const Rng& rng) {
  std::array<uint64_t, 4> s{};
  std::memcpy(s.data(), rng.state(), sizeof(s));
  return s;
}

// Joint critic input recomputed by hand for the actor substitution: all
// observations, then one 8-wide block per agent; agent `index` contributes
// its relaxed discrete values and all four parameters, everyone else the
// stored one-hot encoding.
Array substituted_input(const DdpgAgent& ag, const JointBatch& jb, int index,
                        const DdpgActorEval& e, int row) {
  Array in(1, ag.critic_in_dim());
  int c = 0;
  auto put_block = [&](const HybridAction& a) {
    for (int k = 0; k < 8; ++k) in.at(0, c + k) = 0.0;
    in.at(0, c + a.discrete) = 1.0;
    in.at(0, c + 4 + a.discrete) = a.param;
    c += 8;
  };
  auto put_actor = [&] {
    for (int k = 0; k < 4; ++k) in.at(0, c++) = e.disc.at(row, k);
    for (int k = 0; k < 4; ++k) in.at(0, c++) = e.params.at(row, k);
  };
  if (ag.cfg.centralized) {
    const int n = jb.n_agents();
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < jb.obs[j].cols; ++k) in.at(0, c++) = jb.obs[j].at(row, k);
    for (int j = 0; j < n; ++j) {
      if (j == index)
        put_actor();
      else
        put_block(jb.act[j][row]);
    }
  } else {
    for (int k = 0; k < jb.obs[index].cols; ++k)
      in.at(0, c++) = jb.obs[index].at(row, k);
    put_actor();
  }
  return in;
}

}  // namespace

TEST_CASE("epsilon schedule: endpoints exact, linear middle, clamped tail") {
  EpsilonSchedule s;
  CHECK(s.at(0) == 1.0);
  CHECK(s.at(10000) == 0.1);
  CHECK(s.at(5000) == doctest::Approx(0.55).epsilon(1e-15));
  CHECK(s.at(20000) == 0.1);
  CHECK(s.at(1000000) == 0.1);

  double prev = 2.0;
  for (int64_t u = 0; u <= 12000; ++u) {
    const double e = s.at(u);
    CHECK(e <= prev);
    CHECK(e >= 0.1);
    CHECK(e <= 1.0);
    prev = e;
  }
}

TEST_CASE("act: argmax pairs the matching parameter, ties go to index 0") {
  Rng rng(7);
  DdpgAgent ag("hddpg", 0, {3}, small_cfg(false), rng);
  for (Array* p : ag.actor.all())
    for (double& v : p->data) v = 0.0;
  double* bq = ag.actor.bq.data.data();
  bq[0] = 0.1;
  bq[1] = 0.9;
  bq[2] = 0.2;
  bq[3] = 0.0;
  double* bc = ag.actor.bc.data.data();
  const double want[4] = {0.3, 0.7, 0.5, 0.2};
  for (int d = 0; d < 4; ++d) bc[d] = std::atanh(2.0 * want[d] - 1.0);

  Rng probe(3);
  const auto before = rng_state(probe);
  HybridAction a = ag.act({0.0, 0.0, 0.0}, probe, false);
  CHECK(rng_state(probe) == before);  // greedy consumes no randomness
  CHECK(a.discrete == 1);
  CHECK(a.param == doctest::Approx(0.7).epsilon(1e-12));

  for (int d = 0; d < 4; ++d) bq[d] = 0.42;
  CHECK(ag.act({0.0, 0.0, 0.0}, probe, false).discrete == 0);
}

TEST_CASE("act at epsilon one: uniform discrete frequencies, uniform parameters") {
  Rng rng(17);
  DdpgAgent ag("hddpg", 0, {2}, small_cfg(false), rng);
  REQUIRE(ag.epsilon() == 1.0);

  const int n = 100000;
  int counts[4] = {0, 0, 0, 0};
  std::vector<double> params;
  params.reserve(n);
  Rng draw(2024);
  for (int i = 0; i < n; ++i) {
    HybridAction a = ag.act({0.0, 0.0}, draw, true);
    ++counts[a.discrete];
    params.push_back(a.param);
  }
  for (int d = 0; d < 4; ++d)
    CHECK(std::fabs(counts[d] / double(n) - 0.25) <= 0.01);
  // Kolmogorov-Smirnov at p = 0.001: D must stay under 1.9495/sqrt(n)
  CHECK(marl::test::ks_uniform01(params) < 1.9495 / std::sqrt(double(n)));
}

TEST_CASE("td_targets: constant target critic and terminal masking") {
  Rng rng(27);
  DdpgConfig cfg = small_cfg(true);
  cfg.gamma = 0.9;
  DdpgAgent ag("maddpg", 1, {2, 3}, cfg, rng);
  make_constant_net(ag.critic_target, 2.0);

  auto ts = random_transitions({2, 3}, 4, rng, 0.0);
  for (auto& t : ts) t.reward[1] = 1.0;
  JointBatch jb = make_joint_batch(ts);
  JointActions na(2);
  Rng r0(1);
  for (int j = 0; j < 2; ++j) {
    na[j].resize(jb.rows);
    for (int r = 0; r < jb.rows; ++r)
      na[j][r] = make_action(static_cast<int>(r0.uniform_int(4)), r0.uniform01());
  }

  Array y = ag.td_targets(jb, na);
  for (int r = 0; r < jb.rows; ++r)
    CHECK(y.at(r, 0) == doctest::Approx(1.0 + 0.9 * 2.0).epsilon(1e-12));

  ag.cfg.gamma = 0.0;
  Array y0 = ag.td_targets(jb, na);
  for (int r = 0; r < jb.rows; ++r) CHECK(y0.at(r, 0) == 1.0);

  ag.cfg.gamma = 0.9;
  auto ts2 = ts;
  for (auto& t : ts2) t.done[1] = true;
  Array y1 = ag.td_targets(make_joint_batch(ts2), na);
  for (int r = 0; r < jb.rows; ++r) CHECK(y1.at(r, 0) == 1.0);
}

TEST_CASE("next_actions are greedy target-actor outputs and use no randomness") {
  Rng rng(37);
  DdpgAgent ag("hddpg", 0, {3}, small_cfg(false), rng);
  Array next_obs = marl::test::random_array(5, 3, rng);

  Rng probe(5);
  const auto before = rng_state(probe);
  std::vector<HybridAction> out;
  ag.next_actions(next_obs, probe, out);
  CHECK(rng_state(probe) == before);

  DdpgActorEval e = ddpg_actor_eval(ag.actor_target, next_obs);
  for (int r = 0; r < 5; ++r) {
    HybridAction want = ddpg_greedy(e, r);
    CHECK(out[r].discrete == want.discrete);
    CHECK(out[r].param == want.param);
  }

  // live actor must not matter
  for (Array* p : ag.actor.all())
    for (double& v : p->data) v += 0.3;
  std::vector<HybridAction> out2;
  ag.next_actions(next_obs, probe, out2);
  for (int r = 0; r < 5; ++r) CHECK(out2[r].param == out[r].param);
}

TEST_CASE("critic_loss: plain squared error, zero at perfection, Adam holds still") {
  Rng rng(47);
  DdpgAgent ag("maddpg", 0, {2, 2}, small_cfg(true), rng);
  make_constant_net(ag.critic, 0.4);
  JointBatch jb = make_joint_batch(random_transitions({2, 2}, 5, rng));

  Array y = Array::full(5, 1, 0.4);
  CHECK(ag.critic_loss(jb, y) == 0.0);
  auto before = ag.critic;
  CHECK(ag.critic_apply(jb, y) == 0.0);
  CHECK(same_params(std::as_const(ag.critic).all(), std::as_const(before).all()));

  // no half factor: constant offset d gives exactly d^2
  Array y2 = Array::full(5, 1, 0.4 - 0.3);
  CHECK(ag.critic_loss(jb, y2) == doctest::Approx(0.09).epsilon(1e-12));
}

TEST_CASE("critic gradients match finite differences") {
  Rng rng(57);
  for (bool centralized : {true, false}) {
    for (int trial = 0; trial < 12; ++trial) {
      DdpgAgent ag("d", 1, {3, 2}, small_cfg(centralized), rng);
      JointBatch jb = make_joint_batch(random_transitions({3, 2}, 2, rng));
      Array y = marl::test::random_array(2, 1, rng);

      std::vector<Array> g;
      ag.critic_grads(jb, y, g);
      ParamGradCheck r;
      fd_params(r, ag.critic.all(), g, [&] { return ag.critic_loss(jb, y); });
      INFO("centralized " << centralized << " trial " << trial << " " << r.worst);
      CHECK(r.max_rel_err <= 1e-4);
    }
  }
}

TEST_CASE("actor gradients match finite differences") {
  Rng rng(67);
  for (bool centralized : {true, false}) {
    for (int trial = 0; trial < 12; ++trial) {
      DdpgAgent ag("d", 0, {3, 2}, small_cfg(centralized), rng);
      JointBatch jb = make_joint_batch(random_transitions({3, 2}, 2, rng));

      std::vector<Array> g;
      ag.actor_grads(jb, g);
      ParamGradCheck r;
      fd_params(r, ag.actor.all(), g, [&] { return ag.actor_loss(jb); });
      INFO("centralized " << centralized << " trial " << trial << " " << r.worst);
      CHECK(r.max_rel_err <= 1e-4);
    }
  }
}

TEST_CASE("actor_loss is the negated batch-mean substituted critic value") {
  Rng rng(77);
  for (bool centralized : {true, false}) {
    DdpgAgent ag("d", 1, {2, 3}, small_cfg(centralized), rng);
    JointBatch jb = make_joint_batch(random_transitions({2, 3}, 6, rng));
    DdpgActorEval e = ddpg_actor_eval(ag.actor, jb.obs[1]);

    double acc = 0.0;
    for (int r = 0; r < jb.rows; ++r) {
      Array in = substituted_input(ag, jb, 1, e, r);
      acc += mlp_forward_raw(ag.critic, in).at(0, 0);
    }
    CHECK(rel_err(ag.actor_loss(jb), -acc / jb.rows) <= 1e-12);
  }
}

TEST_CASE("other agents' actions shift the value but never the actor gradient") {
  Rng rng(87);
  DdpgAgent ag("d", 0, {2, 2}, small_cfg(true), rng);
  JointBatch jb = make_joint_batch(random_transitions({2, 2}, 4, rng));

  // value responds to neighbours' stored actions
  const double l1 = ag.actor_loss(jb);
  JointBatch jb2 = jb;
  for (int r = 0; r < jb2.rows; ++r)
    jb2.act[1][r] = make_action((jb2.act[1][r].discrete + 1) % 4,
                                1.0 - jb2.act[1][r].param);
  CHECK(ag.actor_loss(jb2) != l1);

  // a critic blind to this agent's action block sends the actor no gradient,
  // however the neighbours act
  const int obs_total = 2 + 2;
  for (int k = 0; k < 8; ++k)
    for (int c = 0; c < ag.critic.W[0].cols; ++c)
      ag.critic.W[0].at(obs_total + k, c) = 0.0;
  for (const JointBatch* b : {&jb, &jb2}) {
    std::vector<Array> g;
    ag.actor_grads(*b, g);
    for (const Array& ga : g)
      for (double v : ga.data) CHECK(v == 0.0);
  }
}

TEST_CASE("one-agent centralized and decentralized modes coincide") {
  Rng ra(97), rb(97);
  DdpgAgent cent("maddpg", 0, {4}, small_cfg(true), ra);
  DdpgAgent dec("hddpg", 0, {4}, small_cfg(false), rb);
  CHECK(cent.critic_in_dim() == dec.critic_in_dim());
  CHECK(same_params(std::as_const(cent.critic).all(), std::as_const(dec.critic).all()));

  Rng rng(555);
  JointBatch jb = make_joint_batch(random_transitions({4}, 3, rng));
  Array y = marl::test::random_array(3, 1, rng);
  CHECK(cent.critic_loss(jb, y) == dec.critic_loss(jb, y));
  CHECK(cent.actor_loss(jb) == dec.actor_loss(jb));

  JointActions na(1);
  Rng r0(3);
  cent.next_actions(jb.next_obs[0], r0, na[0]);
  CHECK(cent.td_targets(jb, na).data == dec.td_targets(jb, na).data);
}

TEST_CASE("actor updates walk both heads to the critic optimum") {
  // Critic fitted to Q = -(x[6] - 0.3)^2 - sum((x[1..4] - 0.25)^2), where
  // columns 1..4 take the actor's relaxed discrete values and column 6 is the
  // parameter slot of discrete action 1. Both optima are interior to the
  // heads' [0,1] range: discrete values at 0.25, that parameter at 0.3. The
  // critic is fitted over [0,1] on every action column, matching where the
  // bounded heads can actually drive it.
  Rng rng(107);
  DdpgConfig cfg = small_cfg(false, 24);
  DdpgAgent ag("d", 0, {1}, cfg, rng);

  {
    std::vector<AdamState> opt;
    for (Array* p : ag.critic.all()) opt.push_back(AdamState::like(*p, 3e-3));
    for (int it = 0; it < 6000; ++it) {
      Array x(64, 9);
      Array target(64, 1);
      for (int r = 0; r < 64; ++r) {
        x.at(r, 0) = 0.0;
        double q = 0.0;
        for (int k = 1; k < 5; ++k) {
          x.at(r, k) = rng.uniform01();
          const double d = x.at(r, k) - 0.25;
          q -= d * d;
        }
        for (int k = 5; k < 9; ++k) x.at(r, k) = rng.uniform01();
        const double d = x.at(r, 6) - 0.3;
        target.at(r, 0) = q - d * d;
      }
      Tape t;
      std::vector<int> leaves;
      for (const Array* p : std::as_const(ag.critic).all())
        leaves.push_back(t.leaf(*p));
      const int loss =
          t.mean(t.square(t.sub(mlp_apply(t, leaves, t.leaf(x)), t.leaf(target))));
      t.backward(loss);
      auto params = ag.critic.all();
      for (size_t k = 0; k < params.size(); ++k)
        adam_step(*params[k], t.grad(leaves[k]), opt[k]);
    }

    double worst = 0.0;
    for (int r = 0; r < 200; ++r) {
      Array x(1, 9);
      x.at(0, 0) = 0.0;
      double q = 0.0;
      for (int k = 1; k < 5; ++k) {
        x.at(0, k) = rng.uniform01();
        const double d = x.at(0, k) - 0.25;
        q -= d * d;
      }
      for (int k = 5; k < 9; ++k) x.at(0, k) = rng.uniform01();
      const double d = x.at(0, 6) - 0.3;
      worst = std::max(worst,
                       std::fabs(mlp_forward_raw(ag.critic, x).at(0, 0) - (q - d * d)));
    }
    REQUIRE(worst < 0.1);  // actor signal is only as good as the fit
  }

  std::vector<Transition> ts(64);
  for (auto& t : ts) {
    t.obs = {{0.0}};
    t.next_obs = {{0.0}};
    t.act = {make_action(0, 0.5)};
    t.reward = {0.0};
    t.done = {false};
  }
  JointBatch jb = make_joint_batch(ts);
  for (int it = 0; it < 5000; ++it) ag.actor_apply(jb);

  // The critic fit is only good to 0.1, so the surrogate optimum can sit a
  // comparable distance from the analytic one; the bar reflects that.
  DdpgActorEval e = ddpg_actor_eval(ag.actor, Array(1, 1, {0.0}));
  for (int d = 0; d < 4; ++d) CHECK(std::fabs(e.disc.at(0, d) - 0.25) < 0.1);
  CHECK(std::fabs(e.params.at(0, 1) - 0.3) < 0.1);
}

TEST_CASE("train_cycle ticks the epsilon clock and copies targets at tau one") {
  Rng rng(117);
  DdpgConfig cfg = small_cfg(true);
  cfg.tau = 1.0;
  std::vector<std::unique_ptr<Agent>> agents;
  agents.emplace_back(new DdpgAgent("a0", 0, {3, 3}, cfg, rng));
  agents.emplace_back(new DdpgAgent("a1", 1, {3, 3}, cfg, rng));

  ReplayBuffer buf(256);
  for (auto& t : random_transitions({3, 3}, 40, rng)) buf.push(t);

  for (int cycle = 1; cycle <= 3; ++cycle) {
    TrainReport rep = train_cycle(agents, buf, 8, 1, rng);
    for (int i = 0; i < 2; ++i) {
      CHECK(std::isfinite(rep.critic_loss[i]));
      CHECK(std::isfinite(rep.actor_loss[i]));
      auto* ag = dynamic_cast<DdpgAgent*>(agents[i].get());
      REQUIRE(ag != nullptr);
      CHECK(ag->updates() == cycle);
      CHECK(ag->epsilon() == ag->cfg.eps.at(cycle));
      CHECK(ag->critic_opt[0].t == cycle);
      CHECK(ag->actor_opt[0].t == cycle);
      CHECK(same_params(std::as_const(ag->actor_target).all(),
                        std::as_const(ag->actor).all()));
      CHECK(same_params(std::as_const(ag->critic_target).all(),
                        std::as_const(ag->critic).all()));
    }
  }
}

TEST_CASE("mixed populations train together") {
  Rng rng(127);
  std::vector<std::unique_ptr<Agent>> agents;
  SacConfig sc;
  sc.hidden = 6;
  agents.emplace_back(new SacAgent("mahsac", 0, {3, 3}, sc, rng));
  DdpgConfig dc;
  dc.hidden = 6;
  dc.centralized = false;
  agents.emplace_back(new DdpgAgent("hddpg", 1, {3, 3}, dc, rng));

  ReplayBuffer buf(128);
  for (auto& t : random_transitions({3, 3}, 30, rng)) buf.push(t);

  TrainReport rep = train_cycle(agents, buf, 8, 1, rng);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::isfinite(rep.critic_loss[i]));
    CHECK(std::isfinite(rep.actor_loss[i]));
    CHECK(agents[i]->updates() == 1);
  }
}
