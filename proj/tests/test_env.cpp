#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "marl/env.hpp"
#include "oracles.hpp"

using namespace marl;

namespace {

std::vector<HybridAction> zero_actions(int n) {
  return std::vector<HybridAction>(n, HybridAction{0, 0.0});
}

// Standalone two-body integrator, written against the stated physics rather
// than the World code: soft contact force, damping, speed clamp, Euler.
struct TwoBody {
  double px[2], py[2], vx[2], vy[2];
  double radius, max_speed;

  void step() {
    const double dt = 0.1, damping = 0.25, k = 100.0, margin = 1e-3;
    double dx = px[0] - px[1], dy = py[0] - py[1];
    double dist = std::sqrt(dx * dx + dy * dy);
    if (dist < 1e-12) dist = 1e-12;
    const double pen = std::log(1.0 + std::exp((2.0 * radius - dist) / margin)) * margin;
    const double f = k * pen / dist;
    const double fx[2] = {f * dx, -f * dx};
    const double fy[2] = {f * dy, -f * dy};
    for (int i = 0; i < 2; ++i) {
      vx[i] = (1.0 - damping) * vx[i] + fx[i] * dt;
      vy[i] = (1.0 - damping) * vy[i] + fy[i] * dt;
      const double sp = std::sqrt(vx[i] * vx[i] + vy[i] * vy[i]);
      if (sp > max_speed) {
        vx[i] *= max_speed / sp;
        vy[i] *= max_speed / sp;
      }
      px[i] += vx[i] * dt;
      py[i] += vy[i] * dt;
      // inelastic walls: clamp and drop the outward velocity component
      if (px[i] < -1.5) {
        px[i] = -1.5;
        if (vx[i] < 0.0) vx[i] = 0.0;
      } else if (px[i] > 1.5) {
        px[i] = 1.5;
        if (vx[i] > 0.0) vx[i] = 0.0;
      }
      if (py[i] < -1.5) {
        py[i] = -1.5;
        if (vy[i] < 0.0) vy[i] = 0.0;
      } else if (py[i] > 1.5) {
        py[i] = 1.5;
        if (vy[i] > 0.0) vy[i] = 0.0;
      }
    }
  }
};

}  // namespace

TEST_CASE("decode_action maps directions and clips") {
  double fx, fy;
  decode_action({0, 0.5}, fx, fy);
  CHECK(fx == 0.5);
  CHECK(fy == 0.0);
  decode_action({3, 1.0}, fx, fy);
  CHECK(fx == 0.0);
  CHECK(fy == -1.0);
  decode_action({1, 1.7}, fx, fy);  // param clipped to 1
  CHECK(fx == -1.0);
  CHECK(fy == 0.0);
  // exactly one nonzero component, magnitude <= 1
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    decode_action({int(rng.uniform_int(4)), rng.uniform(-0.5, 1.5)}, fx, fy);
    CHECK((fx == 0.0) != (fy == 0.0 && fx != 0.0));
    CHECK((fx == 0.0 || fy == 0.0));
    CHECK(std::fabs(fx) + std::fabs(fy) <= 1.0);
  }
}

TEST_CASE("reset is reproducible and scenario layouts match") {
  World w(Scenario::CoopNav);
  w.reset(42);
  auto snap = w.entities();
  CHECK(snap.size() == 6);
  for (const Entity& e : snap) {
    CHECK(e.vx == 0.0);
    CHECK(e.vy == 0.0);
    CHECK(e.px >= -1.0);
    CHECK(e.px <= 1.0);
  }
  w.reset(42);
  for (size_t i = 0; i < snap.size(); ++i) {
    CHECK(std::memcmp(&snap[i].px, &w.entities()[i].px, sizeof(double)) == 0);
    CHECK(std::memcmp(&snap[i].py, &w.entities()[i].py, sizeof(double)) == 0);
  }

  World pp(Scenario::PredatorPrey);
  pp.reset(1);
  CHECK(pp.entities().size() == 6);
  int adv = 0, ag = 0, obs = 0;
  for (const Entity& e : pp.entities()) {
    if (e.role == Role::Adversary) ++adv;
    if (e.role == Role::Agent) ++ag;
    if (e.role == Role::Obstacle) ++obs;
  }
  CHECK(adv == 3);
  CHECK(ag == 1);
  CHECK(obs == 2);
  CHECK(pp.n_agents() == 4);
}

TEST_CASE("trajectories are bit-identical across runs") {
  for (uint64_t seed : {1ull, 9ull, 77ull}) {
    World a(Scenario::PredatorPrey), b(Scenario::PredatorPrey);
    a.reset(seed);
    b.reset(seed);
    Rng ra(seed), rb(seed);
    for (int t = 0; t < 25; ++t) {
      std::vector<HybridAction> acts;
      for (int i = 0; i < a.n_agents(); ++i)
        acts.push_back({int(ra.uniform_int(4)), ra.uniform01()});
      a.step(acts);
      std::vector<HybridAction> acts2;
      for (int i = 0; i < b.n_agents(); ++i)
        acts2.push_back({int(rb.uniform_int(4)), rb.uniform01()});
      b.step(acts2);
      for (size_t e = 0; e < a.entities().size(); ++e) {
        CHECK(std::memcmp(&a.entities()[e].px, &b.entities()[e].px, sizeof(double)) == 0);
        CHECK(std::memcmp(&a.entities()[e].vx, &b.entities()[e].vx, sizeof(double)) == 0);
      }
    }
  }
}

TEST_CASE("zero actions and zero velocity leave positions unchanged") {
  EnvConfig cfg;
  cfg.cn_agents = 2;
  World w(Scenario::CoopNav, cfg);
  w.reset(5);
  // spread the agents so no contact force acts
  w.mutable_entities()[0].px = -1.0;
  w.mutable_entities()[0].py = -1.0;
  w.mutable_entities()[1].px = 1.0;
  w.mutable_entities()[1].py = 1.0;
  auto before = w.entities();
  w.step(zero_actions(2));
  for (size_t i = 0; i < before.size(); ++i) {
    CHECK(w.entities()[i].px == before[i].px);
    CHECK(w.entities()[i].py == before[i].py);
  }
}

TEST_CASE("single-step integration arithmetic") {
  EnvConfig cfg;
  cfg.cn_agents = 1;
  cfg.cn_landmarks = 0;
  World w(Scenario::CoopNav, cfg);
  w.reset(1);
  w.mutable_entities()[0].px = 0.0;
  w.mutable_entities()[0].py = 0.0;
  w.step({{0, 1.0}});  // (x+, 1.0)
  CHECK(w.entities()[0].vx == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(w.entities()[0].vy == 0.0);
  CHECK(w.entities()[0].px == doctest::Approx(0.01).epsilon(1e-15));
}

TEST_CASE("two overlapping agents repel and match the standalone integrator") {
  EnvConfig cfg;
  cfg.cn_agents = 2;
  cfg.cn_landmarks = 0;
  World w(Scenario::CoopNav, cfg);
  w.reset(2);
  auto& es = w.mutable_entities();
  es[0].px = -0.03;
  es[0].py = 0.0;
  es[1].px = 0.03;
  es[1].py = 0.0;

  TwoBody oracle{};
  oracle.px[0] = -0.03;
  oracle.px[1] = 0.03;
  oracle.py[0] = oracle.py[1] = 0.0;
  oracle.vx[0] = oracle.vx[1] = oracle.vy[0] = oracle.vy[1] = 0.0;
  oracle.radius = cfg.cn_agent_radius;
  oracle.max_speed = cfg.cn_max_speed;

  // the overlapping state carries the collision penalty for both agents
  {
    int c = 0;
    double d = 0.0;
    auto rew = w.reward_coop_nav(c, d);
    CHECK(c == 1);
    CHECK(rew[0] <= -1.0 + 1e-12);
    CHECK(rew[1] <= -1.0 + 1e-12);
  }
  w.step(zero_actions(2));
  oracle.step();

  double prev_gap = 0.06;
  for (int t = 0; t < 5; ++t) {
    for (int i = 0; i < 2; ++i) {
      CHECK(w.entities()[i].px == doctest::Approx(oracle.px[i]).epsilon(1e-9));
      CHECK(w.entities()[i].py == doctest::Approx(oracle.py[i]).epsilon(1e-9));
      CHECK(w.entities()[i].vx == doctest::Approx(oracle.vx[i]).epsilon(1e-9));
    }
    const double gap = std::fabs(w.entities()[1].px - w.entities()[0].px);
    CHECK(gap > prev_gap);
    prev_gap = gap;
    w.step(zero_actions(2));
    oracle.step();
  }
}

TEST_CASE("coop_nav reward equals the exhaustive pairing oracle") {
  World w(Scenario::CoopNav);
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    w.reset(trial);
    int collisions = 0;
    double dist = 0.0;
    auto rew = w.reward_coop_nav(collisions, dist);

    double shared = 0.0;
    double dsum = 0.0;
    const auto& es = w.entities();
    for (int l = 3; l < 6; ++l) {
      double best = 1e18;
      for (int a = 0; a < 3; ++a) {
        const double dx = es[a].px - es[l].px, dy = es[a].py - es[l].py;
        best = std::min(best, std::hypot(dx, dy));
      }
      shared -= best;
      dsum += best;
    }
    std::vector<double> expect(3, shared);
    int pairs = 0;
    for (int a = 0; a < 3; ++a)
      for (int b = a + 1; b < 3; ++b) {
        const double dx = es[a].px - es[b].px, dy = es[a].py - es[b].py;
        if (std::hypot(dx, dy) < es[a].radius + es[b].radius) {
          ++pairs;
          expect[a] -= 1.0;
          expect[b] -= 1.0;
        }
      }
    CHECK(collisions == pairs);
    CHECK(dist == doctest::Approx(dsum / 3.0).epsilon(1e-12));
    for (int a = 0; a < 3; ++a) CHECK(rew[a] == doctest::Approx(expect[a]).epsilon(1e-12));
    (void)rng;
  }
}

TEST_CASE("coop_nav hand cases") {
  EnvConfig cfg;
  cfg.cn_agents = 1;
  cfg.cn_landmarks = 1;
  cfg.arena = 10.0;
  World w(Scenario::CoopNav, cfg);
  w.reset(0);
  auto& es = w.mutable_entities();
  es[0].px = 0.0;
  es[0].py = 0.0;
  es[1].px = 3.0;
  es[1].py = 4.0;
  int c = 0;
  double d = 0.0;
  auto rew = w.reward_coop_nav(c, d);
  CHECK(rew[0] == doctest::Approx(-5.0).epsilon(1e-12));

  // every agent exactly on a distinct landmark, no collisions: reward 0
  World w2(Scenario::CoopNav);
  w2.reset(0);
  auto& f = w2.mutable_entities();
  const double spots[3][2] = {{-0.8, -0.8}, {0.0, 0.8}, {0.8, -0.5}};
  for (int i = 0; i < 3; ++i) {
    f[i].px = spots[i][0];
    f[i].py = spots[i][1];
    f[3 + i].px = spots[i][0];
    f[3 + i].py = spots[i][1];
  }
  auto rew2 = w2.reward_coop_nav(c, d);
  for (double r : rew2) CHECK(r == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(c == 0);
}

TEST_CASE("predator_prey touch rewards and boundary penalty") {
  World w(Scenario::PredatorPrey);
  w.reset(3);
  auto& es = w.mutable_entities();
  // far apart, prey inside: all zero
  es[0] = es[0];
  for (int i = 0; i < 4; ++i) {
    es[i].px = -0.8 + 0.5 * i;
    es[i].py = 0.6;
  }
  es[3].px = 0.0;
  es[3].py = 0.0;
  es[0].px = -0.9;
  es[1].px = 0.9;
  es[2].py = -0.9;
  int c = 0, touches = 0;
  auto r = w.reward_predator_prey(c, touches);
  CHECK(touches == 0);
  for (double x : r) CHECK(x == 0.0);

  // one predator overlapping the prey
  es[0].px = es[3].px + 0.05;
  es[0].py = es[3].py;
  r = w.reward_predator_prey(c, touches);
  CHECK(touches == 1);
  CHECK(r[0] == doctest::Approx(10.0));
  CHECK(r[3] == doctest::Approx(-10.0));

  // all three touching: prey loses 30
  for (int p = 0; p < 3; ++p) {
    es[p].px = es[3].px + 0.03 * (p - 1);
    es[p].py = es[3].py + 0.02;
  }
  r = w.reward_predator_prey(c, touches);
  CHECK(touches == 3);
  for (int p = 0; p < 3; ++p) CHECK(r[p] == doctest::Approx(10.0));
  CHECK(r[3] == doctest::Approx(-30.0));
}

TEST_CASE("boundary penalty shape") {
  CHECK(boundary_penalty(0.0) == 0.0);
  CHECK(boundary_penalty(0.89) == 0.0);
  CHECK(boundary_penalty(-0.95) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(boundary_penalty(1.2) == doctest::Approx(std::exp(0.4)).epsilon(1e-12));
  CHECK(boundary_penalty(5.0) == 10.0);
  // monotone nondecreasing
  double prev = 0.0;
  for (double x = 0.0; x < 2.0; x += 0.01) {
    CHECK(boundary_penalty(x) >= prev);
    prev = boundary_penalty(x);
  }
}

TEST_CASE("arena confinement and landmark immobility under random actions") {
  World w(Scenario::CoopNav);
  w.reset(11);
  const auto lm0 = w.entities();
  Rng rng(12);
  for (int t = 0; t < 2000; ++t) {
    if (w.step_count() >= 25) w.reset(100 + t);
    std::vector<HybridAction> acts;
    for (int i = 0; i < 3; ++i) acts.push_back({int(rng.uniform_int(4)), rng.uniform01()});
    w.step(acts);
    for (const Entity& e : w.entities()) {
      CHECK(std::fabs(e.px) <= 1.5);
      CHECK(std::fabs(e.py) <= 1.5);
    }
    for (int l = 3; l < 6; ++l) {
      CHECK(w.entities()[l].vx == 0.0);
      CHECK(w.entities()[l].vy == 0.0);
    }
  }
  (void)lm0;
}

TEST_CASE("observation layout and sizes") {
  World w(Scenario::CoopNav);
  w.reset(8);
  CHECK(w.obs_dim(0) == 14);
  auto o = w.observe(1);
  CHECK(o.size() == 14);
  const auto& es = w.entities();
  CHECK(o[0] == es[1].vx);
  CHECK(o[2] == es[1].px);
  CHECK(o[4] == es[3].px - es[1].px);       // first landmark, relative
  CHECK(o[10] == es[0].px - es[1].px);      // other agents after landmarks
  CHECK(o[12] == es[2].px - es[1].px);

  World pp(Scenario::PredatorPrey);
  pp.reset(9);
  CHECK(pp.obs_dim(0) == 16);  // predator sees prey velocity
  CHECK(pp.obs_dim(3) == 14);  // prey does not
  auto op = pp.observe(0);
  CHECK(op.size() == 16);
  const auto& ps = pp.entities();
  CHECK(op[4] == ps[4].px - ps[0].px);      // obstacles first
  CHECK(op[8] == ps[1].px - ps[0].px);      // then other agents in index order
  CHECK(op[12] == ps[3].px - ps[0].px);     // prey is the last "other"
  CHECK(op[14] == ps[3].vx);                // prey velocity appended
  auto oprey = pp.observe(3);
  CHECK(oprey.size() == 14);
}

TEST_CASE("episode terminates exactly at max_steps") {
  World w(Scenario::CoopNav);
  w.reset(1);
  for (int t = 1; t <= 25; ++t) {
    auto r = w.step(zero_actions(3));
    if (t < 25)
      CHECK(!r.done[0]);
    else
      for (bool d : r.done) CHECK(d);
  }
}

TEST_CASE("step rejects wrong action count") {
  World w(Scenario::CoopNav);
  w.reset(1);
  CHECK_THROWS_AS(w.step(zero_actions(2)), std::invalid_argument);
}
