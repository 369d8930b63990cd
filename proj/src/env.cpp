#include "marl/env.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace marl {

Scenario parse_scenario(const std::string& s) {
  if (s == "coop_nav") return Scenario::CoopNav;
  if (s == "predator_prey") return Scenario::PredatorPrey;
  throw std::invalid_argument("unknown scenario: " + s);
}

std::string to_string(Scenario s) {
  return s == Scenario::CoopNav ? "coop_nav" : "predator_prey";
}

void decode_action(const HybridAction& act, double& fx, double& fy) {
  const HybridAction a = make_action(act.discrete, act.param);
  fx = 0.0;
  fy = 0.0;
  switch (a.discrete) {
    case 0: fx = +a.param; break;
    case 1: fx = -a.param; break;
    case 2: fy = +a.param; break;
    case 3: fy = -a.param; break;
  }
}

double boundary_penalty(double x) {
  const double ax = std::fabs(x);
  if (ax < 0.9) return 0.0;
  if (ax < 1.0) return (ax - 0.9) * 10.0;
  return std::min(std::exp(2.0 * ax - 2.0), 10.0);
}

namespace {

double softplus(double z) {
  // exact for large z, log1p keeps precision for small exp(z)
  return z > 30.0 ? z : std::log1p(std::exp(z));
}

bool overlapping(const Entity& a, const Entity& b) {
  const double dx = a.px - b.px, dy = a.py - b.py;
  const double rsum = a.radius + b.radius;
  return dx * dx + dy * dy < rsum * rsum;
}

}  // namespace

World::World(Scenario sc, const EnvConfig& cfg) : scenario_(sc), cfg_(cfg) {
  if (sc == Scenario::CoopNav) {
    n_agents_ = cfg.cn_agents;
    for (int i = 0; i < cfg.cn_agents; ++i) {
      Entity e;
      e.role = Role::Agent;
      e.radius = cfg.cn_agent_radius;
      e.max_speed = cfg.cn_max_speed;
      entities_.push_back(e);
    }
    for (int i = 0; i < cfg.cn_landmarks; ++i) {
      Entity e;
      e.role = Role::Landmark;
      e.radius = cfg.cn_landmark_radius;
      e.movable = false;
      e.collides = false;
      entities_.push_back(e);
    }
  } else {
    n_agents_ = cfg.pp_predators + 1;
    for (int i = 0; i < cfg.pp_predators; ++i) {
      Entity e;
      e.role = Role::Adversary;
      e.radius = cfg.pp_predator_radius;
      e.max_speed = cfg.pp_predator_speed;
      entities_.push_back(e);
    }
    Entity prey;
    prey.role = Role::Agent;
    prey.radius = cfg.pp_prey_radius;
    prey.max_speed = cfg.pp_prey_speed;
    entities_.push_back(prey);
    for (int i = 0; i < cfg.pp_obstacles; ++i) {
      Entity e;
      e.role = Role::Obstacle;
      e.radius = cfg.pp_obstacle_radius;
      e.movable = false;
      entities_.push_back(e);
    }
  }
}

void World::reset(uint64_t seed) {
  Rng rng(seed);
  for (Entity& e : entities_) {
    e.px = rng.uniform(-1.0, 1.0);
    e.py = rng.uniform(-1.0, 1.0);
    e.vx = 0.0;
    e.vy = 0.0;
  }
  step_count_ = 0;
}

int World::obs_dim(int i) const {
  if (scenario_ == Scenario::CoopNav)
    return 4 + 2 * cfg_.cn_landmarks + 2 * (cfg_.cn_agents - 1);
  const int others = 2 * (n_agents_ - 1);
  const int base = 4 + 2 * cfg_.pp_obstacles + others;
  return is_prey(i) ? base : base + 2;  // predators also see prey velocity
}

std::vector<double> World::observe(int i) const {
  std::vector<double> o;
  const Entity& self = entities_[i];
  o.push_back(self.vx);
  o.push_back(self.vy);
  o.push_back(self.px);
  o.push_back(self.py);
  // landmarks/obstacles first, then other agents, both in entity order
  for (size_t e = 0; e < entities_.size(); ++e) {
    const Entity& t = entities_[e];
    if (t.role != Role::Landmark && t.role != Role::Obstacle) continue;
    o.push_back(t.px - self.px);
    o.push_back(t.py - self.py);
  }
  for (int e = 0; e < n_agents_; ++e) {
    if (e == i) continue;
    o.push_back(entities_[e].px - self.px);
    o.push_back(entities_[e].py - self.py);
  }
  if (scenario_ == Scenario::PredatorPrey && !is_prey(i)) {
    const Entity& prey = entities_[n_agents_ - 1];
    o.push_back(prey.vx);
    o.push_back(prey.vy);
  }
  return o;
}

StepResult World::step(const std::vector<HybridAction>& actions) {
  if (int(actions.size()) != n_agents_)
    throw std::invalid_argument("step: expected " + std::to_string(n_agents_) +
                                " actions, got " + std::to_string(actions.size()));

  const size_t n = entities_.size();
  std::vector<double> fx(n, 0.0), fy(n, 0.0);
  for (int i = 0; i < n_agents_; ++i) decode_action(actions[i], fx[i], fy[i]);

  // Soft contact forces from current positions, both orders per pair.
  for (size_t a = 0; a < n; ++a) {
    for (size_t b = a + 1; b < n; ++b) {
      const Entity &ea = entities_[a], &eb = entities_[b];
      if (!ea.collides || !eb.collides) continue;
      if (!ea.movable && !eb.movable) continue;
      double dx = ea.px - eb.px, dy = ea.py - eb.py;
      double dist = std::sqrt(dx * dx + dy * dy);
      if (dist < 1e-12) dist = 1e-12;
      const double dmin = ea.radius + eb.radius;
      const double pen = softplus((dmin - dist) / cfg_.contact_margin) * cfg_.contact_margin;
      const double f = cfg_.contact_force * pen / dist;
      if (ea.movable) {
        fx[a] += f * dx;
        fy[a] += f * dy;
      }
      if (eb.movable) {
        fx[b] -= f * dx;
        fy[b] -= f * dy;
      }
    }
  }

  // Semi-implicit Euler with damping, speed clamp, then arena clamp.
  for (size_t e = 0; e < n; ++e) {
    Entity& ent = entities_[e];
    if (!ent.movable) continue;
    ent.vx = (1.0 - cfg_.damping) * ent.vx + fx[e] * cfg_.dt / ent.mass;
    ent.vy = (1.0 - cfg_.damping) * ent.vy + fy[e] * cfg_.dt / ent.mass;
    const double speed = std::sqrt(ent.vx * ent.vx + ent.vy * ent.vy);
    if (speed > ent.max_speed) {
      ent.vx *= ent.max_speed / speed;
      ent.vy *= ent.max_speed / speed;
    }
    ent.px += ent.vx * cfg_.dt;
    ent.py += ent.vy * cfg_.dt;
    // Inelastic walls: clamp into the arena and drop the outward velocity
    // component, otherwise a fast entity would pin against the boundary for
    // ~1/damping steps with its stale velocity.
    if (ent.px < -cfg_.arena) {
      ent.px = -cfg_.arena;
      if (ent.vx < 0.0) ent.vx = 0.0;
    } else if (ent.px > cfg_.arena) {
      ent.px = cfg_.arena;
      if (ent.vx > 0.0) ent.vx = 0.0;
    }
    if (ent.py < -cfg_.arena) {
      ent.py = -cfg_.arena;
      if (ent.vy < 0.0) ent.vy = 0.0;
    } else if (ent.py > cfg_.arena) {
      ent.py = cfg_.arena;
      if (ent.vy > 0.0) ent.vy = 0.0;
    }
  }

  ++step_count_;

  StepResult r;
  if (scenario_ == Scenario::CoopNav) {
    r.reward = reward_coop_nav(r.collisions, r.dist);
  } else {
    r.reward = reward_predator_prey(r.collisions, r.touches);
  }
  r.done.assign(n_agents_, step_count_ >= cfg_.max_steps);
  return r;
}

std::vector<double> World::reward_coop_nav(int& collisions, double& dist) const {
  double shared = 0.0;
  double dist_sum = 0.0;
  int n_landmarks = 0;
  for (const Entity& lm : entities_) {
    if (lm.role != Role::Landmark) continue;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_agents_; ++i) {
      const double dx = entities_[i].px - lm.px, dy = entities_[i].py - lm.py;
      best = std::min(best, std::sqrt(dx * dx + dy * dy));
    }
    shared -= best;
    dist_sum += best;
    ++n_landmarks;
  }
  dist = n_landmarks > 0 ? dist_sum / n_landmarks : 0.0;

  std::vector<double> rew(n_agents_, shared);
  collisions = 0;
  for (int a = 0; a < n_agents_; ++a) {
    for (int b = a + 1; b < n_agents_; ++b) {
      if (!overlapping(entities_[a], entities_[b])) continue;
      ++collisions;
      rew[a] -= cfg_.collision_penalty;
      rew[b] -= cfg_.collision_penalty;
    }
  }
  return rew;
}

std::vector<double> World::reward_predator_prey(int& collisions, int& touches) const {
  std::vector<double> rew(n_agents_, 0.0);
  const int prey = n_agents_ - 1;
  touches = 0;
  for (int p = 0; p < prey; ++p) {
    if (!overlapping(entities_[p], entities_[prey])) continue;
    ++touches;
    rew[p] += cfg_.touch_reward;
    rew[prey] -= cfg_.touch_reward;
  }
  collisions = touches;
  rew[prey] -= boundary_penalty(entities_[prey].px);
  rew[prey] -= boundary_penalty(entities_[prey].py);
  return rew;
}

}  // namespace marl
