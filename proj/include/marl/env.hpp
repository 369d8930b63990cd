#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "marl/action.hpp"
#include "marl/rng.hpp"

namespace marl {

enum class Scenario { CoopNav, PredatorPrey };
Scenario parse_scenario(const std::string& s);
std::string to_string(Scenario s);

enum class Role { Agent, Adversary, Landmark, Obstacle };

struct Entity {
  Role role = Role::Agent;
  double px = 0, py = 0;
  double vx = 0, vy = 0;
  double radius = 0.05;
  double max_speed = 1.3;
  double mass = 1.0;
  bool movable = true;
  bool collides = true;
};

struct EnvConfig {
  double dt = 0.1;
  double damping = 0.25;
  double contact_force = 100.0;
  double contact_margin = 1e-3;
  double arena = 1.5;  // positions clamped to [-arena, arena]^2
  int max_steps = 25;

  int cn_agents = 3;
  int cn_landmarks = 3;
  double cn_agent_radius = 0.05;
  double cn_landmark_radius = 0.05;
  double cn_max_speed = 1.3;

  int pp_predators = 3;
  int pp_obstacles = 2;
  double pp_predator_radius = 0.075;
  double pp_prey_radius = 0.05;
  double pp_obstacle_radius = 0.2;
  double pp_predator_speed = 1.0;
  double pp_prey_speed = 1.3;

  double collision_penalty = 1.0;
  double touch_reward = 10.0;
};

struct StepResult {
  std::vector<double> reward;  // per controllable agent
  std::vector<bool> done;
  int collisions = 0;   // colliding controllable pairs this step
  int touches = 0;      // predator-prey touching pairs this step
  double dist = 0.0;    // mean over landmarks of min agent distance (coop_nav)
};

// (x+, p) -> (+p, 0); (x-, p) -> (-p, 0); (y+, p) -> (0, +p); (y-, p) -> (0, -p)
void decode_action(const HybridAction& a, double& fx, double& fy);

// Deterministic particle world. Controllable agents come first in entity
// order: coop_nav is 3 agents then 3 landmarks; predator_prey is 3 predators,
// the prey, then 2 obstacles.
class World {
 public:
  explicit World(Scenario sc, const EnvConfig& cfg = {});

  void reset(uint64_t seed);
  StepResult step(const std::vector<HybridAction>& actions);

  int n_agents() const { return n_agents_; }
  int obs_dim(int i) const;
  std::vector<double> observe(int i) const;

  Scenario scenario() const { return scenario_; }
  int step_count() const { return step_count_; }
  const EnvConfig& config() const { return cfg_; }
  const std::vector<Entity>& entities() const { return entities_; }
  std::vector<Entity>& mutable_entities() { return entities_; }

  bool is_prey(int i) const {
    return scenario_ == Scenario::PredatorPrey && i == n_agents_ - 1;
  }

  // Reward rules evaluated on the current state (step() calls these after
  // integrating; exposed for direct oracle checks).
  std::vector<double> reward_coop_nav(int& collisions, double& dist) const;
  std::vector<double> reward_predator_prey(int& collisions, int& touches) const;

 private:
  Scenario scenario_;
  EnvConfig cfg_;
  std::vector<Entity> entities_;
  int n_agents_ = 0;
  int step_count_ = 0;
};

// Escalating boundary penalty for the prey, applied per coordinate.
double boundary_penalty(double x);

}  // namespace marl
