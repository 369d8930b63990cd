#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "marl/checkpoint.hpp"
#include "marl/ddpg.hpp"
#include "marl/env.hpp"
#include "marl/sac.hpp"

namespace marl {

// Everything a run needs; defaults are the desk-scale settings. The
// centralized flags inside sac/ddpg are ignored here — the algorithm id
// decides critic scope.
struct RunConfig {
  Scenario scenario = Scenario::CoopNav;
  AlgoId algo = AlgoId::mahsac;            // coop_nav: all agents; predator_prey: the prey
  AlgoId algo_adversary = AlgoId::mahsac;  // predator_prey: the predators
  bool adversary_set = false;
  int episodes = 2000;
  uint64_t seed = 1;
  std::string out_dir = "out";

  size_t replay_capacity = 1000000;
  size_t batch_size = 1024;
  int warmup = 1024;           // stored transitions required before training
  int cycles_per_episode = 1;  // train cycles run after each episode
  int delay = 1;               // critic/actor updates per agent per cycle
  int checkpoint_every = 500;  // episodes between checkpoint writes
  int eval_episodes = 1000;

  EnvConfig env;
  SacConfig sac;
  DdpgConfig ddpg;
};

// One `key = value` per line, `#` starts a comment, blank lines ignored.
// Unknown keys and malformed values throw std::invalid_argument with the
// offending key in the message.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
void load_config_file(RunConfig& cfg, const std::string& path);

// Sorted `key = default` listing, one per line, for usage text.
std::string config_usage();

}  // namespace marl
