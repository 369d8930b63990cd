#include "marl/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace marl {
namespace {

double to_f64(const std::string& key, const std::string& v) {
  size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (...) {
    pos = 0;
  }
  if (v.empty() || pos != v.size())
    throw std::invalid_argument("config: bad number for " + key + ": '" + v + "'");
  return d;
}

int64_t to_i64(const std::string& key, const std::string& v) {
  size_t pos = 0;
  int64_t n = 0;
  try {
    n = std::stoll(v, &pos);
  } catch (...) {
    pos = 0;
  }
  if (v.empty() || pos != v.size())
    throw std::invalid_argument("config: bad integer for " + key + ": '" + v + "'");
  return n;
}

std::string fmt_f64(double d) {
  std::ostringstream os;
  os << d;
  return os.str();
}

struct KeyEntry {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> show;
};

// The table states the whole config surface once; usage text and the parser
// both derive from it.
#define KEY_F64(name, field)                                                      \
  {                                                                               \
    name, {                                                                       \
      [](RunConfig& c, const std::string& v) { c.field = to_f64(name, v); },      \
          [](const RunConfig& c) { return fmt_f64(c.field); }                     \
    }                                                                             \
  }
#define KEY_INT(name, field, type)                                                \
  {                                                                               \
    name, {                                                                       \
      [](RunConfig& c, const std::string& v) {                                    \
        c.field = static_cast<type>(to_i64(name, v));                             \
      },                                                                          \
          [](const RunConfig& c) { return std::to_string(c.field); }              \
    }                                                                             \
  }

const std::map<std::string, KeyEntry>& key_table() {
  static const std::map<std::string, KeyEntry> table = {
      {"scenario",
       {[](RunConfig& c, const std::string& v) { c.scenario = parse_scenario(v); },
        [](const RunConfig& c) { return to_string(c.scenario); }}},
      {"algo",
       {[](RunConfig& c, const std::string& v) {
          if (!parse_algo(v, c.algo))
            throw std::invalid_argument("config: unknown algo: '" + v + "'");
        },
        [](const RunConfig& c) { return algo_name(c.algo); }}},
      {"algo_adversary",
       {[](RunConfig& c, const std::string& v) {
          if (!parse_algo(v, c.algo_adversary))
            throw std::invalid_argument("config: unknown algo_adversary: '" + v + "'");
          c.adversary_set = true;
        },
        [](const RunConfig& c) {
          return c.adversary_set ? std::string(algo_name(c.algo_adversary))
                                 : std::string("(same as algo)");
        }}},
      KEY_INT("episodes", episodes, int),
      KEY_INT("seed", seed, uint64_t),
      {"out",
       {[](RunConfig& c, const std::string& v) { c.out_dir = v; },
        [](const RunConfig& c) { return c.out_dir; }}},
      KEY_INT("replay.capacity", replay_capacity, size_t),
      KEY_INT("train.batch_size", batch_size, size_t),
      KEY_INT("train.warmup", warmup, int),
      KEY_INT("train.cycles_per_episode", cycles_per_episode, int),
      KEY_INT("train.delay", delay, int),
      KEY_INT("train.checkpoint_every", checkpoint_every, int),
      KEY_INT("eval.episodes", eval_episodes, int),
      KEY_F64("env.dt", env.dt),
      KEY_F64("env.damping", env.damping),
      KEY_F64("env.contact_force", env.contact_force),
      KEY_F64("env.contact_margin", env.contact_margin),
      KEY_F64("env.arena", env.arena),
      KEY_INT("env.max_steps", env.max_steps, int),
      KEY_INT("env.cn_agents", env.cn_agents, int),
      KEY_INT("env.cn_landmarks", env.cn_landmarks, int),
      KEY_F64("env.cn_agent_radius", env.cn_agent_radius),
      KEY_F64("env.cn_landmark_radius", env.cn_landmark_radius),
      KEY_F64("env.cn_max_speed", env.cn_max_speed),
      KEY_INT("env.pp_predators", env.pp_predators, int),
      KEY_INT("env.pp_obstacles", env.pp_obstacles, int),
      KEY_F64("env.pp_predator_radius", env.pp_predator_radius),
      KEY_F64("env.pp_prey_radius", env.pp_prey_radius),
      KEY_F64("env.pp_obstacle_radius", env.pp_obstacle_radius),
      KEY_F64("env.pp_predator_speed", env.pp_predator_speed),
      KEY_F64("env.pp_prey_speed", env.pp_prey_speed),
      KEY_F64("env.collision_penalty", env.collision_penalty),
      KEY_F64("env.touch_reward", env.touch_reward),
      KEY_F64("sac.gamma", sac.gamma),
      KEY_F64("sac.tau", sac.tau),
      KEY_F64("sac.actor_lr", sac.actor_lr),
      KEY_F64("sac.critic_lr", sac.critic_lr),
      KEY_F64("sac.alpha_d", sac.alpha_d),
      KEY_F64("sac.alpha_c", sac.alpha_c),
      KEY_INT("sac.mc_samples", sac.mc_samples, int),
      KEY_INT("sac.hidden", sac.hidden, int),
      KEY_F64("ddpg.gamma", ddpg.gamma),
      KEY_F64("ddpg.tau", ddpg.tau),
      KEY_F64("ddpg.actor_lr", ddpg.actor_lr),
      KEY_F64("ddpg.critic_lr", ddpg.critic_lr),
      KEY_INT("ddpg.hidden", ddpg.hidden, int),
      KEY_F64("ddpg.eps_start", ddpg.eps.start),
      KEY_F64("ddpg.eps_end", ddpg.eps.end),
      KEY_INT("ddpg.eps_horizon", ddpg.eps.horizon, int64_t),
  };
  return table;
}

#undef KEY_F64
#undef KEY_INT

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  auto it = key_table().find(key);
  if (it == key_table().end())
    throw std::invalid_argument("config: unknown key: '" + key + "'");
  it->second.set(cfg, value);
}

void load_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("config: cannot open " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key = value at " + path + ":" +
                                  std::to_string(lineno));
    set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

std::string config_usage() {
  const RunConfig defaults;
  std::string out;
  for (const auto& [name, entry] : key_table())
    out += "  " + name + " = " + entry.show(defaults) + "\n";
  return out;
}

}  // namespace marl
