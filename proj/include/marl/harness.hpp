#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "marl/agent.hpp"
#include "marl/checkpoint.hpp"
#include "marl/config.hpp"
#include "marl/env.hpp"

namespace marl {

struct MetricsRow {
  int episode = 0;          // 1-based
  double reward_sum = 0;    // episode sum of every controllable agent's reward
  double reward_ma100 = 0;  // mean of the most recent <= 100 reward_sum values
  int collisions = 0;       // colliding controllable pairs, summed over steps
  double dist = 0;          // time mean of the per-step landmark distance metric
  int touches = 0;          // predator-prey touching pairs, summed over steps
  int64_t ms = 0;           // always written as 0: metrics bytes are seed-determined
};

struct EvalReport {
  double collisions = 0;  // per-episode means
  double dist = 0;
  double touches = 0;
  int episodes = 0;
  std::vector<uint64_t> seeds;
};

// Agents in environment order. coop_nav: every agent runs cfg.algo.
// predator_prey: the prey (last agent) runs cfg.algo, predators run
// cfg.algo_adversary when set, else cfg.algo. Initialization draws come from
// init_rng in agent order.
std::vector<std::unique_ptr<Agent>> make_agents(const RunConfig& cfg, const World& env,
                                                Rng& init_rng);

struct TrainResult {
  std::vector<MetricsRow> rows;
  std::string metrics_path;
  std::string checkpoint_path;  // final checkpoint
  std::string curve_path;
};

// Full training run: per-episode rollout into the replay buffer, train cycles
// once the warmup fill is reached, metrics.csv streamed one row per episode,
// a checkpoint every checkpoint_every episodes plus a final one, and
// reward_curve.svg. Output bytes are a function of (config, seed) only.
TrainResult train(const RunConfig& cfg);

// Frozen-policy evaluation: exploration off, so discrete actions are argmax
// and continuous parameters are distribution means. Throws
// std::invalid_argument when eval_episodes < 1 and std::runtime_error when
// the checkpoint does not match the requested scenario.
EvalReport evaluate(const Checkpoint& ck, const RunConfig& cfg);
EvalReport evaluate_file(const std::string& checkpoint_path, const RunConfig& cfg);

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);
// Parses a file produced by write_metrics_csv (or the streaming writer in
// train) back into rows; exact round trip. Throws std::runtime_error on
// malformed input.
std::vector<MetricsRow> read_metrics_csv(const std::string& path);

struct EvalRow {
  std::string scenario, algo, algo_adversary;
  uint64_t seed = 0;
  EvalReport report;
};
void write_eval_csv(const std::string& path, const std::vector<EvalRow>& rows);

struct CurveSeries {
  std::string label;
  std::vector<double> values;  // reward_ma100 by episode, x = 1-based index
};
// One polyline per series plus a legend entry each; throws
// std::invalid_argument when there is nothing to plot.
std::string reward_curve_svg(const std::vector<CurveSeries>& series);
void write_reward_curve_svg(const std::string& path,
                            const std::vector<CurveSeries>& series);

// Oracle suite shared by the CLI selftest and the acceptance gate: analytic
// gradients vs central finite differences for all eight losses, weighted
// joint entropy vs exact quadrature, soft-update algebra, the epsilon
// schedule, environment determinism/confinement and two-body contact against
// a standalone integrator, and replay uniformity/FIFO. Prints one line per
// check to `out`; returns the number of failures.
struct OracleOpts {
  int grad_draws = 100;  // per loss
  int entropy_policies = 20;
  int entropy_samples = 10000;
  int env_seeds = 10;
  int env_steps = 100000;
  int replay_draws = 100000;
  uint64_t seed = 20260816;
};
int run_oracle_suite(std::ostream& out, const OracleOpts& opts);

}  // namespace marl
