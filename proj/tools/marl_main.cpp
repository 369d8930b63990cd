// Command-line front end: train / eval / crossplay / selftest.
// Precedence for settings: built-in defaults < --config file < explicit flags.
// Exit codes: 0 success, 1 runtime failure (I/O, malformed files, failed
// selftest), 2 usage errors (unknown flags, bad values, unknown keys).
#include <CLI11.hpp>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "marl/checkpoint.hpp"
#include "marl/config.hpp"
#include "marl/harness.hpp"

namespace {

struct Flags {
  std::string config_path, scenario, algo, algo_adversary, out, checkpoint;
  int64_t episodes = 0;
  uint64_t seed = 0;
};

// True when the subcommand defines `name` and the user passed it.
bool given(const CLI::App& cmd, const std::string& name) {
  const CLI::Option* o = cmd.get_option_no_throw(name);
  return o != nullptr && o->count() > 0;
}

// Apply `--config` first, then whichever flags were actually given.
marl::RunConfig build_config(const CLI::App& cmd, const Flags& f) {
  marl::RunConfig cfg;
  if (given(cmd, "--config")) marl::load_config_file(cfg, f.config_path);
  if (given(cmd, "--scenario")) marl::set_config_value(cfg, "scenario", f.scenario);
  if (given(cmd, "--algo")) marl::set_config_value(cfg, "algo", f.algo);
  if (given(cmd, "--algo-adversary"))
    marl::set_config_value(cfg, "algo_adversary", f.algo_adversary);
  if (given(cmd, "--seed")) cfg.seed = f.seed;
  if (given(cmd, "--out")) cfg.out_dir = f.out;
  return cfg;
}

void add_common(CLI::App* cmd, Flags& f, bool with_algos) {
  cmd->add_option("--config", f.config_path, "key = value settings file");
  cmd->add_option("--scenario", f.scenario, "coop_nav or predator_prey");
  if (with_algos) {
    cmd->add_option("--algo", f.algo,
                    "mahsac, hsac, mahddpg or hddpg; coop_nav: all agents, "
                    "predator_prey: the prey");
    cmd->add_option("--algo-adversary", f.algo_adversary,
                    "predator_prey only: algorithm of the predators (defaults to --algo)");
  }
  cmd->add_option("--seed", f.seed, "master seed; outputs are a function of (config, seed)");
  cmd->add_option("--out", f.out, "output directory");
}

std::string checkpoint_algos(const marl::Checkpoint& ck, std::string& adversary) {
  adversary = "-";
  if (ck.scenario == "predator_prey" && ck.agents.size() > 1)
    adversary = marl::algo_name(marl::agent_algo(*ck.agents.front()));
  return marl::algo_name(marl::agent_algo(*ck.agents.back()));
}

void print_eval(const marl::EvalReport& rep) {
  std::cout << "eval episodes:        " << rep.episodes << "\n"
            << "collisions/episode:   " << rep.collisions << "\n"
            << "mean landmark dist:   " << rep.dist << "\n"
            << "touches/episode:      " << rep.touches << "\n";
}

void write_eval(const std::string& out_dir, const marl::Checkpoint& ck, uint64_t seed,
                const marl::EvalReport& rep) {
  marl::EvalRow row;
  row.scenario = ck.scenario;
  row.algo = checkpoint_algos(ck, row.algo_adversary);
  row.seed = seed;
  row.report = rep;
  marl::write_eval_csv(out_dir + "/eval.csv", {row});
  std::cout << "eval csv:             " << out_dir << "/eval.csv\n";
}

int cmd_train(const CLI::App& cmd, const Flags& f) {
  marl::RunConfig cfg = build_config(cmd, f);
  if (cmd.count("--episodes")) cfg.episodes = int(f.episodes);
  const marl::TrainResult res = marl::train(cfg);
  std::cout << "episodes:             " << res.rows.size() << "\n"
            << "final reward (ma100): " << res.rows.back().reward_ma100 << "\n"
            << "metrics:              " << res.metrics_path << "\n"
            << "checkpoint:           " << res.checkpoint_path << "\n"
            << "reward curve:         " << res.curve_path << "\n";
  return 0;
}

int cmd_eval(const CLI::App& cmd, const Flags& f) {
  marl::RunConfig cfg = build_config(cmd, f);
  if (cmd.count("--episodes")) cfg.eval_episodes = int(f.episodes);
  const marl::Checkpoint ck = marl::load_checkpoint(f.checkpoint);
  if (!cmd.count("--scenario") && !cmd.count("--config")) {
    // default to the checkpoint's own scenario instead of the global default
    marl::set_config_value(cfg, "scenario", ck.scenario);
  }
  const marl::EvalReport rep = marl::evaluate(ck, cfg);
  print_eval(rep);
  std::filesystem::create_directories(cfg.out_dir);
  write_eval(cfg.out_dir, ck, cfg.seed, rep);
  return 0;
}

int cmd_crossplay(const CLI::App& cmd, const Flags& f, int64_t eval_episodes_flag,
                  bool eval_episodes_set) {
  marl::RunConfig cfg = build_config(cmd, f);
  if (!cmd.count("--scenario")) cfg.scenario = marl::Scenario::PredatorPrey;
  if (cfg.scenario != marl::Scenario::PredatorPrey)
    throw std::invalid_argument("crossplay: requires --scenario predator_prey");
  if (!cfg.adversary_set)
    throw std::invalid_argument("crossplay: requires --algo-adversary");
  if (cmd.count("--episodes")) cfg.episodes = int(f.episodes);
  if (eval_episodes_set) cfg.eval_episodes = int(eval_episodes_flag);

  const marl::TrainResult res = marl::train(cfg);
  std::cout << "trained " << res.rows.size() << " episodes, final reward (ma100) "
            << res.rows.back().reward_ma100 << "\n";
  const marl::Checkpoint ck = marl::load_checkpoint(res.checkpoint_path);
  const marl::EvalReport rep = marl::evaluate(ck, cfg);
  print_eval(rep);
  write_eval(cfg.out_dir, ck, cfg.seed, rep);
  return 0;
}

int cmd_selftest(bool fast) {
  marl::OracleOpts opts;
  if (fast) {
    opts.grad_draws = 10;
    opts.entropy_policies = 5;
    opts.env_seeds = 3;
    opts.env_steps = 20000;
    opts.replay_draws = 20000;
  }
  const int failures = marl::run_oracle_suite(std::cout, opts);
  if (failures == 0) {
    std::cout << "selftest: all checks passed\n";
    return 0;
  }
  std::cout << "selftest: " << failures << " check(s) failed\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid-action multi-agent reinforcement learning"};
  app.require_subcommand(1);

  Flags tf, ef, cf;
  int64_t cross_eval_episodes = 0;
  bool fast = false;

  CLI::App* train = app.add_subcommand("train", "Train a population and write metrics");
  add_common(train, tf, true);
  train->add_option("--episodes", tf.episodes, "training episodes");
  train->footer("config keys (defaults):\n" + marl::config_usage());

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint without exploration");
  add_common(eval, ef, false);
  eval->add_option("--checkpoint", ef.checkpoint, "checkpoint file to evaluate")->required();
  eval->add_option("--episodes", ef.episodes, "evaluation episodes");

  CLI::App* cross = app.add_subcommand(
      "crossplay", "Train mixed algorithms on predator_prey, then evaluate");
  add_common(cross, cf, true);
  cross->add_option("--episodes", cf.episodes, "training episodes");
  cross->add_option("--eval-episodes", cross_eval_episodes, "evaluation episodes");

  CLI::App* selftest =
      app.add_subcommand("selftest", "Run the numerical oracle suite and exit");
  selftest->add_flag("--fast", fast, "reduced draw counts for a quick pass");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (train->parsed()) return cmd_train(*train, tf);
    if (eval->parsed()) return cmd_eval(*eval, ef);
    if (cross->parsed())
      return cmd_crossplay(*cross, cf, cross_eval_episodes,
                           cross->count("--eval-episodes") > 0);
    return cmd_selftest(fast);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
