#include "marl/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "marl/ddpg.hpp"
#include "marl/nn.hpp"
#include "marl/replay.hpp"
#include "marl/sac.hpp"

namespace marl {
namespace {

constexpr char kMetricsHeader[] = "episode,reward_sum,reward_ma100,collisions,dist,touches,ms";

// Shortest decimal that parses back to the same double, so CSV round trips
// are exact and files are byte-stable.
std::string fmt_f64(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_f64(const std::string& s, const char* what) {
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error(std::string("metrics: bad ") + what + ": '" + s + "'");
  return v;
}

int64_t parse_i64(const std::string& s, const char* what) {
  int64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error(std::string("metrics: bad ") + what + ": '" + s + "'");
  return v;
}

std::string row_to_csv(const MetricsRow& r) {
  return std::to_string(r.episode) + "," + fmt_f64(r.reward_sum) + "," +
         fmt_f64(r.reward_ma100) + "," + std::to_string(r.collisions) + "," +
         fmt_f64(r.dist) + "," + std::to_string(r.touches) + "," + std::to_string(r.ms);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  for (;;) {
    const size_t comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

// Disjoint seed streams derived from the master seed: agent init, exploration
// draws, batch sampling, and per-episode world layouts never overlap.
uint64_t stream_seed(uint64_t seed, uint64_t purpose) { return Rng::mix(seed, purpose); }
uint64_t episode_seed(uint64_t seed, int episode, bool eval) {
  return Rng::mix(seed, (eval ? 0xE500000000000000ull : 0xA100000000000000ull) |
                            uint64_t(uint32_t(episode)));
}

struct EpisodeStats {
  double reward_sum = 0;
  int collisions = 0;
  double dist = 0;
  int touches = 0;
  int steps = 0;
};

EpisodeStats run_episode(World& env, const std::vector<std::unique_ptr<Agent>>& agents,
                         Rng& act_rng, bool explore, ReplayBuffer* buf) {
  const int n = env.n_agents();
  EpisodeStats st;
  double dist_acc = 0;
  std::vector<std::vector<double>> obs(n);
  for (int i = 0; i < n; ++i) obs[i] = env.observe(i);
  for (bool done = false; !done;) {
    std::vector<HybridAction> acts(n);
    for (int i = 0; i < n; ++i) acts[i] = agents[i]->act(obs[i], act_rng, explore);
    const StepResult sr = env.step(acts);
    std::vector<std::vector<double>> next(n);
    for (int i = 0; i < n; ++i) next[i] = env.observe(i);
    if (buf) {
      Transition t;
      t.obs = obs;
      t.act = acts;
      t.reward = sr.reward;
      t.next_obs = next;
      t.done = sr.done;
      buf->push(std::move(t));
    }
    for (double r : sr.reward) st.reward_sum += r;
    st.collisions += sr.collisions;
    st.touches += sr.touches;
    dist_acc += sr.dist;
    ++st.steps;
    done = sr.done[0];
    obs = std::move(next);
  }
  st.dist = dist_acc / st.steps;
  return st;
}

AlgoId role_algo(const RunConfig& cfg, const World& env, int i) {
  if (env.scenario() == Scenario::PredatorPrey && !env.is_prey(i))
    return cfg.adversary_set ? cfg.algo_adversary : cfg.algo;
  return cfg.algo;
}

std::string run_label(const RunConfig& cfg) {
  if (cfg.scenario == Scenario::CoopNav) return algo_name(cfg.algo);
  const AlgoId pred = cfg.adversary_set ? cfg.algo_adversary : cfg.algo;
  return std::string(algo_name(pred)) + "_predators_vs_" + algo_name(cfg.algo) + "_prey";
}

void validate(const RunConfig& cfg) {
  if (cfg.episodes < 1) throw std::invalid_argument("config: episodes must be >= 1");
  if (cfg.batch_size < 1) throw std::invalid_argument("config: train.batch_size must be >= 1");
  if (cfg.replay_capacity < cfg.batch_size)
    throw std::invalid_argument("config: replay.capacity must be >= train.batch_size");
  if (cfg.delay < 1) throw std::invalid_argument("config: train.delay must be >= 1");
  if (cfg.cycles_per_episode < 0)
    throw std::invalid_argument("config: train.cycles_per_episode must be >= 0");
  if (cfg.env.max_steps < 1) throw std::invalid_argument("config: env.max_steps must be >= 1");
}

}  // namespace

std::vector<std::unique_ptr<Agent>> make_agents(const RunConfig& cfg, const World& env,
                                                Rng& init_rng) {
  std::vector<int> dims;
  for (int i = 0; i < env.n_agents(); ++i) dims.push_back(env.obs_dim(i));
  std::vector<std::unique_ptr<Agent>> agents;
  for (int i = 0; i < env.n_agents(); ++i) {
    const AlgoId id = role_algo(cfg, env, i);
    const std::string name = std::string(algo_name(id)) + "_" + std::to_string(i);
    if (algo_is_sac(id)) {
      SacConfig sc = cfg.sac;
      sc.centralized = algo_centralized(id);
      agents.push_back(std::make_unique<SacAgent>(name, i, dims, sc, init_rng));
    } else {
      DdpgConfig dc = cfg.ddpg;
      dc.centralized = algo_centralized(id);
      agents.push_back(std::make_unique<DdpgAgent>(name, i, dims, dc, init_rng));
    }
  }
  return agents;
}

TrainResult train(const RunConfig& cfg) {
  validate(cfg);
  std::filesystem::create_directories(cfg.out_dir);

  World env(cfg.scenario, cfg.env);
  Rng init_rng(stream_seed(cfg.seed, 1));
  Rng act_rng(stream_seed(cfg.seed, 2));
  Rng train_rng(stream_seed(cfg.seed, 3));
  auto agents = make_agents(cfg, env, init_rng);
  ReplayBuffer buf(cfg.replay_capacity);

  TrainResult res;
  res.metrics_path = cfg.out_dir + "/metrics.csv";
  res.checkpoint_path = cfg.out_dir + "/checkpoint_final.bin";
  res.curve_path = cfg.out_dir + "/reward_curve.svg";

  std::ofstream mf(res.metrics_path, std::ios::trunc);
  if (!mf) throw std::runtime_error("train: cannot write " + res.metrics_path);
  mf << kMetricsHeader << "\n";

  std::deque<double> window;
  double window_sum = 0;
  for (int ep = 1; ep <= cfg.episodes; ++ep) {
    env.reset(episode_seed(cfg.seed, ep, false));
    const EpisodeStats st = run_episode(env, agents, act_rng, true, &buf);

    if (buf.size() >= std::max<size_t>(size_t(std::max(cfg.warmup, 0)), cfg.batch_size))
      for (int c = 0; c < cfg.cycles_per_episode; ++c)
        train_cycle(agents, buf, cfg.batch_size, cfg.delay, train_rng);

    window.push_back(st.reward_sum);
    window_sum += st.reward_sum;
    if (window.size() > 100) {
      window_sum -= window.front();
      window.pop_front();
    }

    MetricsRow row;
    row.episode = ep;
    row.reward_sum = st.reward_sum;
    row.reward_ma100 = window_sum / double(window.size());
    row.collisions = st.collisions;
    row.dist = st.dist;
    row.touches = st.touches;
    row.ms = 0;
    res.rows.push_back(row);
    mf << row_to_csv(row) << "\n";
    mf.flush();

    if (cfg.checkpoint_every > 0 && ep % cfg.checkpoint_every == 0 && ep != cfg.episodes)
      save_checkpoint(cfg.out_dir + "/checkpoint_" + std::to_string(ep) + ".bin",
                      to_string(cfg.scenario), agents, train_rng);
  }
  if (!mf) throw std::runtime_error("train: short write to " + res.metrics_path);

  save_checkpoint(res.checkpoint_path, to_string(cfg.scenario), agents, train_rng);
  std::vector<double> ma;
  for (const MetricsRow& r : res.rows) ma.push_back(r.reward_ma100);
  write_reward_curve_svg(res.curve_path, {{run_label(cfg), ma}});
  return res;
}

EvalReport evaluate(const Checkpoint& ck, const RunConfig& cfg) {
  if (cfg.eval_episodes < 1)
    throw std::invalid_argument("evaluate: eval.episodes must be >= 1");
  World env(cfg.scenario, cfg.env);
  if (ck.scenario != to_string(cfg.scenario))
    throw std::runtime_error("evaluate: checkpoint/scenario mismatch: checkpoint is '" +
                             ck.scenario + "', requested '" + to_string(cfg.scenario) + "'");
  if (int(ck.agents.size()) != env.n_agents())
    throw std::runtime_error("evaluate: checkpoint/scenario mismatch: " +
                             std::to_string(ck.agents.size()) + " agents vs " +
                             std::to_string(env.n_agents()));
  for (int i = 0; i < env.n_agents(); ++i)
    if (ck.obs_dims[i] != env.obs_dim(i))
      throw std::runtime_error("evaluate: checkpoint/scenario mismatch: observation width of agent " +
                               std::to_string(i));

  Rng scratch(stream_seed(cfg.seed, 4));  // greedy acts draw nothing
  EvalReport rep;
  for (int ep = 1; ep <= cfg.eval_episodes; ++ep) {
    env.reset(episode_seed(cfg.seed, ep, true));
    const EpisodeStats st = run_episode(env, ck.agents, scratch, false, nullptr);
    rep.collisions += st.collisions;
    rep.dist += st.dist;
    rep.touches += st.touches;
  }
  rep.collisions /= cfg.eval_episodes;
  rep.dist /= cfg.eval_episodes;
  rep.touches /= cfg.eval_episodes;
  rep.episodes = cfg.eval_episodes;
  rep.seeds = {cfg.seed};
  return rep;
}

EvalReport evaluate_file(const std::string& checkpoint_path, const RunConfig& cfg) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  return evaluate(ck, cfg);
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("metrics: cannot write " + path);
  f << kMetricsHeader << "\n";
  for (const MetricsRow& r : rows) f << row_to_csv(r) << "\n";
  if (!f) throw std::runtime_error("metrics: short write to " + path);
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("metrics: cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != kMetricsHeader)
    throw std::runtime_error("metrics: bad header in " + path);
  std::vector<MetricsRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 7) throw std::runtime_error("metrics: bad row in " + path);
    MetricsRow r;
    r.episode = int(parse_i64(cells[0], "episode"));
    r.reward_sum = parse_f64(cells[1], "reward_sum");
    r.reward_ma100 = parse_f64(cells[2], "reward_ma100");
    r.collisions = int(parse_i64(cells[3], "collisions"));
    r.dist = parse_f64(cells[4], "dist");
    r.touches = int(parse_i64(cells[5], "touches"));
    r.ms = parse_i64(cells[6], "ms");
    rows.push_back(r);
  }
  return rows;
}

void write_eval_csv(const std::string& path, const std::vector<EvalRow>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("eval: cannot write " + path);
  f << "scenario,algo,algo_adversary,seed,episodes,collisions,dist,touches\n";
  for (const EvalRow& r : rows)
    f << r.scenario << "," << r.algo << "," << r.algo_adversary << "," << r.seed << ","
      << r.report.episodes << "," << fmt_f64(r.report.collisions) << ","
      << fmt_f64(r.report.dist) << "," << fmt_f64(r.report.touches) << "\n";
  if (!f) throw std::runtime_error("eval: short write to " + path);
}

std::string reward_curve_svg(const std::vector<CurveSeries>& series) {
  size_t max_n = 0;
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const CurveSeries& s : series) {
    max_n = std::max(max_n, s.values.size());
    for (double v : s.values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (max_n == 0) throw std::invalid_argument("reward_curve_svg: nothing to plot");
  if (hi - lo < 1e-12) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = 0.05 * (hi - lo);
  lo -= pad;
  hi += pad;

  const double W = 860, H = 480, ml = 64, mr = 200, mt = 28, mb = 46;
  const double px0 = ml, px1 = W - mr, py0 = H - mb, py1 = mt;
  const auto X = [&](double ep) {
    return px0 + (px1 - px0) * (max_n > 1 ? (ep - 1.0) / double(max_n - 1) : 0.5);
  };
  const auto Y = [&](double v) { return py0 + (py1 - py0) * ((v - lo) / (hi - lo)); };
  const auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  static const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 860 480\" "
         "width=\"860\" height=\"480\" role=\"img\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"860\" height=\"480\" fill=\"#ffffff\"/>\n";
  svg += "<text x=\"" + num(ml) + "\" y=\"18\" font-family=\"monospace\" font-size=\"13\">"
         "reward, 100-episode moving average</text>\n";
  // axes and ticks
  svg += "<line x1=\"" + num(px0) + "\" y1=\"" + num(py0) + "\" x2=\"" + num(px1) +
         "\" y2=\"" + num(py0) + "\" stroke=\"#333333\"/>\n";
  svg += "<line x1=\"" + num(px0) + "\" y1=\"" + num(py0) + "\" x2=\"" + num(px0) +
         "\" y2=\"" + num(py1) + "\" stroke=\"#333333\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    const double ep = 1.0 + double(max_n - 1) * k / 4.0;
    svg += "<text x=\"" + num(px0 - 6) + "\" y=\"" + num(Y(v) + 4) +
           "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">" + num(v) +
           "</text>\n";
    svg += "<line x1=\"" + num(px0 - 4) + "\" y1=\"" + num(Y(v)) + "\" x2=\"" + num(px0) +
           "\" y2=\"" + num(Y(v)) + "\" stroke=\"#333333\"/>\n";
    svg += "<text x=\"" + num(X(ep)) + "\" y=\"" + num(py0 + 18) +
           "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"11\">" +
           num(std::round(ep)) + "</text>\n";
    svg += "<line x1=\"" + num(X(ep)) + "\" y1=\"" + num(py0) + "\" x2=\"" + num(X(ep)) +
           "\" y2=\"" + num(py0 + 4) + "\" stroke=\"#333333\"/>\n";
  }
  svg += "<text x=\"" + num((px0 + px1) / 2) + "\" y=\"" + num(H - 10) +
         "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"12\">episode"
         "</text>\n";
  // one polyline and one legend entry per series
  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof kPalette / sizeof kPalette[0])];
    std::string pts;
    for (size_t k = 0; k < series[s].values.size(); ++k) {
      if (!pts.empty()) pts += " ";
      pts += num(X(double(k + 1))) + "," + num(Y(series[s].values[k]));
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
           "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    const double ly = mt + 16.0 * double(s);
    svg += "<rect x=\"" + num(px1 + 12) + "\" y=\"" + num(ly) +
           "\" width=\"14\" height=\"4\" fill=\"" + color + "\"/>\n";
    svg += "<text x=\"" + num(px1 + 30) + "\" y=\"" + num(ly + 6) +
           "\" font-family=\"monospace\" font-size=\"11\">" + series[s].label + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

void write_reward_curve_svg(const std::string& path, const std::vector<CurveSeries>& series) {
  const std::string svg = reward_curve_svg(series);
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("svg: cannot write " + path);
  f << svg;
  if (!f) throw std::runtime_error("svg: short write to " + path);
}

// ---------------------------------------------------------------------------
// Oracle suite
// ---------------------------------------------------------------------------

namespace {

std::vector<Transition> oracle_transitions(const std::vector<int>& dims, int rows, Rng& rng) {
  const int n = int(dims.size());
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
      t.act[j] = make_action(int(rng.uniform_int(kNumDirections)), rng.uniform01());
      t.reward[j] = rng.uniform(-2.0, 2.0);
      t.done[j] = rng.uniform01() < 0.2;
    }
  }
  return ts;
}

// Central differences over every parameter element; relative error against
// the analytic gradient with denominator max(|analytic|, |numeric|, 1e-6).
double fd_worst(const std::vector<Array*>& params, const std::vector<Array>& grads,
                const std::function<double()>& loss) {
  const double h = 1e-5;
  double worst = 0;
  for (size_t k = 0; k < params.size(); ++k) {
    for (size_t i = 0; i < params[k]->size(); ++i) {
      double& w = params[k]->data[i];
      const double keep = w;
      w = keep + h;
      const double up = loss();
      w = keep - h;
      const double dn = loss();
      w = keep;
      const double fd = (up - dn) / (2.0 * h);
      const double an = grads[k].data[i];
      const double err =
          std::fabs(fd - an) / std::max({std::fabs(fd), std::fabs(an), 1e-6});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// Smallest |Q1 - Q2| the actor update would see: the min-twin surface is not
// differentiable where the twins cross, so finite differences are only valid
// away from the crossing.
double sac_min_twin_gap(const SacAgent& ag, const JointBatch& jb, const Array& xi,
                        const std::vector<int>& dims, int index) {
  const SacActorEval e = sac_actor_eval(ag.actor, jb.obs[index]);
  const Array base = ag.critic_input_stored(jb);
  int col = ag.cfg.centralized ? index : 0;
  if (ag.cfg.centralized)
    col += std::accumulate(dims.begin(), dims.end(), 0);
  else
    col += dims[index];
  double gap = std::numeric_limits<double>::infinity();
  for (int d = 0; d < kNumDirections; ++d) {
    Array in = base;
    for (int r = 0; r < jb.rows; ++r) {
      const double lim = 1.0 - kActionEdge;
      double a = std::tanh(e.mu.at(r, d) + std::exp(e.log_sigma.at(r, d)) * xi.at(r, d));
      a = a < -lim ? -lim : (a > lim ? lim : a);
      in.at(r, col) = 0.5 * a + 0.5;
    }
    const Array q1 = mlp_forward_raw(ag.critic1, in);
    const Array q2 = mlp_forward_raw(ag.critic2, in);
    for (int r = 0; r < jb.rows; ++r)
      gap = std::min(gap, std::fabs(q1.at(r, d) - q2.at(r, d)));
  }
  return gap;
}

// Exact per-branch entropy of the squashed density by trapezoid quadrature in
// pre-squash space, using the same log-density expression the sampler scores.
double branch_entropy_quad(double mu, double ls, double* var_out) {
  const double sigma = std::exp(ls);
  const int n = 20001;
  const double lo = mu - 9.0 * sigma, hi = mu + 9.0 * sigma;
  const double dx = (hi - lo) / (n - 1);
  const double lim = 1.0 - kActionEdge;
  double m1 = 0, m2 = 0, mass = 0;
  for (int k = 0; k < n; ++k) {
    const double x = lo + k * dx;
    const double xi = (x - mu) / sigma;
    const double w = std::exp(-0.5 * xi * xi) / (sigma * std::sqrt(2.0 * M_PI));
    double a = std::tanh(x);
    a = a < -lim ? -lim : (a > lim ? lim : a);
    const double s = 0.5 * xi * xi + ls + kHalfLog2Pi + std::log(1.0 - a * a + kSquashEps);
    const double t = (k == 0 || k == n - 1) ? 0.5 : 1.0;
    m1 += t * w * s * dx;
    m2 += t * w * s * s * dx;
    mass += t * w * dx;
  }
  m1 /= mass;
  m2 /= mass;
  if (var_out) *var_out = m2 - m1 * m1;
  return m1;
}

// Independent two-body semi-implicit Euler integration, written against the
// environment's documented dynamics rather than its code.
struct Body {
  double px, py, vx, vy, radius, max_speed, mass = 1.0;
};

void integrate_pair(Body& a, Body& b, const EnvConfig& c) {
  auto softplus = [](double z) { return z > 30.0 ? z : std::log1p(std::exp(z)); };
  const double dx = a.px - b.px, dy = a.py - b.py;
  double dist = std::sqrt(dx * dx + dy * dy);
  if (dist < 1e-12) dist = 1e-12;
  const double pen =
      softplus((a.radius + b.radius - dist) / c.contact_margin) * c.contact_margin;
  const double f = c.contact_force * pen / dist;
  const double fax = f * dx, fay = f * dy;
  for (auto [body, sx, sy] : {std::tuple<Body*, double, double>{&a, fax, fay},
                              std::tuple<Body*, double, double>{&b, -fax, -fay}}) {
    body->vx = (1.0 - c.damping) * body->vx + sx * c.dt / body->mass;
    body->vy = (1.0 - c.damping) * body->vy + sy * c.dt / body->mass;
    const double speed = std::sqrt(body->vx * body->vx + body->vy * body->vy);
    if (speed > body->max_speed) {
      body->vx *= body->max_speed / speed;
      body->vy *= body->max_speed / speed;
    }
    body->px += body->vx * c.dt;
    body->py += body->vy * c.dt;
    if (body->px < -c.arena) {
      body->px = -c.arena;
      if (body->vx < 0.0) body->vx = 0.0;
    } else if (body->px > c.arena) {
      body->px = c.arena;
      if (body->vx > 0.0) body->vx = 0.0;
    }
    if (body->py < -c.arena) {
      body->py = -c.arena;
      if (body->vy < 0.0) body->vy = 0.0;
    } else if (body->py > c.arena) {
      body->py = c.arena;
      if (body->vy > 0.0) body->vy = 0.0;
    }
  }
}

}  // namespace

int run_oracle_suite(std::ostream& out, const OracleOpts& o) {
  int failures = 0;
  const auto check = [&](const std::string& name, bool ok, const std::string& detail) {
    out << (ok ? "ok   " : "FAIL ") << name;
    if (!detail.empty()) out << "  [" << detail << "]";
    out << "\n";
    if (!ok) ++failures;
  };
  const auto secs_since = [](std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  Rng rng(o.seed);
  const std::vector<int> dims{3, 2};
  const int index = 1, rows = 2, hidden = 6;

  {  // gradients: every loss, both critic scopes
    const auto t0 = std::chrono::steady_clock::now();
    for (bool centralized : {true, false}) {
      const char* scope = centralized ? "centralized" : "decentralized";

      double worst = 0;
      for (int k = 0; k < o.grad_draws; ++k) {
        SacConfig c;
        c.hidden = hidden;
        c.centralized = centralized;
        SacAgent ag("o", index, dims, c, rng);
        const JointBatch jb = make_joint_batch(oracle_transitions(dims, rows, rng));
        Array y(rows, 1);
        for (double& v : y.data) v = rng.uniform(-2.0, 2.0);
        std::vector<Array> g1, g2;
        ag.critic_grads(jb, y, g1, g2);
        std::vector<Array*> params = ag.critic1.all();
        for (Array* p : ag.critic2.all()) params.push_back(p);
        for (Array& g : g2) g1.push_back(std::move(g));
        worst = std::max(worst, fd_worst(params, g1, [&] { return ag.critic_loss(jb, y); }));
      }
      check(std::string("gradients: sac critic loss, ") + scope, worst <= 1e-4,
            "max rel err " + fmt_f64(worst) + " over " + std::to_string(o.grad_draws) +
                " draws");

      worst = 0;
      for (int k = 0; k < o.grad_draws; ++k) {
        SacConfig c;
        c.hidden = hidden;
        c.centralized = centralized;
        for (;;) {  // redraw while the min-twin surface is near its crossing
          SacAgent ag("o", index, dims, c, rng);
          const JointBatch jb = make_joint_batch(oracle_transitions(dims, rows, rng));
          const Array xi = ag.draw_noise(rows, rng);
          if (sac_min_twin_gap(ag, jb, xi, dims, index) < 1e-3) continue;
          std::vector<Array> g;
          ag.actor_grads(jb, xi, g);
          worst = std::max(
              worst, fd_worst(ag.actor.all(), g, [&] { return ag.actor_loss(jb, xi); }));
          break;
        }
      }
      check(std::string("gradients: sac actor loss, ") + scope, worst <= 1e-4,
            "max rel err " + fmt_f64(worst) + " over " + std::to_string(o.grad_draws) +
                " draws");

      worst = 0;
      for (int k = 0; k < o.grad_draws; ++k) {
        DdpgConfig c;
        c.hidden = hidden;
        c.centralized = centralized;
        DdpgAgent ag("o", index, dims, c, rng);
        const JointBatch jb = make_joint_batch(oracle_transitions(dims, rows, rng));
        Array y(rows, 1);
        for (double& v : y.data) v = rng.uniform(-2.0, 2.0);
        std::vector<Array> g;
        ag.critic_grads(jb, y, g);
        worst = std::max(worst,
                         fd_worst(ag.critic.all(), g, [&] { return ag.critic_loss(jb, y); }));
      }
      check(std::string("gradients: ddpg critic loss, ") + scope, worst <= 1e-4,
            "max rel err " + fmt_f64(worst) + " over " + std::to_string(o.grad_draws) +
                " draws");

      worst = 0;
      for (int k = 0; k < o.grad_draws; ++k) {
        DdpgConfig c;
        c.hidden = hidden;
        c.centralized = centralized;
        DdpgAgent ag("o", index, dims, c, rng);
        const JointBatch jb = make_joint_batch(oracle_transitions(dims, rows, rng));
        std::vector<Array> g;
        ag.actor_grads(jb, g);
        worst =
            std::max(worst, fd_worst(ag.actor.all(), g, [&] { return ag.actor_loss(jb); }));
      }
      check(std::string("gradients: ddpg actor loss, ") + scope, worst <= 1e-4,
            "max rel err " + fmt_f64(worst) + " over " + std::to_string(o.grad_draws) +
                " draws");
    }
    const double secs = secs_since(t0);
    check("gradients: runtime", secs < 120.0, fmt_f64(secs) + "s, budget 120s");
  }

  {  // weighted joint entropy vs exact quadrature
    const auto t0 = std::chrono::steady_clock::now();
    double worst_ratio = 0;
    for (int k = 0; k < o.entropy_policies; ++k) {
      const SacActor actor = SacActor::init(3, 8, rng);
      Array obs(1, 3);
      for (double& v : obs.data) v = rng.uniform(-1.5, 1.5);
      const SacActorEval e = sac_actor_eval(actor, obs);
      const double alpha_d = rng.uniform(0.02, 0.2);
      const double alpha_c = rng.uniform(0.02, 0.2);

      double hd = 0, hc = 0;
      for (int d = 0; d < kNumDirections; ++d) {
        const double p = e.probs.at(0, d);
        if (p > 0.0) hd -= p * std::log(p);
        hc += p * branch_entropy_quad(e.mu.at(0, d), e.log_sigma.at(0, d), nullptr);
      }
      const double exact = alpha_d * hd + alpha_c * hc;

      double se = 0;
      const double mc = hybrid_entropy(e, 0, alpha_d, alpha_c, o.entropy_samples, rng, &se);
      const double tol = 3.0 * se + 1e-6;
      worst_ratio = std::max(worst_ratio, std::fabs(mc - exact) / tol);
    }
    check("entropy: weighted joint entropy vs quadrature", worst_ratio <= 1.0,
          "max |mc-exact| at " + fmt_f64(worst_ratio) + " of the 3-standard-error budget");
    const double secs = secs_since(t0);
    check("entropy: runtime", secs < 60.0, fmt_f64(secs) + "s, budget 60s");
  }

  {  // soft-update algebra
    const auto mk = [&](int r, int c) {
      Array a(r, c);
      for (double& v : a.data) v = rng.uniform(-2.0, 2.0);
      return a;
    };
    const Array live = mk(4, 5), t0 = mk(4, 5);
    double worst = 0;
    for (double tau : {0.0, 0.01, 1.0}) {
      Array target = t0;
      soft_update(target, live, tau);
      for (size_t i = 0; i < target.size(); ++i)
        worst = std::max(worst, std::fabs(target.data[i] -
                                          (tau * live.data[i] + (1.0 - tau) * t0.data[i])));
    }
    check("soft update: tau in {0, 0.01, 1} exact", worst <= 1e-15,
          "max abs err " + fmt_f64(worst));

    Array target = t0;
    double worst_ratio_dev = 0;
    std::vector<double> prev(target.size());
    for (size_t i = 0; i < target.size(); ++i) prev[i] = target.data[i] - live.data[i];
    for (int k = 0; k < 50; ++k) {
      soft_update(target, live, 0.01);
      for (size_t i = 0; i < target.size(); ++i) {
        const double d = target.data[i] - live.data[i];
        if (std::fabs(prev[i]) > 1e-9)
          worst_ratio_dev = std::max(worst_ratio_dev, std::fabs(d / prev[i] - 0.99));
        prev[i] = d;
      }
    }
    check("soft update: geometric contraction at ratio 1-tau", worst_ratio_dev <= 1e-9,
          "max ratio deviation " + fmt_f64(worst_ratio_dev));
  }

  {  // epsilon schedule
    const EpsilonSchedule s;
    bool ok = s.at(0) == 1.0 && s.at(10000) == 0.1;
    double prev = 2.0;
    for (int64_t u = 0; u <= 14000 && ok; ++u) {
      const double e = s.at(u);
      ok = e <= prev && e >= 0.1 && e <= 1.0;
      prev = e;
    }
    check("epsilon schedule: endpoints exact, nonincreasing, clamped", ok, "");
  }

  {  // environment: determinism across reruns
    int mismatches = 0;
    for (int s = 1; s <= o.env_seeds; ++s) {
      for (Scenario sc : {Scenario::CoopNav, Scenario::PredatorPrey}) {
        World w1(sc), w2(sc);
        Rng r1(Rng::mix(uint64_t(s), 77)), r2(Rng::mix(uint64_t(s), 77));
        for (int ep = 0; ep < 2; ++ep) {
          w1.reset(Rng::mix(uint64_t(s), uint64_t(ep)));
          w2.reset(Rng::mix(uint64_t(s), uint64_t(ep)));
          for (int t = 0; t < w1.config().max_steps; ++t) {
            std::vector<HybridAction> a1, a2;
            for (int i = 0; i < w1.n_agents(); ++i)
              a1.push_back(make_action(int(r1.uniform_int(kNumDirections)), r1.uniform01()));
            for (int i = 0; i < w2.n_agents(); ++i)
              a2.push_back(make_action(int(r2.uniform_int(kNumDirections)), r2.uniform01()));
            w1.step(a1);
            w2.step(a2);
            for (size_t e = 0; e < w1.entities().size(); ++e) {
              const Entity &ea = w1.entities()[e], &eb = w2.entities()[e];
              if (ea.px != eb.px || ea.py != eb.py || ea.vx != eb.vx || ea.vy != eb.vy)
                ++mismatches;
            }
          }
        }
      }
    }
    check("environment: bit-identical trajectories across reruns", mismatches == 0,
          std::to_string(o.env_seeds) + " seeds x 2 scenarios x 2 episodes");
  }

  {  // environment: confinement and immobility under random play
    double worst_escape = 0, worst_drift = 0;
    int64_t steps_done = 0;
    for (Scenario sc : {Scenario::CoopNav, Scenario::PredatorPrey}) {
      World w(sc);
      uint64_t seed = 900;
      std::vector<std::pair<double, double>> anchors;
      const auto re_anchor = [&] {
        w.reset(seed++);
        anchors.clear();
        for (const Entity& e : w.entities())
          if (!e.movable) anchors.emplace_back(e.px, e.py);
      };
      re_anchor();
      for (int t = 0; t < o.env_steps / 2; ++t) {
        std::vector<HybridAction> acts;
        for (int i = 0; i < w.n_agents(); ++i)
          acts.push_back(make_action(int(rng.uniform_int(kNumDirections)), rng.uniform01()));
        w.step(acts);
        ++steps_done;
        size_t a = 0;
        for (const Entity& e : w.entities()) {
          worst_escape = std::max({worst_escape, std::fabs(e.px) - w.config().arena,
                                   std::fabs(e.py) - w.config().arena});
          if (!e.movable) {
            worst_drift = std::max({worst_drift, std::fabs(e.px - anchors[a].first),
                                    std::fabs(e.py - anchors[a].second)});
            ++a;
          }
        }
        if (w.step_count() >= w.config().max_steps) re_anchor();
      }
    }
    check("environment: arena confinement and landmark immobility",
          worst_escape <= 0.0 && worst_drift == 0.0,
          std::to_string(steps_done) + " random steps, worst escape " +
              fmt_f64(worst_escape) + ", worst drift " + fmt_f64(worst_drift));
  }

  {  // environment: two-body contact vs standalone integrator
    World w(Scenario::CoopNav);
    w.reset(5);
    auto& ents = w.mutable_entities();
    ents[0].px = -0.03;
    ents[0].py = 0.0;
    ents[0].vx = 0.5;
    ents[0].vy = 0.0;
    ents[1].px = 0.06;
    ents[1].py = 0.001;
    ents[1].vx = -0.3;
    ents[1].vy = 0.1;
    ents[2].px = 1.4;
    ents[2].py = 1.4;
    ents[2].vx = 0.0;
    ents[2].vy = 0.0;
    Body a{ents[0].px, ents[0].py, ents[0].vx, ents[0].vy, ents[0].radius, ents[0].max_speed};
    Body b{ents[1].px, ents[1].py, ents[1].vx, ents[1].vy, ents[1].radius, ents[1].max_speed};
    const std::vector<HybridAction> coast(size_t(w.n_agents()), make_action(0, 0.0));
    double worst = 0;
    for (int t = 0; t < 40; ++t) {
      w.step(coast);
      integrate_pair(a, b, w.config());
      worst = std::max({worst, std::fabs(ents[0].px - a.px), std::fabs(ents[0].py - a.py),
                        std::fabs(ents[1].px - b.px), std::fabs(ents[1].py - b.py),
                        std::fabs(ents[0].vx - a.vx), std::fabs(ents[0].vy - a.vy),
                        std::fabs(ents[1].vx - b.vx), std::fabs(ents[1].vy - b.vy)});
    }
    check("environment: two-body contact matches standalone integration", worst <= 1e-9,
          "max abs divergence " + fmt_f64(worst) + " over 40 steps");
  }

  {  // replay: uniform sampling and FIFO eviction
    ReplayBuffer buf(10);
    for (int i = 0; i < 10; ++i) {
      Transition t;
      t.obs = {{0.0}};
      t.next_obs = {{0.0}};
      t.act = {make_action(0, 0.0)};
      t.reward = {double(i)};
      t.done = {false};
      buf.push(std::move(t));
    }
    std::vector<int64_t> counts(10, 0);
    for (int k = 0; k < o.replay_draws; ++k)
      ++counts[size_t(buf.sample(1, rng)[0].reward[0])];
    const double expect = double(o.replay_draws) / 10.0;
    double chi2 = 0;
    for (int64_t c : counts) chi2 += (double(c) - expect) * (double(c) - expect) / expect;
    // chi-square critical value, 9 degrees of freedom, p = 0.001
    check("replay: uniform sampling (chi-square, p > 0.001)", chi2 < 27.877,
          "chi2 " + fmt_f64(chi2) + " over " + std::to_string(o.replay_draws) + " draws");

    ReplayBuffer fifo(2);
    for (int i = 0; i < 3; ++i) {
      Transition t;
      t.obs = {{0.0}};
      t.next_obs = {{0.0}};
      t.act = {make_action(0, 0.0)};
      t.reward = {double(i)};
      t.done = {false};
      fifo.push(std::move(t));
    }
    check("replay: FIFO eviction exact",
          fifo.size() == 2 && fifo.at(0).reward[0] == 1.0 && fifo.at(1).reward[0] == 2.0, "");
  }

  return failures;
}

}  // namespace marl
