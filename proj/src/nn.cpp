#include "marl/nn.hpp"

#include <cmath>
#include <stdexcept>

#include "marl/kernels.hpp"

namespace marl {

namespace k = kernels;

namespace {

Array uniform_init(int rows, int cols, double bound, Rng& rng) {
  Array a(rows, cols);
  for (auto& x : a.data) x = rng.uniform(-bound, bound);
  return a;
}

void add_bias_rows(Array& h, const Array& b) {
  for (int r = 0; r < h.rows; ++r) {
    double* row = h.row(r);
    for (int j = 0; j < h.cols; ++j) row[j] += b.data[j];
  }
}

// z = x*W + b on the tape, bias broadcast through a ones column.
int linear(Tape& t, int x, int w, int b, int ones) {
  return t.add(t.matmul(x, w), t.matmul(ones, b));
}

int ones_col(Tape& t, int x) { return t.full(t.val(x).rows, 1, 1.0); }

double squashed_logp_1d(double xi, double log_sigma, double action) {
  return -0.5 * xi * xi - log_sigma - kHalfLog2Pi -
         std::log(1.0 - action * action + kSquashEps);
}

double clip_edge(double a) {
  const double lim = 1.0 - kActionEdge;
  return a < -lim ? -lim : (a > lim ? lim : a);
}

}  // namespace

MlpParams MlpParams::init(const std::vector<int>& sizes, Rng& rng) {
  if (sizes.size() < 2) throw std::invalid_argument("MlpParams: need >= 2 sizes");
  MlpParams p;
  for (size_t l = 0; l + 1 < sizes.size(); ++l) {
    const double bound = 1.0 / std::sqrt(double(sizes[l]));
    p.W.push_back(uniform_init(sizes[l], sizes[l + 1], bound, rng));
    p.b.push_back(uniform_init(1, sizes[l + 1], bound, rng));
  }
  return p;
}

std::vector<Array*> MlpParams::all() {
  std::vector<Array*> v;
  for (size_t l = 0; l < W.size(); ++l) {
    v.push_back(&W[l]);
    v.push_back(&b[l]);
  }
  return v;
}

std::vector<const Array*> MlpParams::all() const {
  std::vector<const Array*> v;
  for (size_t l = 0; l < W.size(); ++l) {
    v.push_back(&W[l]);
    v.push_back(&b[l]);
  }
  return v;
}

Array mlp_forward_raw(const MlpParams& p, const Array& x, bool tanh_output) {
  Array h = x;
  for (size_t l = 0; l < p.W.size(); ++l) {
    h = k::matmul(h, p.W[l]);
    add_bias_rows(h, p.b[l]);
    if (l + 1 < p.W.size() || tanh_output) h = k::tanh_fwd(h);
  }
  return h;
}

MlpGraph mlp_graph(Tape& t, const MlpParams& p, int x, bool tanh_output) {
  MlpGraph g;
  for (size_t l = 0; l < p.W.size(); ++l) {
    g.leaves.push_back(t.leaf(p.W[l]));
    g.leaves.push_back(t.leaf(p.b[l]));
  }
  g.out = mlp_apply(t, g.leaves, x, tanh_output);
  return g;
}

int mlp_apply(Tape& t, const std::vector<int>& leaves, int x, bool tanh_output) {
  if (leaves.empty() || leaves.size() % 2 != 0)
    throw std::invalid_argument("mlp_apply: leaves must be W,b pairs");
  const int ones = ones_col(t, x);
  int h = x;
  const size_t layers = leaves.size() / 2;
  for (size_t l = 0; l < layers; ++l) {
    h = linear(t, h, leaves[2 * l], leaves[2 * l + 1], ones);
    if (l + 1 < layers || tanh_output) h = t.tanh_(h);
  }
  return h;
}

SquashedSample sample_squashed_gaussian(const Array& mu, const Array& log_sigma,
                                        const Array& xi) {
  require_same_shape(mu, log_sigma, "sample_squashed_gaussian");
  require_same_shape(mu, xi, "sample_squashed_gaussian");
  SquashedSample s;
  s.action = Array(mu.rows, mu.cols);
  s.log_prob = 0.0;
  for (size_t i = 0; i < mu.size(); ++i) {
    const double ls = log_sigma.data[i];
    const double x = mu.data[i] + std::exp(ls) * xi.data[i];
    const double a = clip_edge(std::tanh(x));
    s.action.data[i] = a;
    s.log_prob += squashed_logp_1d(xi.data[i], ls, a);
  }
  return s;
}

SacActor SacActor::init(int obs_dim, int hidden, Rng& rng) {
  SacActor a;
  a.trunk = MlpParams::init({obs_dim, hidden, hidden}, rng);
  const double bound = 1.0 / std::sqrt(double(hidden));
  a.Wp = uniform_init(hidden, kNumDirections, bound, rng);
  a.bp = uniform_init(1, kNumDirections, bound, rng);
  a.Wmu = uniform_init(hidden, kNumDirections, bound, rng);
  a.bmu = uniform_init(1, kNumDirections, bound, rng);
  a.Wsig = uniform_init(hidden, kNumDirections, bound, rng);
  a.bsig = uniform_init(1, kNumDirections, bound, rng);
  return a;
}

std::vector<Array*> SacActor::all() {
  std::vector<Array*> v = trunk.all();
  for (Array* p : {&Wp, &bp, &Wmu, &bmu, &Wsig, &bsig}) v.push_back(p);
  return v;
}

std::vector<const Array*> SacActor::all() const {
  std::vector<const Array*> v = trunk.all();
  for (const Array* p : {&Wp, &bp, &Wmu, &bmu, &Wsig, &bsig}) v.push_back(p);
  return v;
}

SacActorEval sac_actor_eval(const SacActor& a, const Array& obs) {
  const Array h = mlp_forward_raw(a.trunk, obs, true);
  SacActorEval e;
  Array logits = k::matmul(h, a.Wp);
  add_bias_rows(logits, a.bp);
  e.probs = k::softmax_rows(logits);
  e.mu = k::matmul(h, a.Wmu);
  add_bias_rows(e.mu, a.bmu);
  e.log_sigma = k::matmul(h, a.Wsig);
  add_bias_rows(e.log_sigma, a.bsig);
  e.log_sigma = k::clip_fwd(e.log_sigma, kLogSigmaMin, kLogSigmaMax);
  return e;
}

SacActorGraph sac_actor_graph(Tape& t, const SacActor& a, int obs) {
  SacActorGraph g;
  std::vector<int> trunk_leaves;
  for (size_t l = 0; l < a.trunk.W.size(); ++l) {
    trunk_leaves.push_back(t.leaf(a.trunk.W[l]));
    trunk_leaves.push_back(t.leaf(a.trunk.b[l]));
  }
  const int h = mlp_apply(t, trunk_leaves, obs, true);
  const int ones = ones_col(t, obs);
  const int wp = t.leaf(a.Wp), bp = t.leaf(a.bp);
  const int wmu = t.leaf(a.Wmu), bmu = t.leaf(a.bmu);
  const int wsig = t.leaf(a.Wsig), bsig = t.leaf(a.bsig);
  g.leaves = trunk_leaves;
  for (int id : {wp, bp, wmu, bmu, wsig, bsig}) g.leaves.push_back(id);
  g.probs = t.softmax_rows(linear(t, h, wp, bp, ones));
  g.log_probs = t.log_(g.probs);
  g.mu = linear(t, h, wmu, bmu, ones);
  g.log_sigma = t.clip(linear(t, h, wsig, bsig, ones), kLogSigmaMin, kLogSigmaMax);
  return g;
}

HybridSample sample_hybrid(const SacActorEval& eval, int row, Rng& rng) {
  HybridSample s;
  const double* p = eval.probs.row(row);
  const double u = rng.uniform01();
  double acc = 0.0;
  int d = kNumDirections - 1;  // final bucket absorbs rounding
  for (int j = 0; j < kNumDirections; ++j) {
    acc += p[j];
    if (u < acc) {
      d = j;
      break;
    }
  }
  s.discrete = d;
  s.log_prob_d = std::log(p[d]);
  const double ls = eval.log_sigma.at(row, d);
  const double xi = rng.normal();
  const double x = eval.mu.at(row, d) + std::exp(ls) * xi;
  s.action = clip_edge(std::tanh(x));
  s.log_prob_c = squashed_logp_1d(xi, ls, s.action);
  return s;
}

double hybrid_entropy(const SacActorEval& eval, int row, double alpha_d, double alpha_c,
                      int mc_samples, Rng& rng, double* se_out) {
  if (mc_samples < 1) throw std::invalid_argument("hybrid_entropy: mc_samples >= 1");
  const double* p = eval.probs.row(row);
  double hd = 0.0;
  for (int d = 0; d < kNumDirections; ++d)
    if (p[d] > 0.0) hd -= p[d] * std::log(p[d]);  // 0*log(0) := 0

  double hc = 0.0;
  double var_acc = 0.0;
  for (int d = 0; d < kNumDirections; ++d) {
    if (p[d] == 0.0) continue;
    const double mu = eval.mu.at(row, d);
    const double ls = eval.log_sigma.at(row, d);
    const double sigma = std::exp(ls);
    double mean = 0.0, m2 = 0.0;
    for (int s = 0; s < mc_samples; ++s) {
      const double xi = rng.normal();
      const double a = clip_edge(std::tanh(mu + sigma * xi));
      const double y = -squashed_logp_1d(xi, ls, a);
      const double delta = y - mean;
      mean += delta / double(s + 1);
      m2 += delta * (y - mean);
    }
    hc += p[d] * mean;
    if (mc_samples >= 2)
      var_acc += p[d] * p[d] * (m2 / double(mc_samples - 1)) / double(mc_samples);
  }
  if (se_out) *se_out = alpha_c * std::sqrt(var_acc);
  return alpha_d * hd + alpha_c * hc;
}

DdpgActor DdpgActor::init(int obs_dim, int hidden, Rng& rng) {
  DdpgActor a;
  a.trunk = MlpParams::init({obs_dim, hidden, hidden}, rng);
  const double bound = 1.0 / std::sqrt(double(hidden));
  a.Wq = uniform_init(hidden, kNumDirections, bound, rng);
  a.bq = uniform_init(1, kNumDirections, bound, rng);
  a.Wc = uniform_init(hidden, kNumDirections, bound, rng);
  a.bc = uniform_init(1, kNumDirections, bound, rng);
  return a;
}

std::vector<Array*> DdpgActor::all() {
  std::vector<Array*> v = trunk.all();
  for (Array* p : {&Wq, &bq, &Wc, &bc}) v.push_back(p);
  return v;
}

std::vector<const Array*> DdpgActor::all() const {
  std::vector<const Array*> v = trunk.all();
  for (const Array* p : {&Wq, &bq, &Wc, &bc}) v.push_back(p);
  return v;
}

DdpgActorEval ddpg_actor_eval(const DdpgActor& a, const Array& obs) {
  const Array h = mlp_forward_raw(a.trunk, obs, true);
  DdpgActorEval e;
  Array zq = k::matmul(h, a.Wq);
  add_bias_rows(zq, a.bq);
  zq = k::tanh_fwd(zq);
  e.disc = k::mul_scalar(k::add_scalar(zq, 1.0), 0.5);
  Array z = k::matmul(h, a.Wc);
  add_bias_rows(z, a.bc);
  z = k::tanh_fwd(z);
  e.params = k::mul_scalar(k::add_scalar(z, 1.0), 0.5);
  return e;
}

DdpgActorGraph ddpg_actor_graph(Tape& t, const DdpgActor& a, int obs) {
  DdpgActorGraph g;
  std::vector<int> trunk_leaves;
  for (size_t l = 0; l < a.trunk.W.size(); ++l) {
    trunk_leaves.push_back(t.leaf(a.trunk.W[l]));
    trunk_leaves.push_back(t.leaf(a.trunk.b[l]));
  }
  const int h = mlp_apply(t, trunk_leaves, obs, true);
  const int ones = ones_col(t, obs);
  const int wq = t.leaf(a.Wq), bq = t.leaf(a.bq);
  const int wc = t.leaf(a.Wc), bc = t.leaf(a.bc);
  g.leaves = trunk_leaves;
  for (int id : {wq, bq, wc, bc}) g.leaves.push_back(id);
  g.disc = t.mul_const(t.add_const(t.tanh_(linear(t, h, wq, bq, ones)), 1.0), 0.5);
  g.params = t.mul_const(t.add_const(t.tanh_(linear(t, h, wc, bc, ones)), 1.0), 0.5);
  return g;
}

HybridAction ddpg_greedy(const DdpgActorEval& eval, int row) {
  const double* q = eval.disc.row(row);
  int best = 0;
  for (int j = 1; j < kNumDirections; ++j)
    if (q[j] > q[best]) best = j;
  return make_action(best, eval.params.at(row, best));
}

void soft_update(Array& target, const Array& live, double tau) {
  require_same_shape(target, live, "soft_update");
  for (size_t i = 0; i < target.size(); ++i)
    target.data[i] = tau * live.data[i] + (1.0 - tau) * target.data[i];
}

void soft_update(std::vector<Array*> targets, const std::vector<const Array*>& lives,
                 double tau) {
  if (targets.size() != lives.size())
    throw std::invalid_argument("soft_update: parameter list mismatch");
  for (size_t i = 0; i < targets.size(); ++i) soft_update(*targets[i], *lives[i], tau);
}

}  // namespace marl
