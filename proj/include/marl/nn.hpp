#pragma once

#include <vector>

#include "marl/action.hpp"
#include "marl/array.hpp"
#include "marl/rng.hpp"
#include "marl/tape.hpp"

namespace marl {

inline constexpr double kLogSigmaMin = -20.0;
inline constexpr double kLogSigmaMax = 2.0;
inline constexpr double kSquashEps = 1e-6;    // inside log(1 - a^2 + eps)
inline constexpr double kActionEdge = 1e-12;  // keeps squashed actions strictly inside (-1,1)
inline constexpr double kHalfLog2Pi = 0.9189385332046727;

// Plain MLP: W[l] is in x out, b[l] is 1 x out, tanh on hidden layers.
struct MlpParams {
  std::vector<Array> W;
  std::vector<Array> b;

  // Weights and biases drawn uniformly from [-1/sqrt(fan_in), +1/sqrt(fan_in)],
  // layer by layer, W before b, row-major. The draw order is part of the
  // determinism contract.
  static MlpParams init(const std::vector<int>& sizes, Rng& rng);

  int in_dim() const { return W.front().rows; }
  int out_dim() const { return W.back().cols; }
  std::vector<Array*> all();
  std::vector<const Array*> all() const;
};

// tanh_output also squashes the last layer (used for actor trunks).
Array mlp_forward_raw(const MlpParams& p, const Array& x, bool tanh_output = false);

struct MlpGraph {
  std::vector<int> leaves;  // W0, b0, W1, b1, ... in MlpParams::all() order
  int out = -1;
};
MlpGraph mlp_graph(Tape& t, const MlpParams& p, int x, bool tanh_output = false);
// Re-apply an already-recorded parameter set to another input; gradients
// accumulate across uses of the same leaves.
int mlp_apply(Tape& t, const std::vector<int>& leaves, int x, bool tanh_output = false);

// Squashed diagonal Gaussian (values in tanh space).
// action = tanh(mu + sigma.*xi) clipped strictly inside (-1,1);
// log_prob = sum_k [ -xi_k^2/2 - log_sigma_k - log(2*pi)/2
//                    - log(1 - action_k^2 + 1e-6) ].
struct SquashedSample {
  Array action;     // same shape as mu
  double log_prob;
};
SquashedSample sample_squashed_gaussian(const Array& mu, const Array& log_sigma,
                                        const Array& xi);

// Hybrid actor: shared trunk, categorical head over 4 directions, one
// Gaussian head per direction. log_sigma is clamped to [-20, 2].
struct SacActor {
  MlpParams trunk;  // obs -> hidden -> hidden, tanh throughout
  Array Wp, bp;     // direction logits
  Array Wmu, bmu;
  Array Wsig, bsig;

  static SacActor init(int obs_dim, int hidden, Rng& rng);
  std::vector<Array*> all();
  std::vector<const Array*> all() const;
};

struct SacActorEval {
  Array probs;      // B x 4
  Array mu;         // B x 4
  Array log_sigma;  // B x 4, clamped
};
SacActorEval sac_actor_eval(const SacActor& a, const Array& obs);

struct SacActorGraph {
  std::vector<int> leaves;  // SacActor::all() order
  int probs = -1;           // B x 4
  int log_probs = -1;       // B x 4, log of softmax
  int mu = -1;              // B x 4
  int log_sigma = -1;       // B x 4, clamped
};
SacActorGraph sac_actor_graph(Tape& t, const SacActor& a, int obs);

// One sampled hybrid action for a single observation (row r of eval).
struct HybridSample {
  int discrete = 0;
  double action = 0.0;  // tanh space, strictly inside (-1,1)
  double log_prob_d = 0.0;
  double log_prob_c = 0.0;
};
HybridSample sample_hybrid(const SacActorEval& eval, int row, Rng& rng);

// Joint entropy weighting: alpha_d * H(discrete) +
// alpha_c * sum_d p_d * H(continuous | d), the continuous part estimated from
// mc_samples reparameterized draws per branch. se_out (optional) receives the
// Monte-Carlo standard error of the continuous part (needs mc_samples >= 2).
double hybrid_entropy(const SacActorEval& eval, int row, double alpha_d, double alpha_c,
                      int mc_samples, Rng& rng, double* se_out = nullptr);

// DDPG-style actor: discrete-value head and per-direction continuous
// parameters, both squashed to [0,1] via (tanh+1)/2. Bounding the value head
// matters: actor updates feed it into the critic as a relaxed action, and the
// critic is only fitted near the one-hot cube, so an unbounded head can climb
// critic extrapolation artifacts instead of real value.
struct DdpgActor {
  MlpParams trunk;
  Array Wq, bq;  // discrete action values
  Array Wc, bc;  // continuous parameters

  static DdpgActor init(int obs_dim, int hidden, Rng& rng);
  std::vector<Array*> all();
  std::vector<const Array*> all() const;
};

struct DdpgActorEval {
  Array disc;    // B x 4, in [0,1]
  Array params;  // B x 4, in [0,1]
};
DdpgActorEval ddpg_actor_eval(const DdpgActor& a, const Array& obs);

struct DdpgActorGraph {
  std::vector<int> leaves;  // DdpgActor::all() order
  int disc = -1;
  int params = -1;
};
DdpgActorGraph ddpg_actor_graph(Tape& t, const DdpgActor& a, int obs);

// Greedy pairing: argmax over disc (lowest index wins ties) with its parameter.
HybridAction ddpg_greedy(const DdpgActorEval& eval, int row);

// target <- tau*live + (1-tau)*target, elementwise.
void soft_update(Array& target, const Array& live, double tau);
void soft_update(std::vector<Array*> targets, const std::vector<const Array*>& lives,
                 double tau);

}  // namespace marl
