#pragma once

namespace marl {

// Direction set is fixed: index 0..3 = x+, x-, y+, y-.
inline constexpr int kNumDirections = 4;

// param is the executed continuous value in [0,1] (clipped on ingestion).
struct HybridAction {
  int discrete = 0;
  double param = 0.0;
};

inline HybridAction make_action(int d, double p) {
  HybridAction a;
  a.discrete = d < 0 ? 0 : (d >= kNumDirections ? kNumDirections - 1 : d);
  a.param = p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
  return a;
}

}  // namespace marl
