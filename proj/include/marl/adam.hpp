#pragma once

#include <cmath>
#include <cstdint>

#include "marl/array.hpp"

namespace marl {

// One AdamState per parameter array. Moments start at zero; t counts steps.
struct AdamState {
  Array m, v;
  int64_t t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState like(const Array& p, double lr_) {
    AdamState s;
    s.m = Array(p.rows, p.cols);
    s.v = Array(p.rows, p.cols);
    s.lr = lr_;
    return s;
  }
};

inline void adam_step(Array& p, const Array& g, AdamState& s) {
  require_same_shape(p, g, "adam_step");
  require_same_shape(p, s.m, "adam_step");
  s.t += 1;
  const double c1 = 1.0 - std::pow(s.beta1, double(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, double(s.t));
  for (size_t i = 0; i < p.size(); ++i) {
    const double gi = g.data[i];
    s.m.data[i] = s.beta1 * s.m.data[i] + (1.0 - s.beta1) * gi;
    s.v.data[i] = s.beta2 * s.v.data[i] + (1.0 - s.beta2) * gi * gi;
    const double mhat = s.m.data[i] / c1;
    const double vhat = s.v.data[i] / c2;
    p.data[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

}  // namespace marl
