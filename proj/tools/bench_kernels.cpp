// Times every dense kernel twice — serial reference vs the OpenMP path —
// on training-shaped inputs, and checks the outputs stay bit-identical.
#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "marl/kernels.hpp"
#include "marl/rng.hpp"

using marl::Array;
using marl::Rng;
namespace k = marl::kernels;

namespace {

Array random_array(int r, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Array a(r, c);
  for (double& v : a.data) v = rng.uniform(lo, hi);
  return a;
}

struct Case {
  std::string name, shape;
  std::function<Array()> run;  // one repetition; returns the output to compare
  int reps;
};

double time_reps(const std::function<Array()>& run, int reps, Array& last) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) last = run();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

int main(int argc, char** argv) {
  int batch = 1024, hidden = 64, obs = 45, reps = 30;
  CLI::App app{"Serial vs OpenMP kernel timings"};
  app.add_option("--batch", batch, "rows of the activations");
  app.add_option("--hidden", hidden, "network width");
  app.add_option("--obs", obs, "input width (critic input columns)");
  app.add_option("--reps", reps, "repetitions per matmul-class kernel");
  CLI11_PARSE(app, argc, argv);

  Rng rng(42);
  const Array x = random_array(batch, obs, rng);
  const Array w1 = random_array(obs, hidden, rng);
  const Array h = random_array(batch, hidden, rng);
  const Array w2 = random_array(hidden, hidden, rng);
  const Array g = random_array(batch, hidden, rng);
  const Array p4 = random_array(batch, 4, rng);
  const int ereps = reps * 16;  // elementwise kernels are much cheaper

  const auto dims = [](int a, int b, int c, int d) {
    return std::to_string(a) + "x" + std::to_string(b) + " * " + std::to_string(c) + "x" +
           std::to_string(d);
  };
  std::vector<Case> cases = {
      {"matmul", dims(batch, obs, obs, hidden), [&] { return k::matmul(x, w1); }, reps},
      {"matmul", dims(batch, hidden, hidden, hidden), [&] { return k::matmul(h, w2); },
       reps},
      {"matmul_nt", dims(batch, hidden, hidden, hidden),
       [&] { return k::matmul_nt(g, w2); }, reps},
      {"matmul_tn", dims(batch, hidden, batch, hidden),
       [&] { return k::matmul_tn(h, g); }, reps},
      {"tanh_fwd", std::to_string(batch) + "x" + std::to_string(hidden),
       [&] { return k::tanh_fwd(h); }, ereps},
      {"exp_fwd", std::to_string(batch) + "x" + std::to_string(hidden),
       [&] { return k::exp_fwd(h); }, ereps},
      {"softmax_rows", std::to_string(batch) + "x4", [&] { return k::softmax_rows(p4); },
       ereps},
      {"mul", std::to_string(batch) + "x" + std::to_string(hidden),
       [&] { return k::mul(h, g); }, ereps},
      {"min2", std::to_string(batch) + "x" + std::to_string(hidden),
       [&] { return k::min2(h, g); }, ereps},
      {"tanh_bwd", std::to_string(batch) + "x" + std::to_string(hidden),
       [&] {
         Array dx(batch, hidden);
         k::tanh_bwd(dx, g, h);
         return dx;
       },
       ereps},
      {"sum_all", std::to_string(batch) + "x" + std::to_string(hidden),
       [&] {
         Array s(1, 1);
         s.data[0] = k::sum_all(h);
         return s;
       },
       ereps},
  };

  std::printf("openmp threads: %d\n", k::thread_count());
  std::printf("%-14s %-24s %12s %12s %9s %9s\n", "kernel", "shape", "serial ms",
              "parallel ms", "speedup", "bitwise");
  int mismatches = 0;
  for (const Case& c : cases) {
    Array out_s(1, 1), out_p(1, 1);
    k::set_parallel(false);
    out_s = c.run();  // warm-up and reference output
    const double ms_s = time_reps(c.run, c.reps, out_s);
    k::set_parallel(true);
    out_p = c.run();
    const double ms_p = time_reps(c.run, c.reps, out_p);
    const bool same = out_s.rows == out_p.rows && out_s.cols == out_p.cols &&
                      std::memcmp(out_s.data.data(), out_p.data.data(),
                                  out_s.size() * sizeof(double)) == 0;
    if (!same) ++mismatches;
    std::printf("%-14s %-24s %12.3f %12.3f %8.2fx %9s\n", c.name.c_str(), c.shape.c_str(),
                ms_s / c.reps, ms_p / c.reps, ms_s / ms_p, same ? "yes" : "NO");
  }
  k::set_parallel(true);
  if (mismatches) {
    std::printf("%d kernel(s) diverged between serial and parallel\n", mismatches);
    return 1;
  }
  return 0;
}
