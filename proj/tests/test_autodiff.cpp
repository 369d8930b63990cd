#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>

#include "marl/adam.hpp"
#include "marl/kernels.hpp"
#include "marl/rng.hpp"
#include "marl/tape.hpp"
#include "oracles.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace marl;
namespace k = marl::kernels;
using test::check_grads;
using test::random_array;
using test::rel_err;

TEST_CASE("forward basics") {
  Tape t;
  int x = t.leaf(Array(2, 3));
  CHECK(t.val(t.tanh_(x)).data == std::vector<double>(6, 0.0));

  Rng rng(1);
  int a = t.leaf(random_array(2, 3, rng));
  int b = t.leaf(random_array(3, 1, rng));
  const Array& mm = t.val(t.matmul(a, b));
  CHECK(mm.rows == 2);
  CHECK(mm.cols == 1);

  int v = t.leaf(Array(1, 3, {1.0, 2.0, 3.0}));
  CHECK(t.scalar(t.sum(t.mul(v, v))) == doctest::Approx(14.0).epsilon(1e-15));
}

TEST_CASE("backward basics") {
  Tape t;
  int x = t.leaf(Array::scalar(3.0));
  int y = t.square(x);
  t.backward(y);
  CHECK(t.grad(x).data[0] == doctest::Approx(6.0).epsilon(1e-12));

  Tape t2;
  int z = t2.leaf(Array::scalar(0.0));
  int w = t2.tanh_(z);
  t2.backward(w);
  CHECK(t2.grad(z).data[0] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("unreachable leaves get zero gradients") {
  Tape t;
  int x = t.leaf(Array::scalar(2.0));
  int orphan = t.leaf(Array(3, 2));
  int y = t.square(x);
  t.backward(y);
  CHECK(t.grad(orphan).size() == 6);
  for (double g : t.grad(orphan).data) CHECK(g == 0.0);
}

TEST_CASE("root must be scalar") {
  Tape t;
  int x = t.leaf(Array(2, 2));
  CHECK_THROWS_AS(t.backward(x), std::invalid_argument);
}

TEST_CASE("non-finite forward values are rejected") {
  Tape t;
  int x = t.leaf(Array::scalar(710.0));
  CHECK_THROWS_AS(t.exp_(x), std::runtime_error);
}

TEST_CASE("finite differences over every op kind") {
  Rng rng(20240817);
  auto project = [](Tape& t, int node, int r) {
    // random fixed projection to a scalar so every element matters
    return t.mean(t.mul(node, r));
  };

  for (int draw = 0; draw < 20; ++draw) {
    const int B = 3, C = 4;
    Array pa = random_array(B, C, rng);
    Array pb = random_array(B, C, rng);
    Array proj = random_array(B, C, rng);
    Array mmb = random_array(C, 2, rng);
    Array mproj = random_array(B, 2, rng);
    Array pos = random_array(B, C, rng, 0.1, 2.0);
    Array sc = random_array(1, 1, rng);

    struct Case {
      const char* name;
      std::vector<Array> xs;
      std::function<int(Tape&, const std::vector<int>&)> build;
    };
    std::vector<Case> cases;
    cases.push_back({"add", {pa, pb, proj}, [&](Tape& t, const std::vector<int>& l) {
                       return t.mean(t.mul(t.add(l[0], l[1]), l[2]));
                     }});
    cases.push_back({"sub", {pa, pb, proj}, [&](Tape& t, const std::vector<int>& l) {
                       return t.mean(t.mul(t.sub(l[0], l[1]), l[2]));
                     }});
    cases.push_back({"mul", {pa, pb, proj}, [&](Tape& t, const std::vector<int>& l) {
                       return t.mean(t.mul(t.mul(l[0], l[1]), l[2]));
                     }});
    cases.push_back({"matmul", {pa, mmb, mproj}, [&](Tape& t, const std::vector<int>& l) {
                       return t.mean(t.mul(t.matmul(l[0], l[1]), l[2]));
                     }});
    cases.push_back({"tanh", {pa, proj}, [&](Tape& t, const std::vector<int>& l) {
                       return t.mean(t.mul(t.tanh_(l[0]), l[1]));
                     }});
    cases.push_back({"exp", {pa, proj}, [&](Tape& t, const std::vector<int>& l) {
                       return t.mean(t.mul(t.exp_(l[0]), l[1]));
                     }});
    cases.push_back({"log", {pos, proj}, [&](Tape& t, const std::vector<int>& l) {
                       return t.mean(t.mul(t.log_(l[0]), l[1]));
                     }});
    cases.push_back({"softmax", {pa, proj}, [&](Tape& t, const std::vector<int>& l) {
                       return t.mean(t.mul(t.softmax_rows(l[0]), l[1]));
                     }});
    cases.push_back({"sum", {pa}, [&](Tape& t, const std::vector<int>& l) {
                       return t.sum(l[0]);
                     }});
    cases.push_back({"mean", {pa}, [&](Tape& t, const std::vector<int>& l) {
                       return t.mean(l[0]);
                     }});
    cases.push_back({"square", {pa, proj}, [&](Tape& t, const std::vector<int>& l) {
                       return t.mean(t.mul(t.square(l[0]), l[1]));
                     }});
    cases.push_back({"min2", {pa, pb, proj}, [&](Tape& t, const std::vector<int>& l) {
                       return t.mean(t.mul(t.min2(l[0], l[1]), l[2]));
                     }});
    // clip bounds chosen so no sample sits on the boundary
    cases.push_back({"clip", {pa, proj}, [&](Tape& t, const std::vector<int>& l) {
                       return t.mean(t.mul(t.clip(l[0], -1.05, 1.05), l[1]));
                     }});
    cases.push_back({"add_const", {pa, proj}, [&](Tape& t, const std::vector<int>& l) {
                       return t.mean(t.mul(t.add_const(l[0], 0.7), l[1]));
                     }});
    cases.push_back({"mul_const", {pa, proj}, [&](Tape& t, const std::vector<int>& l) {
                       return t.mean(t.mul(t.mul_const(l[0], -1.3), l[1]));
                     }});
    cases.push_back({"scalar_bcast", {pa, sc, proj}, [&](Tape& t, const std::vector<int>& l) {
                       return t.mean(t.mul(t.mul(t.add(l[0], l[1]), l[1]), l[2]));
                     }});
    cases.push_back({"slice_concat", {pa, pb, proj}, [&](Tape& t, const std::vector<int>& l) {
                       int s1 = t.slice_cols(l[0], 1, 3);
                       int s2 = t.slice_cols(l[1], 0, 2);
                       int cat = t.concat_cols(s1, s2);
                       int rows = t.concat_rows(t.slice_rows(cat, 0, 2), t.slice_rows(cat, 1, 3));
                       (void)project;
                       return t.mean(t.mul(rows, t.slice_rows(t.concat_rows(l[2], l[2]), 1, 5)));
                     }});

    for (auto& c : cases) {
      auto r = check_grads(c.xs, c.build);
      INFO(c.name << " draw " << draw << " worst " << r.worst);
      CHECK(r.max_rel_err <= 1e-4);
    }
  }
}

TEST_CASE("clip gradient is pass-through on the closed interval") {
  Tape t;
  int x = t.leaf(Array(1, 3, {-2.0, 0.5, 1.0}));
  int y = t.sum(t.clip(x, -1.0, 1.0));
  t.backward(y);
  const Array& g = t.grad(x);
  CHECK(g.data[0] == 0.0);  // below lo
  CHECK(g.data[1] == 1.0);  // interior
  CHECK(g.data[2] == 1.0);  // exactly on the bound: closed interval
}

TEST_CASE("log floors its argument and zeroes the gradient there") {
  Tape t;
  int x = t.leaf(Array(1, 2, {1e-12, 0.5}));
  int y = t.sum(t.log_(x));
  t.backward(y);
  CHECK(t.val(y).data[0] ==
        doctest::Approx(std::log(1e-8) + std::log(0.5)).epsilon(1e-12));
  CHECK(t.grad(x).data[0] == 0.0);
  CHECK(t.grad(x).data[1] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("min2 ties route gradient to the first operand") {
  Tape t;
  int a = t.leaf(Array::scalar(0.7));
  int b = t.leaf(Array::scalar(0.7));
  t.backward(t.min2(a, b));
  CHECK(t.grad(a).data[0] == 1.0);
  CHECK(t.grad(b).data[0] == 0.0);
}

TEST_CASE("linearity of backward") {
  Rng rng(99);
  Array x = random_array(3, 3, rng);
  const double ca = 1.7, cb = -0.6;

  auto grads_of = [&](int which) {
    Tape t;
    int l = t.leaf(x);
    int f = t.mean(t.square(l));
    int g = t.sum(t.tanh_(l));
    int root = which == 0 ? f : (which == 1 ? g : t.add(t.mul_const(f, ca), t.mul_const(g, cb)));
    t.backward(root);
    return t.grad(l).data;
  };

  auto gf = grads_of(0), gg = grads_of(1), gh = grads_of(2);
  for (size_t i = 0; i < gf.size(); ++i)
    CHECK(gh[i] == doctest::Approx(ca * gf[i] + cb * gg[i]).epsilon(1e-12));
}

TEST_CASE("identical graphs give bit-identical forward and backward") {
  auto run = [] {
    Rng rng(4242);
    Tape t;
    int x = t.leaf(random_array(8, 8, rng));
    int w = t.leaf(random_array(8, 8, rng));
    int root = t.mean(t.square(t.tanh_(t.matmul(x, w))));
    t.backward(root);
    return std::make_pair(t.val(root).data[0], t.grad(w).data);
  };
  auto [v1, g1] = run();
  auto [v2, g2] = run();
  CHECK(std::memcmp(&v1, &v2, sizeof v1) == 0);
  CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0);
}

TEST_CASE("parallel kernels are bit-identical to the serial reference") {
#ifdef _OPENMP
  omp_set_num_threads(4);
#endif
  k::set_parallel(true);
  Rng rng(7);
  // sizes past the parallel grain so the OpenMP paths actually run
  Array a = random_array(300, 220, rng);
  Array b = random_array(220, 190, rng);
  Array c = random_array(300, 220, rng);
  Array wide = random_array(300, 190, rng);

  CHECK(k::matmul(a, b).data == k::serial::matmul(a, b).data);
  CHECK(k::matmul_nt(a, c).data == k::serial::matmul_nt(a, c).data);
  CHECK(k::matmul_tn(a, wide).data == k::serial::matmul_tn(a, wide).data);
  CHECK(k::add(a, c).data == k::serial::add(a, c).data);
  CHECK(k::mul(a, c).data == k::serial::mul(a, c).data);
  CHECK(k::min2(a, c).data == k::serial::min2(a, c).data);
  CHECK(k::tanh_fwd(a).data == k::serial::tanh_fwd(a).data);
  CHECK(k::exp_fwd(a).data == k::serial::exp_fwd(a).data);
  CHECK(k::softmax_rows(a).data == k::serial::softmax_rows(a).data);
  double s1 = k::sum_all(a), s2 = k::serial::sum_all(a);
  CHECK(std::memcmp(&s1, &s2, sizeof s1) == 0);
  double d1 = k::dot_all(a, c), d2 = k::serial::dot_all(a, c);
  CHECK(std::memcmp(&d1, &d2, sizeof d1) == 0);

  Array dx1(300, 220), dx2(300, 220);
  k::tanh_bwd(dx1, c, a);
  k::serial::tanh_bwd(dx2, c, a);
  CHECK(dx1.data == dx2.data);
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  Array p = Array::full(2, 2, 0.37);
  AdamState s = AdamState::like(p, 1e-3);
  adam_step(p, Array(2, 2), s);
  for (double x : p.data) CHECK(x == 0.37);
  CHECK(s.t == 1);
}

TEST_CASE("adam: first step moves by about lr against the gradient sign") {
  Array p = Array::scalar(1.0);
  AdamState s = AdamState::like(p, 0.01);
  Array g = Array::scalar(3.5);
  adam_step(p, g, s);
  CHECK(p.data[0] == doctest::Approx(1.0 - 0.01).epsilon(1e-6));
}

TEST_CASE("adam matches an independent scalar reference trace") {
  // Hand-rolled Adam on f(x) = x^2 from x = 1 with lr = 0.1.
  double x = 1.0, m = 0.0, v = 0.0;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<double> trace;
  for (int t = 1; t <= 10; ++t) {
    const double g = 2.0 * x;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    x -= lr * mhat / (std::sqrt(vhat) + eps);
    trace.push_back(x);
  }

  Array p = Array::scalar(1.0);
  AdamState s = AdamState::like(p, 0.1);
  for (int t = 0; t < 10; ++t) {
    Tape tape;
    int l = tape.leaf(p);
    int loss = tape.square(l);
    tape.backward(loss);
    adam_step(p, tape.grad(l), s);
    CHECK(p.data[0] == doctest::Approx(trace[t]).epsilon(1e-12));
  }
}
