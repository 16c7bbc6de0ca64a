#include <random>

#include "doctest.h"
#include "giraffe/gradcheck.hpp"
#include "giraffe/ops.hpp"
#include "giraffe/tape.hpp"
#include "helpers.hpp"

using namespace giraffe;

namespace {

// Loss = sum(r * silu(conv(x))) evaluated straight from the oracles.
double oracle_loss(const oracle::Grid& x, const std::vector<double>& w, const std::vector<double>& b,
                   const oracle::Grid& r) {
  auto y = oracle::conv(x, r.c, 3, w, b, 1, 1);
  double s = 0;
  for (std::size_t i = 0; i < y.v.size(); ++i) s += r.v[i] * oracle::silu(y.v[i]);
  return s;
}

}  // namespace

TEST_CASE("tape gradients agree with finite differences of the oracle") {
  std::mt19937_64 rng(99);
  const auto x = testing::random_grid(rng, 5, 4, 2);
  auto w = testing::random_values(rng, 3 * 2 * 9);
  auto b = testing::random_values(rng, 3);
  const auto r = testing::random_grid(rng, 5, 4, 3);

  Tape<double> tape;
  const VarId vx = tape.input(testing::to_tensor(x));
  const ParamId pw = tape.param(ConvWeightsD(3, 2, 3, 3, w, b));
  const VarId out = tape.silu(tape.conv2d(vx, pw, 1, 1));
  const auto grads = backward(tape, out, testing::to_tensor(r));

  const double h = 1e-6;
  auto xp = x;
  for (std::size_t i = 0; i < x.v.size(); ++i) {
    xp.v[i] = x.v[i] + h;
    const double plus = oracle_loss(xp, w, b, r);
    xp.v[i] = x.v[i] - h;
    const double minus = oracle_loss(xp, w, b, r);
    xp.v[i] = x.v[i];
    CHECK(grads.inputs.at(vx).data()[i] == doctest::Approx((plus - minus) / (2 * h)).epsilon(1e-6));
  }
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double saved = w[i];
    w[i] = saved + h;
    const double plus = oracle_loss(x, w, b, r);
    w[i] = saved - h;
    const double minus = oracle_loss(x, w, b, r);
    w[i] = saved;
    CHECK(grads.params.at(pw).values[i] == doctest::Approx((plus - minus) / (2 * h)).epsilon(1e-6));
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double saved = b[i];
    b[i] = saved + h;
    const double plus = oracle_loss(x, w, b, r);
    b[i] = saved - h;
    const double minus = oracle_loss(x, w, b, r);
    b[i] = saved;
    CHECK((*grads.params.at(pw).bias)[i] == doctest::Approx((plus - minus) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("gradient accumulates over fan-out") {
  Tape<double> tape;
  const VarId x = tape.input(TensorD(Shape{1, 1, 1}, 2.0));
  const std::vector<VarId> both{x, x, x};
  const VarId y = tape.sum(both);
  const auto g = backward(tape, y, TensorD(Shape{1, 1, 1}, 1.0));
  CHECK(g.inputs.at(x).data()[0] == 3.0);
}

TEST_CASE("unreachable leaves get zero gradients") {
  Tape<double> tape;
  const VarId a = tape.input(TensorD(Shape{2, 2, 1}, 1.0));
  const VarId b = tape.input(TensorD(Shape{2, 2, 1}, 1.0));
  const VarId y = tape.silu(a);
  const auto g = backward(tape, y, TensorD(Shape{2, 2, 1}, 1.0));
  for (double v : g.inputs.at(b).data()) CHECK(v == 0.0);
}

TEST_CASE("backward rejects a seed of the wrong shape") {
  Tape<double> tape;
  const VarId a = tape.input(TensorD(Shape{2, 2, 1}, 1.0));
  CHECK_THROWS_AS(backward(tape, a, TensorD(Shape{1, 2, 1}, 1.0)), Error);
}

TEST_CASE("primitive gradient suite passes") {
  const auto report = gradcheck_primitives();
  CHECK(report.passed());
  CHECK(report.max_rel_error() <= 1e-4);
  std::set<std::string> seen;
  for (const auto& e : report.entries) seen.insert(e.name.substr(0, e.name.find('/')));
  for (const char* op : {"conv2d", "conv1x1", "silu", "space_to_depth", "bilinear_up2", "maxpool_down2",
                         "concat_channels", "sum_tensors"})
    CHECK(seen.count(op) == 1);
}

TEST_CASE("tiny GFPN gradient check passes") {
  const ArchitectureGraph g = tiny_gfpn();
  bool has_p3_8x8 = false;
  for (const auto& n : g.nodes())
    if (n.level == 3 && n.role == Role::kBackbone) has_p3_8x8 = n.shape->height == 8 && n.shape->width == 8;
  CHECK(has_p3_8x8);
  const auto report = gradcheck_graph(g);
  CHECK(report.passed());
  CHECK(report.max_rel_error() <= 1e-4);
  // two inputs, two projections, four fusion convs
  CHECK(report.entries.size() == 8);
}

TEST_CASE("a corrupted backward is reported as failing") {
  GradcheckOptions opts;
  opts.fault = 0.01;
  CHECK_FALSE(gradcheck_primitives(opts).passed());
  CHECK_FALSE(gradcheck_graph(tiny_gfpn(), opts).passed());
}
