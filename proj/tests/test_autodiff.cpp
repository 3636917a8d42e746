#include "doctest.h"

#include <cmath>
#include <sstream>

#include "marflow/core/gradcheck.hpp"
#include "marflow/core/ops.hpp"
#include "marflow/core/tensor_io.hpp"
#include "op_catalog.hpp"
#include "test_util.hpp"

using namespace marflow;
using namespace marflow::ad;
using marflow::testing::max_abs_diff;
using marflow::testing::random_tensor;

namespace {

// Six nested loops, zero padding, stride 1.
Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b) {
  const Index cout = w.dim(0), cin = w.dim(1), k = w.dim(2), p = k / 2;
  const Index h = x.height(), wd = x.width();
  Tensor<double> out({cout, h, wd});
  for (Index o = 0; o < cout; ++o)
    for (Index y = 0; y < h; ++y)
      for (Index xx = 0; xx < wd; ++xx) {
        double acc = b[o];
        for (Index c = 0; c < cin; ++c)
          for (Index ky = 0; ky < k; ++ky)
            for (Index kx = 0; kx < k; ++kx) {
              const Index iy = y + ky - p, ix = xx + kx - p;
              if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
              acc += w[((o * cin + c) * k + ky) * k + kx] * x(c, iy, ix);
            }
        out(o, y, xx) = acc;
      }
  return out;
}

Tensor<double> run_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>& b, int stride = 1) {
  Tape<double> tape(false);
  return conv2d(tape.constant(x), tape.constant(w), tape.constant(b), stride).value();
}

}  // namespace

#define FN [](Tape<double>&, std::span<const Var<double>> in)

TEST_CASE("conv2d scaling and zero kernels") {
  Tensor<double> ones({1, 3, 3}, 1.0);
  Tensor<double> w({1, 1, 1, 1}, 2.0);
  Tensor<double> b({1}, 0.0);
  const auto y = run_conv(ones, w, b);
  CHECK(y.shape() == Shape{1, 3, 3});
  for (double v : y.values()) CHECK(v == 2.0);

  const auto x = random_tensor({2, 5, 5}, 3);
  Tensor<double> zero({3, 2, 3, 3}, 0.0);
  Tensor<double> bias({3}, std::vector<double>{0.5, -1.0, 2.0});
  const auto z = run_conv(x, zero, bias);
  for (Index c = 0; c < 3; ++c)
    for (Index i = 0; i < 5; ++i)
      for (Index j = 0; j < 5; ++j) CHECK(z(c, i, j) == bias[c]);
}

TEST_CASE("conv2d matches the nested-loop oracle") {
  for (unsigned seed = 0; seed < 5; ++seed) {
    const auto x = random_tensor({2, 5, 5}, seed);
    const auto w = random_tensor({4, 2, 3, 3}, seed + 100);
    const auto b = random_tensor({4}, seed + 200);
    const auto got = run_conv(x, w, b);
    const auto want = naive_conv(x, w, b);
    CHECK(max_abs_diff(got, want) <= 1e-6 * want.array().abs().maxCoeff());
  }
}

TEST_CASE("conv2d stride 2 samples the stride-1 result") {
  const auto x = random_tensor({3, 8, 8}, 9);
  const auto w = random_tensor({2, 3, 3, 3}, 10);
  const auto b = random_tensor({2}, 11);
  const auto full = naive_conv(x, w, b);
  const auto half = run_conv(x, w, b, 2);
  REQUIRE(half.shape() == Shape{2, 4, 4});
  for (Index c = 0; c < 2; ++c)
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 4; ++j) CHECK(half(c, i, j) == doctest::Approx(full(c, 2 * i, 2 * j)).epsilon(1e-12));
}

TEST_CASE("conv2d rejects bad shapes") {
  Tape<double> tape(false);
  auto x = tape.constant(Tensor<double>({2, 4, 4}));
  CHECK_THROWS_AS(conv2d(x, tape.constant(Tensor<double>({1, 3, 3, 3})), 1), ShapeError);
  CHECK_THROWS_AS(conv2d(x, tape.constant(Tensor<double>({1, 2, 2, 2})), 1), ShapeError);
}

TEST_CASE("conv2d is linear in its input") {
  const auto x = random_tensor({2, 6, 6}, 1);
  const auto y = random_tensor({2, 6, 6}, 2);
  const auto w = random_tensor({3, 2, 3, 3}, 3);
  const Tensor<double> b({3}, 0.0);
  const double a = 1.7, c = -0.4;
  Tensor<double> mix(x.shape());
  mix.array() = a * x.array() + c * y.array();
  Tensor<double> expect(Shape{3, 6, 6});
  expect.array() = a * run_conv(x, w, b).array() + c * run_conv(y, w, b).array();
  CHECK(max_abs_diff(run_conv(mix, w, b), expect) < 1e-5);
}

TEST_CASE("elementwise examples") {
  Tape<double> tape(false);
  auto zeros = tape.constant(Tensor<double>({2, 2, 2}, 0.0));
  for (double v : exp(zeros).value().values()) CHECK(v == 1.0);

  auto neg = tape.constant(Tensor<double>({1}, -1.0));
  CHECK(leaky_relu(neg).value()[0] == doctest::Approx(-0.2));

  const auto r = random_tensor({3, 4, 4}, 5, -3.0, 3.0);
  auto back = log(exp(tape.constant(r)));
  CHECK(max_abs_diff(back.value(), r) < 1e-6);

  CHECK_THROWS_AS(log(tape.constant(Tensor<double>({2}, std::vector<double>{1.0, 0.0}))), NumericalError);
  CHECK_THROWS_AS(add(zeros, tape.constant(Tensor<double>({2, 2, 3}))), ShapeError);
}

TEST_CASE("non-finite values are rejected") {
  Tape<float> tape(false);
  auto big = tape.constant(Tensor<float>({1}, 1000.0f));
  CHECK_THROWS_AS(exp(big), NumericalError);
}

TEST_CASE("concat_channels") {
  Tape<double> tape(false);
  const auto a = random_tensor({1, 4, 4}, 1);
  const auto b = random_tensor({2, 4, 4}, 2);
  auto cat = concat_channels({tape.constant(a), tape.constant(b)});
  CHECK(cat.shape() == Shape{3, 4, 4});
  CHECK(concat_channels({tape.constant(a)}).value() == a);
  CHECK(slice_channels(cat, 0, 1).value() == a);
  CHECK(slice_channels(cat, 1, 2).value() == b);
  CHECK_THROWS_AS(concat_channels({tape.constant(a), tape.constant(Tensor<double>({1, 4, 5}))}), ShapeError);
}

TEST_CASE("squeeze layout and roundtrip") {
  std::vector<double> v(16);
  for (int i = 0; i < 16; ++i) v[i] = i;
  Tensor<double> x({1, 4, 4}, v);
  const auto s = squeeze2(x);
  REQUIRE(s.shape() == Shape{4, 2, 2});
  CHECK(s(0, 0, 0) == 0);
  CHECK(s(0, 0, 1) == 2);
  CHECK(s(0, 1, 0) == 8);
  CHECK(s(0, 1, 1) == 10);
  CHECK(s(1, 0, 0) == 1);
  CHECK(s(2, 0, 0) == 4);
  CHECK(s(3, 0, 0) == 5);
  CHECK(unsqueeze2(s) == x);
  const auto r = random_tensor({3, 6, 8}, 4);
  CHECK(unsqueeze2(squeeze2(r)) == r);
  CHECK_THROWS_AS(squeeze2(Tensor<double>({1, 3, 4})), ShapeError);
}

TEST_CASE("vjp_check on exp at zero") {
  const Tensor<double> x({1}, 0.0);
  const std::vector<Tensor<double>> inputs{x};
  Tape<double> tape;
  auto v = tape.input(x);
  tape.backward(exp(v));
  CHECK(std::abs(tape.grad(v)[0] - 1.0) < 1e-8);
  const auto rep = vjp_check([](Tape<double>&, std::span<const Var<double>> in) { return exp(in[0]); }, inputs);
  CHECK(rep.passed);
}

TEST_CASE("finite-difference VJP for every differentiable op") {
  for (const auto& c : marflow::testing::op_catalog()) {
    for (unsigned seed = 0; seed < 10; ++seed) {
      std::vector<Tensor<double>> inputs;
      for (std::size_t i = 0; i < c.shapes.size(); ++i) {
        inputs.push_back(random_tensor(c.shapes[i], seed * 31 + static_cast<unsigned>(i), c.lo, c.hi));
      }
      const auto rep = vjp_check(c.fn, inputs, 1e-3, seed);
      INFO(c.name << " seed " << seed << " err " << rep.max_rel_error);
      CHECK(rep.passed);
    }
  }
}

TEST_CASE("composed graph gradient equals the chained per-op VJPs") {
  // tanh(conv(x)) checked end to end against finite differences.
  for (unsigned seed = 0; seed < 3; ++seed) {
    std::vector<Tensor<double>> inputs{random_tensor({2, 5, 5}, seed), random_tensor({2, 2, 3, 3}, seed + 7)};
    const auto rep = vjp_check(
        FN { return tanh(conv2d(in[0], in[1], 1)); }, inputs, 1e-3, seed);
    CHECK(rep.passed);
  }
}

TEST_CASE("parameter gradients accumulate into the parameter") {
  Parameter<double> p("w", random_tensor({3}, 1));
  for (int rep = 0; rep < 2; ++rep) {
    Tape<double> tape;
    tape.backward(sum_squares(tape.param(p)));
  }
  for (Index i = 0; i < 3; ++i) CHECK(p.grad[i] == doctest::Approx(4.0 * p.value[i]));
}

TEST_CASE("tensor dump roundtrip and header") {
  const auto t = random_tensor<float>({2, 3, 4}, 8);
  std::stringstream ss;
  write_tensor_dump(ss, t);
  const std::string raw = ss.str();
  CHECK(raw.rfind("shape: 2 3 4\n", 0) == 0);
  CHECK(raw.size() == 13 + 24 * 4);
  ss.seekg(0);
  CHECK(read_tensor_dump(ss) == t);
}
