#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "oracles.hpp"
#include "primitive_cases.hpp"
#include "xmt/rng.hpp"
#include "xmt/tensor.hpp"

using namespace xmt;

using oracle::Fn;
using oracle::primitive_cases;

TEST(Backward, SumGivesOnes) {
  Tape tape;
  const Tensor x = tape.watch(Tensor({2, 2}, {1, 2, 3, 4}));
  const auto g = grad(sum(x), std::span(&x, 1));
  for (double v : g[0].values()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, PowerRule) {
  Tape tape;
  const Tensor x = tape.watch(Tensor::scalar(3.0));
  EXPECT_EQ(grad(mul(x, x), std::span(&x, 1))[0].item(), 6.0);
}

TEST(Backward, ConcatGradientIsOnes) {
  Tape tape;
  const Tensor a = tape.watch(Tensor::full({1, 1, 2, 2}, 0.5));
  const Tensor b = tape.watch(Tensor::full({1, 2, 2, 2}, -0.5));
  const auto g = grad(sum(concat_channels(a, b)), std::span(&a, 1));
  ASSERT_EQ(g[0].shape(), a.shape());
  for (double v : g[0].values()) EXPECT_EQ(v, 1.0);
}

TEST(Backward, RejectsNonScalarAndDetachedRoots) {
  Tape tape;
  const Tensor x = tape.watch(Tensor::zeros({2}));
  EXPECT_THROW(backward(square(x)), ShapeError);
  EXPECT_THROW(backward(Tensor::scalar(1.0)), Error);
}

TEST(Backward, UnreachableLeafHasZeroGradient) {
  Tape tape;
  const Tensor x = tape.watch(Tensor::scalar(2.0));
  const Tensor y = tape.watch(Tensor::full({3}, 1.0));
  const Gradients g = backward(square(x));
  EXPECT_FALSE(g.contains(y));
  const Tensor gy = g.at(y);
  for (double v : gy.values()) EXPECT_EQ(v, 0.0);
}

TEST(Backward, ForwardValuesUnchanged) {
  Tape tape;
  RngStream rng(1);
  const Tensor x = tape.watch(oracle::random_tensor({1, 1, 4, 4}, rng));
  const Tensor k = tape.watch(oracle::random_tensor({1, 1, 3, 3}, rng));
  const Tensor y = conv2d(x, k, 1, 1);
  const std::vector<double> before(y.values().begin(), y.values().end());
  const std::size_t nodes = tape.size();
  backward(sum(square(y)), true);
  EXPECT_GT(tape.size(), nodes);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(y[i], before[i]);
}

TEST(GradCheck, SumIsExact) {
  RngStream rng(2);
  EXPECT_LT(grad_check([](const Tensor& x) { return sum(x); }, oracle::random_tensor({3, 3}, rng)), 1e-10);
}

TEST(GradCheck, MeanSquare) {
  RngStream rng(3);
  EXPECT_LT(grad_check([](const Tensor& x) { return mean(square(x)); }, oracle::random_tensor({4, 5}, rng)), 1e-8);
}

TEST(GradCheck, ConvLeakyMean) {
  RngStream rng(4);
  const Tensor k = oracle::random_tensor({2, 1, 3, 3}, rng);
  const Fn f = [k](const Tensor& x) { return mean(leaky_relu(conv2d(x, k, 1, 1))); };
  EXPECT_LT(grad_check(f, oracle::random_tensor({1, 1, 5, 5}, rng)), 1e-6);
}

TEST(GradCheck, AgreesWithIndependentFiniteDifferences) {
  RngStream rng(5);
  const Tensor k = oracle::random_tensor({1, 1, 3, 3}, rng);
  const Tensor x0 = oracle::random_tensor({1, 1, 4, 4}, rng);
  Tape tape;
  const Tensor x = tape.watch(x0);
  const Tensor analytic = grad(sum(tanh(conv2d(x, k, 1, 0))), std::span(&x, 1))[0];
  const auto numeric = oracle::numeric_grad(
      [&](const std::vector<double>& v) {
        const auto y = oracle::conv2d(Tensor(x0.shape(), v), k, 1, 0);
        double s = 0.0;
        for (double e : y) s += std::tanh(e);
        return s;
      },
      std::vector<double>(x0.values().begin(), x0.values().end()));
  EXPECT_LT(oracle::max_rel_error({analytic.values().begin(), analytic.values().end()}, numeric), 1e-8);
}

TEST(GradCheck, RejectsNonScalar) {
  EXPECT_THROW(grad_check([](const Tensor& x) { return square(x); }, Tensor::zeros({2})), ShapeError);
}

TEST(Autodiff, EveryPrimitiveMatchesFiniteDifferences) {
  const auto cases = primitive_cases();
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& c = cases[i];
    RngStream rng = RngStream(0xAD).derive(i);
    for (int trial = 0; trial < 5; ++trial) {
      const Fn f = c.make(rng);
      const double err = grad_check(f, oracle::random_tensor(c.shape, rng, c.lo, c.hi));
      EXPECT_LT(err, 1e-6) << c.name << " trial " << trial;
    }
  }
}

TEST(Autodiff, SecondOrderOfOneConvLayer) {
  // d/dk ||d/dx sum(tanh(conv(x, k)))||^2 against finite differences in k.
  RngStream rng(6);
  const Tensor x0 = oracle::random_tensor({1, 1, 4, 4}, rng);
  const Tensor k0 = oracle::random_tensor({1, 1, 3, 3}, rng);
  auto penalty = [&](const Tensor& kv, bool keep_graph, Tensor* dk) {
    Tape tape;
    const Tensor x = tape.watch(x0);
    const Tensor k = tape.watch(kv);
    const Tensor gx = grad(sum(tanh(conv2d(x, k, 1, 1))), std::span(&x, 1), true)[0];
    const Tensor p = sum(square(gx));
    if (keep_graph) *dk = grad(p, std::span(&k, 1))[0].detach();
    return p.item();
  };
  Tensor analytic;
  penalty(k0, true, &analytic);
  const auto numeric = oracle::numeric_grad(
      [&](const std::vector<double>& v) { return penalty(Tensor(k0.shape(), v), false, nullptr); },
      std::vector<double>(k0.values().begin(), k0.values().end()));
  EXPECT_LT(oracle::max_rel_error({analytic.values().begin(), analytic.values().end()}, numeric), 1e-5);
}

TEST(Autodiff, DeterministicTapes) {
  auto run = [] {
    RngStream rng(7);
    Tape tape;
    const Tensor x = tape.watch(oracle::random_tensor({1, 2, 4, 4}, rng));
    const Tensor k = tape.watch(oracle::random_tensor({2, 2, 3, 3}, rng));
    RngStream drop(8);
    const Tensor y = mean(square(dropout(leaky_relu(conv2d(x, k, 1, 1)), 0.5, drop, true)));
    const Tensor wrt[] = {x, k};
    auto g = grad(y, wrt);
    return std::make_pair(tape.size(), g);
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_TRUE(bit_equal(a.second[0], b.second[0]));
  EXPECT_TRUE(bit_equal(a.second[1], b.second[1]));
}
