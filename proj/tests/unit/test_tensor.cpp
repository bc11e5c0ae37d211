#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "xmt/rng.hpp"
#include "xmt/tensor.hpp"

using namespace xmt;

TEST(Tensor, ConstructorRejectsMismatchedSize) {
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor({0, 2}, {}), ShapeError);
}

TEST(Conv2d, AllOnesSumsWindow) {
  const Tensor y = conv2d(Tensor::full({1, 1, 3, 3}, 1.0), Tensor::full({1, 1, 3, 3}, 1.0), 1, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
  EXPECT_EQ(y.item(), 9.0);
}

TEST(Conv2d, UnitKernelIsIdentity) {
  RngStream rng(1);
  const Tensor x = oracle::random_tensor({2, 1, 4, 5}, rng);
  EXPECT_TRUE(bit_equal(conv2d(x, Tensor::full({1, 1, 1, 1}, 1.0), 1, 0), x));
}

TEST(Conv2d, MatchesNestedLoopOracle) {
  RngStream rng(2);
  const Tensor x = oracle::random_tensor({1, 2, 5, 5}, rng);
  const Tensor k = oracle::random_tensor({3, 2, 3, 3}, rng);
  for (int stride : {1, 2}) {
    for (int pad : {0, 1, 2}) {
      const Tensor y = conv2d(x, k, stride, pad);
      const auto ref = oracle::conv2d(x, k, stride, pad);
      ASSERT_EQ(static_cast<std::size_t>(y.numel()), ref.size());
      EXPECT_EQ(y.dim(2), (5 + 2 * pad - 3) / stride + 1);
      for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
    }
  }
}

TEST(Conv2d, RejectsBadShapes) {
  EXPECT_THROW(conv2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({1, 3, 3, 3}), 1, 0), ShapeError);
  EXPECT_THROW(conv2d(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 3, 3}), 1, 0), ShapeError);
  EXPECT_THROW(conv2d(Tensor::zeros({1, 1, 4, 4}), Tensor::zeros({1, 1, 3, 3}), 0, 0), ShapeError);
}

TEST(ConvTranspose2d, SinglePixelSpreadsOverKernel) {
  const Tensor y = conv_transpose2d(Tensor::full({1, 1, 1, 1}, 2.5), Tensor::full({1, 1, 2, 2}, 1.0), 1, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
  for (double v : y.values()) EXPECT_EQ(v, 2.5);
}

TEST(ConvTranspose2d, Stride2UpsamplingMatchesOracle) {
  RngStream rng(3);
  const Tensor x = oracle::random_tensor({1, 1, 2, 2}, rng);
  const Tensor k = oracle::random_tensor({1, 1, 2, 2}, rng);
  const Tensor y = conv_transpose2d(x, k, 2, 0);
  ASSERT_EQ(y.shape(), (Shape{1, 1, 4, 4}));
  const auto ref = oracle::conv_transpose2d(x, k, 2, 0);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
  // No overlap: each output is exactly one product.
  EXPECT_EQ(y[0], x[0] * k[0]);
  EXPECT_EQ(y[15], x[3] * k[3]);
}

TEST(ConvTranspose2d, AdjointOfConv2d) {
  RngStream rng(4);
  for (int trial = 0; trial < 25; ++trial) {
    const std::int64_t n = 1 + static_cast<std::int64_t>(rng.below(2));
    const std::int64_t ci = 1 + static_cast<std::int64_t>(rng.below(3));
    const std::int64_t co = 1 + static_cast<std::int64_t>(rng.below(3));
    const int kk = 1 + static_cast<int>(rng.below(4));
    const int stride = 1 + static_cast<int>(rng.below(2));
    const int pad = static_cast<int>(rng.below(static_cast<std::uint64_t>(kk)));
    const std::int64_t side = kk + static_cast<std::int64_t>(rng.below(5));
    // Rows and columns the transposed map cannot reach are zeroed, so the
    // identity holds exactly on the whole input.
    const std::int64_t reach = ((side + 2 * pad - kk) / stride) * stride - 2 * pad + kk;
    std::vector<double> xv(static_cast<std::size_t>(n * ci * side * side));
    for (std::size_t idx = 0; idx < xv.size(); ++idx) {
      const auto i = static_cast<std::int64_t>(idx) / side % side, j = static_cast<std::int64_t>(idx) % side;
      xv[idx] = (i < reach && j < reach) ? 2.0 * rng.uniform() - 1.0 : 0.0;
    }
    const Tensor x({n, ci, side, side}, std::move(xv));
    const Tensor k = oracle::random_tensor({co, ci, kk, kk}, rng);
    const Tensor cx = conv2d(x, k, stride, pad);
    const Tensor y = oracle::random_tensor(cx.shape(), rng);
    const Tensor ty = conv_transpose2d(y, k, stride, pad);
    double rhs = 0.0;
    const std::int64_t th = ty.dim(2), tw = ty.dim(3);
    for (std::int64_t b = 0; b < n; ++b)
      for (std::int64_t c = 0; c < ci; ++c)
        for (std::int64_t i = 0; i < std::min(th, side); ++i)
          for (std::int64_t j = 0; j < std::min(tw, side); ++j)
            rhs += x[((b * ci + c) * side + i) * side + j] * ty[((b * ci + c) * th + i) * tw + j];
    EXPECT_NEAR(oracle::dot(cx, y), rhs, 1e-10) << "trial " << trial;
  }
}

TEST(ConvTranspose2d, MatchesScatterOracle) {
  RngStream rng(5);
  const Tensor x = oracle::random_tensor({2, 3, 3, 3}, rng);
  const Tensor k = oracle::random_tensor({3, 2, 4, 4}, rng);
  const Tensor y = conv_transpose2d(x, k, 2, 1);
  EXPECT_EQ(y.shape(), (Shape{2, 2, 6, 6}));
  const auto ref = oracle::conv_transpose2d(x, k, 2, 1);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
}

TEST(Activation, ScalarValues) {
  const Tensor x({3}, {-1.0, 0.0, 2.0});
  const Tensor r = activation(Activation::relu, x);
  EXPECT_EQ(r[0], 0.0);
  EXPECT_EQ(r[2], 2.0);
  EXPECT_DOUBLE_EQ(activation(Activation::leaky_relu, x)[0], -0.2);
  EXPECT_EQ(activation(Activation::sigmoid, x)[1], 0.5);
  const Tensor big({2}, {-800.0, 800.0});
  const Tensor t = activation(Activation::tanh, big);
  EXPECT_GE(t[0], -1.0);
  EXPECT_LE(t[1], 1.0);
  const Tensor s = activation(Activation::sigmoid, big);
  EXPECT_GE(s[0], 0.0);
  EXPECT_LE(s[1], 1.0);
}

TEST(Softplus, StableForLargeInputs) {
  const Tensor y = softplus(Tensor({3}, {-800.0, 0.0, 800.0}));
  EXPECT_NEAR(y[0], 0.0, 1e-300);
  EXPECT_NEAR(y[1], std::log(2.0), 1e-15);
  EXPECT_EQ(y[2], 800.0);
}

TEST(InstanceNorm, ConstantChannelGivesBeta) {
  const Tensor y = instance_norm(Tensor::full({1, 1, 2, 2}, 7.0), Tensor::full({1}, 3.0), Tensor::full({1}, 0.25));
  for (double v : y.values()) EXPECT_EQ(v, 0.25);
}

TEST(InstanceNorm, TwoValuesNormalizeToUnit) {
  const Tensor y = instance_norm(Tensor({1, 1, 1, 2}, {1.0, 3.0}), Tensor::full({1}, 1.0), Tensor::zeros({1}), 0.0);
  EXPECT_NEAR(y[0], -1.0, 1e-15);
  EXPECT_NEAR(y[1], 1.0, 1e-15);
}

TEST(InstanceNorm, MomentsOfRandomInput) {
  RngStream rng(6);
  const Tensor x = oracle::random_tensor({2, 3, 5, 4}, rng, -3, 5);
  const Tensor y = instance_norm(x, Tensor::full({3}, 1.0), Tensor::zeros({3}), 0.0);
  for (int nc = 0; nc < 6; ++nc) {
    double m = 0.0, v = 0.0;
    for (int i = 0; i < 20; ++i) m += y[nc * 20 + i];
    m /= 20;
    for (int i = 0; i < 20; ++i) v += (y[nc * 20 + i] - m) * (y[nc * 20 + i] - m);
    v /= 20;
    EXPECT_NEAR(m, 0.0, 1e-10);
    EXPECT_NEAR(v, 1.0, 1e-8);
  }
}

TEST(InstanceNorm, RejectsSinglePixel) {
  EXPECT_THROW(instance_norm(Tensor::zeros({1, 1, 1, 1}), Tensor::full({1}, 1.0), Tensor::zeros({1})), ShapeError);
}

TEST(ConcatChannels, SliceRecoversInputs) {
  RngStream rng(7);
  const Tensor a = oracle::random_tensor({2, 1, 3, 3}, rng);
  const Tensor b = oracle::random_tensor({2, 2, 3, 3}, rng);
  const Tensor c = concat_channels(a, b);
  EXPECT_EQ(c.shape(), (Shape{2, 3, 3, 3}));
  EXPECT_TRUE(bit_equal(slice_channels(c, 0, 1), a));
  EXPECT_TRUE(bit_equal(slice_channels(c, 1, 2), b));
  EXPECT_THROW(concat_channels(a, Tensor::zeros({2, 1, 3, 4})), ShapeError);
}

TEST(Dropout, IdentityCases) {
  RngStream rng(8);
  const Tensor x = oracle::random_tensor({1, 2, 4, 4}, rng);
  RngStream r1(1);
  EXPECT_TRUE(bit_equal(dropout(x, 0.0, r1, true), x));
  EXPECT_TRUE(bit_equal(dropout(x, 0.5, r1, false), x));
  EXPECT_THROW(dropout(x, 1.0, r1, true), DomainError);
}

TEST(Dropout, MaskReplaysFromRngState) {
  const Tensor x = Tensor::full({1, 1, 64, 64}, 1.0);
  RngStream a(99), b(99);
  const Tensor ya = dropout(x, 0.5, a, true);
  const Tensor yb = dropout(x, 0.5, b, true);
  EXPECT_TRUE(bit_equal(ya, yb));
  EXPECT_EQ(a, b);
  int kept = 0;
  for (double v : ya.values()) {
    EXPECT_TRUE(v == 0.0 || v == 2.0);
    kept += v != 0.0;
  }
  EXPECT_NEAR(kept / 4096.0, 0.5, 0.05);
}

TEST(Reduce, MeanAndSum) {
  EXPECT_EQ(reduce(Reduction::mean, Tensor({3}, {1, 2, 3})).item(), 2.0);
  EXPECT_EQ(reduce(Reduction::sum, Tensor::zeros({4, 4})).item(), 0.0);
  RngStream rng(9);
  const Tensor x = oracle::random_tensor({7, 11}, rng);
  EXPECT_NEAR(mean(x).item() * 77, sum(x).item(), 1e-12);
  EXPECT_THROW(sum(Tensor()), ShapeError);
}

TEST(Elementwise, BasicKinds) {
  EXPECT_EQ(elementwise(Elementwise::abs, Tensor::scalar(-3)).item(), 3.0);
  EXPECT_EQ(elementwise(Elementwise::log, Tensor::scalar(1)).item(), 0.0);
  RngStream rng(10);
  const Tensor a = oracle::random_tensor({3, 3}, rng);
  const Tensor zero = elementwise(Elementwise::sub, a, a);
  for (double v : zero.values()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(elementwise(Elementwise::add, a), ShapeError);
  EXPECT_THROW(add(a, Tensor::zeros({3, 2})), ShapeError);
  EXPECT_EQ(add(a, Tensor::scalar(1))[4], a[4] + 1);
}

TEST(Elementwise, DomainErrorsNameTheIndex) {
  try {
    log(Tensor({3}, {1.0, 2.0, -1.0}));
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_NE(std::string(e.what()).find("index 2"), std::string::npos);
  }
  EXPECT_THROW(sqrt(Tensor::scalar(-1)), DomainError);
}

TEST(Elementwise, NonFiniteResultRejected) {
  EXPECT_THROW(exp(Tensor::scalar(1000)), NonFiniteError);
}

TEST(Tensor, BatchStackAndItem) {
  RngStream rng(11);
  const Tensor a = oracle::random_tensor({1, 2, 3, 3}, rng);
  const Tensor b = oracle::random_tensor({1, 2, 3, 3}, rng);
  const std::vector<Tensor> items{a, b};
  const Tensor s = stack_batch(items);
  EXPECT_EQ(s.dim(0), 2);
  EXPECT_TRUE(bit_equal(batch_item(s, 1), b));
}
