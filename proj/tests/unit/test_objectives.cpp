#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "xmt/objectives.hpp"

using namespace xmt;

namespace {

GanObjective obj(GanKind k) {
  GanObjective o;
  o.kind = k;
  return o;
}

double bce_logit(double z, double target) {
  // -[t log s(z) + (1 - t) log(1 - s(z))], direct form for moderate z.
  const double s = 1.0 / (1.0 + std::exp(-z));
  return -(target * std::log(s) + (1 - target) * std::log(1 - s));
}

}  // namespace

TEST(Objectives, NamesRoundTrip) {
  for (auto k : {GanKind::vanilla, GanKind::lsgan, GanKind::wgangp}) EXPECT_EQ(gan_kind_from_string(to_string(k)), k);
  EXPECT_THROW(gan_kind_from_string("hinge"), ConfigError);
  GanObjective o = obj(GanKind::wgangp);
  o.gp_weight = 0;
  EXPECT_THROW(o.validate(), ConfigError);
}

TEST(DiscriminatorLoss, VanillaAtZeroLogitsIsLn2) {
  const Tensor z = Tensor::zeros({1, 1, 3, 3});
  EXPECT_NEAR(discriminator_loss(obj(GanKind::vanilla), z, z).item(), std::log(2.0), 1e-15);
}

TEST(DiscriminatorLoss, VanillaMatchesDirectBce) {
  RngStream rng(1);
  const Tensor r = oracle::random_tensor({2, 1, 3, 3}, rng, -4, 4);
  const Tensor f = oracle::random_tensor({2, 1, 3, 3}, rng, -4, 4);
  double expect = 0.0;
  for (int i = 0; i < 18; ++i) expect += bce_logit(r[i], 1) + bce_logit(f[i], 0);
  expect /= 36;
  EXPECT_NEAR(discriminator_loss(obj(GanKind::vanilla), r, f).item(), expect, 1e-12);
}

TEST(DiscriminatorLoss, VanillaSaturatesWithoutOverflow) {
  const Tensor r = Tensor::full({4}, 800.0);
  const Tensor f = Tensor::full({4}, -800.0);
  EXPECT_NEAR(discriminator_loss(obj(GanKind::vanilla), r, f).item(), 0.0, 1e-300);
  const double bad = discriminator_loss(obj(GanKind::vanilla), f, r).item();
  EXPECT_NEAR(bad, 800.0, 1e-9);
}

TEST(DiscriminatorLoss, LsganPerfectIsZero) {
  EXPECT_EQ(discriminator_loss(obj(GanKind::lsgan), Tensor::full({5}, 1.0), Tensor::zeros({5})).item(), 0.0);
  RngStream rng(2);
  const Tensor r = oracle::random_tensor({6}, rng);
  const Tensor f = oracle::random_tensor({6}, rng);
  double a = 0.0, b = 0.0;
  for (int i = 0; i < 6; ++i) {
    a += (r[i] - 1) * (r[i] - 1);
    b += f[i] * f[i];
  }
  EXPECT_NEAR(discriminator_loss(obj(GanKind::lsgan), r, f).item(), (a / 6 + b / 6) / 2, 1e-14);
}

TEST(DiscriminatorLoss, WassersteinSymmetric) {
  const Tensor r({3}, {1.0, 2.0, 3.0});
  const Tensor f({3}, {3.0, 2.0, 1.0});
  EXPECT_EQ(discriminator_loss(obj(GanKind::wgangp), r, f).item(), 0.0);
  EXPECT_LT(discriminator_loss(obj(GanKind::wgangp), f, Tensor::full({3}, -5.0)).item(), 0.0);
}

TEST(DiscriminatorLoss, ShapeMismatch) {
  EXPECT_THROW(discriminator_loss(obj(GanKind::lsgan), Tensor::zeros({3}), Tensor::zeros({4})), ShapeError);
}

TEST(GeneratorLoss, ClosedForms) {
  EXPECT_EQ(generator_adv_loss(obj(GanKind::lsgan), Tensor::full({4}, 1.0)).item(), 0.0);
  EXPECT_NEAR(generator_adv_loss(obj(GanKind::vanilla), Tensor::zeros({4})).item(), 0.6931471805599453, 1e-15);
  EXPECT_EQ(generator_adv_loss(obj(GanKind::wgangp), Tensor::full({4}, 2.0)).item(), -2.0);
}

TEST(GeneratorLoss, NonnegativeForVanillaAndLsgan) {
  RngStream rng(3);
  for (int i = 0; i < 20; ++i) {
    const Tensor f = oracle::random_tensor({8}, rng, -10, 10);
    EXPECT_GE(generator_adv_loss(obj(GanKind::vanilla), f).item(), 0.0);
    EXPECT_GE(generator_adv_loss(obj(GanKind::lsgan), f).item(), 0.0);
    EXPECT_GE(discriminator_loss(obj(GanKind::vanilla), f, f).item(), 0.0);
    EXPECT_GE(discriminator_loss(obj(GanKind::lsgan), f, f).item(), 0.0);
  }
}

TEST(L1Loss, Values) {
  RngStream rng(4);
  const Tensor a = oracle::random_tensor({2, 3, 4, 4}, rng);
  EXPECT_EQ(l1_loss(a, a).item(), 0.0);
  EXPECT_NEAR(l1_loss(add_scalar(a, 0.5), a).item(), 0.5, 1e-15);
  const Tensor b = oracle::random_tensor({2, 3, 4, 4}, rng);
  double s = 0.0;
  for (std::size_t i = 0; i < 96; ++i) s += std::abs(a[i] - b[i]);
  EXPECT_NEAR(l1_loss(a, b).item(), s / 96, 1e-12);
  EXPECT_THROW(l1_loss(a, Tensor::zeros({1})), ShapeError);
}

TEST(TotalLoss, Arithmetic) {
  EXPECT_EQ(generator_total_loss(Tensor::scalar(0.7), Tensor::scalar(0.3), 0.0).item(), 0.7);
  EXPECT_NEAR(generator_total_loss(Tensor::scalar(0.6931), Tensor::scalar(0.5), 100.0).item(), 50.6931, 1e-12);
  const double l1 = 0.123456789;
  EXPECT_EQ(generator_total_loss(Tensor::scalar(0.0), Tensor::scalar(l1), 10.0).item(), 10.0 * l1);
  EXPECT_THROW(generator_total_loss(Tensor::scalar(0), Tensor::scalar(0), -1.0), DomainError);
}

TEST(GradientPenalty, UnitLinearCriticIsZero) {
  RngStream rng(5);
  const Tensor w0 = oracle::random_tensor({1, 3, 4, 4}, rng);
  double n2 = 0.0;
  for (double v : w0.values()) n2 += v * v;
  const Tensor w = scale(w0, 1.0 / std::sqrt(n2));
  const Critic critic = [w](const Tensor&, const Tensor& y) {
    // One logit per sample: <w, y>.
    return sum_to(mul(y, broadcast_to(w, y.shape())), {y.dim(0), 1, 1, 1});
  };
  Tape tape;
  const Tensor x = oracle::random_tensor({2, 1, 4, 4}, rng);
  for (int i = 0; i < 5; ++i) {
    const Tensor gp = gradient_penalty(critic, tape, x, oracle::random_tensor({2, 3, 4, 4}, rng),
                                       oracle::random_tensor({2, 3, 4, 4}, rng), rng);
    EXPECT_NEAR(gp.item(), 0.0, 1e-10);
  }
}

TEST(GradientPenalty, ConstantCriticIsOne) {
  const Critic critic = [](const Tensor&, const Tensor& y) { return scale(sum(y), 0.0); };
  Tape tape;
  RngStream rng(6);
  const Tensor gp = gradient_penalty(critic, tape, Tensor::zeros({1, 1, 4, 4}), Tensor::full({1, 1, 4, 4}, 1.0),
                                     Tensor::zeros({1, 1, 4, 4}), rng);
  EXPECT_NEAR(gp.item(), 1.0, 1e-15);
}

TEST(GradientPenalty, ParameterGradientMatchesFiniteDifferences) {
  // Tiny one-conv critic on a 1x1x4x4 image.
  RngStream rng(7);
  const Tensor k0 = oracle::random_tensor({1, 2, 3, 3}, rng);
  const Tensor x = oracle::random_tensor({1, 1, 4, 4}, rng);
  const Tensor yr = oracle::random_tensor({1, 1, 4, 4}, rng);
  const Tensor yf = oracle::random_tensor({1, 1, 4, 4}, rng);
  const RngStream eps_rng = rng.derive(1);
  auto penalty = [&](const Tensor& kv, Tensor* dk) {
    Tape tape;
    const Tensor k = tape.watch(kv);
    const Critic critic = [k](const Tensor& c, const Tensor& y) {
      return mean(tanh(conv2d(concat_channels(c, y), k, 1, 1)));
    };
    RngStream r = eps_rng;
    const Tensor gp = gradient_penalty(critic, tape, x, yr, yf, r);
    if (dk) *dk = grad(gp, std::span(&k, 1))[0].detach();
    return gp.item();
  };
  Tensor analytic;
  penalty(k0, &analytic);
  const auto numeric = oracle::numeric_grad(
      [&](const std::vector<double>& v) { return penalty(Tensor(k0.shape(), v), nullptr); },
      std::vector<double>(k0.values().begin(), k0.values().end()));
  EXPECT_LT(oracle::max_rel_error({analytic.values().begin(), analytic.values().end()}, numeric), 1e-5);
}
