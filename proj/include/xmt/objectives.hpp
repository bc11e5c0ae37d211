#pragma once

#include <functional>
#include <string>

#include "xmt/models.hpp"
#include "xmt/rng.hpp"
#include "xmt/tensor.hpp"

namespace xmt {

enum class GanKind { vanilla, lsgan, wgangp };

std::string to_string(GanKind kind);
GanKind gan_kind_from_string(const std::string& name);

struct GanObjective {
  GanKind kind = GanKind::vanilla;
  double gp_weight = 10.0;  // used by wgangp only

  void validate() const;
  friend bool operator==(const GanObjective&, const GanObjective&) = default;
};

/// Scalar values of one training step. g_total == g_adv + lambda_L1 * g_l1.
struct LossBreakdown {
  double d_loss = 0.0;
  double g_adv = 0.0;
  double g_l1 = 0.0;
  double g_total = 0.0;
  double gp = 0.0;
};

/// vanilla: mean BCE(real, 1) and BCE(fake, 0), averaged over both sides.
/// lsgan:   (mean((real - 1)^2) + mean(fake^2)) / 2.
/// wgangp:  mean(fake) - mean(real); the gradient penalty is added by the caller.
Tensor discriminator_loss(const GanObjective& obj, const Tensor& real_logits, const Tensor& fake_logits);

/// Non-saturating generator loss: vanilla mean BCE(fake, 1), lsgan
/// mean((fake - 1)^2), wgangp -mean(fake).
Tensor generator_adv_loss(const GanObjective& obj, const Tensor& fake_logits);

/// Mean absolute difference.
Tensor l1_loss(const Tensor& fake, const Tensor& real);

Tensor generator_total_loss(const Tensor& g_adv, const Tensor& g_l1, double lambda_l1);

/// Critic evaluated on (condition, image).
using Critic = std::function<Tensor(const Tensor& x, const Tensor& y)>;

/// mean over samples of (||grad_yhat critic(x, yhat)||_2 - 1)^2 at
/// yhat = e * real + (1 - e) * fake with e ~ U(0, 1) drawn per sample.
/// When the critic's parameters are on a tape, the result is differentiable
/// with respect to them.
Tensor gradient_penalty(const Critic& critic, Tape& tape, const Tensor& x, const Tensor& y_real, const Tensor& y_fake,
                        RngStream& rng);
Tensor gradient_penalty(const PatchGAN& d, Tape& tape, const Tensor& x, const Tensor& y_real, const Tensor& y_fake,
                        RngStream& rng);

}  // namespace xmt
