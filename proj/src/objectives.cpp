#include "xmt/objectives.hpp"

namespace xmt {

std::string to_string(GanKind kind) {
  switch (kind) {
    case GanKind::vanilla:
      return "vanilla";
    case GanKind::lsgan:
      return "lsgan";
    case GanKind::wgangp:
      return "wgangp";
  }
  return "unknown";
}

GanKind gan_kind_from_string(const std::string& name) {
  if (name == "vanilla") return GanKind::vanilla;
  if (name == "lsgan") return GanKind::lsgan;
  if (name == "wgangp") return GanKind::wgangp;
  throw ConfigError("unknown GAN objective '" + name + "' (expected vanilla, lsgan or wgangp)");
}

void GanObjective::validate() const {
  if (kind == GanKind::wgangp && !(gp_weight > 0)) throw ConfigError("wgangp requires gp_weight > 0");
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}
}  // namespace

Tensor discriminator_loss(const GanObjective& obj, const Tensor& real_logits, const Tensor& fake_logits) {
  require_same_shape(real_logits, fake_logits, "discriminator_loss");
  switch (obj.kind) {
    case GanKind::vanilla:
      // BCE with target 1 is softplus(-z); with target 0 it is softplus(z).
      return scale(add(mean(softplus(neg(real_logits))), mean(softplus(fake_logits))), 0.5);
    case GanKind::lsgan:
      return scale(add(mean(square(add_scalar(real_logits, -1.0))), mean(square(fake_logits))), 0.5);
    case GanKind::wgangp:
      return sub(mean(fake_logits), mean(real_logits));
  }
  throw Error("discriminator_loss: unknown objective");
}

Tensor generator_adv_loss(const GanObjective& obj, const Tensor& fake_logits) {
  switch (obj.kind) {
    case GanKind::vanilla:
      return mean(softplus(neg(fake_logits)));
    case GanKind::lsgan:
      return mean(square(add_scalar(fake_logits, -1.0)));
    case GanKind::wgangp:
      return neg(mean(fake_logits));
  }
  throw Error("generator_adv_loss: unknown objective");
}

Tensor l1_loss(const Tensor& fake, const Tensor& real) {
  require_same_shape(fake, real, "l1_loss");
  return mean(abs(sub(fake, real)));
}

Tensor generator_total_loss(const Tensor& g_adv, const Tensor& g_l1, double lambda_l1) {
  if (!(lambda_l1 >= 0)) throw DomainError("generator_total_loss: lambda_L1 must be >= 0");
  return add(g_adv, scale(g_l1, lambda_l1));
}

Tensor gradient_penalty(const Critic& critic, Tape& tape, const Tensor& x, const Tensor& y_real, const Tensor& y_fake,
                        RngStream& rng) {
  require_same_shape(y_real, y_fake, "gradient_penalty");
  if (y_real.rank() < 1) throw ShapeError("gradient_penalty: images need a batch axis");
  const std::int64_t n = y_real.dim(0);
  const std::int64_t per = y_real.numel() / n;
  auto real = y_real.values();
  auto fake = y_fake.values();
  std::vector<double> mixed(real.size());
  for (std::int64_t s = 0; s < n; ++s) {
    const double e = rng.uniform();
    for (std::int64_t i = s * per; i < (s + 1) * per; ++i) mixed[i] = e * real[i] + (1.0 - e) * fake[i];
  }
  Tensor y_hat = tape.watch(Tensor(y_real.shape(), std::move(mixed)));
  Tensor score = sum(critic(x.detach(), y_hat));

  Tensor g = score.tracked() ? grad(score, std::span<const Tensor>(&y_hat, 1), /*create_graph=*/true)[0]
                             : Tensor::zeros(y_hat.shape());
  Shape per_sample(y_hat.rank(), 1);
  per_sample[0] = n;
  Tensor norm = sqrt(sum_to(square(g), per_sample));
  return mean(square(add_scalar(norm, -1.0)));
}

Tensor gradient_penalty(const PatchGAN& d, Tape& tape, const Tensor& x, const Tensor& y_real, const Tensor& y_fake,
                        RngStream& rng) {
  return gradient_penalty([&d](const Tensor& cx, const Tensor& cy) { return patchgan_forward(d, cx, cy); }, tape, x,
                          y_real, y_fake, rng);
}

}  // namespace xmt
