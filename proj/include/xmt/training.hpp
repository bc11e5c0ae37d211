#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xmt/models.hpp"
#include "xmt/objectives.hpp"
#include "xmt/rng.hpp"
#include "xmt/tensor.hpp"

namespace xmt {

/// Optimization hyperparameters. Defaults are the standard pix2pix settings:
/// lr 2e-4, beta1 0.5, 100 + 100 epochs, lambda_L1 100, cross-entropy loss.
struct TrainConfig {
  GanObjective objective;
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  int epochs_const = 100;
  int epochs_decay = 100;
  double lambda_L1 = 100.0;
  int load_size = 256;
  int batch_size = 1;
  std::uint64_t seed = 0;
  int critic_steps = 1;
  double dropout_p = 0.5;

  int total_epochs() const { return epochs_const + epochs_decay; }
  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t t = 0;

  static AdamState zeros_like(const ModelParams& params);
};

/// One bias-corrected Adam update of every parameter. `grads` is aligned with
/// the parameter order.
void adam_step(AdamState& state, ModelParams& params, std::span<const Tensor> grads, double lr, double beta1,
               double beta2, double eps);

/// Constant for epochs_const epochs, then linear decay reaching
/// lr / epochs_decay at the last epoch.
double lr_at(int epoch, const TrainConfig& cfg);

/// Registered input / target pair, both N x C x S x S in [-1, 1] with S the load size.
struct SamplePair {
  Tensor x;
  Tensor y;
  std::optional<std::string> tile_id;
};

struct Checkpoint {
  TrainConfig train;
  UNet generator;
  PatchGAN discriminator;
  AdamState adam_g;
  AdamState adam_d;
  int epoch = 0;          // next epoch to run
  std::int64_t step = 0;  // completed train steps
  RngStream rng;
};

bool bit_equal(const Checkpoint& a, const Checkpoint& b);

/// Binary checkpoint: "XMT1", u32 version, u64 length + JSON config block,
/// u64 tensor count, then per tensor: u32 name length, name bytes, u32 rank,
/// u64 dims, little-endian f64 payload.
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Also rejects checkpoints whose architecture differs from the expected configs.
Checkpoint load_checkpoint(const std::filesystem::path& path, const UNetConfig& g, const PatchGANConfig& d);

std::string encode_checkpoint(const Checkpoint& c);
Checkpoint decode_checkpoint(const std::string& bytes);

/// Raised when a training step produces a non-finite value. Model state is left
/// as it was before the step.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Owns a generator/discriminator pair and their optimizer state.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, UNetConfig g, PatchGANConfig d);
  explicit Trainer(Checkpoint state);

  /// critic_steps discriminator updates on detached fakes (with gradient
  /// penalty for wgangp), then one generator update on adv + lambda_L1 * L1.
  LossBreakdown train_step(std::span<const SamplePair> batch, double lr);

  const Checkpoint& state() const { return state_; }
  Checkpoint& state() { return state_; }

 private:
  Checkpoint state_;
};

struct HistoryRow {
  int epoch = 0;
  std::int64_t step = 0;
  double d_loss = 0.0;
  double g_adv = 0.0;
  double g_l1 = 0.0;
  double gp = 0.0;
  double g_total = 0.0;
  double lr = 0.0;

  friend bool operator==(const HistoryRow&, const HistoryRow&) = default;
};

/// CSV with header epoch,step,d_loss,g_adv,g_l1,gp,g_total,lr; values printed
/// with round-trip precision.
std::string history_csv(std::span<const HistoryRow> rows);

struct FitOptions {
  std::optional<std::int64_t> max_steps;
  /// Stop once this many epochs have been completed (used for resumable runs).
  std::optional<int> stop_after_epoch;
  /// Write checkpoint_epoch<k>.xmt every k epochs when out_dir is set.
  int checkpoint_every = 0;
  std::optional<std::filesystem::path> out_dir;
  std::function<void(const HistoryRow&)> on_step;
};

struct FitResult {
  Checkpoint checkpoint;
  std::vector<HistoryRow> history;
};

/// Trains from scratch over `data` with a seeded per-epoch shuffle.
FitResult fit(std::span<const SamplePair> data, const TrainConfig& cfg, const UNetConfig& g, const PatchGANConfig& d,
              const FitOptions& options = {});
/// Continues a run from a checkpoint taken at an epoch boundary.
FitResult resume(const Checkpoint& from, std::span<const SamplePair> data, const FitOptions& options = {});

/// Generator inference on an N x C x H x W image. Without a tile size the image
/// is resampled to the generator's input size and back; with one it is tiled
/// (zero padding), each tile translated, and the result stitched.
Tensor translate(const UNet& g, const Tensor& image, std::optional<int> tile_size = std::nullopt,
                 bool noise_on = false, std::uint64_t noise_seed = 0);
Tensor translate(const Checkpoint& c, const Tensor& image, std::optional<int> tile_size = std::nullopt,
                 bool noise_on = false, std::uint64_t noise_seed = 0);

/// Mean L1 of noise-free generator outputs over pairs.
double evaluate_l1(const UNet& g, std::span<const SamplePair> data);

}  // namespace xmt
