#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "xmt/rng.hpp"
#include "xmt/tensor.hpp"

namespace xmt {

/// U-Net generator geometry. `depth` down/up levels over a square input of side
/// `target_size`; channels double per level up to a cap of 8 * base_filters.
struct UNetConfig {
  int in_channels = 1;
  int out_channels = 3;
  int base_filters = 64;
  int depth = 8;
  double dropout_p = 0.5;
  int target_size = 256;

  void validate() const;
  friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};

/// Conditional PatchGAN discriminator geometry. `in_channels` counts the
/// condition and the judged image together.
struct PatchGANConfig {
  int in_channels = 4;
  int base_filters = 64;
  int n_layers = 3;

  void validate() const;
  friend bool operator==(const PatchGANConfig&, const PatchGANConfig&) = default;
};

/// Ordered, uniquely named parameter tensors plus a fingerprint of the
/// architecture they belong to.
class ModelParams {
 public:
  ModelParams() = default;

  void add(std::string name, Tensor value);
  const Tensor& at(const std::string& name) const;
  /// Replaces a tensor keeping its slot; shapes must agree.
  void set(std::size_t index, Tensor value);

  std::size_t size() const { return entries_.size(); }
  const std::string& name(std::size_t i) const { return entries_[i].first; }
  const Tensor& tensor(std::size_t i) const { return entries_[i].second; }
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

  std::int64_t parameter_count() const;

  /// Copy whose tensors are leaves on `tape`.
  ModelParams watch(Tape& tape) const;
  ModelParams detach() const;

  std::uint64_t fingerprint() const { return fingerprint_; }
  void set_fingerprint(std::uint64_t f) { fingerprint_ = f; }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
  std::uint64_t fingerprint_ = 0;
};

bool bit_equal(const ModelParams& a, const ModelParams& b);

struct UNet {
  UNetConfig config;
  ModelParams params;
};

struct PatchGAN {
  PatchGANConfig config;
  ModelParams params;
};

/// FNV-1a over a description of the architecture and every parameter's name and shape.
std::uint64_t architecture_fingerprint(const std::string& description, const ModelParams& params);
std::uint64_t fingerprint_of(const UNetConfig& cfg, const ModelParams& params);
std::uint64_t fingerprint_of(const PatchGANConfig& cfg, const ModelParams& params);

UNet build_unet(const UNetConfig& cfg, RngStream& rng);

/// Generator forward pass. Decoder dropout acts as the noise input and is only
/// active when `noise_on` is set.
Tensor unet_forward(const UNet& g, const Tensor& x, RngStream& rng, bool noise_on);

PatchGAN build_patchgan(const PatchGANConfig& cfg, RngStream& rng);

/// Raw logit map judging `y` conditioned on `x`.
Tensor patchgan_forward(const PatchGAN& d, const Tensor& x, const Tensor& y);

struct LayerGeometry {
  int kernel;
  int stride;
};

/// Input window seen by one output unit of a stack of layers.
int receptive_field(std::span<const LayerGeometry> layers);
int receptive_field(const PatchGANConfig& cfg);
std::vector<LayerGeometry> patchgan_layers(const PatchGANConfig& cfg);

/// Logit-map side for a square input of side `input_size`.
int patchgan_output_size(const PatchGANConfig& cfg, int input_size);

}  // namespace xmt
