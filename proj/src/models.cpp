#include "xmt/models.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

namespace xmt {

namespace {

constexpr double kInitStd = 0.02;
constexpr int kKernel = 4;

int channels_at(int base, int level) {
  const long long c = static_cast<long long>(base) << std::min(level, 30);
  return static_cast<int>(std::min<long long>(c, 8LL * base));
}

Tensor normal_init(Shape shape, RngStream& rng) {
  std::vector<double> v(static_cast<std::size_t>(shape_numel(shape)));
  for (auto& e : v) e = kInitStd * rng.normal();
  return Tensor(std::move(shape), std::move(v));
}

Tensor add_bias(const Tensor& y, const Tensor& bias) {
  return add(y, broadcast_to(reshape(bias, {1, bias.dim(0), 1, 1}), y.shape()));
}

// Levels whose up-block applies dropout: the three just outside the innermost.
bool up_has_dropout(int level, int depth) { return level >= 1 && level <= depth - 2 && level >= depth - 4; }

bool down_has_norm(int level, int depth) { return level >= 1 && level < depth - 1; }

std::string level_name(const char* prefix, int level) { return std::string(prefix) + std::to_string(level); }

}  // namespace

void UNetConfig::validate() const {
  if (in_channels < 1 || out_channels < 1) throw ConfigError("unet: channel counts must be >= 1");
  if (depth < 1) throw ConfigError("unet: depth must be >= 1");
  if (base_filters < 1) throw ConfigError("unet: base_filters must be >= 1");
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) throw ConfigError("unet: dropout_p must lie in [0, 1)");
  if (depth > 30 || target_size < 2 || target_size % (1 << depth) != 0) {
    throw ConfigError("unet: target_size " + std::to_string(target_size) + " must be divisible by 2^depth = 2^" +
                      std::to_string(depth));
  }
}

void PatchGANConfig::validate() const {
  if (in_channels < 1) throw ConfigError("patchgan: in_channels must be >= 1");
  if (base_filters < 1) throw ConfigError("patchgan: base_filters must be >= 1");
  if (n_layers < 1 || n_layers > 30) throw ConfigError("patchgan: n_layers must be >= 1");
}

// ---------------------------------------------------------------------------

void ModelParams::add(std::string name, Tensor value) {
  for (const auto& e : entries_) {
    if (e.first == name) throw ConfigError("duplicate parameter name '" + name + "'");
  }
  entries_.emplace_back(std::move(name), std::move(value));
}

const Tensor& ModelParams::at(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return e.second;
  }
  throw ConfigError("unknown parameter '" + name + "'");
}

void ModelParams::set(std::size_t index, Tensor value) {
  auto& slot = entries_.at(index);
  if (slot.second.shape() != value.shape()) {
    throw ShapeError("parameter '" + slot.first + "' expects shape " + shape_string(slot.second.shape()));
  }
  slot.second = std::move(value);
}

std::int64_t ModelParams::parameter_count() const {
  std::int64_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

ModelParams ModelParams::watch(Tape& tape) const {
  ModelParams out = *this;
  for (auto& e : out.entries_) e.second = tape.watch(e.second);
  return out;
}

ModelParams ModelParams::detach() const {
  ModelParams out = *this;
  for (auto& e : out.entries_) e.second = e.second.detach();
  return out;
}

bool bit_equal(const ModelParams& a, const ModelParams& b) {
  if (a.size() != b.size() || a.fingerprint() != b.fingerprint()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.name(i) != b.name(i) || !bit_equal(a.tensor(i), b.tensor(i))) return false;
  }
  return true;
}

std::uint64_t architecture_fingerprint(const std::string& description, const ModelParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](std::string_view s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  feed(description);
  for (const auto& [name, t] : params.entries()) {
    feed("|");
    feed(name);
    feed(shape_string(t.shape()));
  }
  return h;
}

std::uint64_t fingerprint_of(const UNetConfig& cfg, const ModelParams& params) {
  std::ostringstream os;
  os << "unet:in=" << cfg.in_channels << ";out=" << cfg.out_channels << ";base=" << cfg.base_filters
     << ";depth=" << cfg.depth << ";size=" << cfg.target_size;
  return architecture_fingerprint(os.str(), params);
}

std::uint64_t fingerprint_of(const PatchGANConfig& cfg, const ModelParams& params) {
  std::ostringstream os;
  os << "patchgan:in=" << cfg.in_channels << ";base=" << cfg.base_filters << ";layers=" << cfg.n_layers;
  return architecture_fingerprint(os.str(), params);
}

// ---------------------------------------------------------------------------
// U-Net
//
// down0:      conv(x) + bias
// down i:     conv(leaky(e[i-1])), instance norm (or bias at the innermost level)
// up depth-1: convT(relu(e[depth-1])), norm
// up i:       convT(relu(cat(e[i], u[i+1]))), norm, optional dropout
// up0:        tanh(convT(relu(...)) + bias)

UNet build_unet(const UNetConfig& cfg, RngStream& rng) {
  cfg.validate();
  const int d = cfg.depth;
  ModelParams p;
  for (int i = 0; i < d; ++i) {
    const int cin = i == 0 ? cfg.in_channels : channels_at(cfg.base_filters, i - 1);
    const int cout = channels_at(cfg.base_filters, i);
    const auto name = level_name("down", i);
    p.add(name + ".weight", normal_init({cout, cin, kKernel, kKernel}, rng));
    if (down_has_norm(i, d)) {
      p.add(name + ".norm.gamma", Tensor::full({cout}, 1.0));
      p.add(name + ".norm.beta", Tensor::zeros({cout}));
    } else {
      p.add(name + ".bias", Tensor::zeros({cout}));
    }
  }
  for (int i = d - 1; i >= 0; --i) {
    const int ch = channels_at(cfg.base_filters, i);
    const int cin = i == d - 1 ? ch : 2 * ch;
    const int cout = i == 0 ? cfg.out_channels : channels_at(cfg.base_filters, i - 1);
    const auto name = level_name("up", i);
    p.add(name + ".weight", normal_init({cin, cout, kKernel, kKernel}, rng));
    if (i == 0) {
      p.add(name + ".bias", Tensor::zeros({cout}));
    } else {
      p.add(name + ".norm.gamma", Tensor::full({cout}, 1.0));
      p.add(name + ".norm.beta", Tensor::zeros({cout}));
    }
  }
  p.set_fingerprint(fingerprint_of(cfg, p));
  return UNet{cfg, std::move(p)};
}

Tensor unet_forward(const UNet& g, const Tensor& x, RngStream& rng, bool noise_on) {
  const auto& cfg = g.config;
  const auto& p = g.params;
  if (x.rank() != 4 || x.dim(1) != cfg.in_channels || x.dim(2) != cfg.target_size || x.dim(3) != cfg.target_size) {
    throw ShapeError("unet_forward: expected input N x " + std::to_string(cfg.in_channels) + " x " +
                     std::to_string(cfg.target_size) + " x " + std::to_string(cfg.target_size) + ", got " +
                     shape_string(x.shape()));
  }
  const int d = cfg.depth;
  std::vector<Tensor> enc(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) {
    const auto name = level_name("down", i);
    Tensor in = i == 0 ? x : leaky_relu(enc[i - 1], 0.2);
    Tensor h = conv2d(in, p.at(name + ".weight"), 2, 1);
    if (down_has_norm(i, d)) {
      h = instance_norm(h, p.at(name + ".norm.gamma"), p.at(name + ".norm.beta"));
    } else {
      h = add_bias(h, p.at(name + ".bias"));
    }
    enc[i] = h;
  }
  Tensor u;
  for (int i = d - 1; i >= 0; --i) {
    const auto name = level_name("up", i);
    Tensor in = i == d - 1 ? enc[i] : concat_channels(enc[i], u);
    Tensor h = conv_transpose2d(relu(in), p.at(name + ".weight"), 2, 1);
    if (i == 0) {
      u = tanh(add_bias(h, p.at(name + ".bias")));
    } else {
      h = instance_norm(h, p.at(name + ".norm.gamma"), p.at(name + ".norm.beta"));
      if (up_has_dropout(i, d)) h = dropout(h, cfg.dropout_p, rng, noise_on);
      u = h;
    }
  }
  return u;
}

// ---------------------------------------------------------------------------
// PatchGAN: n_layers stride-2 blocks, one stride-1 block, stride-1 conv to logits.

std::vector<LayerGeometry> patchgan_layers(const PatchGANConfig& cfg) {
  std::vector<LayerGeometry> layers(static_cast<std::size_t>(cfg.n_layers), LayerGeometry{kKernel, 2});
  layers.push_back({kKernel, 1});
  layers.push_back({kKernel, 1});
  return layers;
}

PatchGAN build_patchgan(const PatchGANConfig& cfg, RngStream& rng) {
  cfg.validate();
  ModelParams p;
  int cin = cfg.in_channels;
  for (int i = 0; i <= cfg.n_layers; ++i) {
    const int cout = channels_at(cfg.base_filters, i);
    const auto name = level_name("block", i);
    p.add(name + ".weight", normal_init({cout, cin, kKernel, kKernel}, rng));
    p.add(name + ".bias", Tensor::zeros({cout}));
    cin = cout;
  }
  p.add("head.weight", normal_init({1, cin, kKernel, kKernel}, rng));
  p.add("head.bias", Tensor::zeros({1}));
  p.set_fingerprint(fingerprint_of(cfg, p));
  return PatchGAN{cfg, std::move(p)};
}

Tensor patchgan_forward(const PatchGAN& d, const Tensor& x, const Tensor& y) {
  const auto& cfg = d.config;
  if (x.rank() != 4 || y.rank() != 4 || x.dim(0) != y.dim(0) || x.dim(2) != y.dim(2) || x.dim(3) != y.dim(3)) {
    throw ShapeError("patchgan_forward: condition " + shape_string(x.shape()) + " and image " +
                     shape_string(y.shape()) + " must share N, H, W");
  }
  if (x.dim(1) + y.dim(1) != cfg.in_channels) {
    throw ShapeError("patchgan_forward: expected " + std::to_string(cfg.in_channels) + " input channels in total");
  }
  Tensor h = concat_channels(x, y);
  for (int i = 0; i <= cfg.n_layers; ++i) {
    const auto name = level_name("block", i);
    const int stride = i < cfg.n_layers ? 2 : 1;
    h = leaky_relu(add_bias(conv2d(h, d.params.at(name + ".weight"), stride, 1), d.params.at(name + ".bias")), 0.2);
  }
  return add_bias(conv2d(h, d.params.at("head.weight"), 1, 1), d.params.at("head.bias"));
}

int receptive_field(std::span<const LayerGeometry> layers) {
  int r = 1;
  for (auto it = layers.rbegin(); it != layers.rend(); ++it) r = r * it->stride + (it->kernel - it->stride);
  return r;
}

int receptive_field(const PatchGANConfig& cfg) {
  auto layers = patchgan_layers(cfg);
  return receptive_field(layers);
}

int patchgan_output_size(const PatchGANConfig& cfg, int input_size) {
  int s = input_size;
  for (const auto& l : patchgan_layers(cfg)) {
    if (s + 2 < l.kernel) return 0;
    s = (s + 2 - l.kernel) / l.stride + 1;
  }
  return s;
}

}  // namespace xmt
