#include "xmt/training.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "xmt/image.hpp"
#include "xmt/json_io.hpp"
#include "xmt/tiling.hpp"

namespace xmt {

void TrainConfig::validate() const {
  objective.validate();
  if (!(lr > 0)) throw ConfigError("lr must be > 0");
  if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("beta1 must lie in [0, 1)");
  if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("beta2 must lie in [0, 1)");
  if (!(eps > 0)) throw ConfigError("eps must be > 0");
  if (epochs_const < 0 || epochs_decay < 0 || total_epochs() < 1) {
    throw ConfigError("epochs_const and epochs_decay must be >= 0 with at least one epoch in total");
  }
  if (!(lambda_L1 >= 0)) throw ConfigError("lambda_L1 must be >= 0");
  if (load_size < 1 || (load_size & (load_size - 1)) != 0) throw ConfigError("load_size must be a power of two");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (critic_steps < 1) throw ConfigError("critic_steps must be >= 1");
  if (!(dropout_p >= 0 && dropout_p < 1)) throw ConfigError("dropout_p must lie in [0, 1)");
}

// ---------------------------------------------------------------------------
// Adam

AdamState AdamState::zeros_like(const ModelParams& params) {
  AdamState s;
  for (const auto& [name, t] : params.entries()) {
    s.m.push_back(Tensor::zeros(t.shape()));
    s.v.push_back(Tensor::zeros(t.shape()));
  }
  return s;
}

void adam_step(AdamState& state, ModelParams& params, std::span<const Tensor> grads, double lr, double beta1,
               double beta2, double eps) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ConfigError("adam_step: gradient/state count does not match the parameter count");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].empty()) throw ConfigError("adam_step: missing gradient for '" + params.name(i) + "'");
    if (grads[i].shape() != params.tensor(i).shape()) {
      throw ShapeError("adam_step: gradient shape mismatch for '" + params.name(i) + "'");
    }
  }
  const std::int64_t t = state.t + 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  std::vector<Tensor> new_p, new_m, new_v;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params.tensor(i).values();
    auto g = grads[i].values();
    auto m = state.m[i].values();
    auto v = state.v[i].values();
    std::vector<double> pn(p.size()), mn(p.size()), vn(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
      mn[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
      vn[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
      pn[k] = p[k] - lr * (mn[k] / bc1) / (std::sqrt(vn[k] / bc2) + eps);
    }
    const auto& shape = params.tensor(i).shape();
    new_p.emplace_back(shape, std::move(pn));
    new_m.emplace_back(shape, std::move(mn));
    new_v.emplace_back(shape, std::move(vn));
  }
  for (std::size_t i = 0; i < params.size(); ++i) params.set(i, std::move(new_p[i]));
  state.m = std::move(new_m);
  state.v = std::move(new_v);
  state.t = t;
}

double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0 || epoch >= cfg.total_epochs()) {
    throw DomainError("lr_at: epoch " + std::to_string(epoch) + " outside [0, " + std::to_string(cfg.total_epochs()) +
                      ")");
  }
  if (epoch < cfg.epochs_const) return cfg.lr;
  return cfg.lr * static_cast<double>(cfg.total_epochs() - epoch) / static_cast<double>(cfg.epochs_decay);
}

// ---------------------------------------------------------------------------
// Checkpoints

bool bit_equal(const Checkpoint& a, const Checkpoint& b) {
  auto same_adam = [](const AdamState& x, const AdamState& y) {
    if (x.t != y.t || x.m.size() != y.m.size() || x.v.size() != y.v.size()) return false;
    for (std::size_t i = 0; i < x.m.size(); ++i) {
      if (!bit_equal(x.m[i], y.m[i]) || !bit_equal(x.v[i], y.v[i])) return false;
    }
    return true;
  };
  return a.train == b.train && a.generator.config == b.generator.config &&
         a.discriminator.config == b.discriminator.config && bit_equal(a.generator.params, b.generator.params) &&
         bit_equal(a.discriminator.params, b.discriminator.params) && same_adam(a.adam_g, b.adam_g) &&
         same_adam(a.adam_d, b.adam_d) && a.epoch == b.epoch && a.step == b.step && a.rng == b.rng;
}

namespace {

constexpr char kMagic[4] = {'X', 'M', 'T', '1'};
constexpr std::uint32_t kFormatVersion = 1;

class ByteWriter {
 public:
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }
  void bytes(std::string_view s) { buf_.append(s); }
  std::string take() { return std::move(buf_); }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::string& s) : s_(s) {}
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }
  std::string bytes(std::uint64_t n) {
    need(n);
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  bool at_end() const { return pos_ == s_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > s_.size() - pos_) throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  std::uint64_t le(int n) {
    need(static_cast<std::uint64_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s_[pos_ + i])) << (8 * i);
    pos_ += n;
    return v;
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

void write_tensor(ByteWriter& w, const std::string& name, const Tensor& t) {
  w.u32(static_cast<std::uint32_t>(name.size()));
  w.bytes(name);
  w.u32(static_cast<std::uint32_t>(t.rank()));
  for (auto d : t.shape()) w.u64(static_cast<std::uint64_t>(d));
  for (double v : t.values()) w.f64(v);
}

// Rebuilds `skeleton`'s tensors from records named prefix + parameter name.
ModelParams restore_params(const ModelParams& skeleton, const std::string& prefix,
                           std::map<std::string, Tensor>& records) {
  ModelParams out = skeleton;
  for (std::size_t i = 0; i < out.size(); ++i) {
    auto it = records.find(prefix + out.name(i));
    if (it == records.end()) throw FormatError("checkpoint: missing tensor '" + prefix + out.name(i) + "'");
    if (it->second.shape() != out.tensor(i).shape()) {
      throw FormatError("checkpoint: tensor '" + it->first + "' has shape " + shape_string(it->second.shape()) +
                        ", architecture expects " + shape_string(out.tensor(i).shape()));
    }
    out.set(i, it->second);
    records.erase(it);
  }
  return out;
}

std::vector<Tensor> restore_moments(const ModelParams& skeleton, const std::string& prefix,
                                    std::map<std::string, Tensor>& records) {
  std::vector<Tensor> out;
  ModelParams restored = restore_params(skeleton, prefix, records);
  for (const auto& [name, t] : restored.entries()) out.push_back(t);
  return out;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& c) {
  nlohmann::json cfg;
  cfg["train"] = to_json(c.train);
  cfg["unet"] = to_json(c.generator.config);
  cfg["patchgan"] = to_json(c.discriminator.config);
  cfg["epoch"] = c.epoch;
  cfg["step"] = c.step;
  cfg["rng"] = {{"seed", c.rng.seed()}, {"counter", c.rng.counter()}};
  cfg["adam_g_t"] = c.adam_g.t;
  cfg["adam_d_t"] = c.adam_d.t;
  cfg["fingerprints"] = {{"generator", hex64(c.generator.params.fingerprint())},
                         {"discriminator", hex64(c.discriminator.params.fingerprint())}};
  const std::string block = cfg.dump();

  std::vector<std::pair<std::string, Tensor>> records;
  auto add_params = [&records](const std::string& prefix, const ModelParams& p) {
    for (const auto& [name, t] : p.entries()) records.emplace_back(prefix + name, t);
  };
  auto add_moments = [&records](const std::string& prefix, const ModelParams& p, const std::vector<Tensor>& m) {
    for (std::size_t i = 0; i < m.size(); ++i) records.emplace_back(prefix + p.name(i), m[i]);
  };
  add_params("G/", c.generator.params);
  add_params("D/", c.discriminator.params);
  add_moments("adamG.m/", c.generator.params, c.adam_g.m);
  add_moments("adamG.v/", c.generator.params, c.adam_g.v);
  add_moments("adamD.m/", c.discriminator.params, c.adam_d.m);
  add_moments("adamD.v/", c.discriminator.params, c.adam_d.v);

  ByteWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.u32(kFormatVersion);
  w.u64(block.size());
  w.bytes(block);
  w.u64(records.size());
  for (const auto& [name, t] : records) write_tensor(w, name, t);
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  ByteReader r(bytes);
  if (r.bytes(4) != std::string_view(kMagic, 4)) throw FormatError("checkpoint: bad magic (expected XMT1)");
  const auto version = r.u32();
  if (version != kFormatVersion) {
    throw FormatError("checkpoint: unsupported format version " + std::to_string(version));
  }
  const auto block_len = r.u64();
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(r.bytes(block_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed config block: ") + e.what());
  }

  std::map<std::string, Tensor> records;
  const auto count = r.u64();
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.u32();
    std::string name = r.bytes(name_len);
    const auto rank = r.u32();
    if (rank > 8) throw FormatError("checkpoint: tensor '" + name + "' has implausible rank");
    Shape shape;
    std::uint64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      const auto dim = r.u64();
      if (dim == 0 || dim > (1ULL << 40)) throw FormatError("checkpoint: tensor '" + name + "' has invalid dims");
      shape.push_back(static_cast<std::int64_t>(dim));
      n *= dim;
    }
    if (n > (bytes.size() / 8) + 1) throw FormatError("checkpoint truncated in tensor '" + name + "'");
    std::vector<double> values(n);
    for (auto& v : values) v = r.f64();
    if (!records.emplace(name, Tensor(shape, std::move(values))).second) {
      throw FormatError("checkpoint: duplicate tensor '" + name + "'");
    }
  }
  if (!r.at_end()) throw FormatError("checkpoint: trailing bytes after last tensor");

  try {
    Checkpoint c;
    c.train = train_config_from_json(cfg.at("train"));
    const auto gcfg = unet_config_from_json(cfg.at("unet"));
    const auto dcfg = patchgan_config_from_json(cfg.at("patchgan"));
    RngStream scratch(0);
    const UNet g_skeleton = build_unet(gcfg, scratch);
    const PatchGAN d_skeleton = build_patchgan(dcfg, scratch);
    if (cfg.at("fingerprints").at("generator").get<std::string>() != hex64(g_skeleton.params.fingerprint()) ||
        cfg.at("fingerprints").at("discriminator").get<std::string>() != hex64(d_skeleton.params.fingerprint())) {
      throw FormatError("checkpoint: architecture fingerprint mismatch");
    }
    c.generator = UNet{gcfg, restore_params(g_skeleton.params, "G/", records)};
    c.discriminator = PatchGAN{dcfg, restore_params(d_skeleton.params, "D/", records)};
    c.adam_g.m = restore_moments(g_skeleton.params, "adamG.m/", records);
    c.adam_g.v = restore_moments(g_skeleton.params, "adamG.v/", records);
    c.adam_d.m = restore_moments(d_skeleton.params, "adamD.m/", records);
    c.adam_d.v = restore_moments(d_skeleton.params, "adamD.v/", records);
    c.adam_g.t = cfg.at("adam_g_t").get<std::int64_t>();
    c.adam_d.t = cfg.at("adam_d_t").get<std::int64_t>();
    c.epoch = cfg.at("epoch").get<int>();
    c.step = cfg.at("step").get<std::int64_t>();
    c.rng = RngStream(cfg.at("rng").at("seed").get<std::uint64_t>(), cfg.at("rng").at("counter").get<std::uint64_t>());
    if (!records.empty()) throw FormatError("checkpoint: unexpected tensor '" + records.begin()->first + "'");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed config block: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint: invalid configuration: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(c);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const UNetConfig& g, const PatchGANConfig& d) {
  Checkpoint c = load_checkpoint(path);
  RngStream scratch(0);
  const auto expect_g = build_unet(g, scratch).params.fingerprint();
  const auto expect_d = build_patchgan(d, scratch).params.fingerprint();
  if (c.generator.params.fingerprint() != expect_g || c.discriminator.params.fingerprint() != expect_d) {
    throw FormatError("checkpoint '" + path.string() + "' was saved for a different architecture");
  }
  return c;
}

// ---------------------------------------------------------------------------
// Trainer

namespace {

void check_models(const TrainConfig& cfg, const UNetConfig& g, const PatchGANConfig& d) {
  cfg.validate();
  g.validate();
  d.validate();
  if (g.target_size != cfg.load_size) {
    throw ConfigError("generator input size " + std::to_string(g.target_size) + " differs from load_size " +
                      std::to_string(cfg.load_size));
  }
  if (d.in_channels != g.in_channels + g.out_channels) {
    throw ConfigError("discriminator must see condition + image channels (" +
                      std::to_string(g.in_channels + g.out_channels) + ")");
  }
}

std::vector<Tensor> tensors_of(const ModelParams& p) {
  std::vector<Tensor> out;
  out.reserve(p.size());
  for (const auto& [name, t] : p.entries()) out.push_back(t);
  return out;
}

}  // namespace

Trainer::Trainer(const TrainConfig& cfg, UNetConfig g, PatchGANConfig d) {
  g.dropout_p = cfg.dropout_p;
  check_models(cfg, g, d);
  RngStream master(cfg.seed);
  RngStream g_rng = master.derive(1);
  RngStream d_rng = master.derive(2);
  state_.train = cfg;
  state_.generator = build_unet(g, g_rng);
  state_.discriminator = build_patchgan(d, d_rng);
  state_.adam_g = AdamState::zeros_like(state_.generator.params);
  state_.adam_d = AdamState::zeros_like(state_.discriminator.params);
  state_.rng = master.derive(3);
}

Trainer::Trainer(Checkpoint state) : state_(std::move(state)) {
  check_models(state_.train, state_.generator.config, state_.discriminator.config);
}

LossBreakdown Trainer::train_step(std::span<const SamplePair> batch, double lr) {
  if (batch.empty()) throw ConfigError("train_step: empty batch");
  if (!(lr >= 0)) throw DomainError("train_step: learning rate must be >= 0");
  const auto& gc = state_.generator.config;
  const int size = state_.train.load_size;
  std::vector<Tensor> xs, ys;
  for (const auto& s : batch) {
    if (s.x.rank() != 4 || s.x.dim(1) != gc.in_channels || s.x.dim(2) != size || s.x.dim(3) != size ||
        s.y.rank() != 4 || s.y.dim(1) != gc.out_channels || s.y.dim(2) != size || s.y.dim(3) != size ||
        s.x.dim(0) != s.y.dim(0)) {
      throw ShapeError("train_step: sample shapes " + shape_string(s.x.shape()) + " / " + shape_string(s.y.shape()) +
                       " do not match load_size " + std::to_string(size));
    }
    xs.push_back(s.x.detach());
    ys.push_back(s.y.detach());
  }
  const Tensor x = stack_batch(xs);
  const Tensor y = stack_batch(ys);

  const Checkpoint backup = state_;
  try {
    auto& s = state_;
    const auto& cfg = s.train;
    Tape tape;
    const UNet g_live{s.generator.config, s.generator.params.watch(tape)};
    const Tensor fake = unet_forward(g_live, x, s.rng, /*noise_on=*/true);
    const Tensor fake_data = fake.detach();

    LossBreakdown out;
    for (int k = 0; k < cfg.critic_steps; ++k) {
      const PatchGAN d_live{s.discriminator.config, s.discriminator.params.watch(tape)};
      Tensor d_loss =
          discriminator_loss(cfg.objective, patchgan_forward(d_live, x, y), patchgan_forward(d_live, x, fake_data));
      if (cfg.objective.kind == GanKind::wgangp) {
        const Tensor gp = gradient_penalty(d_live, tape, x, y, fake_data, s.rng);
        d_loss = add(d_loss, scale(gp, cfg.objective.gp_weight));
        out.gp = gp.item();
      }
      const auto live = tensors_of(d_live.params);
      const auto grads = grad(d_loss, live);
      adam_step(s.adam_d, s.discriminator.params, grads, lr, cfg.beta1, cfg.beta2, cfg.eps);
      out.d_loss = d_loss.item();
    }

    const Tensor fake_logits = patchgan_forward(s.discriminator, x, fake);
    const Tensor g_adv = generator_adv_loss(cfg.objective, fake_logits);
    const Tensor g_l1 = l1_loss(fake, y);
    const Tensor g_total = generator_total_loss(g_adv, g_l1, cfg.lambda_L1);
    const auto live = tensors_of(g_live.params);
    const auto grads = grad(g_total, live);
    adam_step(s.adam_g, s.generator.params, grads, lr, cfg.beta1, cfg.beta2, cfg.eps);
    out.g_adv = g_adv.item();
    out.g_l1 = g_l1.item();
    out.g_total = g_total.item();
    ++s.step;
    return out;
  } catch (const NonFiniteError& e) {
    state_ = backup;
    throw TrainingError("training step " + std::to_string(backup.step + 1) + " (epoch " +
                        std::to_string(backup.epoch) + ", objective " + to_string(backup.train.objective.kind) +
                        ", lr " + std::to_string(lr) + ") aborted: " + e.what());
  } catch (const DomainError& e) {
    state_ = backup;
    throw TrainingError("training step " + std::to_string(backup.step + 1) + " aborted: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// fit

std::string history_csv(std::span<const HistoryRow> rows) {
  std::ostringstream os;
  os << "epoch,step,d_loss,g_adv,g_l1,gp,g_total,lr\n";
  os << std::setprecision(17);
  for (const auto& r : rows) {
    os << r.epoch << ',' << r.step << ',' << r.d_loss << ',' << r.g_adv << ',' << r.g_l1 << ',' << r.gp << ','
       << r.g_total << ',' << r.lr << '\n';
  }
  return os.str();
}

namespace {

constexpr std::uint64_t kShuffleStream = 0x5348554646ULL;

FitResult run_epochs(Trainer& trainer, std::span<const SamplePair> data, const FitOptions& options) {
  if (data.empty()) throw ConfigError("fit: empty dataset");
  const TrainConfig cfg = trainer.state().train;
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  FitResult result;
  auto budget_left = [&] { return !options.max_steps || trainer.state().step < *options.max_steps; };

  for (int epoch = trainer.state().epoch; epoch < cfg.total_epochs(); ++epoch) {
    if (options.stop_after_epoch && epoch >= *options.stop_after_epoch) break;
    if (!budget_left()) break;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream(cfg.seed).derive(kShuffleStream + static_cast<std::uint64_t>(epoch)).shuffle(std::span(order));
    const double lr = lr_at(epoch, cfg);

    bool completed = true;
    for (std::size_t b = 0; b < order.size(); b += batch) {
      if (!budget_left()) {
        completed = false;
        break;
      }
      std::vector<SamplePair> items;
      for (std::size_t k = b; k < std::min(order.size(), b + batch); ++k) items.push_back(data[order[k]]);
      const auto loss = trainer.train_step(items, lr);
      HistoryRow row{epoch, trainer.state().step, loss.d_loss, loss.g_adv, loss.g_l1, loss.gp, loss.g_total, lr};
      result.history.push_back(row);
      if (options.on_step) options.on_step(row);
    }
    if (!completed) break;
    trainer.state().epoch = epoch + 1;
    if (options.out_dir && options.checkpoint_every > 0 && (epoch + 1) % options.checkpoint_every == 0) {
      std::filesystem::create_directories(*options.out_dir);
      save_checkpoint(trainer.state(), *options.out_dir / ("checkpoint_epoch" + std::to_string(epoch + 1) + ".xmt"));
    }
  }
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir);
    save_checkpoint(trainer.state(), *options.out_dir / "checkpoint_final.xmt");
    std::ofstream csv(*options.out_dir / "history.csv", std::ios::trunc);
    if (!csv) throw IoError("cannot write history.csv in '" + options.out_dir->string() + "'");
    csv << history_csv(result.history);
  }
  result.checkpoint = trainer.state();
  return result;
}

}  // namespace

FitResult fit(std::span<const SamplePair> data, const TrainConfig& cfg, const UNetConfig& g, const PatchGANConfig& d,
              const FitOptions& options) {
  if (data.empty()) throw ConfigError("fit: empty dataset");
  Trainer trainer(cfg, g, d);
  return run_epochs(trainer, data, options);
}

FitResult resume(const Checkpoint& from, std::span<const SamplePair> data, const FitOptions& options) {
  Trainer trainer(from);
  return run_epochs(trainer, data, options);
}

// ---------------------------------------------------------------------------
// Inference

namespace {

FloatImage translate_whole(const UNet& g, const FloatImage& img, RngStream& rng, bool noise_on) {
  const int side = g.config.target_size;
  const FloatImage in = resize_bilinear(img, side, side);
  const Tensor out = unet_forward(g, image_to_tensor(in), rng, noise_on);
  return resize_bilinear(tensor_to_image(out), img.width, img.height);
}

}  // namespace

Tensor translate(const UNet& g, const Tensor& image, std::optional<int> tile_size, bool noise_on,
                 std::uint64_t noise_seed) {
  if (image.rank() != 4 || image.dim(1) != g.config.in_channels) {
    throw ShapeError("translate: expected N x " + std::to_string(g.config.in_channels) + " x H x W input, got " +
                     shape_string(image.shape()));
  }
  const UNet frozen{g.config, g.params.detach()};
  const RngStream base(noise_seed);
  std::vector<Tensor> outputs;
  for (std::int64_t n = 0; n < image.dim(0); ++n) {
    const FloatImage img = tensor_to_image(image.detach(), n);
    if (!tile_size) {
      RngStream rng = base.derive(0);
      outputs.push_back(image_to_tensor(translate_whole(frozen, img, rng, noise_on)));
      continue;
    }
    if (*tile_size < 1 || *tile_size > std::min(img.width, img.height)) {
      throw ShapeError("translate: tile size " + std::to_string(*tile_size) + " must lie in [1, min(H, W)]");
    }
    auto tiling = tile_image(img, *tile_size, PadPolicy::zero);
    std::vector<Tile<double>> translated;
    translated.reserve(tiling.tiles.size());
    for (const auto& t : tiling.tiles) {
      RngStream rng = base.derive(static_cast<std::uint64_t>(t.id));
      translated.push_back({t.id, translate_whole(frozen, t.image, rng, noise_on)});
    }
    outputs.push_back(image_to_tensor(stitch(translated, tiling.manifest)));
  }
  return stack_batch(outputs);
}

Tensor translate(const Checkpoint& c, const Tensor& image, std::optional<int> tile_size, bool noise_on,
                 std::uint64_t noise_seed) {
  return translate(c.generator, image, tile_size, noise_on, noise_seed);
}

double evaluate_l1(const UNet& g, std::span<const SamplePair> data) {
  if (data.empty()) throw ConfigError("evaluate_l1: empty dataset");
  const UNet frozen{g.config, g.params.detach()};
  RngStream unused(0);
  double total = 0.0;
  for (const auto& s : data) total += l1_loss(unet_forward(frozen, s.x.detach(), unused, false), s.y.detach()).item();
  return total / static_cast<double>(data.size());
}

}  // namespace xmt
