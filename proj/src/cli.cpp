#include "xmt/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "xmt/config.hpp"
#include "xmt/dataset.hpp"
#include "xmt/figure.hpp"
#include "xmt/hpo.hpp"
#include "xmt/metrics.hpp"
#include "xmt/png_io.hpp"
#include "xmt/preprocess.hpp"
#include "xmt/selftest.hpp"
#include "xmt/tiling.hpp"
#include "xmt/training.hpp"

namespace xmt {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

std::string one_line(std::string s) {
  for (auto& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::vector<int> parse_levels(const std::string& text) {
  std::vector<int> levels;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      levels.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ConfigError("--levels expects comma-separated integers, got '" + text + "'");
    }
  }
  return levels;
}

struct Cli {
  explicit Cli(std::ostream& o) : out(o) {}
  std::ostream& out;

  // downsample
  std::string ds_in, ds_out;
  double ds_factor = 1.0;

  // register
  std::string reg_moving, reg_fixed, reg_transform, reg_report, reg_warped, reg_similarity = "ncc",
                                                                            reg_levels = "4,2,1";
  int reg_iterations = 600;

  // tile / stitch
  std::string tile_in, tile_pad = "zero", tile_out_dir, tile_manifest, tile_stem;
  int tile_size = 256;
  std::string st_manifest, st_tiles_dir, st_out, st_stem;

  // train
  std::string tr_config, tr_a, tr_b, tr_out_dir, tr_resume;
  std::int64_t tr_max_steps = 0;

  // translate
  std::string tl_checkpoint, tl_in, tl_out, tl_figure, tl_reference;
  int tl_tile_size = 0;
  bool tl_noise = false;
  std::uint64_t tl_seed = 0;

  // evaluate
  std::string ev_generated, ev_reference, ev_mri, ev_out;

  // search
  std::string se_space, se_config, se_a, se_b, se_val_a, se_val_b, se_out;
  int se_budget = 8;
  std::int64_t se_steps = 30;
  std::uint64_t se_seed = 0;
  bool se_fid = false;

  void downsample_cmd() {
    const Raster img = read_png(ds_in);
    const Raster small = downsample(img, ds_factor);
    write_png(small, ds_out);
    out << "downsampled " << img.width << "x" << img.height << " -> " << small.width << "x" << small.height << "\n";
  }

  void register_cmd() {
    RegistrationConfig cfg;
    cfg.levels = parse_levels(reg_levels);
    cfg.similarity = similarity_from_string(reg_similarity);
    cfg.max_iterations = reg_iterations;
    const Raster moving = read_png(reg_moving);
    const Raster fixed = read_png(reg_fixed);
    const RegistrationResult r = register_affine(moving, fixed, cfg);
    const auto& t = r.transform;
    write_text(reg_transform, nlohmann::json{{"matrix", {{t.a, t.b, t.tx}, {t.c, t.d, t.ty}}}}.dump(2) + "\n");
    write_text(reg_report, registration_to_json(r) + "\n");
    if (!reg_warped.empty()) write_png(warp(moving, t, fixed.width, fixed.height), reg_warped);
    out << "registered: dice " << r.dice << ", residual " << r.residual << (r.converged ? "" : " (not converged)")
        << "\n";
  }

  void tile_cmd() {
    const Raster img = read_png(tile_in);
    const std::string stem = tile_stem.empty() ? fs::path(tile_in).stem().string() : tile_stem;
    const auto tiling = tile_image(img, tile_size, pad_policy_from_string(tile_pad));
    fs::create_directories(tile_out_dir);
    for (std::size_t i = 0; i < tiling.tiles.size(); ++i) {
      const auto& e = tiling.manifest.tiles[i];
      write_png(tiling.tiles[i].image, fs::path(tile_out_dir) / tile_file_name(stem, e.row, e.col));
    }
    write_text(tile_manifest, manifest_to_json(tiling.manifest) + "\n");
    out << "wrote " << tiling.tiles.size() << " tiles (" << tiling.manifest.rows() << "x" << tiling.manifest.cols()
        << ")\n";
  }

  std::string infer_stem(const fs::path& dir) {
    std::vector<std::string> stems;
    const std::string suffix = "_r0_c0";
    for (const auto& s : png_stems(dir)) {
      if (s.size() > suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0) {
        stems.push_back(s.substr(0, s.size() - suffix.size()));
      }
    }
    if (stems.size() != 1) throw ConfigError("cannot infer the tile stem in '" + dir.string() + "'; pass --stem");
    return stems.front();
  }

  void stitch_cmd() {
    const TileManifest m = manifest_from_json(read_text(st_manifest));
    const std::string stem = st_stem.empty() ? infer_stem(st_tiles_dir) : st_stem;
    std::vector<Tile<std::uint8_t>> tiles;
    for (const auto& e : m.tiles) {
      const fs::path p = fs::path(st_tiles_dir) / tile_file_name(stem, e.row, e.col);
      if (!fs::exists(p)) throw FormatError("stitch: missing tile_id " + std::to_string(e.id) + " (" + p.string() + ")");
      tiles.push_back({e.id, read_png(p)});
    }
    const Raster img = stitch(tiles, m);
    write_png(img, st_out);
    out << "stitched " << tiles.size() << " tiles into " << img.width << "x" << img.height << "\n";
  }

  void train_cmd() {
    RunConfig run = tr_config.empty() ? parse_config_text("{}") : parse_config(tr_config);
    if (!tr_a.empty()) run.data_A = tr_a;
    if (!tr_b.empty()) run.data_B = tr_b;
    if (!tr_out_dir.empty()) run.out_dir = tr_out_dir;
    if (tr_max_steps > 0) run.max_steps = tr_max_steps;
    if (!run.data_A || !run.data_B || !run.out_dir) {
      throw ConfigError("train needs --data-A, --data-B and --out-dir (or data_A, data_B, out_dir in the config)");
    }
    const auto ds = load_pairs(*run.data_A, *run.data_B, run.unet.in_channels, run.unet.out_channels);
    const auto samples = ds.samples(run.train.load_size);
    FitOptions fo;
    fo.max_steps = run.max_steps;
    fo.checkpoint_every = run.checkpoint_every;
    fo.out_dir = fs::path(*run.out_dir);
    fs::create_directories(*fo.out_dir);
    write_text(*fo.out_dir / "config.json", to_json(run).dump(2) + "\n");
    const FitResult r = tr_resume.empty() ? fit(samples, run.train, run.unet, run.patchgan, fo)
                                          : resume(load_checkpoint(tr_resume, run.unet, run.patchgan), samples, fo);
    out << "trained " << r.checkpoint.step << " steps over " << ds.size() << " pairs";
    if (!r.history.empty()) out << "; last g_l1 " << r.history.back().g_l1;
    out << "\n";
  }

  Raster translate_one(const Checkpoint& c, const Raster& img) {
    const int channels = c.generator.config.in_channels;
    const Tensor x = raster_to_tensor(with_channels(img, channels));
    std::optional<int> tile;
    if (tl_tile_size > 0) tile = tl_tile_size;
    return tensor_to_raster(translate(c, x, tile, tl_noise, tl_seed));
  }

  void translate_cmd() {
    const Checkpoint c = load_checkpoint(tl_checkpoint);
    if (fs::is_directory(tl_in)) {
      fs::create_directories(tl_out);
      const auto stems = png_stems(tl_in);
      for (const auto& s : stems) {
        write_png(translate_one(c, read_png(fs::path(tl_in) / (s + ".png"))), fs::path(tl_out) / (s + ".png"));
      }
      out << "translated " << stems.size() << " images\n";
      return;
    }
    const Raster input = read_png(tl_in);
    const Raster result = translate_one(c, input);
    write_png(result, tl_out);
    if (!tl_figure.empty()) {
      if (tl_reference.empty()) throw ConfigError("--figure needs --reference");
      emit_comparison_figure(input, result, read_png(tl_reference), tl_figure);
    }
    out << "translated " << input.width << "x" << input.height << "\n";
  }

  void evaluate_cmd() {
    const FeatureExtractor fx = FeatureExtractor::create();
    std::vector<MetricReport> reports;
    const auto hist = load_pairs(ev_generated, ev_reference, 3, 3);
    reports.push_back(evaluate_pairs(hist.a, hist.b, "generated-vs-real-histology", fx));
    if (!ev_mri.empty()) {
      const auto mri = load_pairs(ev_generated, ev_mri, 3, 1);
      reports.push_back(evaluate_pairs(mri.a, mri.b, "generated-vs-real-MRI", fx));
    }
    write_text(ev_out, report_to_json(reports) + "\n");
    for (const auto& r : reports) {
      out << r.comparison << ": proxy-FID " << r.fid << ", proxy-LPIPS " << r.lpips_mean << ", L1 " << r.l1_mean
          << " (n=" << r.n_images << ")\n";
    }
  }

  void search_cmd() {
    const RunConfig run = se_config.empty() ? parse_config_text("{}") : parse_config(se_config);
    const nlohmann::json space_json = read_json(se_space);
    SearchSpace space = search_space_from_json(space_json);
    if (!space_json.contains("base")) space.base = run.train;
    if (space.base.load_size != run.unet.target_size) {
      throw ConfigError("search: base load_size differs from the model config's load_size");
    }
    const auto ds = load_pairs(se_a, se_b, run.unet.in_channels, run.unet.out_channels);
    auto all = ds.samples(run.train.load_size);
    std::vector<SamplePair> train, val;
    if (!se_val_a.empty() || !se_val_b.empty()) {
      train = all;
      val = load_pairs(se_val_a, se_val_b, run.unet.in_channels, run.unet.out_channels).samples(run.train.load_size);
    } else if (all.size() < 2) {
      train = val = all;
    } else {
      // hold out every fourth pair
      for (std::size_t i = 0; i < all.size(); ++i) (i % 4 == 3 ? val : train).push_back(all[i]);
    }
    SearchOptions so;
    so.budget = se_budget;
    so.master_seed = se_seed;
    so.steps_per_trial = se_steps;
    so.proxy_fid = se_fid;
    so.generator = run.unet;
    so.discriminator = run.patchgan;
    so.out_dir = fs::path(se_out) / "trials";
    const Leaderboard board = run_search(space, train, val, so);
    write_text(fs::path(se_out) / "leaderboard.json", leaderboard_report(board).dump(2) + "\n");
    write_text(fs::path(se_out) / "leaderboard.txt", leaderboard_table(board));
    nlohmann::json timings = nlohmann::json::array();
    for (const auto& r : board.ranked) timings.push_back({{"trial", r.index}, {"wall_seconds", r.wall_seconds}});
    for (const auto& r : board.failed) timings.push_back({{"trial", r.index}, {"wall_seconds", r.wall_seconds}});
    write_text(fs::path(se_out) / "timings.json", timings.dump(2) + "\n");
    out << leaderboard_table(board);
  }

  bool selftest_cmd() {
    bool ok = true;
    for (const auto& c : run_selftest()) {
      out << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << " (" << c.detail << ")\n";
      ok = ok && c.pass;
    }
    out << (ok ? "selftest passed\n" : "selftest FAILED\n");
    return ok;
  }
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Cli cli(out);
  CLI::App app{"xmt: paired MRI-to-histology translation toolkit", "xmt"};
  app.require_subcommand(1);

  auto* ds = app.add_subcommand("downsample", "Area-average downsampling of a PNG");
  ds->add_option("--in", cli.ds_in, "input PNG")->required();
  ds->add_option("--out", cli.ds_out, "output PNG")->required();
  ds->add_option("--factor", cli.ds_factor, "downsampling factor (>= 1)")->required();

  auto* reg = app.add_subcommand("register", "Affine registration of a moving image onto a fixed image");
  reg->add_option("--moving", cli.reg_moving)->required();
  reg->add_option("--fixed", cli.reg_fixed)->required();
  reg->add_option("--out-transform", cli.reg_transform, "JSON with the 2x3 matrix")->required();
  reg->add_option("--report", cli.reg_report, "JSON with matrix, residual and Dice")->required();
  reg->add_option("--warped", cli.reg_warped, "optional PNG of the aligned moving image");
  reg->add_option("--similarity", cli.reg_similarity, "ncc or mse")->capture_default_str();
  reg->add_option("--levels", cli.reg_levels, "pyramid factors, e.g. 4,2,1")->capture_default_str();
  reg->add_option("--iterations", cli.reg_iterations, "Nelder-Mead iterations per level")->capture_default_str();

  auto* tile = app.add_subcommand("tile", "Cut a PNG into square tiles with a manifest");
  tile->add_option("--in", cli.tile_in)->required();
  tile->add_option("--size", cli.tile_size)->required();
  tile->add_option("--pad", cli.tile_pad, "reject or zero")->capture_default_str();
  tile->add_option("--out-dir", cli.tile_out_dir)->required();
  tile->add_option("--manifest", cli.tile_manifest)->required();
  tile->add_option("--stem", cli.tile_stem, "tile file stem (default: input file stem)");

  auto* st = app.add_subcommand("stitch", "Reassemble tiles from a manifest");
  st->add_option("--manifest", cli.st_manifest)->required();
  st->add_option("--tiles-dir", cli.st_tiles_dir)->required();
  st->add_option("--out", cli.st_out)->required();
  st->add_option("--stem", cli.st_stem, "tile file stem (default: inferred from the directory)");

  auto* tr = app.add_subcommand("train", "Train a generator/discriminator pair");
  tr->add_option("--config", cli.tr_config, "JSON run config");
  tr->add_option("--data-A", cli.tr_a, "directory of input (MRI) PNGs");
  tr->add_option("--data-B", cli.tr_b, "directory of target (histology) PNGs");
  tr->add_option("--out-dir", cli.tr_out_dir);
  tr->add_option("--resume", cli.tr_resume, "checkpoint to continue from");
  tr->add_option("--max-steps", cli.tr_max_steps, "stop after this many steps");

  auto* tl = app.add_subcommand("translate", "Run a trained generator on a PNG or a directory of PNGs");
  tl->add_option("--checkpoint", cli.tl_checkpoint)->required();
  tl->add_option("--in", cli.tl_in)->required();
  tl->add_option("--out", cli.tl_out)->required();
  tl->add_option("--tile-size", cli.tl_tile_size, "translate tile by tile and stitch");
  tl->add_flag("--noise", cli.tl_noise, "keep dropout active at inference");
  tl->add_option("--seed", cli.tl_seed, "noise seed");
  tl->add_option("--figure", cli.tl_figure, "comparison figure PNG (needs --reference)");
  tl->add_option("--reference", cli.tl_reference, "ground-truth PNG for the figure");

  auto* ev = app.add_subcommand("evaluate", "proxy-FID, proxy-LPIPS and L1 between image sets");
  ev->add_option("--generated", cli.ev_generated)->required();
  ev->add_option("--reference", cli.ev_reference)->required();
  ev->add_option("--mri", cli.ev_mri, "optional MRI directory for a second comparison");
  ev->add_option("--out", cli.ev_out)->required();

  auto* se = app.add_subcommand("search", "Randomized hyperparameter search");
  se->add_option("--space", cli.se_space, "search space JSON")->required();
  se->add_option("--budget", cli.se_budget)->capture_default_str();
  se->add_option("--config", cli.se_config, "run config for model sizes and fixed fields");
  se->add_option("--data-A", cli.se_a)->required();
  se->add_option("--data-B", cli.se_b)->required();
  se->add_option("--val-A", cli.se_val_a);
  se->add_option("--val-B", cli.se_val_b);
  se->add_option("--steps", cli.se_steps, "training steps per trial")->capture_default_str();
  se->add_option("--seed", cli.se_seed, "master seed")->capture_default_str();
  se->add_flag("--proxy-fid", cli.se_fid, "also score trials by proxy-FID");
  se->add_option("--out", cli.se_out)->required();

  auto* selftest = app.add_subcommand("selftest", "Gradient and Frechet self checks");

  std::vector<const char*> argv;
  argv.push_back("xmt");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << one_line(e.what()) << "\n" << app.help();
    return 2;
  }

  try {
    if (ds->parsed()) cli.downsample_cmd();
    if (reg->parsed()) cli.register_cmd();
    if (tile->parsed()) cli.tile_cmd();
    if (st->parsed()) cli.stitch_cmd();
    if (tr->parsed()) cli.train_cmd();
    if (tl->parsed()) cli.translate_cmd();
    if (ev->parsed()) cli.evaluate_cmd();
    if (se->parsed()) cli.search_cmd();
    if (selftest->parsed() && !cli.selftest_cmd()) return 1;
  } catch (const std::exception& e) {
    err << "error: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 0;
}

int dispatch(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace xmt
