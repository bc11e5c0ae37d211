#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "xmt/cli.hpp"
#include "xmt/png_io.hpp"
#include "xmt/rng.hpp"
#include "xmt/synthetic.hpp"

using namespace xmt;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("xmt_test_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Raster random_raster(int w, int h, int c, std::uint64_t seed) {
  RngStream rng(seed);
  Raster r(w, h, c);
  for (auto& p : r.pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return r;
}

std::string s(const fs::path& p) { return p.string(); }

}  // namespace

TEST(Cli, UsageErrors) {
  const CliRun unknown = cli({"frobnicate"});
  EXPECT_EQ(unknown.code, 2);
  EXPECT_NE(unknown.err.find("downsample"), std::string::npos);
  EXPECT_EQ(cli({}).code, 2);
  const CliRun missing = cli({"downsample", "--in", "x.png", "--out", "y.png"});
  EXPECT_EQ(missing.code, 2);
  EXPECT_NE(missing.err.find("--factor"), std::string::npos);
  EXPECT_EQ(cli({"--help"}).code, 0);
}

TEST(Cli, RuntimeErrorIsOneLine) {
  const CliRun r = cli({"downsample", "--in", "/nonexistent/in.png", "--out", "/tmp/o.png", "--factor", "2"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(r.err.rfind("error: ", 0), 0u) << r.err;
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, Selftest) {
  const CliRun r = cli({"selftest"});
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("selftest passed"), std::string::npos);
  EXPECT_EQ(r.out.find("[FAIL]"), std::string::npos);
}

TEST(Cli, Downsample) {
  const auto dir = fresh_dir("ds");
  write_png(random_raster(40, 30, 3, 1), dir / "in.png");
  const CliRun r = cli({"downsample", "--in", s(dir / "in.png"), "--out", s(dir / "out.png"), "--factor", "4"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Raster out = read_png(dir / "out.png");
  EXPECT_EQ(out.width, 10);
  EXPECT_EQ(out.height, 8);
  EXPECT_EQ(cli({"downsample", "--in", s(dir / "in.png"), "--out", s(dir / "o2.png"), "--factor", "0.5"}).code, 1);
}

TEST(Cli, TileThenStitchRoundTrip) {
  const auto dir = fresh_dir("tile");
  const Raster img = random_raster(50, 37, 1, 2);
  write_png(img, dir / "slice.png");
  const CliRun t = cli({"tile", "--in", s(dir / "slice.png"), "--size", "16", "--out-dir", s(dir / "tiles"), "--manifest",
                     s(dir / "m.json")});
  ASSERT_EQ(t.code, 0) << t.err;
  EXPECT_TRUE(fs::exists(dir / "tiles" / "slice_r2_c3.png"));
  const CliRun st = cli({"stitch", "--manifest", s(dir / "m.json"), "--tiles-dir", s(dir / "tiles"), "--out",
                      s(dir / "back.png")});
  ASSERT_EQ(st.code, 0) << st.err;
  EXPECT_EQ(read_png(dir / "back.png"), img);

  fs::remove(dir / "tiles" / "slice_r1_c1.png");
  const CliRun missing = cli({"stitch", "--manifest", s(dir / "m.json"), "--tiles-dir", s(dir / "tiles"), "--out",
                           s(dir / "back2.png"), "--stem", "slice"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("tile_id 5"), std::string::npos) << missing.err;

  const CliRun reject = cli({"tile", "--in", s(dir / "slice.png"), "--size", "16", "--pad", "reject", "--out-dir",
                          s(dir / "t2"), "--manifest", s(dir / "m2.json")});
  EXPECT_EQ(reject.code, 1);
}

TEST(Cli, RegisterWritesMatrix) {
  const auto dir = fresh_dir("reg");
  const Raster fixed = textured_phantom(64);
  write_png(fixed, dir / "fixed.png");
  write_png(fixed, dir / "moving.png");
  const CliRun r = cli({"register", "--moving", s(dir / "moving.png"), "--fixed", s(dir / "fixed.png"), "--out-transform",
                     s(dir / "t.json"), "--report", s(dir / "r.json"), "--warped", s(dir / "w.png")});
  ASSERT_EQ(r.code, 0) << r.err;
  std::ifstream in(dir / "t.json");
  const auto j = nlohmann::json::parse(in);
  ASSERT_EQ(j.at("matrix").size(), 2u);
  EXPECT_EQ(j["matrix"][0].size(), 3u);
  EXPECT_NEAR(j["matrix"][0][0].get<double>(), 1.0, 0.02);
  EXPECT_TRUE(fs::exists(dir / "w.png"));
}

TEST(Cli, TrainTranslateEvaluate) {
  const auto dir = fresh_dir("train");
  fs::create_directories(dir / "A");
  fs::create_directories(dir / "B");
  for (int i = 0; i < 3; ++i) {
    const auto p = synthetic_pair(8, static_cast<std::uint64_t>(i), 16);
    write_png(p.mri, dir / "A" / ("p" + std::to_string(i) + ".png"));
    write_png(p.histology, dir / "B" / ("p" + std::to_string(i) + ".png"));
  }
  std::ofstream(dir / "config.json") << R"({"load_size": 16, "unet_depth": 3, "unet_base_filters": 4,
      "d_layers": 2, "d_base_filters": 4, "epochs_const": 1, "epochs_decay": 1, "objective": "lsgan"})";
  const CliRun tr = cli({"train", "--config", s(dir / "config.json"), "--data-A", s(dir / "A"), "--data-B", s(dir / "B"),
                      "--out-dir", s(dir / "run")});
  ASSERT_EQ(tr.code, 0) << tr.err;
  EXPECT_NE(tr.out.find("trained 6 steps"), std::string::npos) << tr.out;
  const fs::path ckpt = dir / "run" / "checkpoint_final.xmt";
  ASSERT_TRUE(fs::exists(ckpt)) << "checkpoint files: " << dir / "run";

  const auto input = synthetic_pair(8, 9, 48).mri;
  write_png(input, dir / "big.png");
  const CliRun tl = cli({"translate", "--checkpoint", s(ckpt), "--in", s(dir / "big.png"), "--out", s(dir / "gen.png"),
                      "--tile-size", "16"});
  ASSERT_EQ(tl.code, 0) << tl.err;
  const Raster gen = read_png(dir / "gen.png");
  EXPECT_EQ(gen.width, 48);
  EXPECT_EQ(gen.height, 48);
  EXPECT_EQ(gen.channels, 3);
  EXPECT_EQ(cli({"translate", "--checkpoint", s(ckpt), "--in", s(dir / "big.png"), "--out", s(dir / "g2.png"),
                 "--tile-size", "64"})
                .code,
            1);

  const CliRun dirs = cli({"translate", "--checkpoint", s(ckpt), "--in", s(dir / "A"), "--out", s(dir / "G")});
  ASSERT_EQ(dirs.code, 0) << dirs.err;
  const CliRun ev = cli({"evaluate", "--generated", s(dir / "G"), "--reference", s(dir / "B"), "--mri", s(dir / "A"),
                      "--out", s(dir / "metrics.json")});
  ASSERT_EQ(ev.code, 0) << ev.err;
  std::ifstream in(dir / "metrics.json");
  const auto j = nlohmann::json::parse(in);
  EXPECT_EQ(j.size(), 2u);

  const CliRun noresume = cli({"train", "--config", s(dir / "config.json"), "--data-A", s(dir / "A"), "--data-B",
                            s(dir / "B"), "--out-dir", s(dir / "run2"), "--resume", s(dir / "missing.xmt")});
  EXPECT_EQ(noresume.code, 1);
}
