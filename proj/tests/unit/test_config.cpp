#include <gtest/gtest.h>

#include <filesystem>
#include <functional>
#include <optional>

#include "lanegen/config.hpp"
#include "lanegen/error.hpp"

using namespace lanegen;

namespace {

std::optional<ErrorCode> code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace

TEST(Config, PaperPresetDefaults) {
  const Config c = Config::paper();
  EXPECT_EQ(c.raster.height, 512);
  EXPECT_EQ(c.raster.width, 512);
  EXPECT_EQ(c.model.d_model, 256);
  EXPECT_EQ(c.model.heads, 8);
  EXPECT_EQ(c.model.enc_layers, 6);
  EXPECT_EQ(c.model.dec_layers, 6);
  EXPECT_EQ(c.model.num_queries, 50);
  EXPECT_EQ(c.tiling.points_per_lane, 20);
  EXPECT_DOUBLE_EQ(c.optim.lr, 1e-4);
  EXPECT_DOUBLE_EQ(c.optim.backbone_lr_scale, 0.1);
  EXPECT_DOUBLE_EQ(c.optim.weight_decay, 1e-4);
  EXPECT_EQ(c.train.batch_size, 32);
  EXPECT_EQ(c.eval.thresholds, (std::vector<double>{0.5, 1.0, 1.5}));
}

TEST(Config, DeskPresetIsSmall) {
  const Config c = Config::preset("desk");
  EXPECT_EQ(c.raster.height, 128);
  EXPECT_EQ(c.model.num_queries, 20);
  EXPECT_LE(c.train.steps, 2000);
  EXPECT_EQ(code_of([] { Config::preset("huge"); }), ErrorCode::BadConfig);
}

TEST(Config, SetGetAndErrors) {
  Config c = Config::desk();
  c.set("train.steps", "17");
  EXPECT_EQ(c.train.steps, 17);
  EXPECT_EQ(c.get("train.steps"), "17");
  c.set("train.augment", "false");
  EXPECT_FALSE(c.train.augment);
  c.set("tile.seed", "99");
  EXPECT_EQ(c.tiles.seed, 99u);
  c.set("eval.thresholds", "0.25, 2");
  EXPECT_EQ(c.eval.thresholds, (std::vector<double>{0.25, 2.0}));
  EXPECT_EQ(code_of([&] { c.set("no.such.key", "1"); }), ErrorCode::BadConfig);
  EXPECT_EQ(code_of([&] { c.set("train.steps", "many"); }), ErrorCode::BadConfig);
  EXPECT_EQ(code_of([&] { c.apply_text("train.steps 3\n"); }), ErrorCode::BadConfig);
}

TEST(Config, TextRoundTrip) {
  Config a = Config::desk();
  a.optim.lr = 3.0000000000000001e-4;
  a.model.init_seed = 12345678901234ull;
  a.eval.thresholds = {0.1, 0.7};
  Config b = Config::paper();
  b.apply_text("# comment\n\n" + a.to_text());
  EXPECT_EQ(a.to_text(), b.to_text());
  EXPECT_EQ(b.optim.lr, a.optim.lr);
  EXPECT_EQ(b.model.init_seed, a.model.init_seed);
  // Every key appears exactly once.
  const std::string text = a.to_text();
  for (const std::string& k : a.keys()) {
    const std::string needle = k + "=";
    const auto first = text.find(needle);
    ASSERT_NE(first, std::string::npos) << k;
  }
}

TEST(Config, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "lanegen_config_test.cfg";
  Config a = Config::desk();
  a.train.steps = 5;
  a.write(path);
  Config b = Config::paper();
  b.apply_file(path);
  EXPECT_EQ(b.to_text(), a.to_text());
  std::filesystem::remove(path);
  EXPECT_EQ(code_of([&] { b.apply_file(path); }), ErrorCode::IoError);
}

TEST(Config, ResolvedModelFollowsTiling) {
  Config c = Config::desk();
  c.tiling.points_per_lane = 12;
  c.tiling.extent = 40;
  const ModelConfig m = c.resolved_model();
  EXPECT_EQ(m.points_per_lane, 12);
  EXPECT_DOUBLE_EQ(m.extent, 40.0);
}
