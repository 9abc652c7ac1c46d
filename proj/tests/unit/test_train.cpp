#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "lanegen/config.hpp"
#include "lanegen/optimizer.hpp"
#include "lanegen/pipeline.hpp"
#include "lanegen/scene.hpp"
#include "lanegen/train.hpp"

using namespace lanegen;

TEST(Schedule, CosineWithWarmup) {
  EXPECT_DOUBLE_EQ(cosine_lr(1.0, 0, 11), 1.0);
  EXPECT_NEAR(cosine_lr(1.0, 5, 11), 0.5, 1e-15);
  EXPECT_NEAR(cosine_lr(1.0, 10, 11), 0.0, 1e-15);
  EXPECT_EQ(cosine_lr(1.0, 11, 11), 0.0);
  // Warmup of 4 steps: 0.25, 0.5, 0.75, 1.0, then the cosine from step 4.
  EXPECT_DOUBLE_EQ(cosine_lr(2.0, 0, 20, 4), 0.5);
  EXPECT_DOUBLE_EQ(cosine_lr(2.0, 3, 20, 4), 2.0);
  EXPECT_DOUBLE_EQ(cosine_lr(2.0, 4, 20, 4), 2.0);
  EXPECT_NEAR(cosine_lr(2.0, 19, 20, 4), 0.0, 1e-15);
}

TEST(AdamW, FirstStepMovesBySignTimesLr) {
  nn::ParameterStore<double> store;
  auto w = store.add("w", {3}, {1.0, -2.0, 0.5}, 0, false);
  w.grad() = {0.3, -4.0, 1e-3};
  OptimizerConfig cfg;
  cfg.eps = 0.0;
  AdamW<double> opt(store, cfg);
  opt.step(0.1);
  // Bias-corrected first Adam step is lr * g / |g|.
  EXPECT_NEAR(w.value()[0], 0.9, 1e-12);
  EXPECT_NEAR(w.value()[1], -1.9, 1e-12);
  EXPECT_NEAR(w.value()[2], 0.4, 1e-12);
}

TEST(AdamW, DecoupledDecayAndBackboneGroup) {
  nn::ParameterStore<double> store;
  auto head = store.add("head", {1}, {2.0}, 0, true);
  auto back = store.add("back", {1}, {2.0}, 1, true);
  head.grad() = {0.0};
  back.grad() = {0.0};
  OptimizerConfig cfg;
  cfg.weight_decay = 0.5;
  cfg.backbone_lr_scale = 0.1;
  AdamW<double> opt(store, cfg);
  opt.step(0.2);
  EXPECT_NEAR(head.value()[0], 2.0 * (1 - 0.2 * 0.5), 1e-12);
  EXPECT_NEAR(back.value()[0], 2.0 * (1 - 0.02 * 0.5), 1e-12);
}

TEST(QueryPruner, KeepsHighestRunningMean) {
  QueryPruner p(5, 2, 0.5);
  p.observe({0.1, 0.9, 0.2, 0.8, 0.3});
  p.observe({0.1, 0.9, 0.2, 0.1, 0.95});
  // Running means: 0.1, 0.9, 0.2, 0.45, 0.625.
  EXPECT_NEAR(p.running_mean()[4], 0.625, 1e-12);
  p.prune();
  EXPECT_EQ(p.active(), (std::vector<int>{1, 4}));
  EXPECT_TRUE(p.pruned());
}

namespace {

Config tiny_training_config() {
  Config cfg = Config::desk();
  cfg.raster.height = cfg.raster.width = 64;
  cfg.model.d_model = 16;
  cfg.model.heads = 2;
  cfg.model.ffn_dim = 32;
  cfg.model.enc_layers = 1;
  cfg.model.dec_layers = 1;
  cfg.model.backbone_width = 4;
  cfg.model.num_queries = 6;
  cfg.model.o2m_queries = 12;
  cfg.train.batch_size = 2;
  cfg.train.steps = 4;
  cfg.optim.warmup_steps = 1;
  return cfg;
}

}  // namespace

TEST(Train, FixedSeedGivesIdenticalLossCurve) {
  const Config cfg = tiny_training_config();
  const std::vector<Tile> tiles =
      tiles_from_scenes({generate_scene(Layout::Straight, 4, 0.3, 1)}, cfg, SplitTag::Train, 0);
  ASSERT_FALSE(tiles.empty());
  std::string logs[2];
  for (std::string& log : logs) {
    LaneModel<float> model(cfg.resolved_model());
    std::ostringstream metrics;
    train_loop(model, tiles, {}, cfg, &metrics);
    log = metrics.str();
  }
  EXPECT_EQ(logs[0], logs[1]);
  std::istringstream in(logs[0]);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, metrics_header());
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, cfg.train.steps);
}

TEST(Train, LossDecreasesOnTinyProblem) {
  Config cfg = tiny_training_config();
  cfg.train.steps = 40;
  cfg.train.augment = false;
  cfg.optim.lr = 3e-3;
  // Val split: the grid tiles only, without jittered overlap copies.
  const std::vector<Tile> tiles =
      tiles_from_scenes({generate_scene(Layout::Straight, 4, 0.3, 2)}, cfg, SplitTag::Val, 0);
  LaneModel<float> model(cfg.resolved_model());
  const TrainResult r = train_loop(model, tiles, {}, cfg, nullptr);
  ASSERT_EQ(r.history.size(), 40u);
  EXPECT_LT(r.history.back().loss.total, 0.5 * r.history.front().loss.total);
}

TEST(Train, QueryPruningShrinksActiveSet) {
  Config cfg = tiny_training_config();
  cfg.train.query_pruning = true;
  cfg.train.pruned_queries = 3;
  const std::vector<Tile> tiles =
      tiles_from_scenes({generate_scene(Layout::Straight, 4, 0.3, 1)}, cfg, SplitTag::Train, 0);
  LaneModel<float> model(cfg.resolved_model());
  const TrainResult r = train_loop(model, tiles, {}, cfg, nullptr);
  EXPECT_EQ(r.active_queries.size(), 3u);
}
