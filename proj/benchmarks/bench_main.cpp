#include <benchmark/benchmark.h>

#include <random>

#include "lanegen/config.hpp"
#include "lanegen/loss.hpp"
#include "lanegen/matching.hpp"
#include "lanegen/model.hpp"
#include "lanegen/raster.hpp"
#include "lanegen/scene.hpp"
#include "lanegen/tiling.hpp"
#include "lanegen/train.hpp"

using namespace lanegen;

namespace {

const std::vector<Tile>& grid_tiles() {
  static const std::vector<Tile> tiles = build_tiles(generate_scene(Layout::Grid, 8, 0.3, 1), TilingConfig{}, {});
  return tiles;
}

void BM_Rasterize(benchmark::State& state) {
  const Tile& tile = grid_tiles().front();
  const int size = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(rasterize(tile, size, size));
}
BENCHMARK(BM_Rasterize)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_Hungarian(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  CostMatrix c(n);
  for (double& v : c.values) v = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(hungarian(c));
}
BENCHMARK(BM_Hungarian)->Arg(20)->Arg(50)->Arg(150);

void BM_ForwardDesk(benchmark::State& state) {
  const Config cfg = Config::desk();
  const LaneModel<float> model(cfg.resolved_model());
  const RasterTensor r = rasterize(grid_tiles().front(), cfg.raster);
  ad::NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(r, ForwardOptions{}));
}
BENCHMARK(BM_ForwardDesk)->Unit(benchmark::kMillisecond);

void BM_TrainStepDesk(benchmark::State& state) {
  const Config cfg = Config::desk();
  const LaneModel<float> model(cfg.resolved_model());
  const Tile& tile = grid_tiles().front();
  const RasterTensor r = rasterize(tile, cfg.raster);
  const auto targets = tile_targets(tile);
  ForwardOptions fo;
  fo.training = true;
  fo.with_o2m = true;
  for (auto _ : state) {
    const ad::Var<float> loss = loss_total(model.forward(r, fo), targets, cfg.loss);
    ad::backward(loss);
  }
}
BENCHMARK(BM_TrainStepDesk)->Unit(benchmark::kMillisecond);

}  // namespace
