#include "lanegen/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "lanegen/checkpoint.hpp"
#include "lanegen/error.hpp"
#include "lanegen/parallel.hpp"
#include "lanegen/raster.hpp"
#include "lanegen/render.hpp"
#include "lanegen/scene_io.hpp"
#include "lanegen/tile_io.hpp"
#include "lanegen/train.hpp"

namespace lanegen {

namespace fs = std::filesystem;

namespace {

std::string numbered(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%05zu%s", stem, i, ext);
  return buf;
}

bool has_tile_dumps(const fs::path& dir) {
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("tile_", 0) == 0 && e.path().extension() == ".json") return true;
  }
  return false;
}

}  // namespace

std::vector<fs::path> scene_files(const fs::path& path) {
  if (!fs::exists(path)) throw Error(ErrorCode::IoError, path.string() + " does not exist");
  if (!fs::is_directory(path)) return {path};
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(path)) {
    if (e.path().extension() == ".lgs") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw Error(ErrorCode::EmptyInput, "no .lgs scenes in " + path.string());
  return files;
}

std::vector<Tile> tiles_from_scenes(const std::vector<Scene>& scenes, const Config& cfg, SplitTag split,
                                    std::uint64_t seed) {
  std::vector<std::vector<Tile>> per(scenes.size());
  parallel_for(scenes.size(), [&](std::size_t i) {
    TileSetOptions opts = cfg.tiles;
    opts.split = split;
    if (split != SplitTag::Train) opts.overlap_per_tile = 0;
    opts.seed = seed + 7919 * i;
    per[i] = build_tiles(scenes[i], cfg.tiling, opts);
  });
  std::vector<Tile> all;
  for (auto& v : per) {
    for (Tile& t : v) {
      t.id = static_cast<int>(all.size());
      all.push_back(std::move(t));
    }
  }
  return all;
}

std::vector<Tile> load_tiles(const fs::path& path, const Config& cfg, SplitTag split, std::uint64_t seed) {
  if (fs::is_directory(path) && has_tile_dumps(path)) return read_tiles(path);
  std::vector<Scene> scenes;
  for (const fs::path& f : scene_files(path)) scenes.push_back(import_scene(f));
  return tiles_from_scenes(scenes, cfg, split, seed);
}

void write_rasters(const std::vector<Tile>& tiles, const RasterConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  parallel_for(tiles.size(), [&](std::size_t i) {
    const RasterTensor t = rasterize(tiles[i], cfg);
    write_lgrt(t, dir / numbered("tile", i, ".lgrt"));
    write_png_preview(t, dir / numbered("tile", i, ".png"));
  });
}

TrainRunSummary run_training(const std::vector<Tile>& train, const std::vector<Tile>& val, const Config& cfg,
                             const fs::path& out, std::ostream* log) {
  fs::create_directories(out);
  cfg.write(out / "config.cfg");
  LaneModel<float> model(cfg.resolved_model());
  std::ofstream metrics(out / "metrics.tsv", std::ios::binary);
  if (!metrics) throw Error(ErrorCode::IoError, "cannot write " + (out / "metrics.tsv").string());
  const TrainResult r = train_loop(model, train, val, cfg, &metrics, log);
  save_checkpoint(model, cfg, {cfg.train.steps, r.active_queries}, out);
  TrainRunSummary s;
  s.steps = static_cast<int>(r.history.size());
  if (!r.history.empty()) {
    s.final_total = r.history.back().loss.total;
    s.final_point = r.history.back().loss.point;
  }
  return s;
}

APResult run_evaluation(const fs::path& checkpoint, const std::vector<Tile>& tiles, const fs::path& results,
                        const fs::path& render_dir, const Config* override_config) {
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  const Config& cfg = override_config ? *override_config : ck.config;
  std::vector<TileBreakdown> breakdown;
  std::vector<std::vector<PredictedLane>> preds;
  const APResult r = evaluate_model(*ck.model, tiles, cfg, ck.info.active_queries, &breakdown, &preds);
  if (!results.empty()) {
    if (results.has_parent_path()) fs::create_directories(results.parent_path());
    write_results(r, breakdown, results);
  }
  if (!render_dir.empty()) {
    fs::create_directories(render_dir);
    for (std::size_t i = 0; i < tiles.size(); ++i) {
      write_svg(tiles[i], preds[i], render_dir / numbered("tile", static_cast<std::size_t>(tiles[i].id), ".svg"));
    }
  }
  return r;
}

}  // namespace lanegen
