// lanegen: command-line front end of the trajectory-to-lane pipeline.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lanegen/checkpoint.hpp"
#include "lanegen/config.hpp"
#include "lanegen/error.hpp"
#include "lanegen/parallel.hpp"
#include "lanegen/pipeline.hpp"
#include "lanegen/render.hpp"
#include "lanegen/scene.hpp"
#include "lanegen/scene_io.hpp"
#include "lanegen/tile_io.hpp"
#include "lanegen/train.hpp"

namespace fs = std::filesystem;
using namespace lanegen;

namespace {

/// Options every subcommand understands.
struct Common {
  std::optional<std::uint64_t> seed;
  std::string preset = "desk";
  std::string config_file;
  std::vector<std::string> overrides;
  int threads = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Seed for every random stream of the run");
  cmd->add_option("--preset", c.preset, "Config scale (desk or paper)");
  cmd->add_option("--config", c.config_file, "key=value config file applied over the preset");
  cmd->add_option("--set", c.overrides, "key=value override, applied last (repeatable)");
  cmd->add_option("--threads", c.threads, "Worker threads (default: LANEGEN_THREADS, then all cores)");
}

void apply_overrides(Config& cfg, const Common& c) {
  if (!c.config_file.empty()) cfg.apply_file(c.config_file);
  for (const std::string& kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::BadConfig, "--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (c.seed) {
    cfg.train.seed = *c.seed;
    cfg.tiles.seed = *c.seed;
    cfg.model.init_seed = *c.seed;
  }
  if (c.threads > 0) cfg.threads = c.threads;
  set_default_threads(resolve_threads(cfg.threads));
}

/// Preset, then config file, then --set, then dedicated flags.
Config resolve(const Common& c) {
  Config cfg = Config::preset(c.preset);
  apply_overrides(cfg, c);
  return cfg;
}

bool is_density_preset(const std::string& name) {
  return name == "internal" || name == "nuscenes" || name == "nuplan";
}

SplitTag split_or_default(const std::string& s) { return s.empty() ? SplitTag::Val : parse_split_tag(s); }

std::string numbered(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%05zu%s", stem, i, ext);
  return buf;
}

struct SynthArgs {
  std::string layout;
  std::string out;
  std::optional<double> density;
  std::optional<double> noise;
  int count = 1;
};

int run_synth(const Common& c, const SynthArgs& a) {
  // --preset names either a config scale or a dataset density profile.
  Common cc = c;
  std::string profile = "nuscenes";
  if (is_density_preset(c.preset)) {
    profile = c.preset;
    cc.preset = "desk";
  }
  const Config cfg = resolve(cc);
  const Layout layout = parse_layout(a.layout);
  SceneParams p = density_preset(profile, layout);
  if (a.density) p.density = *a.density;
  if (a.noise) p.noise_sigma = *a.noise;
  const std::uint64_t seed = c.seed.value_or(0);
  if (a.count < 1) throw Error(ErrorCode::InvalidArgument, "--count must be at least 1");

  std::string note = "# synth layout=" + a.layout + " profile=" + profile + " seed=" + std::to_string(seed) +
                     " count=" + std::to_string(a.count) + "\n";
  if (a.count == 1 && fs::path(a.out).extension() == ".lgs") {
    p.seed = seed;
    const fs::path out(a.out);
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    export_scene(generate_scene(p), out);
    std::ofstream(out.string() + ".cfg", std::ios::binary) << note << cfg.to_text();
    return 0;
  }
  fs::create_directories(a.out);
  std::vector<Scene> scenes(static_cast<std::size_t>(a.count));
  parallel_for(scenes.size(), [&](std::size_t i) {
    SceneParams pi = p;
    pi.seed = seed + i;
    scenes[i] = generate_scene(pi);
  });
  for (std::size_t i = 0; i < scenes.size(); ++i) export_scene(scenes[i], fs::path(a.out) / numbered("scene", i, ".lgs"));
  std::ofstream(fs::path(a.out) / "config.cfg", std::ios::binary) << note << cfg.to_text();
  return 0;
}

int run_tiles(const Common& c, const std::string& scenes, const std::string& split, const std::string& out) {
  const Config cfg = resolve(c);
  const SplitTag tag = split.empty() ? SplitTag::Train : parse_split_tag(split);
  std::vector<Scene> loaded;
  for (const fs::path& f : scene_files(scenes)) loaded.push_back(import_scene(f));
  const std::vector<Tile> tiles = tiles_from_scenes(loaded, cfg, tag, cfg.tiles.seed);
  if (tiles.empty()) throw Error(ErrorCode::EmptyInput, "no valid tiles in " + scenes);
  write_tiles(tiles, out);
  cfg.write(fs::path(out) / "config.cfg");
  std::cout << tiles.size() << " tiles written to " << out << "\n";
  return 0;
}

int run_raster(const Common& c, const std::string& input, std::optional<int> size, const std::string& out) {
  Config cfg = resolve(c);
  if (size) cfg.raster.height = cfg.raster.width = *size;
  const std::vector<Tile> tiles = load_tiles(input, cfg, SplitTag::Train, cfg.tiles.seed);
  write_rasters(tiles, cfg.raster, out);
  cfg.write(fs::path(out) / "config.cfg");
  std::cout << tiles.size() << " rasters written to " << out << "\n";
  return 0;
}

int run_train(const Common& c, const std::string& data, const std::string& val, const std::string& out,
              std::optional<int> steps) {
  Config cfg = resolve(c);
  if (steps) cfg.train.steps = *steps;
  const std::vector<Tile> train = load_tiles(data, cfg, SplitTag::Train, cfg.tiles.seed);
  std::vector<Tile> validation;
  if (!val.empty()) validation = load_tiles(val, cfg, SplitTag::Val, cfg.tiles.seed + 1);
  std::cerr << "training on " << train.size() << " tiles";
  if (!validation.empty()) std::cerr << ", validating on " << validation.size();
  std::cerr << "\n";
  const TrainRunSummary s = run_training(train, validation, cfg, out, &std::cerr);
  std::cout << "trained " << s.steps << " steps, final total loss " << s.final_total << "\n";
  return 0;
}

int run_eval(const Common& c, const std::string& checkpoint, const std::string& scenes, const std::string& split,
             const std::string& results, const std::string& render) {
  LoadedCheckpoint ck = load_checkpoint(checkpoint);
  Config cfg = ck.config;
  apply_overrides(cfg, c);
  const std::vector<Tile> tiles = load_tiles(scenes, cfg, split_or_default(split), cfg.tiles.seed + 1);
  const fs::path results_path = results.empty() ? fs::path(checkpoint) / "results.txt" : fs::path(results);
  const APResult r = run_evaluation(checkpoint, tiles, results_path, render, &cfg);
  cfg.write(results_path.string() + ".cfg");
  std::cout << "AP " << r.ap * 100.0 << " (AP_c " << r.ap_c * 100.0 << ", AP_ld " << r.ap_ld * 100.0 << ") on "
            << tiles.size() << " tiles\n";
  return 0;
}

int run_render(const Common& c, const std::string& input, const std::string& checkpoint, const std::string& split,
               const std::string& out, double min_conf) {
  Config cfg;
  std::optional<LoadedCheckpoint> ck;
  if (!checkpoint.empty()) {
    ck = load_checkpoint(checkpoint);
    cfg = ck->config;
    apply_overrides(cfg, c);
  } else {
    cfg = resolve(c);
  }
  const std::vector<Tile> tiles = load_tiles(input, cfg, split_or_default(split), cfg.tiles.seed + 1);
  fs::create_directories(out);
  RenderOptions ro;
  ro.min_confidence = min_conf;
  std::vector<std::vector<PredictedLane>> preds(tiles.size());
  if (ck) {
    parallel_for(tiles.size(), [&](std::size_t i) {
      preds[i] = predict(*ck->model, rasterize(tiles[i], cfg.raster), ck->info.active_queries);
    });
  }
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    write_svg(tiles[i], preds[i], fs::path(out) / numbered("tile", static_cast<std::size_t>(tiles[i].id), ".svg"), ro);
  }
  cfg.write(fs::path(out) / "config.cfg");
  std::cout << tiles.size() << " tiles rendered to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lanegen: lane graphs from crowdsourced trajectories"};
  app.require_subcommand(1);

  Common common;
  SynthArgs synth;
  std::string scenes, split, out, tiles_in, data, val, checkpoint, results, render;
  std::optional<int> size, steps;
  double min_conf = 0.5;

  CLI::App* s = app.add_subcommand("synth", "Generate synthetic scenes");
  add_common(s, common);
  s->add_option("--layout", synth.layout, "straight|curve|merge|intersection|grid")->required();
  s->add_option("--out", synth.out, "Output .lgs file, or a directory when --count > 1")->required();
  s->add_option("--density", synth.density, "Trajectories per entry lane");
  s->add_option("--noise", synth.noise, "Trajectory position noise sigma (m)");
  s->add_option("--count", synth.count, "Number of scenes (seeds seed..seed+count-1)");

  CLI::App* t = app.add_subcommand("tiles", "Cut scenes into tiles and dump them");
  add_common(t, common);
  t->add_option("--scenes,--scene", scenes, "Scene file or directory of .lgs files")->required();
  t->add_option("--split", split, "train|val|test (overlap tiles only for train)");
  t->add_option("--out", out, "Output directory")->required();

  CLI::App* r = app.add_subcommand("raster", "Rasterize tiles to LGRT tensors and PNG previews");
  add_common(r, common);
  r->add_option("--tiles", tiles_in, "Tile dump directory, scene file or scene directory")->required();
  r->add_option("--size", size, "Raster size in pixels");
  r->add_option("--out", out, "Output directory")->required();

  CLI::App* tr = app.add_subcommand("train", "Train a model");
  add_common(tr, common);
  tr->add_option("--data", data, "Training scenes or tile dump directory")->required();
  tr->add_option("--val", val, "Validation scenes or tile dump directory");
  tr->add_option("--steps", steps, "Override train.steps");
  tr->add_option("--out", out, "Run directory")->required();

  CLI::App* e = app.add_subcommand("eval", "Evaluate a checkpoint");
  add_common(e, common);
  e->add_option("--checkpoint", checkpoint, "Run directory with the checkpoint")->required();
  e->add_option("--scenes,--data", scenes, "Evaluation scenes or tile dump directory")->required();
  e->add_option("--split", split, "Tiling split for scenes (default val)");
  e->add_option("--out", results, "Results file (default <checkpoint>/results.txt)");
  e->add_option("--render", render, "Directory for per-tile SVG renderings");

  CLI::App* rd = app.add_subcommand("render", "Render tiles, optionally with predictions, to SVG");
  add_common(rd, common);
  rd->add_option("--tiles,--scenes", tiles_in, "Tile dump directory, scene file or scene directory")->required();
  rd->add_option("--checkpoint", checkpoint, "Run directory; predictions are drawn when given");
  rd->add_option("--split", split, "Tiling split for scenes (default val)");
  rd->add_option("--min-confidence", min_conf, "Hide predictions below this probability");
  rd->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& h) {
    return app.exit(h);
  } catch (const CLI::CallForAllHelp& h) {
    return app.exit(h);
  } catch (const CLI::ParseError& err) {
    std::cerr << "error: Usage: " << err.what() << "\n";
    CLI::App* failed = &app;
    for (CLI::App* sub : app.get_subcommands()) failed = sub;
    std::cerr << failed->help();
    return 2;
  }

  try {
    if (s->parsed()) return run_synth(common, synth);
    if (t->parsed()) return run_tiles(common, scenes, split, out);
    if (r->parsed()) return run_raster(common, tiles_in, size, out);
    if (tr->parsed()) return run_train(common, data, val, out, steps);
    if (e->parsed()) return run_eval(common, checkpoint, scenes, split, results, render);
    if (rd->parsed()) return run_render(common, tiles_in, checkpoint, split, out, min_conf);
  } catch (const Error& err) {
    std::cerr << "error: " << to_string(err.code()) << ": " << err.what() << "\n";
    return 1;
  } catch (const fs::filesystem_error& err) {
    std::cerr << "error: IoError: " << err.what() << "\n";
    return 1;
  } catch (const std::exception& err) {
    std::cerr << "error: Internal: " << err.what() << "\n";
    return 1;
  }
  return 1;
}
