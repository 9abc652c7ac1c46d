#include "lanegen/tile_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lanegen/error.hpp"

namespace lanegen {

using nlohmann::json;

namespace {

json points_json(const Polyline& p) {
  json a = json::array();
  for (const Point2& q : p.points()) a.push_back({q.x, q.y});
  return a;
}

Polyline points_from(const json& a) {
  std::vector<Point2> pts;
  for (const json& q : a) pts.push_back({q.at(0).get<double>(), q.at(1).get<double>()});
  return Polyline(std::move(pts));
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string tile_to_string(const Tile& tile) {
  json doc;
  doc["format_version"] = 1;
  doc["id"] = tile.id;
  doc["center"] = {tile.center.x, tile.center.y};
  doc["width"] = tile.width;
  doc["height"] = tile.height;
  doc["gt_inset"] = tile.gt_inset;
  doc["split"] = std::string(to_string(tile.split));
  json trajs = json::array();
  for (const Trajectory& t : tile.trajectories) {
    json pts = json::array();
    for (const TrajectoryPoint& p : t.points) pts.push_back({p.position.x, p.position.y, p.time, p.speed});
    trajs.push_back({{"source", std::string(to_string(t.source))}, {"points", std::move(pts)}});
  }
  doc["trajectories"] = std::move(trajs);
  json lanes = json::array();
  for (const GroundTruthLane& l : tile.gt_lanes) {
    lanes.push_back({{"centerline", points_json(l.centerline)},
                     {"left", points_json(l.left)},
                     {"right", points_json(l.right)}});
  }
  doc["gt_lanes"] = std::move(lanes);
  json masks = json::array();
  for (const Box2& b : tile.patch_masks) masks.push_back({b.min.x, b.min.y, b.max.x, b.max.y});
  doc["patch_masks"] = std::move(masks);
  return doc.dump(1) + "\n";
}

Tile tile_from_string(const std::string& text) {
  try {
    const json doc = json::parse(text);
    Tile t;
    t.id = doc.at("id").get<int>();
    t.center = {doc.at("center").at(0).get<double>(), doc.at("center").at(1).get<double>()};
    t.width = doc.at("width").get<double>();
    t.height = doc.at("height").get<double>();
    t.gt_inset = doc.value("gt_inset", 0.0);
    t.split = parse_split_tag(doc.at("split").get<std::string>());
    for (const json& tj : doc.at("trajectories")) {
      Trajectory traj;
      traj.source = parse_trajectory_source(tj.at("source").get<std::string>());
      for (const json& p : tj.at("points")) {
        traj.points.push_back({{p.at(0).get<double>(), p.at(1).get<double>()},
                               p.at(2).get<double>(),
                               p.at(3).get<double>()});
      }
      t.trajectories.push_back(std::move(traj));
    }
    for (const json& lj : doc.at("gt_lanes")) {
      t.gt_lanes.push_back(
          {points_from(lj.at("centerline")), points_from(lj.at("left")), points_from(lj.at("right"))});
    }
    for (const json& m : doc.value("patch_masks", json::array())) {
      t.patch_masks.push_back({{m.at(0).get<double>(), m.at(1).get<double>()},
                               {m.at(2).get<double>(), m.at(3).get<double>()}});
    }
    return t;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedScene, std::string("bad tile document: ") + e.what());
  }
}

void write_tile(const Tile& tile, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << tile_to_string(tile);
}

Tile read_tile(const std::filesystem::path& path) { return tile_from_string(slurp(path)); }

void write_tiles(const std::vector<Tile>& tiles, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < tiles.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "tile_%05zu.json", i);
    write_tile(tiles[i], dir / name);
  }
}

std::vector<Tile> read_tiles(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("tile_", 0) == 0 && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Tile> tiles;
  for (const auto& f : files) tiles.push_back(read_tile(f));
  return tiles;
}

}  // namespace lanegen
