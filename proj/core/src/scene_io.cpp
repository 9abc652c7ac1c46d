#include "lanegen/scene_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "lanegen/error.hpp"

namespace lanegen {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::MalformedScene, "field " + field + ": " + what);
}

const json& require(const json& obj, const char* key, const std::string& path) {
  if (!obj.is_object()) malformed(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) malformed(path + "/" + key, "missing");
  return *it;
}

double number(const json& v, const std::string& path) {
  if (!v.is_number()) malformed(path, "expected a number");
  return v.get<double>();
}

std::int64_t integer(const json& v, const std::string& path) {
  if (!v.is_number_integer()) malformed(path, "expected an integer");
  return v.get<std::int64_t>();
}

const json& array(const json& v, const std::string& path) {
  if (!v.is_array()) malformed(path, "expected an array");
  return v;
}

std::pair<int, int> line_and_column(const std::string& text, std::size_t byte) {
  int line = 1;
  int col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace

std::string scene_to_string(const Scene& scene) {
  json doc;
  doc["format_version"] = kSceneFormatVersion;
  doc["rng_seed"] = scene.rng_seed;
  json nodes = json::array();
  for (const auto& [id, p] : scene.map.nodes()) nodes.push_back({{"id", id}, {"x", p.x}, {"y", p.y}});
  doc["nodes"] = std::move(nodes);
  json edges = json::array();
  for (const MapEdge& e : scene.map.edges()) {
    json pts = json::array();
    const auto g = e.geometry.points();
    for (std::size_t i = 1; i + 1 < g.size(); ++i) pts.push_back({g[i].x, g[i].y});
    json edge = {{"from", e.from}, {"to", e.to}, {"points", std::move(pts)}};
    edge["width"] = e.lane_width ? json(*e.lane_width) : json(nullptr);
    edges.push_back(std::move(edge));
  }
  doc["edges"] = std::move(edges);
  json trajs = json::array();
  for (const Trajectory& t : scene.trajectories) {
    json pts = json::array();
    for (const TrajectoryPoint& p : t.points) pts.push_back({p.position.x, p.position.y, p.time, p.speed});
    trajs.push_back({{"source", std::string(to_string(t.source))}, {"points", std::move(pts)}});
  }
  doc["trajectories"] = std::move(trajs);
  return doc.dump(1) + "\n";
}

Scene scene_from_string(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_and_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw Error(ErrorCode::MalformedScene,
                "syntax error at line " + std::to_string(line) + ", column " + std::to_string(col));
  }
  if (!doc.is_object()) malformed("/", "expected an object");
  const std::int64_t version = integer(require(doc, "format_version", ""), "/format_version");
  if (version != kSceneFormatVersion) {
    malformed("/format_version", "unsupported version " + std::to_string(version));
  }

  Scene scene;
  if (auto it = doc.find("rng_seed"); it != doc.end()) {
    if (!it->is_number_unsigned() && !it->is_number_integer()) malformed("/rng_seed", "expected an integer");
    scene.rng_seed = it->get<std::uint64_t>();
  }

  const json& nodes = array(require(doc, "nodes", ""), "/nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string path = "/nodes/" + std::to_string(i);
    const NodeId id = integer(require(nodes[i], "id", path), path + "/id");
    const double x = number(require(nodes[i], "x", path), path + "/x");
    const double y = number(require(nodes[i], "y", path), path + "/y");
    try {
      scene.map.add_node(id, {x, y});
    } catch (const Error& e) {
      malformed(path, e.what());
    }
  }

  const json& edges = array(require(doc, "edges", ""), "/edges");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const std::string path = "/edges/" + std::to_string(i);
    const json& e = edges[i];
    const NodeId from = integer(require(e, "from", path), path + "/from");
    const NodeId to = integer(require(e, "to", path), path + "/to");
    std::optional<double> width;
    if (auto it = e.find("width"); it != e.end() && !it->is_null()) width = number(*it, path + "/width");
    std::vector<Point2> inner;
    if (auto it = e.find("points"); it != e.end()) {
      const json& pts = array(*it, path + "/points");
      for (std::size_t k = 0; k < pts.size(); ++k) {
        const std::string pp = path + "/points/" + std::to_string(k);
        const json& pt = array(pts[k], pp);
        if (pt.size() != 2) malformed(pp, "expected [x, y]");
        inner.push_back({number(pt[0], pp + "/0"), number(pt[1], pp + "/1")});
      }
    }
    try {
      scene.map.add_edge(from, to, inner, width);
    } catch (const Error& err) {
      malformed(path, err.what());
    }
  }

  if (auto it = doc.find("trajectories"); it != doc.end()) {
    const json& trajs = array(*it, "/trajectories");
    for (std::size_t i = 0; i < trajs.size(); ++i) {
      const std::string path = "/trajectories/" + std::to_string(i);
      const json& src = require(trajs[i], "source", path);
      if (!src.is_string()) malformed(path + "/source", "expected a string");
      Trajectory t;
      try {
        t.source = parse_trajectory_source(src.get<std::string>());
      } catch (const Error& err) {
        malformed(path + "/source", err.what());
      }
      const json& pts = array(require(trajs[i], "points", path), path + "/points");
      for (std::size_t k = 0; k < pts.size(); ++k) {
        const std::string pp = path + "/points/" + std::to_string(k);
        const json& pt = array(pts[k], pp);
        if (pt.size() != 4) malformed(pp, "expected [x, y, t, v]");
        t.points.push_back({{number(pt[0], pp + "/0"), number(pt[1], pp + "/1")},
                            number(pt[2], pp + "/2"),
                            number(pt[3], pp + "/3")});
      }
      try {
        t.validate();
      } catch (const Error& err) {
        malformed(path, err.what());
      }
      scene.trajectories.push_back(std::move(t));
    }
  }
  return scene;
}

void export_scene(const Scene& scene, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << scene_to_string(scene);
  if (!out) throw Error(ErrorCode::IoError, "failed writing " + path.string());
}

Scene import_scene(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return scene_from_string(ss.str());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::MalformedScene) {
      throw Error(ErrorCode::MalformedScene, path.string() + ": " + e.what());
    }
    throw;
  }
}

}  // namespace lanegen
