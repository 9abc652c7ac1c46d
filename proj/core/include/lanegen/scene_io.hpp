#pragma once

#include <filesystem>
#include <string>

#include "lanegen/scene.hpp"

namespace lanegen {

/// Version written into every scene and map document.
inline constexpr int kSceneFormatVersion = 1;

/// Scene documents are JSON:
///
///   {
///     "format_version": 1,
///     "rng_seed": 7,
///     "nodes": [{"id": 1, "x": 0.0, "y": 0.0}, ...],
///     "edges": [{"from": 1, "to": 2, "width": 3.5, "points": [[x, y], ...]}, ...],
///     "trajectories": [{"source": "ego", "points": [[x, y, t, v], ...]}, ...]
///   }
///
/// `width` may be null or absent (no divider information), `points` holds
/// the intermediate geometry between the two nodes, and a map document is
/// a scene document without `trajectories`.
std::string scene_to_string(const Scene& scene);
/// Throws MalformedScene with the line (syntax errors) or the field path
/// (schema errors) of the first problem.
Scene scene_from_string(const std::string& text);

void export_scene(const Scene& scene, const std::filesystem::path& path);
Scene import_scene(const std::filesystem::path& path);

}  // namespace lanegen
