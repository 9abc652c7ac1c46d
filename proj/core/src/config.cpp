#include "lanegen/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "lanegen/error.hpp"

namespace lanegen {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

template <typename N>
N parse_number(const std::string& key, const std::string& text) {
  N v{};
  const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
    throw Error(ErrorCode::BadConfig, "bad value '" + text + "' for " + key);
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw Error(ErrorCode::BadConfig, "bad boolean '" + text + "' for " + key);
}

struct Field {
  std::string key;
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

template <typename N>
Field number(std::string key, N* p) {
  return {key, [key, p](const std::string& v) { *p = parse_number<N>(key, v); },
          [p] {
            if constexpr (std::is_floating_point_v<N>) return format_double(*p);
            else return std::to_string(*p);
          }};
}

Field boolean(std::string key, bool* p) {
  return {key, [key, p](const std::string& v) { *p = parse_bool(key, v); }, [p] { return std::string(*p ? "true" : "false"); }};
}

/// Builds the key table bound to one Config. The order is the order of the
/// resolved listing.
std::vector<Field> fields(Config& c) {
  std::vector<Field> f;
  f.push_back(number("tile.extent", &c.tiling.extent));
  f.push_back(number("tile.points_per_lane", &c.tiling.points_per_lane));
  f.push_back(number("tile.tau_align", &c.tiling.tau_align));
  f.push_back(number("tile.delta_prune", &c.tiling.delta_prune));
  f.push_back(number("tile.default_lane_width", &c.tiling.default_lane_width));
  f.push_back(number("tile.min_lane_length", &c.tiling.min_lane_length));
  f.push_back(number("tile.gt_margin", &c.tiling.gt_margin));
  f.push_back(number("tile.support_spacing", &c.tiling.support_spacing));
  f.push_back(number("tile.overlap_per_tile", &c.tiles.overlap_per_tile));
  f.push_back(number("tile.jitter_radius", &c.tiles.jitter_radius));
  f.push_back(number("tile.seed", &c.tiles.seed));
  f.push_back({"raster.size",
               [&c](const std::string& v) {
                 c.raster.height = c.raster.width = parse_number<int>("raster.size", v);
               },
               [&c] { return std::to_string(c.raster.height); }});
  f.push_back(number("raster.v_max", &c.raster.v_max));
  f.push_back(number("raster.intensity_gain", &c.raster.intensity_gain));
  f.push_back(number("raster.cancellation_ratio", &c.raster.cancellation_ratio));
  f.push_back(number("model.backbone_width", &c.model.backbone_width));
  f.push_back(number("model.d_model", &c.model.d_model));
  f.push_back(number("model.heads", &c.model.heads));
  f.push_back(number("model.ffn_dim", &c.model.ffn_dim));
  f.push_back(number("model.enc_layers", &c.model.enc_layers));
  f.push_back(number("model.dec_layers", &c.model.dec_layers));
  f.push_back(number("model.num_queries", &c.model.num_queries));
  f.push_back(number("model.o2m_queries", &c.model.o2m_queries));
  f.push_back(number("model.dropout", &c.model.dropout));
  f.push_back(number("model.prior_prob", &c.model.prior_prob));
  f.push_back(number("model.init_seed", &c.model.init_seed));
  f.push_back(number("loss.cls", &c.loss.cls));
  f.push_back(number("loss.point", &c.loss.point));
  f.push_back(number("loss.dir", &c.loss.dir));
  f.push_back(number("loss.o2o", &c.loss.o2o));
  f.push_back(number("loss.o2m", &c.loss.o2m));
  f.push_back(number("loss.aux", &c.loss.aux));
  f.push_back(number("loss.focal_alpha", &c.loss.alpha));
  f.push_back(number("loss.focal_gamma", &c.loss.gamma));
  f.push_back(number("loss.o2m_replication", &c.loss.o2m_replication));
  f.push_back(number("optim.lr", &c.optim.lr));
  f.push_back(number("optim.backbone_lr_scale", &c.optim.backbone_lr_scale));
  f.push_back(number("optim.weight_decay", &c.optim.weight_decay));
  f.push_back(number("optim.beta1", &c.optim.beta1));
  f.push_back(number("optim.beta2", &c.optim.beta2));
  f.push_back(number("optim.eps", &c.optim.eps));
  f.push_back(number("optim.warmup_steps", &c.optim.warmup_steps));
  f.push_back(number("optim.grad_clip", &c.optim.grad_clip));
  f.push_back(number("augment.probability", &c.augment.probability));
  f.push_back(number("augment.noise_sigma", &c.augment.noise_sigma));
  f.push_back(number("augment.shift_range", &c.augment.shift_range));
  f.push_back(number("augment.group_drop_probability", &c.augment.group_drop_probability));
  f.push_back(number("augment.max_patches", &c.augment.max_patches));
  f.push_back(number("augment.patch_min", &c.augment.patch_min));
  f.push_back(number("augment.patch_max", &c.augment.patch_max));
  f.push_back(number("train.batch_size", &c.train.batch_size));
  f.push_back(number("train.steps", &c.train.steps));
  f.push_back(boolean("train.augment", &c.train.augment));
  f.push_back(boolean("train.query_pruning", &c.train.query_pruning));
  f.push_back(number("train.pruning_warmup", &c.train.pruning_warmup));
  f.push_back(number("train.pruned_queries", &c.train.pruned_queries));
  f.push_back(number("train.pruning_momentum", &c.train.pruning_momentum));
  f.push_back(number("train.eval_every", &c.train.eval_every));
  f.push_back(number("train.seed", &c.train.seed));
  f.push_back({"eval.thresholds",
               [&c](const std::string& v) {
                 std::vector<double> t;
                 std::stringstream ss(v);
                 std::string item;
                 while (std::getline(ss, item, ',')) t.push_back(parse_number<double>("eval.thresholds", trim(item)));
                 if (t.empty()) throw Error(ErrorCode::BadConfig, "eval.thresholds needs at least one value");
                 c.eval.thresholds = std::move(t);
               },
               [&c] {
                 std::string s;
                 for (std::size_t i = 0; i < c.eval.thresholds.size(); ++i) {
                   if (i) s += ",";
                   s += format_double(c.eval.thresholds[i]);
                 }
                 return s;
               }});
  f.push_back(number("eval.min_confidence", &c.eval.min_confidence));
  f.push_back(number("threads", &c.threads));
  return f;
}

}  // namespace

Config Config::paper() { return Config{}; }

Config Config::desk() {
  Config c;
  c.raster.height = c.raster.width = 128;
  c.model.d_model = 64;
  c.model.enc_layers = 2;
  c.model.dec_layers = 2;
  c.model.backbone_width = 16;
  c.model.ffn_dim = 128;
  c.model.num_queries = 20;
  c.model.o2m_queries = 60;
  c.model.dropout = 0.0;
  c.train.batch_size = 8;
  c.train.steps = 2000;
  c.train.pruned_queries = 10;
  c.optim.lr = 1e-3;
  c.optim.warmup_steps = 50;
  c.optim.grad_clip = 1.0;
  return c;
}

Config Config::preset(std::string_view name) {
  if (name == "paper") return paper();
  if (name == "desk") return desk();
  throw Error(ErrorCode::BadConfig, "unknown preset '" + std::string(name) + "' (expected desk or paper)");
}

void Config::set(const std::string& key, const std::string& value) {
  for (Field& f : fields(*this)) {
    if (f.key == key) {
      f.set(value);
      return;
    }
  }
  throw Error(ErrorCode::BadConfig, "unknown config key '" + key + "'");
}

std::string Config::get(const std::string& key) const {
  for (Field& f : fields(const_cast<Config&>(*this))) {
    if (f.key == key) return f.get();
  }
  throw Error(ErrorCode::BadConfig, "unknown config key '" + key + "'");
}

std::vector<std::string> Config::keys() const {
  std::vector<std::string> out;
  for (Field& f : fields(const_cast<Config&>(*this))) out.push_back(f.key);
  return out;
}

void Config::apply_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::BadConfig, "line " + std::to_string(lineno) + ": expected key=value");
    }
    try {
      set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const Error& e) {
      throw Error(ErrorCode::BadConfig, "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

void Config::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_text(ss.str());
}

std::string Config::to_text() const {
  std::string out;
  for (Field& f : fields(const_cast<Config&>(*this))) out += f.key + "=" + f.get() + "\n";
  return out;
}

void Config::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << to_text();
}

ModelConfig Config::resolved_model() const {
  ModelConfig m = model;
  m.points_per_lane = tiling.points_per_lane;
  m.extent = tiling.extent;
  return m;
}

}  // namespace lanegen
