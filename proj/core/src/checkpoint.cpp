#include "lanegen/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "lanegen/error.hpp"
#include "lanegen/raster.hpp"

namespace lanegen {

namespace {

std::string shape_string(const std::vector<int>& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(shape[i]);
  }
  return s;
}

std::vector<int> parse_list(const std::string& text, char sep) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

}  // namespace

void save_checkpoint(const LaneModel<float>& model, const Config& config, const CheckpointInfo& info,
                     const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& params = model.parameters().parameters();
  RasterTensor flat(1, 1, static_cast<int>(model.parameters().total_size()), 0.0);
  std::ofstream manifest(dir / "manifest.tsv", std::ios::binary);
  if (!manifest) throw Error(ErrorCode::IoError, "cannot write checkpoint manifest in " + dir.string());
  manifest << "lanegen-checkpoint\t1\n";
  manifest << "step\t" << info.step << "\n";
  manifest << "active_queries\t";
  for (std::size_t i = 0; i < info.active_queries.size(); ++i) manifest << (i ? "," : "") << info.active_queries[i];
  manifest << "\n";
  std::size_t offset = 0;
  for (const auto& p : params) {
    std::copy(p.var.value().begin(), p.var.value().end(), flat.data.begin() + static_cast<std::ptrdiff_t>(offset));
    manifest << "param\t" << p.name << "\t" << shape_string(p.var.shape()) << "\t" << offset << "\t" << p.var.size()
             << "\n";
    offset += p.var.size();
  }
  write_lgrt(flat, dir / "params.lgrt");
  config.write(dir / "config.cfg");
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  for (const char* f : {"manifest.tsv", "params.lgrt", "config.cfg"}) {
    if (!std::filesystem::exists(dir / f)) {
      throw Error(ErrorCode::BadCheckpoint, "checkpoint " + dir.string() + " lacks " + f);
    }
  }
  LoadedCheckpoint ck;
  ck.config.apply_file(dir / "config.cfg");
  ck.model = std::make_unique<LaneModel<float>>(ck.config.resolved_model());
  RasterTensor flat;
  try {
    flat = read_lgrt(dir / "params.lgrt");
  } catch (const Error& e) {
    throw Error(ErrorCode::BadCheckpoint, e.what());
  }
  auto& params = ck.model->parameters().parameters();
  std::ifstream manifest(dir / "manifest.tsv");
  std::string line;
  std::size_t index = 0;
  while (std::getline(manifest, line)) {
    std::stringstream ss(line);
    std::string tag;
    std::getline(ss, tag, '\t');
    if (tag == "step") {
      std::string v;
      std::getline(ss, v, '\t');
      ck.info.step = std::stoi(v);
    } else if (tag == "active_queries") {
      std::string v;
      std::getline(ss, v, '\t');
      ck.info.active_queries = parse_list(v, ',');
    } else if (tag == "param") {
      std::string name, shape, off, count;
      std::getline(ss, name, '\t');
      std::getline(ss, shape, '\t');
      std::getline(ss, off, '\t');
      std::getline(ss, count, '\t');
      if (index >= params.size() || params[index].name != name || shape_string(params[index].var.shape()) != shape) {
        throw Error(ErrorCode::BadCheckpoint, "parameter '" + name + "' does not match the configured model");
      }
      const std::size_t o = std::stoull(off), n = std::stoull(count);
      if (o + n > flat.data.size() || n != params[index].var.size()) {
        throw Error(ErrorCode::BadCheckpoint, "parameter '" + name + "' lies outside params.lgrt");
      }
      std::copy_n(flat.data.begin() + static_cast<std::ptrdiff_t>(o), n, params[index].var.value().begin());
      ++index;
    }
  }
  if (index != params.size()) throw Error(ErrorCode::BadCheckpoint, "checkpoint is missing parameters");
  return ck;
}

}  // namespace lanegen
