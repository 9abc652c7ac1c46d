#include "lanegen/model.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "lanegen/error.hpp"

namespace lanegen {

using ad::Var;

namespace {

constexpr int kStageMultipliers[] = {1, 2, 4, 8, 8};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t site) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (site + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

double object_probability(double l0, double l1) { return 1.0 / (1.0 + std::exp(l0 - l1)); }

template <typename T>
LaneModel<T>::LaneModel(const ModelConfig& cfg) : cfg_(cfg) {
  if (cfg.heads <= 0 || cfg.d_model % cfg.heads != 0) {
    throw Error(ErrorCode::BadHeadDim, "d_model " + std::to_string(cfg.d_model) + " is not divisible by " +
                                           std::to_string(cfg.heads) + " heads");
  }
  if (cfg.d_model % 4 != 0) throw Error(ErrorCode::BadHeadDim, "d_model must be a multiple of 4");
  if (cfg.points_per_lane < 2 || cfg.num_queries < 1 || cfg.dec_layers < 1) {
    throw Error(ErrorCode::BadConfig, "model needs >= 2 points per lane, >= 1 query and >= 1 decoder layer");
  }
  std::mt19937_64 rng(cfg.init_seed);
  const int d = cfg.d_model;

  int in = cfg.in_channels;
  for (int s = 0; s < 5; ++s) {
    const int out = cfg.backbone_width * kStageMultipliers[s];
    const std::string name = "backbone.conv" + std::to_string(s);
    Conv c;
    c.w = params_.add(name + ".w", {out, in, 3, 3},
                      nn::he_normal(static_cast<std::size_t>(out) * in * 9, in * 9, rng), 1, true);
    c.b = params_.add(name + ".b", {out}, std::vector<double>(static_cast<std::size_t>(out), 0.0), 1, false);
    backbone_.push_back(c);
    in = out;
  }
  proj_ = nn::Linear<T>::make(params_, "proj", in, d, rng, 0, std::sqrt(1.0 / in));

  auto make_attention = [&](const std::string& name) {
    Attention a;
    a.q = nn::Linear<T>::make(params_, name + ".q", d, d, rng);
    a.k = nn::Linear<T>::make(params_, name + ".k", d, d, rng);
    a.v = nn::Linear<T>::make(params_, name + ".v", d, d, rng);
    a.o = nn::Linear<T>::make(params_, name + ".o", d, d, rng);
    a.ln = nn::LayerNorm<T>::make(params_, name + ".ln", d);
    return a;
  };
  for (int l = 0; l < cfg.enc_layers; ++l) {
    const std::string name = "encoder." + std::to_string(l);
    EncoderLayer e;
    Attention a = make_attention(name + ".self");
    e.q = a.q;
    e.k = a.k;
    e.v = a.v;
    e.o = a.o;
    e.ln1 = a.ln;
    e.ff1 = nn::Linear<T>::make(params_, name + ".ff1", d, cfg.ffn_dim, rng);
    e.ff2 = nn::Linear<T>::make(params_, name + ".ff2", cfg.ffn_dim, d, rng);
    e.ln2 = nn::LayerNorm<T>::make(params_, name + ".ln2", d);
    encoder_.push_back(e);
  }
  for (int l = 0; l < cfg.dec_layers; ++l) {
    const std::string name = "decoder." + std::to_string(l);
    DecoderLayer dl;
    dl.inst = make_attention(name + ".instance");
    dl.point = make_attention(name + ".point");
    dl.cross = make_attention(name + ".cross");
    dl.ff1 = nn::Linear<T>::make(params_, name + ".ff1", d, cfg.ffn_dim, rng);
    dl.ff2 = nn::Linear<T>::make(params_, name + ".ff2", cfg.ffn_dim, d, rng);
    dl.ln_ff = nn::LayerNorm<T>::make(params_, name + ".ln_ff", d);
    decoder_.push_back(dl);
  }
  const std::size_t nq = static_cast<std::size_t>(cfg.num_queries);
  const std::size_t nm = static_cast<std::size_t>(std::max(cfg.o2m_queries, 1));
  instance_embed_ = params_.add("query.instance", {cfg.num_queries, d}, nn::truncated_normal(nq * d, 0.02, rng), 0, false);
  o2m_embed_ = params_.add("query.instance_o2m", {static_cast<int>(nm), d}, nn::truncated_normal(nm * d, 0.02, rng),
                           0, false);
  point_embed_ = params_.add("query.point", {cfg.points_per_lane, d},
                             nn::truncated_normal(static_cast<std::size_t>(cfg.points_per_lane) * d, 0.02, rng), 0, false);
  center_head_ = nn::Mlp<T>::make(params_, "head.center", d, d, 2, rng);
  offset_head_ = nn::Mlp<T>::make(params_, "head.offset", d, d, 2, rng);
  class_head_ = nn::Mlp<T>::make(params_, "head.class", d, d, 2, rng);
  // Start at the prior object probability.
  class_head_.fc2.b.value()[1] = static_cast<T>(-std::log((1.0 - cfg.prior_prob) / cfg.prior_prob));
}

template <typename T>
Var<T> LaneModel<T>::drop(const Var<T>& x, bool training, std::uint64_t seed) const {
  return training ? ad::dropout(x, cfg_.dropout, seed) : x;
}

template <typename T>
Var<T> LaneModel<T>::backbone_forward(const Var<T>& x, bool training, std::uint64_t seed) const {
  (void)training;
  (void)seed;
  if (x.rank() != 3 || x.dim(0) != cfg_.in_channels) {
    throw Error(ErrorCode::InvalidArgument, "backbone expects a [" + std::to_string(cfg_.in_channels) + ", H, W] input");
  }
  if (x.dim(1) % 32 != 0 || x.dim(2) % 32 != 0) {
    throw Error(ErrorCode::BadResolution, "raster size " + std::to_string(x.dim(1)) + "x" + std::to_string(x.dim(2)) +
                                              " is not a multiple of 32");
  }
  Var<T> h = x;
  for (const Conv& c : backbone_) h = ad::relu(ad::conv2d(h, c.w, c.b, 2, 1));
  return h;
}

template <typename T>
Var<T> LaneModel<T>::project_and_flatten(const Var<T>& f) const {
  const int C = f.dim(0), h = f.dim(1), w = f.dim(2);
  // [C, h*w] -> [h*w, C], row-major over the spatial grid.
  Var<T> tokens = ad::reshape(ad::swap_axes01(ad::reshape(f, {C, h * w, 1})), {h * w, C});
  Var<T> z = proj_(tokens);
  const std::vector<double> pe = nn::positional_encoding_2d(h, w, cfg_.d_model);
  return ad::add(z, Var<T>::constant({h * w, cfg_.d_model}, std::vector<T>(pe.begin(), pe.end())));
}

template <typename T>
Var<T> LaneModel<T>::attend(const Attention& a, const Var<T>& x, const Var<T>& q_in, const Var<T>& kv_in,
                            const Var<T>& k_in, bool training, std::uint64_t seed) const {
  Var<T> o = ad::attention(a.q(q_in), a.k(k_in), a.v(kv_in), cfg_.heads);
  return a.ln(ad::add(x, drop(a.o(o), training, seed)));
}

template <typename T>
Var<T> LaneModel<T>::encode(const Var<T>& z, bool training, std::uint64_t seed) const {
  const int S = z.dim(0), d = cfg_.d_model;
  Var<T> x = ad::reshape(z, {1, S, d});
  std::uint64_t site = 0;
  for (const EncoderLayer& e : encoder_) {
    Var<T> o = ad::attention(e.q(x), e.k(x), e.v(x), cfg_.heads);
    x = e.ln1(ad::add(x, drop(e.o(o), training, mix_seed(seed, site++))));
    Var<T> f = e.ff2(drop(ad::relu(e.ff1(x)), training, mix_seed(seed, site++)));
    x = e.ln2(ad::add(x, drop(f, training, mix_seed(seed, site++))));
  }
  return x;
}

template <typename T>
std::vector<Var<T>> LaneModel<T>::decode(const Var<T>& memory, const Var<T>& queries, bool training,
                                         std::uint64_t seed) const {
  const int N = queries.dim(0), M = queries.dim(1), d = queries.dim(2);
  const Var<T> qpos = queries;
  const Var<T> qpos_t = ad::swap_axes01(qpos);
  Var<T> x = queries;
  std::vector<Var<T>> hidden;
  std::uint64_t site = 1000;
  for (const DecoderLayer& l : decoder_) {
    // (a) instance-level: attention across N, points share weights.
    {
      Var<T> xt = ad::swap_axes01(x);
      Var<T> qk = ad::add(xt, qpos_t);
      x = ad::swap_axes01(attend(l.inst, xt, qk, xt, qk, training, mix_seed(seed, site++)));
    }
    // (b) point-level: attention across M, instances share weights.
    {
      Var<T> qk = ad::add(x, qpos);
      x = attend(l.point, x, qk, x, qk, training, mix_seed(seed, site++));
    }
    // (c) cross-attention from all N*M queries to the encoder memory.
    {
      Var<T> flat = ad::reshape(x, {1, N * M, d});
      Var<T> q_in = ad::reshape(ad::add(x, qpos), {1, N * M, d});
      x = ad::reshape(attend(l.cross, flat, q_in, memory, memory, training, mix_seed(seed, site++)), {N, M, d});
    }
    Var<T> f = l.ff2(drop(ad::relu(l.ff1(x)), training, mix_seed(seed, site++)));
    x = l.ln_ff(ad::add(x, drop(f, training, mix_seed(seed, site++))));
    hidden.push_back(x);
  }
  return hidden;
}

template <typename T>
std::vector<Var<T>> LaneModel<T>::transformer_forward(const Var<T>& z, const Var<T>& queries, bool training,
                                                      std::uint64_t seed) const {
  if (queries.rank() != 3 || queries.dim(2) != cfg_.d_model) {
    throw Error(ErrorCode::InvalidArgument, "queries must be [N, M, d_model]");
  }
  return decode(encode(z, training, seed), queries, training, seed);
}

template <typename T>
Var<T> LaneModel<T>::queries(std::span<const int> instance_rows, bool o2m) const {
  const Var<T>& table = o2m ? o2m_embed_ : instance_embed_;
  std::vector<int> rows(instance_rows.begin(), instance_rows.end());
  if (rows.empty()) {
    rows.resize(static_cast<std::size_t>(table.dim(0)));
    std::iota(rows.begin(), rows.end(), 0);
  }
  return ad::outer_add(ad::gather_rows(table, rows), point_embed_);
}

template <typename T>
LanePrediction<T> LaneModel<T>::heads_forward(const Var<T>& hidden) const {
  LanePrediction<T> p;
  p.centerline = ad::scale(center_head_(hidden), static_cast<T>(cfg_.extent / 2.0));
  p.offset = offset_head_(hidden);
  p.logits = class_head_(ad::mean_axis1(hidden));
  p.points = ad::lane_points(p.centerline, p.offset);
  return p;
}

template <typename T>
ForwardOutput<T> LaneModel<T>::forward(const Var<T>& input, const ForwardOptions& opts) const {
  ForwardOutput<T> out;
  const Var<T> f = backbone_forward(input, opts.training, opts.dropout_seed);
  const Var<T> memory = encode(project_and_flatten(f), opts.training, opts.dropout_seed);
  out.o2o_queries = opts.active_queries;
  if (out.o2o_queries.empty()) {
    out.o2o_queries.resize(static_cast<std::size_t>(cfg_.num_queries));
    std::iota(out.o2o_queries.begin(), out.o2o_queries.end(), 0);
  }
  for (const Var<T>& h : decode(memory, queries(out.o2o_queries, false), opts.training, opts.dropout_seed)) {
    out.o2o_layers.push_back(heads_forward(h));
  }
  if (opts.with_o2m && cfg_.o2m_queries > 0) {
    const auto hidden = decode(memory, queries({}, true), opts.training, mix_seed(opts.dropout_seed, 77));
    out.o2m.push_back(heads_forward(hidden.back()));
  }
  return out;
}

template <typename T>
ForwardOutput<T> LaneModel<T>::forward(const RasterTensor& raster, const ForwardOptions& opts) const {
  Var<T> x = Var<T>::constant({raster.channels, raster.height, raster.width},
                              std::vector<T>(raster.data.begin(), raster.data.end()));
  return forward(x, opts);
}

template <typename T>
std::vector<PredictedLane> to_predicted_lanes(const LanePrediction<T>& p) {
  const int N = p.num_lanes(), M = p.num_points();
  std::vector<PredictedLane> out(static_cast<std::size_t>(N));
  const auto& pts = p.points.value();
  for (int i = 0; i < N; ++i) {
    PredictedLane& lane = out[static_cast<std::size_t>(i)];
    for (int m = 0; m < M; ++m) {
      const std::size_t b = (static_cast<std::size_t>(i) * M + m) * 6;
      lane.centerline.push_back({static_cast<double>(pts[b]), static_cast<double>(pts[b + 1])});
      lane.left.push_back({static_cast<double>(pts[b + 2]), static_cast<double>(pts[b + 3])});
      lane.right.push_back({static_cast<double>(pts[b + 4]), static_cast<double>(pts[b + 5])});
    }
    lane.confidence = object_probability(p.logits.value()[2 * i], p.logits.value()[2 * i + 1]);
  }
  return out;
}

template class LaneModel<float>;
template class LaneModel<double>;
template std::vector<PredictedLane> to_predicted_lanes<float>(const LanePrediction<float>&);
template std::vector<PredictedLane> to_predicted_lanes<double>(const LanePrediction<double>&);

}  // namespace lanegen
