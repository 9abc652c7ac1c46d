#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "lanegen/geom.hpp"
#include "lanegen/nn.hpp"
#include "lanegen/raster.hpp"

namespace lanegen {

struct ModelConfig {
  int in_channels = kRasterChannels;
  /// Width of the first backbone stage; stages use 1, 2, 4, 8, 8 times it.
  int backbone_width = 32;
  int d_model = 256;
  int heads = 8;
  int ffn_dim = 512;
  int enc_layers = 6;
  int dec_layers = 6;
  int num_queries = 50;   ///< one-to-one group
  int o2m_queries = 150;  ///< one-to-many group
  int points_per_lane = 20;
  double dropout = 0.1;
  /// Tile extent in meters; centerline outputs are scaled by half of it.
  double extent = 60.0;
  /// Initial object probability of the classification head.
  double prior_prob = 0.1;
  std::uint64_t init_seed = 0;
};

/// Model outputs for one group of queries.
template <typename T>
struct LanePrediction {
  ad::Var<T> centerline;  ///< [N, M, 2] tile-local meters
  ad::Var<T> offset;      ///< [N, M, 2]
  ad::Var<T> logits;      ///< [N, 2]; index 1 = object
  /// [N, M, 6]: centerline, left = c + o, right = c - o.
  ad::Var<T> points;

  int num_lanes() const { return centerline.dim(0); }
  int num_points() const { return centerline.dim(1); }
};

/// Everything one forward pass produces.
template <typename T>
struct ForwardOutput {
  /// One-to-one predictions per decoder layer; the last entry is final.
  std::vector<LanePrediction<T>> o2o_layers;
  /// Final-layer predictions of the one-to-many group (empty when disabled).
  std::vector<LanePrediction<T>> o2m;
  /// Query indices (into the one-to-one embedding table) that produced o2o rows.
  std::vector<int> o2o_queries;
};

struct ForwardOptions {
  bool training = false;
  bool with_o2m = false;
  std::uint64_t dropout_seed = 0;
  /// One-to-one query subset; empty means all.
  std::vector<int> active_queries;
};

template <typename T>
class LaneModel {
 public:
  explicit LaneModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  nn::ParameterStore<T>& parameters() { return params_; }
  const nn::ParameterStore<T>& parameters() const { return params_; }

  /// [6, H, W] -> [C', H/32, W/32]. Throws BadResolution unless H and W are
  /// multiples of 32.
  ad::Var<T> backbone_forward(const ad::Var<T>& x, bool training, std::uint64_t seed) const;
  /// [C', h, w] -> [h*w, d] with the 2-D positional encoding added.
  ad::Var<T> project_and_flatten(const ad::Var<T>& f) const;
  /// Hierarchical queries [N, M, d] for the given instance embeddings.
  ad::Var<T> queries(std::span<const int> instance_rows, bool o2m) const;
  /// Decoder hidden states [N, M, d], one per decoder layer.
  std::vector<ad::Var<T>> transformer_forward(const ad::Var<T>& z, const ad::Var<T>& queries, bool training,
                                              std::uint64_t seed) const;
  /// Encoder only; [S, d] -> [S, d].
  ad::Var<T> encode(const ad::Var<T>& z, bool training, std::uint64_t seed) const;
  /// Decoder against precomputed memory.
  std::vector<ad::Var<T>> decode(const ad::Var<T>& memory, const ad::Var<T>& queries, bool training,
                                 std::uint64_t seed) const;
  LanePrediction<T> heads_forward(const ad::Var<T>& hidden) const;

  ForwardOutput<T> forward(const RasterTensor& raster, const ForwardOptions& opts) const;
  ForwardOutput<T> forward(const ad::Var<T>& input, const ForwardOptions& opts) const;

 private:
  struct EncoderLayer {
    nn::Linear<T> q, k, v, o;
    nn::LayerNorm<T> ln1, ln2;
    nn::Linear<T> ff1, ff2;
  };
  struct Attention {
    nn::Linear<T> q, k, v, o;
    nn::LayerNorm<T> ln;
  };
  struct DecoderLayer {
    Attention inst, point, cross;
    nn::Linear<T> ff1, ff2;
    nn::LayerNorm<T> ln_ff;
  };
  struct Conv {
    ad::Var<T> w, b;
  };

  ad::Var<T> attend(const Attention& a, const ad::Var<T>& x, const ad::Var<T>& q_in, const ad::Var<T>& kv_in,
                    const ad::Var<T>& k_in, bool training, std::uint64_t seed) const;
  ad::Var<T> drop(const ad::Var<T>& x, bool training, std::uint64_t seed) const;

  ModelConfig cfg_;
  nn::ParameterStore<T> params_;
  std::vector<Conv> backbone_;
  nn::Linear<T> proj_;
  std::vector<EncoderLayer> encoder_;
  std::vector<DecoderLayer> decoder_;
  ad::Var<T> instance_embed_;  ///< [num_queries, d]
  ad::Var<T> o2m_embed_;       ///< [o2m_queries, d]
  ad::Var<T> point_embed_;     ///< [M, d]
  nn::Mlp<T> center_head_, offset_head_, class_head_;
};

/// Plain (non-graph) lane prediction used by evaluation and rendering.
struct PredictedLane {
  std::vector<Point2> centerline;
  std::vector<Point2> left;
  std::vector<Point2> right;
  double confidence = 0.0;
};

/// Object probability of each row and the lane geometry, in prediction order.
template <typename T>
std::vector<PredictedLane> to_predicted_lanes(const LanePrediction<T>& p);

/// softmax(logits)[1] for one row.
double object_probability(double l0, double l1);

}  // namespace lanegen
