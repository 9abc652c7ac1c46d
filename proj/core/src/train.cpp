#include "lanegen/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>

#include "lanegen/error.hpp"
#include "lanegen/optimizer.hpp"
#include "lanegen/parallel.hpp"
#include "lanegen/raster.hpp"

namespace lanegen {

namespace {

std::uint64_t splitmix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Endless stream of tile indices, reshuffled every epoch.
class EpochSampler {
 public:
  EpochSampler(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) { reshuffle(); }

  std::size_t next() {
    if (pos_ == order_.size()) {
      ++epoch_;
      reshuffle();
    }
    return order_[pos_++];
  }

 private:
  void reshuffle() {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::mt19937_64 rng(splitmix(seed_ ^ splitmix(static_cast<std::uint64_t>(epoch_))));
    // Fisher-Yates with our own index draw so the order is the same on every
    // standard library.
    for (std::size_t i = n_; i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(rng() % i);
      std::swap(order_[i - 1], order_[j]);
    }
    pos_ = 0;
  }

  std::size_t n_;
  std::uint64_t seed_;
  int epoch_ = 0;
  std::size_t pos_ = 0;
  std::vector<std::size_t> order_;
};

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

QueryPruner::QueryPruner(int num_queries, int keep, double momentum)
    : mean_(static_cast<std::size_t>(num_queries), 0.0), keep_(keep), momentum_(momentum) {
  active_.resize(static_cast<std::size_t>(num_queries));
  std::iota(active_.begin(), active_.end(), 0);
}

void QueryPruner::observe(const std::vector<double>& probs) {
  if (probs.size() != active_.size()) throw Error(ErrorCode::InvalidArgument, "one probability per active query");
  for (std::size_t i = 0; i < probs.size(); ++i) {
    double& m = mean_[static_cast<std::size_t>(active_[i])];
    m = seen_ ? momentum_ * m + (1.0 - momentum_) * probs[i] : probs[i];
  }
  seen_ = true;
}

void QueryPruner::prune() {
  if (pruned_) return;
  pruned_ = true;
  if (static_cast<int>(active_.size()) <= keep_) return;
  std::vector<int> order = active_;
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return mean_[static_cast<std::size_t>(a)] > mean_[static_cast<std::size_t>(b)];
  });
  order.resize(static_cast<std::size_t>(keep_));
  std::sort(order.begin(), order.end());
  active_ = std::move(order);
}

std::uint64_t sample_seed(std::uint64_t run_seed, int step, int slot) {
  return splitmix(splitmix(run_seed) ^ splitmix((static_cast<std::uint64_t>(step) << 20) + static_cast<std::uint64_t>(slot)));
}

std::vector<std::vector<double>> tile_targets(const Tile& tile) {
  std::vector<std::vector<double>> t;
  for (const GroundTruthLane& l : tile.gt_lanes) t.push_back(lane_target(l));
  return t;
}

Tile training_view(const Tile& tile, std::uint64_t seed, const Config& cfg) {
  if (!cfg.train.augment) return tile;
  try {
    return augment(tile, seed, cfg.augment, cfg.tiling);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::EmptyTile) throw;
    return tile;
  }
}

std::string metrics_header() { return "step\tlr\tloss_class\tloss_point\tloss_dir\tloss_o2o\tloss_o2m\tloss_aux\ttotal"; }

std::string metrics_line(const StepRecord& r) {
  const LossReport& l = r.loss;
  return std::to_string(r.step) + "\t" + fmt_g(r.lr) + "\t" + fmt_g(l.cls) + "\t" + fmt_g(l.point) + "\t" +
         fmt_g(l.dir) + "\t" + fmt_g(l.o2o) + "\t" + fmt_g(l.o2m) + "\t" + fmt_g(l.aux) + "\t" + fmt_g(l.total);
}

TrainResult train_loop(LaneModel<float>& model, const std::vector<Tile>& train, const std::vector<Tile>& val,
                       const Config& cfg, std::ostream* metrics, std::ostream* log) {
  if (train.empty()) throw Error(ErrorCode::EmptyInput, "no training tiles");
  const TrainOptions& to = cfg.train;
  if (to.batch_size < 1 || to.steps < 0) throw Error(ErrorCode::BadConfig, "batch size and steps must be positive");
  for (const Tile& t : train) {
    for (const GroundTruthLane& l : t.gt_lanes) {
      if (static_cast<int>(l.centerline.size()) != model.config().points_per_lane) {
        throw Error(ErrorCode::BadConfig, "tile lanes do not have model.points_per_lane points");
      }
    }
  }
  AdamW<float> opt(model.parameters(), cfg.optim);
  EpochSampler sampler(train.size(), to.seed);
  QueryPruner pruner(model.config().num_queries, to.pruned_queries, to.pruning_momentum);
  const int prune_step = static_cast<int>(std::floor(to.pruning_warmup * to.steps));

  // Without augmentation every sample of a tile is identical, so rasters are
  // computed once, in parallel.
  std::vector<RasterTensor> cached;
  if (!to.augment) {
    cached.resize(train.size());
    parallel_for(train.size(), [&](std::size_t i) { cached[i] = rasterize(train[i], cfg.raster); });
  }

  if (metrics) *metrics << metrics_header() << "\n";
  TrainResult result;
  model.parameters().zero_grad();
  for (int step = 0; step < to.steps; ++step) {
    if (to.query_pruning && step == prune_step) {
      pruner.prune();
      if (log) *log << "step " << step << ": pruned to " << pruner.active().size() << " one-to-one queries\n";
    }
    const double lr = cosine_lr(cfg.optim.lr, step, to.steps, cfg.optim.warmup_steps);
    LossReport mean;
    for (int slot = 0; slot < to.batch_size; ++slot) {
      const std::size_t idx = sampler.next();
      const std::uint64_t seed = sample_seed(to.seed, step, slot);
      RasterTensor raster;
      std::vector<std::vector<double>> targets;
      if (to.augment) {
        const Tile view = training_view(train[idx], seed, cfg);
        raster = rasterize(view, cfg.raster);
        targets = tile_targets(view);
      } else {
        raster = cached[idx];
        targets = tile_targets(train[idx]);
      }
      ForwardOptions fo;
      fo.training = true;
      fo.with_o2m = cfg.loss.o2m != 0.0;
      fo.dropout_seed = seed;
      fo.active_queries = pruner.active();
      const ForwardOutput<float> out = model.forward(raster, fo);
      LossReport rep;
      const ad::Var<float> total = loss_total(out, targets, cfg.loss, &rep);
      if (!std::isfinite(rep.total)) {
        throw Error(ErrorCode::NonFiniteLoss, "non-finite loss at step " + std::to_string(step) + " on tile " +
                                                  std::to_string(train[idx].id) + " (sample seed " +
                                                  std::to_string(seed) + ")");
      }
      ad::backward(total);
      {
        const auto& logits = out.o2o_layers.back().logits.value();
        std::vector<double> probs(pruner.active().size());
        for (std::size_t i = 0; i < probs.size(); ++i) probs[i] = object_probability(logits[2 * i], logits[2 * i + 1]);
        pruner.observe(probs);
      }
      mean.cls += rep.cls;
      mean.point += rep.point;
      mean.dir += rep.dir;
      mean.o2o += rep.o2o;
      mean.o2m += rep.o2m;
      mean.aux += rep.aux;
      mean.total += rep.total;
    }
    const double inv = 1.0 / to.batch_size;
    mean.cls *= inv;
    mean.point *= inv;
    mean.dir *= inv;
    mean.o2o *= inv;
    mean.o2m *= inv;
    mean.aux *= inv;
    mean.total *= inv;
    mean.weights = cfg.loss;
    opt.step(lr, inv);
    model.parameters().zero_grad();
    const StepRecord rec{step, lr, mean};
    if (metrics) *metrics << metrics_line(rec) << "\n";
    result.history.push_back(rec);
    if (to.eval_every > 0 && !val.empty() && ((step + 1) % to.eval_every == 0 || step + 1 == to.steps)) {
      result.last_eval = evaluate_model(model, val, cfg, pruner.active());
      if (log) {
        *log << "step " << step + 1 << ": val AP " << fmt_g(result.last_eval->ap * 100.0) << " (AP_c "
             << fmt_g(result.last_eval->ap_c * 100.0) << ", AP_ld " << fmt_g(result.last_eval->ap_ld * 100.0) << ")\n";
      }
    }
    if (log && ((step + 1) % 50 == 0 || step == 0)) {
      *log << "step " << step + 1 << "/" << to.steps << " lr " << fmt_g(lr) << " total " << fmt_g(mean.total)
           << " point " << fmt_g(mean.point) << " cls " << fmt_g(mean.cls) << "\n";
      log->flush();
    }
  }
  result.active_queries = pruner.active();
  return result;
}

std::vector<PredictedLane> predict(const LaneModel<float>& model, const RasterTensor& raster,
                                   const std::vector<int>& active_queries) {
  ad::NoGradGuard guard;
  ForwardOptions fo;
  fo.active_queries = active_queries;
  const ForwardOutput<float> out = model.forward(raster, fo);
  return to_predicted_lanes(out.o2o_layers.back());
}

APResult evaluate_model(const LaneModel<float>& model, const std::vector<Tile>& tiles, const Config& cfg,
                        const std::vector<int>& active_queries, std::vector<TileBreakdown>* breakdown,
                        std::vector<std::vector<PredictedLane>>* predictions) {
  std::vector<TileEval> evals(tiles.size());
  parallel_for(tiles.size(), [&](std::size_t i) {
    std::vector<PredictedLane> preds = predict(model, rasterize(tiles[i], cfg.raster), active_queries);
    std::vector<PredictedLane> kept;
    for (PredictedLane& p : preds) {
      if (p.confidence >= cfg.eval.min_confidence) kept.push_back(std::move(p));
    }
    evals[i] = {tiles[i].id, std::move(kept), tiles[i].gt_lanes};
  });
  if (predictions) {
    predictions->clear();
    for (const TileEval& e : evals) predictions->push_back(e.predictions);
  }
  return evaluate_tiles(evals, cfg.eval.thresholds, breakdown);
}

}  // namespace lanegen
