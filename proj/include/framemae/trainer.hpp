#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "framemae/checkpoint.hpp"
#include "framemae/datastore.hpp"
#include "framemae/errors.hpp"
#include "framemae/model.hpp"
#include "framemae/optim.hpp"
#include "framemae/rng.hpp"
#include "framemae/sampler.hpp"

namespace framemae {

struct TrainConfig {
  enum class Mode { kEpochs, kSamples };

  Mode mode = Mode::kEpochs;
  double total_epochs = 200;
  std::size_t total_samples = 0;
  std::size_t batch_size = 128;
  double base_lr = 4e-4;
  double warmup_epochs = 40;
  double min_lr = 1e-6;
  double weight_decay = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double mask_ratio = 0.5;
  StridePolicy stride = StridePolicy::uniform(1, 8);
  std::size_t clips_per_video = 1;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  // Unsupervised fine-tuning on a summarization corpus: a fixed clip budget,
  // 10 clips per video per pass and a 5-epoch warmup.
  static TrainConfig fine_tune(std::size_t samples, double base_lr = 4e-4) {
    TrainConfig c;
    c.mode = Mode::kSamples;
    c.total_samples = samples;
    c.base_lr = base_lr;
    c.warmup_epochs = 5;
    c.clips_per_video = 10;
    return c;
  }

  void validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (!(mask_ratio > 0 && mask_ratio < 1)) throw ConfigError("mask_ratio must lie in (0,1)");
    if (clips_per_video == 0) throw ConfigError("clips_per_video must be positive");
    if (mode == Mode::kSamples && total_samples == 0) throw ConfigError("samples mode needs total_samples > 0");
    if (mode == Mode::kEpochs && !(total_epochs > 0)) throw ConfigError("total_epochs must be positive");
    if (threads == 0) throw ConfigError("threads must be positive");
    stride.validate();
  }
};

inline json train_config_to_json(const TrainConfig& c) {
  return json{{"mode", c.mode == TrainConfig::Mode::kEpochs ? "epochs" : "samples"},
              {"total_epochs", c.total_epochs},
              {"total_samples", c.total_samples},
              {"batch_size", c.batch_size},
              {"base_lr", c.base_lr},
              {"warmup_epochs", c.warmup_epochs},
              {"min_lr", c.min_lr},
              {"weight_decay", c.weight_decay},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"adam_eps", c.adam_eps},
              {"mask_ratio", c.mask_ratio},
              {"stride", c.stride.to_string()},
              {"clips_per_video", c.clips_per_video},
              {"seed", c.seed},
              {"threads", c.threads}};
}

inline TrainConfig train_config_from_json(const json& j) {
  const std::set<std::string> known{"mode",   "total_epochs", "total_samples", "batch_size",
                                    "base_lr", "warmup_epochs", "min_lr", "weight_decay",
                                    "beta1",  "beta2", "adam_eps", "mask_ratio", "stride",
                                    "clips_per_video", "seed", "threads"};
  for (const auto& [k, _] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown train config key '" + k + "'");
  }
  TrainConfig c;
  try {
    const auto mode = j.value("mode", std::string("epochs"));
    if (mode == "epochs") {
      c.mode = TrainConfig::Mode::kEpochs;
    } else if (mode == "samples") {
      c.mode = TrainConfig::Mode::kSamples;
    } else {
      throw ConfigError("unknown train mode '" + mode + "'");
    }
    c.total_epochs = j.value("total_epochs", c.total_epochs);
    c.total_samples = j.value("total_samples", c.total_samples);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.base_lr = j.value("base_lr", c.base_lr);
    c.warmup_epochs = j.value("warmup_epochs", c.warmup_epochs);
    c.min_lr = j.value("min_lr", c.min_lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.mask_ratio = j.value("mask_ratio", c.mask_ratio);
    if (j.contains("stride")) c.stride = StridePolicy::parse(j.at("stride").get<std::string>());
    c.clips_per_video = j.value("clips_per_video", c.clips_per_video);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Sample accounting. Samples are numbered 0..total-1 in a single stream;
// epoch e covers samples [e·P, (e+1)·P) with P = videos × clips_per_video,
// and visits every video exactly clips_per_video times in a seeded order.

class SamplePlan {
 public:
  SamplePlan(std::size_t num_videos, const TrainConfig& cfg)
      : num_videos_(num_videos), cfg_(cfg) {
    cfg.validate();
    if (num_videos == 0) throw UsageError("training corpus is empty");
    per_epoch_ = num_videos * cfg.clips_per_video;
    if (cfg.mode == TrainConfig::Mode::kEpochs) {
      total_ = static_cast<std::size_t>(std::llround(cfg.total_epochs * static_cast<double>(per_epoch_)));
    } else {
      total_ = cfg.total_samples;
    }
    if (total_ == 0) throw ConfigError("training plan has no samples");
    schedule_.base_lr = cfg.base_lr;
    schedule_.batch_size = cfg.batch_size;
    schedule_.warmup_epochs = cfg.warmup_epochs;
    schedule_.total_epochs = static_cast<double>(total_) / static_cast<double>(per_epoch_);
    schedule_.min_lr = cfg.min_lr;
    schedule_.validate();
  }

  std::size_t samples_per_epoch() const { return per_epoch_; }
  std::size_t total_samples() const { return total_; }
  std::size_t iterations() const { return (total_ + cfg_.batch_size - 1) / cfg_.batch_size; }
  const LrSchedule& schedule() const { return schedule_; }

  std::size_t batch_begin(std::size_t iteration) const { return iteration * cfg_.batch_size; }
  std::size_t batch_end(std::size_t iteration) const {
    return std::min(total_, (iteration + 1) * cfg_.batch_size);
  }

  double epoch_at(std::size_t iteration) const {
    return static_cast<double>(batch_begin(iteration)) / static_cast<double>(per_epoch_);
  }
  double lr_at(std::size_t iteration) const { return schedule_.lr_at(epoch_at(iteration)); }

  // Index into the corpus of the video used by sample s. Caches one epoch
  // of order, so calls must not run concurrently.
  std::size_t video_of(std::size_t sample) const {
    const std::size_t epoch = sample / per_epoch_;
    if (epoch != cached_epoch_) {
      order_.resize(per_epoch_);
      for (std::size_t i = 0; i < per_epoch_; ++i) order_[i] = i % num_videos_;
      Rng rng(cfg_.seed, "order", epoch);
      for (std::size_t i = per_epoch_; i-- > 1;) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)));
        std::swap(order_[i], order_[j]);
      }
      cached_epoch_ = epoch;
    }
    return order_[sample % per_epoch_];
  }

 private:
  std::size_t num_videos_;
  TrainConfig cfg_;
  std::size_t per_epoch_ = 0;
  std::size_t total_ = 0;
  LrSchedule schedule_;
  mutable std::size_t cached_epoch_ = static_cast<std::size_t>(-1);
  mutable std::vector<std::size_t> order_;
};

struct TrainSample {
  std::size_t video = 0;  // index into the corpus
  ClipSpec clip;
  MaskPlan mask;
};

// The clip and mask for sample s depend only on (seed, s).
inline TrainSample draw_sample(const SamplePlan& plan, const std::vector<FeatureSequence>& corpus,
                               const TrainConfig& cfg, std::size_t clip_len, std::size_t s) {
  const auto index = plan.video_of(s);
  Rng clip_rng(cfg.seed, "clip", s);
  Rng mask_rng(cfg.seed, "mask", s);
  return {index, sample_clip(corpus[index], cfg.stride, clip_len, clip_rng),
          random_mask(clip_len, cfg.mask_ratio, mask_rng)};
}

// Mean masked-MSE over a fixed set of `count` clips drawn from the "eval"
// streams; the same (corpus, seed) always yields the same clips and masks.
inline double evaluation_loss(const Autoencoder& model, const std::vector<FeatureSequence>& corpus,
                              const StridePolicy& stride, double mask_ratio, std::size_t count,
                              std::uint64_t seed) {
  if (corpus.empty() || count == 0) throw UsageError("evaluation_loss needs clips");
  const auto L = model.config().clip_len;
  double total = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& video = corpus[i % corpus.size()];
    Rng clip_rng(seed, "eval.clip", i);
    Rng mask_rng(seed, "eval.mask", i);
    const auto spec = sample_clip(video, stride, L, clip_rng);
    total += clip_loss(model, materialize(spec, video), random_mask(L, mask_ratio, mask_rng));
  }
  return total / static_cast<double>(count);
}

struct TraceRow {
  std::size_t iteration = 0;
  double epoch = 0;
  double lr = 0;
  double loss = 0;
};

inline void write_trace_header(std::ostream& os) { os << "iteration,epoch,lr,loss\n"; }

inline void write_trace_row(std::ostream& os, const TraceRow& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g,%.9g\n", r.iteration, r.epoch, r.lr, r.loss);
  os << buf;
  os.flush();
}

struct TrainResult {
  std::vector<TraceRow> trace;
  std::size_t samples_seen = 0;
};

struct TrainHooks {
  std::ostream* trace_csv = nullptr;  // header written by the caller
  std::function<void(const TraceRow&)> on_iteration;
};

// Masked-reconstruction training with AdamW and the warmup+cosine schedule.
// The batch is split into `threads` contiguous chunks whose gradients are
// reduced in chunk order, so results depend on the thread count but not on
// thread timing.
inline TrainResult train(Autoencoder& model, const std::vector<FeatureSequence>& corpus,
                         const TrainConfig& cfg, const TrainHooks& hooks = {}) {
  const auto& mc = model.config();
  for (const auto& v : corpus) {
    if (v.feature_dim() != mc.input_dim) {
      throw UsageError("video '" + v.video_id + "' has feature_dim " +
                       std::to_string(v.feature_dim()) + ", model expects " +
                       std::to_string(mc.input_dim));
    }
  }
  SamplePlan plan(corpus.size(), cfg);
  TrainResult result;
  AdamWOptions opt{0, cfg.beta1, cfg.beta2, cfg.adam_eps, cfg.weight_decay};
  auto& params = model.parameters();

  for (std::size_t it = 0; it < plan.iterations(); ++it) {
    const auto begin = plan.batch_begin(it), end = plan.batch_end(it);
    const auto n = end - begin;
    std::vector<TrainSample> batch;
    batch.reserve(n);
    for (auto s = begin; s < end; ++s) batch.push_back(draw_sample(plan, corpus, cfg, mc.clip_len, s));

    const std::size_t chunks = std::min(cfg.threads, n);
    std::vector<std::vector<Tensor>> chunk_grads(chunks);
    std::vector<std::vector<float>> chunk_losses(chunks);
    auto work = [&](std::size_t c) {
      const auto lo = c * n / chunks, hi = (c + 1) * n / chunks;
      auto grads = model.zero_gradients();
      std::vector<float> losses;
      for (auto i = lo; i < hi; ++i) {
        const auto clip = materialize(batch[i].clip, corpus[batch[i].video]);
        losses.push_back(loss_and_gradients(model, clip, batch[i].mask, grads,
                                            1.0f / static_cast<float>(n)));
      }
      chunk_grads[c] = std::move(grads);
      chunk_losses[c] = std::move(losses);
    };
    if (chunks == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t c = 0; c < chunks; ++c) pool.emplace_back(work, c);
      for (auto& t : pool) t.join();
    }

    double loss_sum = 0;
    for (const auto& losses : chunk_losses) {
      for (float l : losses) loss_sum += l;
    }
    const double loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(loss)) {
      std::ostringstream os;
      os << "non-finite loss at iteration " << it << "; clips:";
      for (const auto& s : batch) os << ' ' << s.clip.to_string();
      throw TrainingError(os.str());
    }

    for (std::size_t p = 0; p < params.size(); ++p) {
      params[p].grad = std::move(chunk_grads[0][p]);
      for (std::size_t c = 1; c < chunks; ++c) add_into(params[p].grad, chunk_grads[c][p]);
    }
    opt.lr = plan.lr_at(it);
    for (auto& p : params) adamw_step(p, opt);

    TraceRow row{it, plan.epoch_at(it), opt.lr, loss};
    result.trace.push_back(row);
    if (hooks.trace_csv) write_trace_row(*hooks.trace_csv, row);
    if (hooks.on_iteration) hooks.on_iteration(row);
  }
  result.samples_seen = plan.total_samples();
  return result;
}

}  // namespace framemae
