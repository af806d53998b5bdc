#include <gtest/gtest.h>

#include <map>
#include <sstream>

#include "framemae/checkpoint.hpp"
#include "framemae/sampler.hpp"
#include "framemae/scorer.hpp"
#include "framemae/synthetic.hpp"
#include "framemae/trainer.hpp"
#include "test_support.hpp"

using namespace framemae;
using framemae::testing::TempDir;
using framemae::testing::slurp;

namespace {

FeatureSequence indexed_video(std::size_t frames, std::size_t dim, const std::string& id = "v") {
  FeatureSequence v{id, 25.0f, Tensor::matrix(frames, dim)};
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t j = 0; j < dim; ++j) v.frames(t, j) = static_cast<float>(t * 100 + j);
  }
  return v;
}

}  // namespace

TEST(StridePolicy, ParseAndPrint) {
  EXPECT_EQ(StridePolicy::parse("4"), StridePolicy::fixed(4));
  EXPECT_EQ(StridePolicy::parse("fixed(3)"), StridePolicy::fixed(3));
  EXPECT_EQ(StridePolicy::parse("rand(1,8)"), StridePolicy::uniform(1, 8));
  EXPECT_EQ(StridePolicy::parse(StridePolicy::uniform(2, 5).to_string()), StridePolicy::uniform(2, 5));
  EXPECT_THROW(StridePolicy::parse("0"), ConfigError);
  EXPECT_THROW(StridePolicy::parse("rand(5,2)"), ConfigError);
  EXPECT_THROW(StridePolicy::parse("rand(1)"), ConfigError);
  EXPECT_THROW(StridePolicy::parse("fast"), ConfigError);
}

TEST(SampleClip, SpanArithmetic) {
  std::size_t lo = 1000, hi = 0;
  for (std::uint64_t i = 0; i < 5000; ++i) {
    Rng rng(1, "clip", i);
    const auto c = sample_clip("v", 300, StridePolicy::fixed(8), 30, rng);
    EXPECT_EQ(c.stride, 8u);
    EXPECT_EQ(c.span(), 233u);
    lo = std::min(lo, c.start);
    hi = std::max(hi, c.start);
  }
  EXPECT_EQ(lo, 0u);
  EXPECT_EQ(hi, 67u);
}

TEST(SampleClip, BoundaryAndClamping) {
  for (std::uint64_t i = 0; i < 100; ++i) {
    Rng rng(2, "clip", i);
    const auto c = sample_clip("v", 30, StridePolicy::uniform(1, 8), 30, rng);
    EXPECT_EQ(c.start, 0u);
    EXPECT_EQ(c.stride, 1u);
  }
  Rng rng(3);
  const auto c = sample_clip("v", 100, StridePolicy::fixed(8), 30, rng);
  EXPECT_EQ(c.stride, 3u);  // 1 + 29·3 = 88 ≤ 100 < 117
  EXPECT_LE(c.start + c.span(), 100u);
}

TEST(SampleClip, ShortVideoIsSamplingErrorNamingIt) {
  Rng rng(0);
  try {
    sample_clip("tiny_video", 29, StridePolicy::fixed(1), 30, rng);
    FAIL();
  } catch (const SamplingError& e) {
    EXPECT_NE(std::string(e.what()).find("tiny_video"), std::string::npos);
  }
  EXPECT_THROW(sample_clip("v", 100, StridePolicy::fixed(1), 1, rng), ConfigError);
}

TEST(SampleClip, StrideFrequencies) {
  std::map<std::size_t, int> counts;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    Rng rng(4, "clip", static_cast<std::uint64_t>(i));
    ++counts[sample_clip("v", 10000, StridePolicy::uniform(1, 8), 30, rng).stride];
  }
  ASSERT_EQ(counts.size(), 8u);
  for (const auto& [s, n] : counts) EXPECT_NEAR(n / double(draws), 0.125, 0.02) << s;
}

TEST(SampleClip, InvariantOverRandomVideos) {
  for (std::uint64_t i = 0; i < 2000; ++i) {
    Rng rng(5, "clip", i);
    const auto n = static_cast<std::size_t>(rng.uniform_int(30, 400));
    const auto c = sample_clip("v", n, StridePolicy::uniform(1, 8), 30, rng);
    EXPECT_LT(c.start + (c.clip_len - 1) * c.stride, n);
  }
}

TEST(Materialize, MatchesDirectIndexing) {
  const auto video = indexed_video(50, 3);
  const auto c = materialize(ClipSpec{"v", 0, 2, 3}, video);
  EXPECT_EQ(c(0, 0), 0.0f);
  EXPECT_EQ(c(1, 0), 200.0f);
  EXPECT_EQ(c(2, 2), 402.0f);
  for (std::uint64_t i = 0; i < 100; ++i) {
    Rng rng(6, "clip", i);
    const auto spec = sample_clip(video, StridePolicy::uniform(1, 4), 6, rng);
    const auto clip = materialize(spec, video);
    for (std::size_t r = 0; r < 6; ++r) {
      for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(clip(r, j), static_cast<float>((spec.start + r * spec.stride) * 100 + j));
      }
    }
  }
  EXPECT_THROW(materialize(ClipSpec{"v", 47, 2, 3}, video), UsageError);
  EXPECT_THROW(materialize(ClipSpec{"v", 0, 0, 3}, video), UsageError);
}

// ---------------------------------------------------------------------------

TEST(SamplePlan, IterationCountIsCeil) {
  auto cfg = TrainConfig::fine_tune(10000);
  SamplePlan plan(25, cfg);
  EXPECT_EQ(plan.iterations(), 79u);
  EXPECT_EQ(plan.batch_end(78) - plan.batch_begin(78), 10000u - 78 * 128);
  EXPECT_EQ(plan.samples_per_epoch(), 250u);
  EXPECT_EQ(TrainConfig::fine_tune(50000).clips_per_video, 10u);
  EXPECT_DOUBLE_EQ(TrainConfig::fine_tune(50000, 4e-5).base_lr, 4e-5);
  EXPECT_DOUBLE_EQ(cfg.warmup_epochs, 5.0);
}

TEST(SamplePlan, EpochTouchesEveryVideoEquallyOften) {
  TrainConfig cfg;
  cfg.total_epochs = 3;
  cfg.clips_per_video = 4;
  cfg.warmup_epochs = 1;
  SamplePlan plan(7, cfg);
  EXPECT_EQ(plan.total_samples(), 84u);
  for (std::size_t e = 0; e < 3; ++e) {
    std::map<std::size_t, int> hits;
    for (std::size_t s = e * 28; s < (e + 1) * 28; ++s) ++hits[plan.video_of(s)];
    ASSERT_EQ(hits.size(), 7u);
    for (const auto& [v, h] : hits) EXPECT_EQ(h, 4);
  }
}

TEST(SamplePlan, LrIsScheduleAtFractionalEpoch) {
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.total_epochs = 10;
  cfg.warmup_epochs = 2;
  SamplePlan plan(40, cfg);
  for (std::size_t k = 0; k < plan.iterations(); ++k) {
    EXPECT_EQ(plan.lr_at(k), plan.schedule().lr_at(static_cast<double>(k * 16) / 40.0));
  }
  EXPECT_EQ(plan.lr_at(0), 0.0);
}

TEST(TrainConfigJson, RoundTripAndStrictKeys) {
  auto cfg = TrainConfig::fine_tune(50000, 4e-5);
  cfg.stride = StridePolicy::fixed(3);
  cfg.seed = 99;
  const auto back = train_config_from_json(train_config_to_json(cfg));
  EXPECT_EQ(train_config_to_json(back), train_config_to_json(cfg));
  EXPECT_THROW(train_config_from_json(json{{"batchsize", 3}}), ConfigError);
  EXPECT_THROW(train_config_from_json(json{{"mode", "forever"}}), ConfigError);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = TrainConfig{};
  c.mask_ratio = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(SamplePlan(0, TrainConfig{}), UsageError);
}

// ---------------------------------------------------------------------------

namespace {

std::vector<FeatureSequence> tiny_corpus() {
  SyntheticOptions o;
  o.num_videos = 20;
  o.num_frames = 60;
  o.outlier_fraction = 0;
  return features_of(synthetic_corpus(o));
}

TrainConfig tiny_train(std::size_t iterations, std::size_t batch = 16) {
  TrainConfig cfg;
  cfg.mode = TrainConfig::Mode::kSamples;
  cfg.total_samples = iterations * batch;
  cfg.batch_size = batch;
  cfg.base_lr = 0.02;
  cfg.warmup_epochs = 2;
  cfg.min_lr = 1e-5;
  cfg.weight_decay = 0;
  cfg.stride = StridePolicy::uniform(1, 4);
  cfg.seed = 1;
  return cfg;
}

}  // namespace

TEST(Train, ConvergesOnRepeatedPatterns) {
  const auto corpus = tiny_corpus();
  auto model = Autoencoder::initialize(ModelConfig::tiny(), 1);
  const auto cfg = tiny_train(500);
  const double before = evaluation_loss(model, corpus, cfg.stride, 0.5, 200, 7);
  const auto result = train(model, corpus, cfg);
  const double after = evaluation_loss(model, corpus, cfg.stride, 0.5, 200, 7);
  ASSERT_EQ(result.trace.size(), 500u);
  for (const auto& row : result.trace) EXPECT_TRUE(std::isfinite(row.loss));
  EXPECT_LT(after, 0.1 * before) << before << " -> " << after;
}

TEST(Train, TraceCsvAndLrSequence) {
  const auto corpus = tiny_corpus();
  auto model = Autoencoder::initialize(ModelConfig::tiny(), 2);
  auto cfg = tiny_train(10, 5);
  cfg.total_samples = 47;
  std::ostringstream csv;
  write_trace_header(csv);
  const auto result = train(model, corpus, cfg, {&csv, {}});
  ASSERT_EQ(result.trace.size(), 10u);
  EXPECT_EQ(result.samples_seen, 47u);
  SamplePlan plan(corpus.size(), cfg);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(result.trace[k].lr, plan.lr_at(k));
  const auto text = csv.str();
  EXPECT_EQ(text.rfind("iteration,epoch,lr,loss\n0,0,0,", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 11);
}

TEST(Train, BitReproducibleAtFixedThreads) {
  const auto corpus = tiny_corpus();
  for (std::size_t threads : {1u, 3u}) {
    auto cfg = tiny_train(20);
    cfg.threads = threads;
    auto a = Autoencoder::initialize(ModelConfig::tiny(), 3);
    auto b = Autoencoder::initialize(ModelConfig::tiny(), 3);
    train(a, corpus, cfg);
    train(b, corpus, cfg);
    EXPECT_EQ(encode_checkpoint(a, {}), encode_checkpoint(b, {}));
  }
}

TEST(Train, NonFiniteLossNamesIterationAndClips) {
  auto corpus = tiny_corpus();
  corpus[0].frames.fill(std::numeric_limits<float>::infinity());
  auto model = Autoencoder::initialize(ModelConfig::tiny(), 4);
  auto cfg = tiny_train(5, 20);
  try {
    train(model, corpus, cfg);
    FAIL();
  } catch (const TrainingError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("iteration 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("synth_0@"), std::string::npos) << msg;
  }
}

TEST(Train, RejectsWrongFeatureDim) {
  std::vector<FeatureSequence> corpus{indexed_video(40, 5)};
  auto model = Autoencoder::initialize(ModelConfig::tiny(), 0);
  EXPECT_THROW(train(model, corpus, tiny_train(1)), UsageError);
}

// ---------------------------------------------------------------------------

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  TempDir dir;
  const auto model = Autoencoder::initialize(ModelConfig::tiny(), 5);
  const auto cfg = train_config_to_json(tiny_train(3));
  save_checkpoint(model, cfg, dir / "a.ckpt");
  const auto loaded = load_checkpoint(dir / "a.ckpt");
  save_checkpoint(loaded.model, loaded.train_config, dir / "b.ckpt");
  EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));
  EXPECT_EQ(loaded.model.config(), model.config());
  EXPECT_EQ(loaded.train_config, cfg);
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    EXPECT_EQ(loaded.model.parameters()[i].value, model.parameters()[i].value);
  }
}

TEST(Checkpoint, ScoringIsIdenticalAfterReload) {
  TempDir dir;
  const auto model = Autoencoder::initialize(ModelConfig::tiny(), 6);
  save_checkpoint(model, {}, dir / "m.ckpt");
  const auto loaded = load_checkpoint(dir / "m.ckpt");
  SyntheticOptions o;
  const auto video = synthetic_video(o, 0).features;
  const auto cfg = ScoringConfig::for_clip_len(6);
  EXPECT_EQ(score_video(model, video, cfg).scores, score_video(loaded.model, video, cfg).scores);
}

TEST(Checkpoint, MismatchedConfigNamesFirstTensor) {
  TempDir dir;
  save_checkpoint(Autoencoder::initialize(ModelConfig::tiny(), 7), {}, dir / "m.ckpt");
  auto other = ModelConfig::tiny();
  other.enc_dim = 12;
  try {
    load_checkpoint(dir / "m.ckpt", &other);
    FAIL();
  } catch (const CheckpointError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("first mismatch: tensor 'input_proj.weight' has shape [8x8], config expects [8x12]"),
              std::string::npos)
        << msg;
    EXPECT_NE(msg.find("discrepancies"), std::string::npos);
  }
  auto deeper = ModelConfig::tiny();
  deeper.dec_depth = 2;
  try {
    load_checkpoint(dir / "m.ckpt", &deeper);
    FAIL();
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("missing tensor 'decoder.blocks.1.norm1.gain'"), std::string::npos)
        << e.what();
  }
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  TempDir dir;
  save_checkpoint(Autoencoder::initialize(ModelConfig::tiny(), 8), {}, dir / "m.ckpt");
  auto bytes = slurp(dir / "m.ckpt");
  framemae::testing::spit(dir / "t.ckpt", bytes.substr(0, bytes.size() - 4));
  EXPECT_THROW(load_checkpoint(dir / "t.ckpt"), FormatError);
  bytes[1] = 'X';
  framemae::testing::spit(dir / "b.ckpt", bytes);
  EXPECT_THROW(load_checkpoint(dir / "b.ckpt"), FormatError);
}
