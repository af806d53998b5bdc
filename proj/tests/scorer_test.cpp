#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "framemae/scorer.hpp"
#include "framemae/synthetic.hpp"
#include "framemae/trainer.hpp"

using namespace framemae;

namespace {

ScoringConfig cfg_of(std::size_t clip_len, std::size_t stride, std::size_t slot) {
  ScoringConfig c;
  c.clip_len = clip_len;
  c.stride = stride;
  c.target_slot = slot;
  return c;
}

// Brute force: the largest stride (not above the configured one) admitting
// any window that holds t, and among those windows the start nearest the
// ideal t − slot·stride.
std::pair<std::size_t, std::size_t> oracle_window(std::size_t n, std::size_t t, const ScoringConfig& c) {
  for (auto s = c.stride; s >= 1; --s) {
    const auto span = 1 + (c.clip_len - 1) * s;
    if (span > n) continue;
    const long long ideal = static_cast<long long>(t) - static_cast<long long>(c.target_slot * s);
    long long best = -1;
    for (std::size_t st = 0; st + span <= n; ++st) {
      if (st > t || (t - st) % s != 0) continue;
      if ((t - st) / s >= c.clip_len) continue;
      const auto d = std::llabs(static_cast<long long>(st) - ideal);
      if (best < 0 || d < std::llabs(best - ideal)) best = static_cast<long long>(st);
    }
    if (best >= 0) return {s, static_cast<std::size_t>(best)};
  }
  return {0, 0};
}

}  // namespace

TEST(Window, WorkedExamples) {
  const auto c = ScoringConfig::for_clip_len(30, 2);
  EXPECT_EQ(c.target_slot, 15u);
  auto w = window_for_target(100, 50, c);
  EXPECT_EQ(w.clip.start, 20u);
  EXPECT_EQ(w.clip.stride, 2u);
  EXPECT_EQ(w.clip.frame(29), 78u);
  EXPECT_EQ(w.slot, 15u);

  w = window_for_target(100, 0, c);
  EXPECT_EQ(w.clip.start, 0u);
  EXPECT_EQ(w.clip.frame(29), 58u);
  EXPECT_EQ(w.slot, 0u);

  w = window_for_target(35, 34, c);
  EXPECT_EQ(w.clip.stride, 1u);
  EXPECT_EQ(w.clip.start, 5u);
  EXPECT_EQ(w.slot, 29u);
}

TEST(Window, ExhaustiveSmallCases) {
  for (std::size_t L : {3u, 4u, 6u, 7u}) {
    for (std::size_t stride = 1; stride <= 5; ++stride) {
      for (std::size_t slot = 0; slot < L; ++slot) {
        const auto c = cfg_of(L, stride, slot);
        for (std::size_t n = L; n <= L + 30; ++n) {
          for (std::size_t t = 0; t < n; ++t) {
            const auto w = window_for_target(n, t, c);
            const auto [s, start] = oracle_window(n, t, c);
            ASSERT_EQ(w.clip.stride, s) << "n=" << n << " t=" << t << " L=" << L << " stride=" << stride;
            ASSERT_EQ(w.clip.start, start) << "n=" << n << " t=" << t;
            ASSERT_EQ(w.clip.frame(w.slot), t);
            ASSERT_LT(w.clip.frame(L - 1), n);
            const bool fits_ideal = t >= slot * stride && t - slot * stride + (L - 1) * stride < n;
            if (fits_ideal) {
              ASSERT_EQ(w.slot, slot);
              ASSERT_EQ(w.clip.stride, stride);
            }
          }
        }
      }
    }
  }
}

TEST(Window, Errors) {
  const auto c = ScoringConfig::for_clip_len(30);
  EXPECT_THROW(window_for_target(29, 0, c), ScoringError);
  EXPECT_THROW(window_for_target(40, 40, c), UsageError);
  EXPECT_THROW(window_for_target(40, 0, cfg_of(30, 2, 30)), ConfigError);
  EXPECT_THROW(window_for_target(40, 0, cfg_of(30, 0, 3)), ConfigError);
}

TEST(Cosine, ReferenceValues) {
  const std::vector<float> a{1, 2, 3}, neg{-1, -2, -3}, orth{3, 0, -1}, zero{0, 0, 0};
  EXPECT_NEAR(cosine_dissimilarity(a, a), 0.0, 1e-12);
  EXPECT_NEAR(cosine_dissimilarity(a, orth), 1.0, 1e-12);
  EXPECT_NEAR(cosine_dissimilarity(a, neg), 2.0, 1e-12);
  EXPECT_EQ(cosine_dissimilarity(a, zero), 1.0);
  EXPECT_EQ(cosine_dissimilarity(zero, zero), 1.0);
}

namespace {

FeatureSequence random_video(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed, "video");
  FeatureSequence v{"r", 30, Tensor::matrix(n, dim)};
  for (auto& x : v.frames.storage()) x = static_cast<float>(rng.normal());
  return v;
}

}  // namespace

TEST(ScoreVideo, ShapeRangeAndPurity) {
  const auto model = Autoencoder::initialize(ModelConfig::tiny(), 3);
  const auto video = random_video(40, 8, 1);
  auto cfg = ScoringConfig::for_clip_len(6, 2);
  const auto a = score_video(model, video, cfg);
  ASSERT_EQ(a.scores.size(), 40u);
  for (double s : a.scores) {
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 2.0);
  }
  EXPECT_EQ(score_video(model, video, cfg).scores, a.scores);
  cfg.threads = 4;
  EXPECT_EQ(score_video(model, video, cfg).scores, a.scores);
  EXPECT_TRUE(a.zero_norm_frames.empty());
}

TEST(ScoreVideo, Locality) {
  const auto model = Autoencoder::initialize(ModelConfig::tiny(), 4);
  const auto cfg = ScoringConfig::for_clip_len(6, 3);
  const auto video = random_video(50, 8, 2);
  for (std::size_t t : {0u, 7u, 25u, 49u}) {
    const auto w = window_for_target(video.num_frames(), t, cfg);
    auto changed = video;
    for (std::size_t f = 0; f < video.num_frames(); ++f) {
      bool inside = false;
      for (std::size_t i = 0; i < 6; ++i) inside |= w.clip.frame(i) == f;
      if (!inside) {
        for (auto& x : changed.frames.row(f)) x += 5.0f;
      }
    }
    EXPECT_EQ(score_frame(model, video, t, cfg).score, score_frame(model, changed, t, cfg).score);
    auto inside = video;
    for (auto& x : inside.frames.row(w.clip.frame((w.slot + 1) % 6))) x += 5.0f;
    EXPECT_NE(score_frame(model, video, t, cfg).score, score_frame(model, inside, t, cfg).score);
  }
}

TEST(ScoreVideo, ZeroNormFramesAreFlagged) {
  const auto model = Autoencoder::initialize(ModelConfig::tiny(), 5);
  auto video = random_video(12, 8, 3);
  video.frames.row(4)[0] = 0;
  std::fill(video.frames.row(4).begin(), video.frames.row(4).end(), 0.0f);
  const auto c = score_video(model, video, ScoringConfig::for_clip_len(6, 1));
  EXPECT_EQ(c.zero_norm_frames, std::vector<std::size_t>{4});
  EXPECT_EQ(c.scores[4], 1.0);
}

TEST(ScoreVideo, Errors) {
  const auto model = Autoencoder::initialize(ModelConfig::tiny(), 6);
  EXPECT_THROW(score_video(model, random_video(5, 8, 1), ScoringConfig::for_clip_len(6)), ScoringError);
  EXPECT_THROW(score_video(model, random_video(20, 4, 1), ScoringConfig::for_clip_len(6)), ScoringError);
  EXPECT_THROW(score_video(model, random_video(20, 8, 1), ScoringConfig::for_clip_len(8)), ScoringError);
}

TEST(CurveCsv, RoundTrip) {
  ImportanceCurve c{"v", {0.0, 0.125, 1.9999999999, 1e-17}, {}};
  const auto back = parse_curve_csv(format_curve_csv(c), "v");
  EXPECT_EQ(back.scores, c.scores);
  EXPECT_THROW(parse_curve_csv("frame,score\n", "v"), FormatError);
  EXPECT_THROW(parse_curve_csv("frame_index,score\n1,0.5\n", "v"), FormatError);
  EXPECT_THROW(parse_curve_csv("frame_index,score\n0;0.5\n", "v"), FormatError);
}

TEST(ScoreVideo, OutliersInRepeatedVideoScoreHighest) {
  SyntheticOptions o;
  o.num_motifs = 1;
  o.num_videos = 8;
  o.num_frames = 120;
  o.outlier_fraction = 0;
  const auto clean = features_of(synthetic_corpus(o));

  TrainConfig cfg;
  cfg.mode = TrainConfig::Mode::kSamples;
  cfg.batch_size = 16;
  cfg.total_samples = 300 * 16;
  cfg.base_lr = 0.02;
  cfg.warmup_epochs = 2;
  cfg.weight_decay = 0;
  cfg.stride = StridePolicy::uniform(1, 4);
  auto model = Autoencoder::initialize(ModelConfig::tiny(), 7);
  train(model, clean, cfg);

  o.outlier_fraction = 3.0 / 120.0;
  const auto test = synthetic_video(o, 100);
  ASSERT_EQ(test.outliers.size(), 3u);
  const auto curve = score_video(model, test.features, ScoringConfig::for_clip_len(6, 2));
  std::vector<std::size_t> order(curve.scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return curve.scores[a] > curve.scores[b]; });
  std::vector<std::size_t> top(order.begin(), order.begin() + 3);
  std::sort(top.begin(), top.end());
  EXPECT_EQ(top, test.outliers);
}
