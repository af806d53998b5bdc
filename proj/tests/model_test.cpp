#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

#include "framemae/gradcheck.hpp"
#include "framemae/model.hpp"

using namespace framemae;

namespace {

Tensor random_clip(const ModelConfig& c, std::uint64_t seed) {
  Rng rng(seed, "clip");
  auto clip = Tensor::matrix(c.clip_len, c.input_dim);
  for (auto& v : clip.storage()) v = static_cast<float>(rng.normal());
  return clip;
}

}  // namespace

// ---------------------------------------------------------------- masking

TEST(RandomMask, CountFollowsRatio) {
  Rng rng(1, "mask");
  EXPECT_EQ(random_mask(30, 0.5, rng).masked.size(), 15u);
  EXPECT_EQ(random_mask(30, 0.9, rng).masked.size(), 27u);
  EXPECT_EQ(random_mask(30, 0.1, rng).masked.size(), 3u);
}

TEST(RandomMask, IndicesStrictlyIncreasingAndInRange) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    Rng rng(s, "mask");
    auto plan = random_mask(30, 0.7, rng);
    ASSERT_EQ(plan.masked.size(), 21u);
    EXPECT_TRUE(std::is_sorted(plan.masked.begin(), plan.masked.end()));
    EXPECT_EQ(std::adjacent_find(plan.masked.begin(), plan.masked.end()), plan.masked.end());
    EXPECT_LT(plan.masked.back(), 30u);
  }
}

TEST(RandomMask, EachIndexEquallyLikely) {
  constexpr int kDraws = 10000;
  std::vector<int> hits(10, 0);
  for (int i = 0; i < kDraws; ++i) {
    Rng rng(99, "mask", static_cast<std::uint64_t>(i));
    for (auto m : random_mask(10, 0.3, rng).masked) ++hits[m];
  }
  for (int h : hits) EXPECT_NEAR(h / static_cast<double>(kDraws), 0.3, 0.02);
}

TEST(RandomMask, RejectsDegenerateRatios) {
  Rng rng(1);
  EXPECT_THROW(random_mask(30, 0.0, rng), ConfigError);
  EXPECT_THROW(random_mask(30, 1.0, rng), ConfigError);
  EXPECT_THROW(random_mask(6, 0.05, rng), ConfigError);  // rounds to 0
  EXPECT_THROW(random_mask(6, 0.95, rng), ConfigError);  // rounds to 6
}

TEST(SingleMask, ExactlyTheTarget) {
  EXPECT_EQ(single_mask(30, 15).masked, std::vector<std::size_t>{15});
  EXPECT_EQ(single_mask(30, 0).masked, std::vector<std::size_t>{0});
  EXPECT_THROW(single_mask(30, 30), UsageError);
}

TEST(MaskPlan, RejectsDuplicates) {
  EXPECT_THROW(MaskPlan::from_indices(6, {1, 1}), UsageError);
  EXPECT_THROW(MaskPlan::from_indices(6, {0, 1, 2, 3, 4, 5}), UsageError);
  EXPECT_THROW(MaskPlan::from_indices(6, {}), UsageError);
}

// ----------------------------------------------------------- param count

TEST(ParameterCount, TinyConfigHandTally) {
  // input_proj 8·8+8 = 72
  // encoder block (d=8): norms 2·16, qkv 8·24+24, proj 8·8+8, fc1 8·32+32,
  //   fc2 32·8+8 → 32 + 216 + 72 + 288 + 264 = 872
  // encoder norm 16, enc_to_dec 8·4+4 = 36, mask token 4
  // decoder block (d=4): norms 2·8, qkv 4·12+12, proj 4·4+4, fc1 4·16+16,
  //   fc2 16·4+4 → 16 + 60 + 20 + 80 + 68 = 244
  // decoder norm 8, output_proj 4·8+8 = 40
  const std::size_t tally = 72 + 872 + 16 + 36 + 4 + 244 + 8 + 40;
  EXPECT_EQ(tally, 1292u);
  EXPECT_EQ(parameter_count(ModelConfig::tiny()), tally);
  EXPECT_EQ(Autoencoder(ModelConfig::tiny()).scalar_count(), tally);
}

TEST(ParameterCount, DepthIsAdditive) {
  auto c = ModelConfig::base();
  auto doubled = c;
  doubled.enc_depth *= 2;
  EXPECT_EQ(parameter_count(doubled) - parameter_count(c),
            c.enc_depth * block_parameter_count(c.enc_dim, c.mlp_ratio));
}

TEST(ParameterCount, LargeExceedsBase) {
  EXPECT_GT(parameter_count(ModelConfig::large()), parameter_count(ModelConfig::base()));
  EXPECT_EQ(Autoencoder(ModelConfig::base(2048)).scalar_count(),
            parameter_count(ModelConfig::base(2048)));
}

TEST(ModelConfig, ValidateRejectsBadShapes) {
  auto c = ModelConfig::tiny();
  c.enc_heads = 3;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig::tiny();
  c.clip_len = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = ModelConfig::tiny();
  c.dec_dim = 6;
  c.dec_heads = 2;
  c.validate();
  c.dec_dim = 5;
  c.dec_heads = 1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Autoencoder, SingleSharedMaskToken) {
  Autoencoder m(ModelConfig::tiny());
  const auto n = std::count_if(m.parameters().begin(), m.parameters().end(),
                               [](const Parameter& p) { return p.name.find("mask") != std::string::npos; });
  EXPECT_EQ(n, 1);
  EXPECT_EQ(m.value(m.mask_token()).shape(), Shape{4});
}

// ---------------------------------------------------------------- forward

TEST(Forward, OutputShapeMatchesClip) {
  const auto c = ModelConfig::tiny();
  auto m = Autoencoder::initialize(c, 1);
  auto clip = random_clip(c, 1);
  for (std::uint64_t s = 0; s < 10; ++s) {
    Rng rng(s);
    auto out = forward(m, clip, random_mask(c.clip_len, 0.5, rng));
    EXPECT_EQ(out.shape(), (Shape{c.clip_len, c.input_dim}));
    EXPECT_TRUE(out.all_finite());
  }
}

TEST(Forward, PlanOrderDoesNotMatter) {
  const auto c = ModelConfig::tiny();
  auto m = Autoencoder::initialize(c, 2);
  auto clip = random_clip(c, 2);
  auto a = forward(m, clip, MaskPlan::from_indices(c.clip_len, {4, 1, 2}));
  auto b = forward(m, clip, MaskPlan::from_indices(c.clip_len, {1, 2, 4}));
  EXPECT_EQ(a, b);
}

TEST(Forward, RejectsWrongClipShape) {
  const auto c = ModelConfig::tiny();
  auto m = Autoencoder::initialize(c, 2);
  Tensor clip({c.clip_len + 1, c.input_dim});
  EXPECT_THROW(forward(m, clip, single_mask(c.clip_len + 1, 0)), UsageError);
  Tensor ok({c.clip_len, c.input_dim});
  EXPECT_THROW(forward(m, ok, single_mask(c.clip_len + 1, 0)), UsageError);
}

TEST(Forward, EncoderNeverSeesMaskedFrames) {
  const auto c = ModelConfig::tiny();
  auto m = Autoencoder::initialize(c, 3);
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s, "perturb");
    auto clip = random_clip(c, s);
    auto plan = random_mask(c.clip_len, 0.5, rng);
    auto before = encode(m, clip, plan);
    for (auto i : plan.masked) {
      for (auto& v : clip.row(i)) v = static_cast<float>(rng.normal(5.0, 3.0));
    }
    EXPECT_EQ(encode(m, clip, plan), before);
  }
}

// ------------------------------------------------------------------ loss

TEST(MaskedMse, ZeroWhenMaskedRowsMatch) {
  auto clip = random_clip(ModelConfig::tiny(), 4);
  auto recon = clip;
  for (auto& v : recon.row(0)) v += 10.0f;  // unmasked row, ignored
  EXPECT_EQ(masked_mse_loss(recon, clip, MaskPlan::from_indices(6, {2, 3})), 0.0f);
}

TEST(MaskedMse, ForcedArithmetic) {
  Tensor clip({2, 4});
  Tensor recon({2, 4});
  for (auto& v : recon.row(1)) v = 0.5f;
  EXPECT_FLOAT_EQ(masked_mse_loss(recon, clip, MaskPlan::from_indices(2, {1})), 0.25f);
}

TEST(MaskedMse, EmptyMaskIsUsageError) {
  Tensor clip({3, 2});
  EXPECT_THROW(masked_mse_loss(clip, clip, MaskPlan{3, {}}), UsageError);
}

TEST(MaskedMse, GradientOnlyOnMaskedRows) {
  auto clip = random_clip(ModelConfig::tiny(), 5);
  Tensor recon(clip.shape());
  const auto plan = MaskPlan::from_indices(6, {1, 4});
  auto d = masked_mse_gradient(recon, clip, plan);
  for (std::size_t i = 0; i < 6; ++i) {
    for (float v : d.row(i)) {
      if (!plan.is_masked(i)) {
        EXPECT_EQ(v, 0.0f);
      }
    }
  }
}

TEST(MaskedMse, LossIndependentOfListingOrder) {
  const auto c = ModelConfig::tiny();
  auto m = Autoencoder::initialize(c, 6);
  auto clip = random_clip(c, 6);
  EXPECT_EQ(clip_loss(m, clip, MaskPlan::from_indices(6, {5, 0, 3})),
            clip_loss(m, clip, MaskPlan::from_indices(6, {0, 3, 5})));
}

TEST(Gradients, FullModelMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    auto r = check_model_gradients(ModelConfig::tiny(), seed);
    EXPECT_EQ(r.checked, 1292u);
    EXPECT_LT(r.max_relative_error, 1e-3) << r.worst_parameter << "[" << r.worst_index << "]";
  }
}

TEST(Gradients, NormalizedTargetsAndDeeperStacks) {
  auto c = ModelConfig::tiny();
  c.normalize_target = true;
  c.enc_depth = 2;
  c.dec_depth = 2;
  auto r = check_model_gradients(c, 17, 0.3);
  EXPECT_LT(r.max_relative_error, 1e-3) << r.worst_parameter;
}

TEST(Gradients, ForwardBackwardBitReproducible) {
  const auto c = ModelConfig::tiny();
  auto run = [&] {
    auto m = Autoencoder::initialize(c, 8);
    auto g = m.zero_gradients();
    Rng rng(8, "mask");
    loss_and_gradients(m, random_clip(c, 8), random_mask(6, 0.5, rng), g);
    return g;
  };
  EXPECT_EQ(run(), run());
}

TEST(Training, OverfitsSingleClip) {
  const auto c = ModelConfig::tiny();
  auto m = Autoencoder::initialize(c, 9);
  // The 4-wide decoder can only emit a 4-d affine subspace of the 8-d
  // feature space, so the clip is built from 3 latent directions.
  Rng latent(9, "latent");
  Tensor basis({3, c.input_dim});
  for (auto& v : basis.storage()) v = static_cast<float>(latent.normal());
  auto clip = Tensor::matrix(c.clip_len, c.input_dim);
  for (std::size_t i = 0; i < c.clip_len; ++i) {
    for (std::size_t k = 0; k < 3; ++k) {
      const auto w = static_cast<float>(latent.normal());
      for (std::size_t j = 0; j < c.input_dim; ++j) clip(i, j) += w * basis(k, j);
    }
  }
  const auto probe = MaskPlan::from_indices(c.clip_len, {1, 3, 4});
  const float initial = clip_loss(m, clip, probe);
  AdamWOptions opt{3e-3, 0.9, 0.999, 1e-8, 0.0};
  for (int step = 0; step < 2000; ++step) {
    Rng rng(9, "mask", static_cast<std::uint64_t>(step));
    auto plan = random_mask(c.clip_len, 0.5, rng);
    for (auto& p : m.parameters()) p.zero_grad();
    auto g = m.zero_gradients();
    loss_and_gradients(m, clip, plan, g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      m.parameters()[i].grad = g[i];
      adamw_step(m.parameters()[i], opt);
    }
  }
  EXPECT_LT(clip_loss(m, clip, probe), 0.01f * initial);
}
