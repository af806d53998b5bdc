#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "framemae/errors.hpp"
#include "framemae/layers.hpp"
#include "framemae/optim.hpp"
#include "framemae/rng.hpp"
#include "framemae/tensor.hpp"

namespace framemae {

struct ModelConfig {
  std::size_t clip_len = 30;
  std::size_t input_dim = 1024;
  std::size_t enc_depth = 12;
  std::size_t enc_heads = 12;
  std::size_t enc_dim = 768;
  std::size_t dec_depth = 4;
  std::size_t dec_heads = 6;
  std::size_t dec_dim = 384;
  std::size_t mlp_ratio = 4;
  // Standardize each target frame before the loss and before scoring.
  bool normalize_target = false;

  static ModelConfig base(std::size_t input_dim = 1024) {
    ModelConfig c;
    c.input_dim = input_dim;
    return c;
  }

  static ModelConfig large(std::size_t input_dim = 1024) {
    ModelConfig c;
    c.input_dim = input_dim;
    c.enc_depth = 24;
    c.enc_heads = 16;
    c.enc_dim = 1024;
    c.dec_depth = 8;
    c.dec_heads = 16;
    c.dec_dim = 512;
    return c;
  }

  // Small enough for exhaustive finite-difference checks.
  static ModelConfig tiny() {
    ModelConfig c;
    c.clip_len = 6;
    c.input_dim = 8;
    c.enc_depth = 1;
    c.enc_heads = 2;
    c.enc_dim = 8;
    c.dec_depth = 1;
    c.dec_heads = 2;
    c.dec_dim = 4;
    c.mlp_ratio = 4;
    return c;
  }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
    if (clip_len < 2) fail("clip_len must be at least 2");
    if (input_dim == 0) fail("input_dim must be positive");
    if (enc_depth == 0 || dec_depth == 0) fail("depths must be positive");
    if (enc_heads == 0 || enc_dim % enc_heads != 0) fail("enc_dim must be divisible by enc_heads");
    if (dec_heads == 0 || dec_dim % dec_heads != 0) fail("dec_dim must be divisible by dec_heads");
    if (enc_dim % 2 != 0 || dec_dim % 2 != 0) fail("enc_dim and dec_dim must be even");
    if (mlp_ratio == 0) fail("mlp_ratio must be positive");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Number of learnables in one pre-norm transformer block of width d.
inline std::size_t block_parameter_count(std::size_t d, std::size_t mlp_ratio) {
  const std::size_t hidden = d * mlp_ratio;
  return 2 * d                      // norm1
         + d * 3 * d + 3 * d        // qkv
         + d * d + d                // attention output
         + 2 * d                    // norm2
         + d * hidden + hidden      // fc1
         + hidden * d + d;          // fc2
}

inline std::size_t parameter_count(const ModelConfig& c) {
  c.validate();
  return c.input_dim * c.enc_dim + c.enc_dim +
         c.enc_depth * block_parameter_count(c.enc_dim, c.mlp_ratio) +
         2 * c.enc_dim + c.enc_dim * c.dec_dim + c.dec_dim + c.dec_dim +
         c.dec_depth * block_parameter_count(c.dec_dim, c.mlp_ratio) +
         2 * c.dec_dim + c.dec_dim * c.input_dim + c.input_dim;
}

// ---------------------------------------------------------------------------
// Mask plans

struct MaskPlan {
  std::size_t clip_len = 0;
  std::vector<std::size_t> masked;  // strictly increasing

  // Accepts indices in any order; the plan only depends on the set.
  static MaskPlan from_indices(std::size_t clip_len,
                               std::vector<std::size_t> indices) {
    std::sort(indices.begin(), indices.end());
    if (std::adjacent_find(indices.begin(), indices.end()) != indices.end()) {
      throw UsageError("mask plan has duplicate indices");
    }
    if (indices.empty() || indices.size() >= clip_len) {
      throw UsageError("mask plan must hide between 1 and clip_len-1 frames, got " +
                       std::to_string(indices.size()) + " of " +
                       std::to_string(clip_len));
    }
    if (indices.back() >= clip_len) {
      throw UsageError("mask index " + std::to_string(indices.back()) +
                       " out of range for clip_len " + std::to_string(clip_len));
    }
    return MaskPlan{clip_len, std::move(indices)};
  }

  std::vector<std::size_t> visible() const {
    std::vector<std::size_t> out;
    out.reserve(clip_len - masked.size());
    std::size_t m = 0;
    for (std::size_t i = 0; i < clip_len; ++i) {
      if (m < masked.size() && masked[m] == i) {
        ++m;
      } else {
        out.push_back(i);
      }
    }
    return out;
  }

  bool is_masked(std::size_t i) const {
    return std::binary_search(masked.begin(), masked.end(), i);
  }

  friend bool operator==(const MaskPlan&, const MaskPlan&) = default;
};

inline std::size_t masked_count(std::size_t clip_len, double mask_ratio) {
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) {
    throw ConfigError("mask_ratio must lie in (0,1), got " + std::to_string(mask_ratio));
  }
  const auto count = static_cast<std::size_t>(
      std::llround(mask_ratio * static_cast<double>(clip_len)));
  if (count == 0 || count >= clip_len) {
    throw ConfigError("mask_ratio " + std::to_string(mask_ratio) +
                      " masks " + std::to_string(count) + " of " +
                      std::to_string(clip_len) + " frames");
  }
  return count;
}

inline MaskPlan random_mask(std::size_t clip_len, double mask_ratio, Rng& rng) {
  const std::size_t count = masked_count(clip_len, mask_ratio);
  std::vector<std::size_t> pool(clip_len);
  for (std::size_t i = 0; i < clip_len; ++i) pool[i] = i;
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(i),
                        static_cast<std::int64_t>(clip_len - 1)));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(count);
  return MaskPlan::from_indices(clip_len, std::move(pool));
}

inline MaskPlan single_mask(std::size_t clip_len, std::size_t target_index) {
  if (target_index >= clip_len) {
    throw UsageError("target index " + std::to_string(target_index) +
                     " out of range for clip_len " + std::to_string(clip_len));
  }
  return MaskPlan::from_indices(clip_len, {target_index});
}

// ---------------------------------------------------------------------------
// Parameter layout

struct LinearRef {
  std::size_t weight = 0, bias = 0;
};
struct LayerNormRef {
  std::size_t gain = 0, shift = 0;
};
struct BlockRef {
  LayerNormRef norm1;
  LinearRef qkv, proj;
  LayerNormRef norm2;
  LinearRef fc1, fc2;
};

// The asymmetric masked autoencoder. Parameters live in one flat list in a
// fixed order; the *Ref members index into it.
template <typename T>
class BasicAutoencoder {
 public:
  using Param = BasicParameter<T>;
  using Grads = std::vector<BasicTensor<T>>;

  BasicAutoencoder() = default;

  // Zero-valued parameters with the layout implied by `config`.
  explicit BasicAutoencoder(const ModelConfig& config) : config_(config) {
    config_.validate();
    const auto& c = config_;
    input_proj_ = add_linear("input_proj", c.input_dim, c.enc_dim);
    for (std::size_t i = 0; i < c.enc_depth; ++i) {
      encoder_.push_back(add_block("encoder.blocks." + std::to_string(i), c.enc_dim));
    }
    enc_norm_ = add_norm("encoder.norm", c.enc_dim);
    enc_to_dec_ = add_linear("enc_to_dec", c.enc_dim, c.dec_dim);
    mask_token_ = add("mask_token", {c.dec_dim});
    for (std::size_t i = 0; i < c.dec_depth; ++i) {
      decoder_.push_back(add_block("decoder.blocks." + std::to_string(i), c.dec_dim));
    }
    dec_norm_ = add_norm("decoder.norm", c.dec_dim);
    output_proj_ = add_linear("output_proj", c.dec_dim, c.input_dim);
    enc_pos_ = sinusoidal_positional_embedding<T>(c.clip_len, c.enc_dim);
    dec_pos_ = sinusoidal_positional_embedding<T>(c.clip_len, c.dec_dim);
  }

  // Xavier-uniform linear weights, zero biases, unit norm gains, and a
  // N(0, 0.02²) mask token, drawn in parameter order from the "init" stream.
  static BasicAutoencoder initialize(const ModelConfig& config, std::uint64_t seed) {
    BasicAutoencoder m(config);
    Rng rng(seed, "init");
    for (auto& p : m.params_) {
      const auto& n = p.name;
      auto ends_with = [&](std::string_view s) {
        return n.size() >= s.size() && n.compare(n.size() - s.size(), s.size(), s) == 0;
      };
      if (ends_with(".weight")) {
        p.value = xavier_uniform_init<T>(p.value.shape(), rng);
      } else if (ends_with(".gain")) {
        p.value.fill(T{1});
      } else if (n == "mask_token") {
        for (auto& v : p.value.storage()) v = static_cast<T>(rng.normal(0.0, 0.02));
      }
    }
    return m;
  }

  template <typename U>
  BasicAutoencoder<U> cast() const {
    BasicAutoencoder<U> out(config_);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      out.parameters()[i].value = params_[i].value.template cast<U>();
    }
    return out;
  }

  const ModelConfig& config() const noexcept { return config_; }
  std::vector<Param>& parameters() noexcept { return params_; }
  const std::vector<Param>& parameters() const noexcept { return params_; }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value.size();
    return n;
  }

  Grads zero_gradients() const {
    Grads g;
    g.reserve(params_.size());
    for (const auto& p : params_) g.emplace_back(p.value.shape());
    return g;
  }

  const BasicTensor<T>& value(std::size_t i) const { return params_[i].value; }

  const LinearRef& input_proj() const { return input_proj_; }
  const std::vector<BlockRef>& encoder() const { return encoder_; }
  const LayerNormRef& encoder_norm() const { return enc_norm_; }
  const LinearRef& enc_to_dec() const { return enc_to_dec_; }
  std::size_t mask_token() const { return mask_token_; }
  const std::vector<BlockRef>& decoder() const { return decoder_; }
  const LayerNormRef& decoder_norm() const { return dec_norm_; }
  const LinearRef& output_proj() const { return output_proj_; }
  const BasicTensor<T>& encoder_positions() const { return enc_pos_; }
  const BasicTensor<T>& decoder_positions() const { return dec_pos_; }

 private:
  std::size_t add(const std::string& name, Shape shape) {
    params_.emplace_back(name, BasicTensor<T>(std::move(shape)));
    return params_.size() - 1;
  }
  LinearRef add_linear(const std::string& name, std::size_t in, std::size_t out) {
    LinearRef r;
    r.weight = add(name + ".weight", {in, out});
    r.bias = add(name + ".bias", {out});
    return r;
  }
  LayerNormRef add_norm(const std::string& name, std::size_t d) {
    LayerNormRef r;
    r.gain = add(name + ".gain", {d});
    r.shift = add(name + ".shift", {d});
    return r;
  }
  BlockRef add_block(const std::string& prefix, std::size_t d) {
    BlockRef b;
    b.norm1 = add_norm(prefix + ".norm1", d);
    b.qkv = add_linear(prefix + ".attn.qkv", d, 3 * d);
    b.proj = add_linear(prefix + ".attn.proj", d, d);
    b.norm2 = add_norm(prefix + ".norm2", d);
    b.fc1 = add_linear(prefix + ".mlp.fc1", d, d * config_.mlp_ratio);
    b.fc2 = add_linear(prefix + ".mlp.fc2", d * config_.mlp_ratio, d);
    return b;
  }

  ModelConfig config_;
  std::vector<Param> params_;
  LinearRef input_proj_;
  std::vector<BlockRef> encoder_;
  LayerNormRef enc_norm_;
  LinearRef enc_to_dec_;
  std::size_t mask_token_ = 0;
  std::vector<BlockRef> decoder_;
  LayerNormRef dec_norm_;
  LinearRef output_proj_;
  BasicTensor<T> enc_pos_;
  BasicTensor<T> dec_pos_;
};

using Autoencoder = BasicAutoencoder<float>;

// ---------------------------------------------------------------------------
// Transformer block (pre-norm):
//   x1 = x + attn(norm1(x));  y = x1 + fc2(gelu(fc1(norm2(x1))))

template <typename T>
struct BlockCache {
  LayerNormCache<T> norm1;
  AttentionCache<T> attn;
  LayerNormCache<T> norm2;
  BasicTensor<T> mlp_in;
  BasicTensor<T> hidden;
  BasicTensor<T> activated;
};

template <typename T>
BasicTensor<T> block_forward(const BasicAutoencoder<T>& m, const BlockRef& b,
                             std::size_t heads, const BasicTensor<T>& x,
                             BlockCache<T>* cache) {
  auto a = layer_norm(x, m.value(b.norm1.gain), m.value(b.norm1.shift),
                      cache ? &cache->norm1 : nullptr);
  AttentionWeights<T> w{m.value(b.qkv.weight), m.value(b.qkv.bias),
                        m.value(b.proj.weight), m.value(b.proj.bias)};
  auto x1 = multi_head_attention(a, heads, w, cache ? &cache->attn : nullptr);
  add_into(x1, x);
  auto mlp_in = layer_norm(x1, m.value(b.norm2.gain), m.value(b.norm2.shift),
                           cache ? &cache->norm2 : nullptr);
  auto hidden = linear(mlp_in, m.value(b.fc1.weight), m.value(b.fc1.bias));
  auto activated = gelu(hidden);
  auto y = linear(activated, m.value(b.fc2.weight), m.value(b.fc2.bias));
  add_into(y, x1);
  if (cache) {
    cache->mlp_in = std::move(mlp_in);
    cache->hidden = std::move(hidden);
    cache->activated = std::move(activated);
  }
  return y;
}

template <typename T>
BasicTensor<T> block_backward(const BasicAutoencoder<T>& m, const BlockRef& b,
                              std::size_t heads, const BlockCache<T>& cache,
                              const BasicTensor<T>& dy,
                              std::vector<BasicTensor<T>>& g) {
  auto dactivated = linear_backward_into(cache.activated, m.value(b.fc2.weight),
                                         dy, g[b.fc2.weight], g[b.fc2.bias]);
  auto dhidden = gelu_backward(cache.hidden, dactivated);
  auto dmlp_in = linear_backward_into(cache.mlp_in, m.value(b.fc1.weight),
                                      dhidden, g[b.fc1.weight], g[b.fc1.bias]);
  auto dx1 = layer_norm_backward_into(cache.norm2, m.value(b.norm2.gain), dmlp_in,
                                      g[b.norm2.gain], g[b.norm2.shift]);
  add_into(dx1, dy);
  AttentionWeights<T> w{m.value(b.qkv.weight), m.value(b.qkv.bias),
                        m.value(b.proj.weight), m.value(b.proj.bias)};
  AttentionGradRefs<T> gw{g[b.qkv.weight], g[b.qkv.bias], g[b.proj.weight],
                          g[b.proj.bias]};
  auto da = multi_head_attention_backward_into(cache.attn, heads, w, dx1, gw);
  auto dx = layer_norm_backward_into(cache.norm1, m.value(b.norm1.gain), da,
                                     g[b.norm1.gain], g[b.norm1.shift]);
  add_into(dx, dx1);
  return dx;
}

// ---------------------------------------------------------------------------
// Full forward / backward

template <typename T>
struct ForwardCache {
  MaskPlan plan;
  std::vector<std::size_t> visible;
  BasicTensor<T> visible_input;
  std::vector<BlockCache<T>> encoder;
  LayerNormCache<T> encoder_norm;
  BasicTensor<T> encoded;  // encoder output after the final norm
  std::vector<BlockCache<T>> decoder;
  LayerNormCache<T> decoder_norm;
  BasicTensor<T> decoded;  // decoder output after the final norm
};

template <typename T>
void require_clip(const BasicAutoencoder<T>& m, const BasicTensor<T>& clip,
                  const MaskPlan& plan) {
  const auto& c = m.config();
  if (clip.rank() != 2 || clip.rows() != c.clip_len || clip.cols() != c.input_dim) {
    throw UsageError("clip shape " + shape_string(clip.shape()) +
                     " does not match model " +
                     shape_string({c.clip_len, c.input_dim}));
  }
  if (plan.clip_len != c.clip_len) {
    throw UsageError("mask plan clip_len " + std::to_string(plan.clip_len) +
                     " does not match model clip_len " + std::to_string(c.clip_len));
  }
}

// Encoder over the unmasked frames only; returns [|visible|×enc_dim].
template <typename T>
BasicTensor<T> encode(const BasicAutoencoder<T>& m, const BasicTensor<T>& clip,
                      const MaskPlan& plan, ForwardCache<T>* cache = nullptr) {
  require_clip(m, clip, plan);
  const auto& c = m.config();
  auto visible = plan.visible();
  auto vin = gather_rows(clip, std::span<const std::size_t>(visible));
  auto h = linear(vin, m.value(m.input_proj().weight), m.value(m.input_proj().bias));
  const auto& pe = m.encoder_positions();
  for (std::size_t i = 0; i < visible.size(); ++i) {
    auto r = h.row(i);
    auto p = pe.row(visible[i]);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += p[j];
  }
  if (cache) cache->encoder.resize(c.enc_depth);
  for (std::size_t b = 0; b < c.enc_depth; ++b) {
    h = block_forward(m, m.encoder()[b], c.enc_heads, h,
                      cache ? &cache->encoder[b] : nullptr);
  }
  h = layer_norm(h, m.value(m.encoder_norm().gain), m.value(m.encoder_norm().shift),
                 cache ? &cache->encoder_norm : nullptr);
  if (cache) {
    cache->plan = plan;
    cache->visible = std::move(visible);
    cache->visible_input = std::move(vin);
    cache->encoded = h;
  }
  return h;
}

// Full-length reconstruction [clip_len×input_dim].
template <typename T>
BasicTensor<T> forward(const BasicAutoencoder<T>& m, const BasicTensor<T>& clip,
                       const MaskPlan& plan, ForwardCache<T>* cache = nullptr) {
  const auto& c = m.config();
  auto encoded = encode(m, clip, plan, cache);
  auto z = linear(encoded, m.value(m.enc_to_dec().weight), m.value(m.enc_to_dec().bias));

  // Restore the original frame order, mask token at every hidden slot.
  auto s = BasicTensor<T>::matrix(c.clip_len, c.dec_dim);
  const auto& token = m.value(m.mask_token());
  const auto visible = plan.visible();
  std::size_t vi = 0;
  for (std::size_t i = 0; i < c.clip_len; ++i) {
    auto dst = s.row(i);
    if (vi < visible.size() && visible[vi] == i) {
      auto src = z.row(vi++);
      std::copy(src.begin(), src.end(), dst.begin());
    } else {
      std::copy(token.storage().begin(), token.storage().end(), dst.begin());
    }
  }
  add_into(s, m.decoder_positions());

  if (cache) cache->decoder.resize(c.dec_depth);
  for (std::size_t b = 0; b < c.dec_depth; ++b) {
    s = block_forward(m, m.decoder()[b], c.dec_heads, s,
                      cache ? &cache->decoder[b] : nullptr);
  }
  s = layer_norm(s, m.value(m.decoder_norm().gain), m.value(m.decoder_norm().shift),
                 cache ? &cache->decoder_norm : nullptr);
  auto out = linear(s, m.value(m.output_proj().weight), m.value(m.output_proj().bias));
  if (cache) cache->decoded = std::move(s);
  return out;
}

// Accumulates parameter gradients given d(loss)/d(reconstruction).
template <typename T>
void backward(const BasicAutoencoder<T>& m, const ForwardCache<T>& cache,
              const BasicTensor<T>& dreconstruction,
              std::vector<BasicTensor<T>>& g) {
  const auto& c = m.config();
  auto ds = linear_backward_into(cache.decoded, m.value(m.output_proj().weight),
                                 dreconstruction, g[m.output_proj().weight],
                                 g[m.output_proj().bias]);
  ds = layer_norm_backward_into(cache.decoder_norm, m.value(m.decoder_norm().gain),
                                ds, g[m.decoder_norm().gain], g[m.decoder_norm().shift]);
  for (std::size_t b = c.dec_depth; b-- > 0;) {
    ds = block_backward(m, m.decoder()[b], c.dec_heads, cache.decoder[b], ds, g);
  }

  auto dz = BasicTensor<T>::matrix(cache.visible.size(), c.dec_dim);
  auto& dtoken = g[m.mask_token()];
  std::size_t vi = 0;
  for (std::size_t i = 0; i < c.clip_len; ++i) {
    auto src = ds.row(i);
    if (vi < cache.visible.size() && cache.visible[vi] == i) {
      std::copy(src.begin(), src.end(), dz.row(vi++).begin());
    } else {
      for (std::size_t j = 0; j < c.dec_dim; ++j) dtoken[j] += src[j];
    }
  }

  auto dh = linear_backward_into(cache.encoded, m.value(m.enc_to_dec().weight), dz,
                                 g[m.enc_to_dec().weight], g[m.enc_to_dec().bias]);
  dh = layer_norm_backward_into(cache.encoder_norm, m.value(m.encoder_norm().gain),
                                dh, g[m.encoder_norm().gain], g[m.encoder_norm().shift]);
  for (std::size_t b = c.enc_depth; b-- > 0;) {
    dh = block_backward(m, m.encoder()[b], c.enc_heads, cache.encoder[b], dh, g);
  }
  matmul_at_b_into(cache.visible_input, dh, g[m.input_proj().weight]);
  auto& dbias = g[m.input_proj().bias];
  for (std::size_t i = 0; i < dh.rows(); ++i) {
    for (std::size_t j = 0; j < dh.cols(); ++j) dbias[j] += dh(i, j);
  }
}

// ---------------------------------------------------------------------------
// Loss

// Per-frame standardization used when ModelConfig::normalize_target is set.
template <typename T>
BasicTensor<T> standardize_rows(const BasicTensor<T>& x) {
  BasicTensor<T> out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    T mean{0};
    for (T v : r) mean += v;
    mean /= static_cast<T>(r.size());
    T var{0};
    for (T v : r) var += (v - mean) * (v - mean);
    var /= static_cast<T>(r.size());
    const T rstd = T{1} / std::sqrt(var + static_cast<T>(kLayerNormEps));
    for (T& v : r) v = (v - mean) * rstd;
  }
  return out;
}

template <typename T>
BasicTensor<T> reconstruction_target(const ModelConfig& c, const BasicTensor<T>& clip) {
  return c.normalize_target ? standardize_rows(clip) : clip;
}

// Mean over masked frames and feature dimensions of the squared error.
template <typename T>
T masked_mse_loss(const BasicTensor<T>& reconstruction, const BasicTensor<T>& target,
                  const MaskPlan& plan) {
  if (reconstruction.shape() != target.shape()) {
    throw UsageError("masked_mse_loss: shapes differ " +
                     shape_string(reconstruction.shape()) + " vs " +
                     shape_string(target.shape()));
  }
  if (plan.masked.empty()) throw UsageError("masked_mse_loss: empty mask");
  T acc{0};
  for (auto i : plan.masked) {
    auto r = reconstruction.row(i);
    auto x = target.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) acc += (r[j] - x[j]) * (r[j] - x[j]);
  }
  return acc / static_cast<T>(plan.masked.size() * target.cols());
}

// d(scale · loss)/d(reconstruction); zero on unmasked rows.
template <typename T>
BasicTensor<T> masked_mse_gradient(const BasicTensor<T>& reconstruction,
                                   const BasicTensor<T>& target,
                                   const MaskPlan& plan, T scale = T{1}) {
  BasicTensor<T> d(reconstruction.shape());
  const T k = scale * T{2} / static_cast<T>(plan.masked.size() * target.cols());
  for (auto i : plan.masked) {
    auto r = reconstruction.row(i);
    auto x = target.row(i);
    auto out = d.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) out[j] = k * (r[j] - x[j]);
  }
  return d;
}

// Forward, loss, and backward for one clip. Gradients of scale·loss are
// accumulated into `g`; the unscaled loss is returned.
template <typename T>
T loss_and_gradients(const BasicAutoencoder<T>& m, const BasicTensor<T>& clip,
                     const MaskPlan& plan, std::vector<BasicTensor<T>>& g,
                     T scale = T{1}) {
  ForwardCache<T> cache;
  auto recon = forward(m, clip, plan, &cache);
  auto target = reconstruction_target(m.config(), clip);
  const T loss = masked_mse_loss(recon, target, plan);
  backward(m, cache, masked_mse_gradient(recon, target, plan, scale), g);
  return loss;
}

template <typename T>
T clip_loss(const BasicAutoencoder<T>& m, const BasicTensor<T>& clip,
            const MaskPlan& plan) {
  auto recon = forward(m, clip, plan);
  return masked_mse_loss(recon, reconstruction_target(m.config(), clip), plan);
}

}  // namespace framemae
