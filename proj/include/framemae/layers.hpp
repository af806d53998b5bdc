#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "framemae/errors.hpp"
#include "framemae/tensor.hpp"

namespace framemae {

// ---------------------------------------------------------------------------
// Matrix products. All loops run in a fixed order so results are
// bit-reproducible for a given build.

// C = A · B with A [n×k], B [k×m].
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.cols() != b.rows()) {
    throw ConfigError("matmul: inner dimensions differ " +
                      shape_string(a.shape()) + " vs " +
                      shape_string(b.shape()));
  }
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  auto c = BasicTensor<T>::matrix(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    T* crow = c.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a(i, p);
      const T* brow = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
    }
  }
  return c;
}

// C += Aᵀ · B with A [n×k], B [n×m], C [k×m].
template <typename T>
void matmul_at_b_into(const BasicTensor<T>& a, const BasicTensor<T>& b,
                      BasicTensor<T>& c) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  for (std::size_t i = 0; i < n; ++i) {
    const T* brow = b.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a(i, p);
      T* crow = c.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += aip * brow[j];
    }
  }
}

// C = A · Bᵀ with A [n×m], B [k×m].
template <typename T>
BasicTensor<T> matmul_a_bt(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  const std::size_t n = a.rows(), k = b.rows(), m = a.cols();
  auto c = BasicTensor<T>::matrix(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    const T* arow = a.data() + i * m;
    for (std::size_t j = 0; j < k; ++j) {
      const T* brow = b.data() + j * m;
      T acc{0};
      for (std::size_t p = 0; p < m; ++p) acc += arow[p] * brow[p];
      c(i, j) = acc;
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Linear: y = x·W + b, W stored [d_in×d_out].

template <typename T>
BasicTensor<T> linear(const BasicTensor<T>& x, const BasicTensor<T>& weight,
                      const BasicTensor<T>& bias) {
  require_matrix(x, "linear input");
  require_matrix(weight, "linear weight");
  if (x.cols() != weight.rows()) {
    throw ConfigError("linear: input " + shape_string(x.shape()) +
                      " does not conform to weight " +
                      shape_string(weight.shape()));
  }
  require_shape(bias, {weight.cols()}, "linear bias");
  auto y = matmul(x, weight);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto r = y.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
  }
  return y;
}

template <typename T>
struct LinearGrads {
  BasicTensor<T> input;
  BasicTensor<T> weight;
  BasicTensor<T> bias;
};

// Accumulates dW and db; returns dx.
template <typename T>
BasicTensor<T> linear_backward_into(const BasicTensor<T>& x,
                                    const BasicTensor<T>& weight,
                                    const BasicTensor<T>& dy,
                                    BasicTensor<T>& dweight,
                                    BasicTensor<T>& dbias) {
  matmul_at_b_into(x, dy, dweight);
  for (std::size_t i = 0; i < dy.rows(); ++i) {
    auto r = dy.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) dbias[j] += r[j];
  }
  return matmul_a_bt(dy, weight);
}

template <typename T>
LinearGrads<T> linear_backward(const BasicTensor<T>& x,
                               const BasicTensor<T>& weight,
                               const BasicTensor<T>& dy) {
  LinearGrads<T> g{{}, BasicTensor<T>(weight.shape()),
                   BasicTensor<T>({weight.cols()})};
  g.input = linear_backward_into(x, weight, dy, g.weight, g.bias);
  return g;
}

// ---------------------------------------------------------------------------
// Layer normalization over the last axis (population variance).

inline constexpr double kLayerNormEps = 1e-6;

template <typename T>
struct LayerNormCache {
  BasicTensor<T> normalized;  // x̂
  std::vector<T> inv_std;
};

template <typename T>
BasicTensor<T> layer_norm(const BasicTensor<T>& x, const BasicTensor<T>& gain,
                          const BasicTensor<T>& shift,
                          LayerNormCache<T>* cache = nullptr,
                          double eps = kLayerNormEps) {
  require_matrix(x, "layer_norm input");
  const std::size_t n = x.rows(), d = x.cols();
  require_shape(gain, {d}, "layer_norm gain");
  require_shape(shift, {d}, "layer_norm shift");
  auto y = BasicTensor<T>::matrix(n, d);
  auto xhat = BasicTensor<T>::matrix(n, d);
  std::vector<T> inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = x.row(i);
    T mean{0};
    for (T v : r) mean += v;
    mean /= static_cast<T>(d);
    T var{0};
    for (T v : r) var += (v - mean) * (v - mean);
    var /= static_cast<T>(d);
    const T rstd = T{1} / std::sqrt(var + static_cast<T>(eps));
    inv_std[i] = rstd;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (r[j] - mean) * rstd;
      xhat(i, j) = h;
      y(i, j) = h * gain[j] + shift[j];
    }
  }
  if (cache) {
    cache->normalized = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
BasicTensor<T> layer_norm_backward_into(const LayerNormCache<T>& cache,
                                        const BasicTensor<T>& gain,
                                        const BasicTensor<T>& dy,
                                        BasicTensor<T>& dgain,
                                        BasicTensor<T>& dshift) {
  const auto& xhat = cache.normalized;
  const std::size_t n = xhat.rows(), d = xhat.cols();
  auto dx = BasicTensor<T>::matrix(n, d);
  std::vector<T> dxhat(d);
  for (std::size_t i = 0; i < n; ++i) {
    T mean_dxhat{0}, mean_dxhat_xhat{0};
    for (std::size_t j = 0; j < d; ++j) {
      dgain[j] += dy(i, j) * xhat(i, j);
      dshift[j] += dy(i, j);
      dxhat[j] = dy(i, j) * gain[j];
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * xhat(i, j);
    }
    mean_dxhat /= static_cast<T>(d);
    mean_dxhat_xhat /= static_cast<T>(d);
    for (std::size_t j = 0; j < d; ++j) {
      dx(i, j) = cache.inv_std[i] *
                 (dxhat[j] - mean_dxhat - xhat(i, j) * mean_dxhat_xhat);
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// GELU, exact erf form.

template <typename T>
T gelu_scalar(T x) {
  return static_cast<T>(0.5) * x *
         (T{1} + std::erf(x * static_cast<T>(std::numbers::sqrt2 / 2)));
}

template <typename T>
T gelu_derivative(T x) {
  const T cdf =
      static_cast<T>(0.5) *
      (T{1} + std::erf(x * static_cast<T>(std::numbers::sqrt2 / 2)));
  const T pdf = std::exp(static_cast<T>(-0.5) * x * x) *
                static_cast<T>(0.5 * std::numbers::inv_sqrtpi *
                               std::numbers::sqrt2);
  return cdf + x * pdf;
}

template <typename T>
BasicTensor<T> gelu(const BasicTensor<T>& x) {
  BasicTensor<T> y = x;
  for (auto& v : y.storage()) v = gelu_scalar(v);
  return y;
}

template <typename T>
BasicTensor<T> gelu_backward(const BasicTensor<T>& x, const BasicTensor<T>& dy) {
  BasicTensor<T> dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= gelu_derivative(x[i]);
  return dx;
}

// ---------------------------------------------------------------------------
// Row-wise softmax, max-shifted.

template <typename T>
void softmax_rows_inplace(BasicTensor<T>& s) {
  for (std::size_t i = 0; i < s.rows(); ++i) {
    auto r = s.row(i);
    T mx = r[0];
    for (T v : r) mx = std::max(mx, v);
    T sum{0};
    for (T& v : r) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (T& v : r) v /= sum;
  }
}

// ---------------------------------------------------------------------------
// Multi-head self-attention with a fused QKV projection.
//   qkv_weight [d×3d], qkv_bias [3d], out_weight [d×d], out_bias [d]
// Column block [0,d) of qkv is Q, [d,2d) is K, [2d,3d) is V; head h owns
// columns [h·d/heads, (h+1)·d/heads) of each block.

template <typename T>
struct AttentionWeights {
  const BasicTensor<T>& qkv_weight;
  const BasicTensor<T>& qkv_bias;
  const BasicTensor<T>& out_weight;
  const BasicTensor<T>& out_bias;
};

template <typename T>
struct AttentionGradRefs {
  BasicTensor<T>& qkv_weight;
  BasicTensor<T>& qkv_bias;
  BasicTensor<T>& out_weight;
  BasicTensor<T>& out_bias;
};

template <typename T>
struct AttentionCache {
  BasicTensor<T> input;
  BasicTensor<T> qkv;
  std::vector<BasicTensor<T>> probs;  // one [n×n] per head
  BasicTensor<T> context;             // heads concatenated, [n×d]
};

template <typename T>
BasicTensor<T> multi_head_attention(const BasicTensor<T>& x, std::size_t heads,
                                    const AttentionWeights<T>& w,
                                    AttentionCache<T>* cache = nullptr) {
  require_matrix(x, "attention input");
  const std::size_t n = x.rows(), d = x.cols();
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("attention: width " + std::to_string(d) +
                      " is not divisible by " + std::to_string(heads) +
                      " heads");
  }
  require_shape(w.qkv_weight, {d, 3 * d}, "attention qkv weight");
  require_shape(w.out_weight, {d, d}, "attention output weight");
  const std::size_t hd = d / heads;
  const T scale = T{1} / std::sqrt(static_cast<T>(hd));

  auto qkv = linear(x, w.qkv_weight, w.qkv_bias);
  auto context = BasicTensor<T>::matrix(n, d);
  std::vector<BasicTensor<T>> probs;
  probs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t qo = h * hd, ko = d + h * hd, vo = 2 * d + h * hd;
    auto p = BasicTensor<T>::matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        T acc{0};
        for (std::size_t c = 0; c < hd; ++c) acc += qkv(i, qo + c) * qkv(j, ko + c);
        p(i, j) = acc * scale;
      }
    }
    softmax_rows_inplace(p);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const T pij = p(i, j);
        for (std::size_t c = 0; c < hd; ++c) context(i, qo + c) += pij * qkv(j, vo + c);
      }
    }
    probs.push_back(std::move(p));
  }
  auto y = linear(context, w.out_weight, w.out_bias);
  if (cache) {
    cache->input = x;
    cache->qkv = std::move(qkv);
    cache->probs = std::move(probs);
    cache->context = std::move(context);
  }
  return y;
}

template <typename T>
BasicTensor<T> multi_head_attention_backward_into(
    const AttentionCache<T>& cache, std::size_t heads,
    const AttentionWeights<T>& w, const BasicTensor<T>& dy,
    const AttentionGradRefs<T>& g) {
  const std::size_t n = cache.input.rows(), d = cache.input.cols();
  const std::size_t hd = d / heads;
  const T scale = T{1} / std::sqrt(static_cast<T>(hd));
  const auto& qkv = cache.qkv;

  auto dcontext = linear_backward_into(cache.context, w.out_weight, dy,
                                       g.out_weight, g.out_bias);
  auto dqkv = BasicTensor<T>::matrix(n, 3 * d);
  auto dp = BasicTensor<T>::matrix(n, n);
  for (std::size_t h = 0; h < heads; ++h) {
    const std::size_t qo = h * hd, ko = d + h * hd, vo = 2 * d + h * hd;
    const auto& p = cache.probs[h];
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        T acc{0};
        for (std::size_t c = 0; c < hd; ++c) acc += dcontext(i, qo + c) * qkv(j, vo + c);
        dp(i, j) = acc;
        for (std::size_t c = 0; c < hd; ++c) dqkv(j, vo + c) += p(i, j) * dcontext(i, qo + c);
      }
    }
    // softmax backward, folded with the 1/√hd scale
    for (std::size_t i = 0; i < n; ++i) {
      T dot{0};
      for (std::size_t j = 0; j < n; ++j) dot += dp(i, j) * p(i, j);
      for (std::size_t j = 0; j < n; ++j) {
        const T ds = p(i, j) * (dp(i, j) - dot) * scale;
        for (std::size_t c = 0; c < hd; ++c) {
          dqkv(i, qo + c) += ds * qkv(j, ko + c);
          dqkv(j, ko + c) += ds * qkv(i, qo + c);
        }
      }
    }
  }
  return linear_backward_into(cache.input, w.qkv_weight, dqkv, g.qkv_weight,
                              g.qkv_bias);
}

// ---------------------------------------------------------------------------
// Sinusoidal positional embedding.

template <typename T = float>
BasicTensor<T> sinusoidal_positional_embedding(std::size_t num_positions,
                                               std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) {
    throw ConfigError("positional embedding dim must be even, got " +
                      std::to_string(dim));
  }
  auto pe = BasicTensor<T>::matrix(num_positions, dim);
  for (std::size_t p = 0; p < num_positions; ++p) {
    for (std::size_t i = 0; i < dim / 2; ++i) {
      const double angle =
          static_cast<double>(p) /
          std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(dim));
      pe(p, 2 * i) = static_cast<T>(std::sin(angle));
      pe(p, 2 * i + 1) = static_cast<T>(std::cos(angle));
    }
  }
  return pe;
}

}  // namespace framemae
