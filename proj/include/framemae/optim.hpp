#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "framemae/errors.hpp"
#include "framemae/rng.hpp"
#include "framemae/tensor.hpp"

namespace framemae {

// A learnable tensor with its gradient and AdamW moments.
template <typename T>
struct BasicParameter {
  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;
  BasicTensor<T> first_moment;
  BasicTensor<T> second_moment;
  std::uint64_t step = 0;

  BasicParameter() = default;
  BasicParameter(std::string n, BasicTensor<T> v)
      : name(std::move(n)),
        value(std::move(v)),
        grad(value.shape()),
        first_moment(value.shape()),
        second_moment(value.shape()) {}

  void zero_grad() { grad.fill(T{0}); }
};

using Parameter = BasicParameter<float>;

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.05;
};

// Decoupled weight decay Adam with bias correction:
//   w ← w − lr·(m̂ / (√v̂ + eps) + wd·w)
template <typename T>
void adamw_step(BasicParameter<T>& p, const AdamWOptions& opt) {
  if (opt.lr < 0) throw ConfigError("adamw: negative learning rate");
  for (std::size_t i = 0; i < p.grad.size(); ++i) {
    if (!std::isfinite(p.grad[i])) {
      throw TrainingError("non-finite gradient in parameter '" + p.name +
                          "' at element " + std::to_string(i));
    }
  }
  ++p.step;
  const double t = static_cast<double>(p.step);
  const double bc1 = 1.0 - std::pow(opt.beta1, t);
  const double bc2 = 1.0 - std::pow(opt.beta2, t);
  const T b1 = static_cast<T>(opt.beta1), b2 = static_cast<T>(opt.beta2);
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const T g = p.grad[i];
    T& m = p.first_moment[i];
    T& v = p.second_moment[i];
    m = b1 * m + (T{1} - b1) * g;
    v = b2 * v + (T{1} - b2) * g * g;
    const double m_hat = static_cast<double>(m) / bc1;
    const double v_hat = static_cast<double>(v) / bc2;
    const double w = static_cast<double>(p.value[i]);
    const double update = m_hat / (std::sqrt(v_hat) + opt.eps) + opt.weight_decay * w;
    p.value[i] = static_cast<T>(w - opt.lr * update);
  }
}

// Linear warmup from zero to the scaled peak, then cosine decay to min_lr.
struct LrSchedule {
  double base_lr = 4e-4;
  std::size_t batch_size = 128;
  double warmup_epochs = 40;
  double total_epochs = 200;
  double min_lr = 1e-6;

  double peak_lr() const {
    return base_lr * static_cast<double>(batch_size) / 256.0;
  }

  void validate() const {
    if (batch_size == 0) throw ConfigError("lr schedule: batch_size must be positive");
    if (!(total_epochs > 0)) throw ConfigError("lr schedule: total_epochs must be positive");
    if (warmup_epochs < 0 || !(warmup_epochs < total_epochs)) {
      throw ConfigError("lr schedule: warmup_epochs (" +
                        std::to_string(warmup_epochs) +
                        ") must lie in [0, total_epochs=" +
                        std::to_string(total_epochs) + ")");
    }
    if (min_lr > peak_lr()) {
      throw ConfigError("lr schedule: min_lr exceeds peak lr " +
                        std::to_string(peak_lr()));
    }
  }

  double lr_at(double epoch) const {
    if (!(epoch >= 0.0) || epoch > total_epochs) {
      throw ConfigError("lr_at: epoch " + std::to_string(epoch) +
                        " outside [0, " + std::to_string(total_epochs) + "]");
    }
    const double peak = peak_lr();
    if (epoch < warmup_epochs) return peak * epoch / warmup_epochs;
    const double progress =
        (epoch - warmup_epochs) / (total_epochs - warmup_epochs);
    return min_lr +
           (peak - min_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  }
};

inline double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// Shape is [fan_in × fan_out].
template <typename T = float>
BasicTensor<T> xavier_uniform_init(const Shape& shape, Rng& rng) {
  if (shape.size() != 2) {
    throw ConfigError("xavier_uniform_init needs a 2-D shape, got " +
                      shape_string(shape));
  }
  const double bound = xavier_bound(shape[0], shape[1]);
  BasicTensor<T> out(shape);
  for (auto& v : out.storage()) v = static_cast<T>(rng.uniform(-bound, bound));
  return out;
}

}  // namespace framemae
