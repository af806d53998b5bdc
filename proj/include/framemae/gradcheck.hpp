#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>

#include "framemae/model.hpp"
#include "framemae/rng.hpp"
#include "framemae/tensor.hpp"

namespace framemae {

// Central finite differences run in 64-bit so rounding stays far below the
// truncation error of the step.
inline constexpr double kFiniteDifferenceStep = 1e-3;

// |a−b| / max(|a|, |b|, floor). Components smaller than the floor are held
// to an absolute tolerance of floor·rel instead, since the O(h²) truncation
// error of the difference quotient does not shrink with the gradient.
inline constexpr double kRelativeErrorFloor = 1e-3;

inline double relative_error(double analytic, double numeric,
                             double floor = kRelativeErrorFloor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

// d f / d x by central differences, perturbing x in place and restoring it.
inline BasicTensor<double> numeric_gradient(
    const std::function<double()>& f, BasicTensor<double>& x,
    double step = kFiniteDifferenceStep) {
  BasicTensor<double> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + step;
    const double up = f();
    x[i] = saved - step;
    const double down = f();
    x[i] = saved;
    g[i] = (up - down) / (2 * step);
  }
  return g;
}

inline double max_relative_error(const BasicTensor<double>& analytic,
                                 const BasicTensor<double>& numeric,
                                 double floor = kRelativeErrorFloor) {
  double worst = 0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, relative_error(analytic[i], numeric[i], floor));
  }
  return worst;
}

struct GradCheckResult {
  double max_relative_error = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
};

// Compares backprop through the full masked-MSE loss against finite
// differences for every scalar parameter (or a seeded fraction of them).
// Parameters and inputs are drawn from `seed`; norm gains and all biases are
// perturbed away from their init values so every path carries signal.
inline GradCheckResult check_model_gradients(const ModelConfig& config,
                                             std::uint64_t seed,
                                             double mask_ratio = 0.5,
                                             double fraction = 1.0,
                                             double step = kFiniteDifferenceStep) {
  auto model = Autoencoder::initialize(config, seed).cast<double>();
  Rng rng(seed, "gradcheck");
  for (auto& p : model.parameters()) {
    if (p.name.ends_with(".weight")) continue;
    for (auto& v : p.value.storage()) v += rng.normal(0.0, 0.1);
  }
  auto clip = BasicTensor<double>::matrix(config.clip_len, config.input_dim);
  for (auto& v : clip.storage()) v = rng.normal();
  const auto plan = random_mask(config.clip_len, mask_ratio, rng);

  auto grads = model.zero_gradients();
  loss_and_gradients(model, clip, plan, grads);

  GradCheckResult result;
  for (std::size_t pi = 0; pi < model.parameters().size(); ++pi) {
    auto& value = model.parameters()[pi].value;
    for (std::size_t i = 0; i < value.size(); ++i) {
      if (fraction < 1.0 && rng.uniform() >= fraction) continue;
      const double saved = value[i];
      value[i] = saved + step;
      const double up = clip_loss(model, clip, plan);
      value[i] = saved - step;
      const double down = clip_loss(model, clip, plan);
      value[i] = saved;
      const double numeric = (up - down) / (2 * step);
      const double err = relative_error(grads[pi][i], numeric);
      ++result.checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_parameter = model.parameters()[pi].name;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace framemae
