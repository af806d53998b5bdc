#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "framemae/rng.hpp"

// Independent, deliberately naive reference implementations.
namespace framemae::oracle {

inline std::optional<double> kendall_tau_b(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = x.size();
  double concordant = 0, discordant = 0, ties_x = 0, ties_y = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double dx = x[i] - x[j], dy = y[i] - y[j];
      if (dx == 0 && dy == 0) continue;
      if (dx == 0) {
        ties_x += 1;
      } else if (dy == 0) {
        ties_y += 1;
      } else if ((dx > 0) == (dy > 0)) {
        concordant += 1;
      } else {
        discordant += 1;
      }
    }
  }
  const double a = concordant + discordant + ties_x, b = concordant + discordant + ties_y;
  if (a == 0 || b == 0) return std::nullopt;
  return (concordant - discordant) / std::sqrt(a * b);
}

// Rank of v[i] = 1 + #smaller + (#equal − 1)/2, by counting.
inline std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double less = 0, equal = 0;
    for (double w : v) {
      less += w < v[i];
      equal += w == v[i];
    }
    r[i] = 1 + less + (equal - 1) / 2;
  }
  return r;
}

inline std::optional<double> spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += rx[i] / n;
    my += ry[i] / n;
  }
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

// Best total value over all subsets whose total length fits the budget.
inline double knapsack_best(const std::vector<double>& values, const std::vector<std::size_t>& lengths,
                            std::size_t budget) {
  const auto n = values.size();
  double best = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double v = 0;
    std::size_t len = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask >> i & 1) {
        v += values[i];
        len += lengths[i];
      }
    }
    if (len <= budget && v > best) best = v;
  }
  return best;
}

// Sequence of small integers so that ties are common.
inline std::vector<double> tied_sequence(Rng& rng, std::size_t n, int levels) {
  std::vector<double> v(n);
  for (auto& x : v) x = static_cast<double>(rng.uniform_int(0, levels - 1));
  return v;
}

}  // namespace framemae::oracle
