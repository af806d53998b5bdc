#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "framemae/errors.hpp"

namespace framemae {

namespace detail {

inline void require_pair(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size()) {
    throw UsageError(std::string(what) + ": lengths differ (" + std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()) + ")");
  }
  if (x.size() < 2) throw UsageError(std::string(what) + ": need at least 2 values");
}

inline std::int64_t tied_pairs_sorted(const std::vector<double>& v) {
  std::int64_t total = 0, run = 1;
  for (std::size_t i = 1; i <= v.size(); ++i) {
    if (i < v.size() && v[i] == v[i - 1]) {
      ++run;
    } else {
      total += run * (run - 1) / 2;
      run = 1;
    }
  }
  return total;
}

// Sorts v[lo, hi) ascending with a bottom-up merge sort; returns the number
// of inversions (pairs with a > b strictly).
inline std::int64_t count_inversions(std::vector<double>& v) {
  std::int64_t swaps = 0;
  std::vector<double> buf(v.size());
  for (std::size_t width = 1; width < v.size(); width *= 2) {
    for (std::size_t lo = 0; lo < v.size(); lo += 2 * width) {
      const auto mid = std::min(lo + width, v.size());
      const auto hi = std::min(lo + 2 * width, v.size());
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (v[j] < v[i]) {
          swaps += static_cast<std::int64_t>(mid - i);
          buf[k++] = v[j++];
        } else {
          buf[k++] = v[i++];
        }
      }
      while (i < mid) buf[k++] = v[i++];
      while (j < hi) buf[k++] = v[j++];
    }
    v.swap(buf);
  }
  return swaps;
}

}  // namespace detail

// Kendall's tau-b (Knight's O(n log n) algorithm). nullopt when either side
// is constant, since the tie-corrected denominator vanishes.
inline std::optional<double> kendall_tau_b(std::span<const double> x, std::span<const double> y) {
  detail::require_pair(x, y, "kendall_tau_b");
  const auto n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  const auto n0 = static_cast<std::int64_t>(n) * static_cast<std::int64_t>(n - 1) / 2;
  std::int64_t n1 = 0, n3 = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    const auto tx = static_cast<std::int64_t>(j - i);
    n1 += tx * (tx - 1) / 2;
    for (std::size_t k = i; k < j;) {
      std::size_t m = k;
      while (m < j && y[order[m]] == y[order[k]]) ++m;
      const auto txy = static_cast<std::int64_t>(m - k);
      n3 += txy * (txy - 1) / 2;
      k = m;
    }
    i = j;
  }
  std::vector<double> ys(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = y[order[i]];
  const auto swaps = detail::count_inversions(ys);
  const auto n2 = detail::tied_pairs_sorted(ys);

  if (n1 == n0 || n2 == n0) return std::nullopt;
  const auto concordant_minus_discordant = n0 - n1 - n2 + n3 - 2 * swaps;
  return static_cast<double>(concordant_minus_discordant) /
         std::sqrt(static_cast<double>(n0 - n1) * static_cast<double>(n0 - n2));
}

// 1-based ranks with ties sharing their average rank.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j + 1);  // mean of i+1 .. j
    for (auto k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
  detail::require_pair(x, y, "pearson");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

// Spearman's rho: Pearson correlation of average ranks.
inline std::optional<double> spearman_rho(std::span<const double> x, std::span<const double> y) {
  detail::require_pair(x, y, "spearman_rho");
  const auto rx = average_ranks(x), ry = average_ranks(y);
  return pearson(rx, ry);
}

// ---------------------------------------------------------------------------
// Key-fragment selection

struct FragmentSelection {
  std::vector<std::pair<std::size_t, std::size_t>> change_points;
  std::vector<double> fragment_values;
  std::vector<std::size_t> chosen;  // ascending fragment indices
  std::size_t budget_frames = 0;
  double value = 0;
  std::size_t length = 0;
};

// Exact 0/1 knapsack by dynamic programming over frame counts.
inline FragmentSelection knapsack_select(std::span<const double> values,
                                         std::span<const std::size_t> lengths,
                                         std::size_t budget) {
  if (values.size() != lengths.size()) throw UsageError("knapsack_select: values and lengths differ in size");
  const auto n = values.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(values[i])) throw UsageError("knapsack_select: non-finite value");
    if (lengths[i] == 0) throw UsageError("knapsack_select: zero-length fragment");
  }
  std::vector<double> best(budget + 1, 0.0);
  std::vector<std::vector<char>> take(n, std::vector<char>(budget + 1, 0));
  for (std::size_t i = 0; i < n; ++i) {
    if (values[i] <= 0) continue;  // never improves a selection
    for (std::size_t c = budget + 1; c-- > lengths[i];) {
      const double with = best[c - lengths[i]] + values[i];
      if (with > best[c]) {
        best[c] = with;
        take[i][c] = 1;
      }
    }
  }
  FragmentSelection sel;
  sel.budget_frames = budget;
  sel.fragment_values.assign(values.begin(), values.end());
  std::size_t c = budget;
  for (std::size_t i = n; i-- > 0;) {
    if (take[i][c]) {
      sel.chosen.push_back(i);
      c -= lengths[i];
    }
  }
  std::reverse(sel.chosen.begin(), sel.chosen.end());
  for (auto i : sel.chosen) {
    sel.value += values[i];
    sel.length += lengths[i];
  }
  return sel;
}

inline std::vector<double> fragment_means(std::span<const double> scores,
                                          const std::vector<std::pair<std::size_t, std::size_t>>& cps) {
  std::vector<double> means;
  for (const auto& [b, e] : cps) {
    double s = 0;
    for (auto i = b; i < e; ++i) s += scores[i];
    means.push_back(s / static_cast<double>(e - b));
  }
  return means;
}

// Frames covered by a knapsack over fragment-mean scores at `budget` frames.
inline std::vector<char> keyshot_summary(std::span<const double> scores,
                                         const std::vector<std::pair<std::size_t, std::size_t>>& cps,
                                         std::size_t budget, FragmentSelection* out = nullptr) {
  std::vector<std::size_t> lengths;
  for (const auto& [b, e] : cps) lengths.push_back(e - b);
  auto sel = knapsack_select(fragment_means(scores, cps), lengths, budget);
  sel.change_points = cps;
  std::vector<char> summary(scores.size(), 0);
  for (auto f : sel.chosen) {
    for (auto i = cps[f].first; i < cps[f].second; ++i) summary[i] = 1;
  }
  if (out) *out = std::move(sel);
  return summary;
}

// Overlap F1 between binary frame masks; 0 when either side is empty or they
// do not overlap.
inline double summary_f1(const std::vector<char>& predicted, const std::vector<char>& truth) {
  std::size_t overlap = 0, np = 0, nt = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    overlap += predicted[i] && truth[i];
    np += predicted[i] != 0;
    nt += truth[i] != 0;
  }
  if (overlap == 0) return 0.0;
  const double p = static_cast<double>(overlap) / static_cast<double>(np);
  const double r = static_cast<double>(overlap) / static_cast<double>(nt);
  return 2 * p * r / (p + r);
}

}  // namespace framemae
