#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "framemae/datastore.hpp"
#include "framemae/rng.hpp"

namespace framemae {

// Synthetic corpora for self-checks. Videos cycle through a small set of
// motif vectors, each held for a few frames; a fraction of frames is replaced
// by outliers. Motifs live in the first half of the feature dimensions (plus
// a shared offset), outliers in the second half.
struct SyntheticOptions {
  std::size_t num_videos = 20;
  std::size_t num_frames = 120;
  std::size_t feature_dim = 8;
  std::size_t num_motifs = 3;
  std::size_t hold_min = 3;
  std::size_t hold_max = 6;
  double outlier_fraction = 0.05;
  double noise = 0.01;
  double motif_offset = 2.0;  // norm of the component shared by all motifs
  float fps = 30;
  std::uint64_t seed = 0;
};

struct SyntheticVideo {
  FeatureSequence features;
  std::vector<std::size_t> outliers;  // ascending
};

inline std::vector<std::vector<float>> synthetic_motifs(const SyntheticOptions& o) {
  Rng rng(o.seed, "synthetic.motifs");
  const auto half = o.feature_dim / 2;
  const float offset = static_cast<float>(o.motif_offset / std::sqrt(static_cast<double>(half)));
  std::vector<std::vector<float>> motifs;
  for (std::size_t m = 0; m < o.num_motifs; ++m) {
    std::vector<double> u(half);
    for (auto& x : u) x = rng.normal(0.0, 1.0);
    const double mean = std::accumulate(u.begin(), u.end(), 0.0) / static_cast<double>(half);
    double norm = 0;
    for (auto& x : u) {
      x -= mean;  // keep the varying part orthogonal to the shared offset
      norm += x * x;
    }
    std::vector<float> v(o.feature_dim, 0.0f);
    for (std::size_t j = 0; j < half; ++j) v[j] = static_cast<float>(u[j] / std::sqrt(norm)) + offset;
    motifs.push_back(std::move(v));
  }
  return motifs;
}

inline SyntheticVideo synthetic_video(const SyntheticOptions& o, std::size_t index) {
  if (o.feature_dim < 2 || o.num_motifs == 0 || o.hold_min == 0 || o.hold_min > o.hold_max) {
    throw UsageError("invalid synthetic corpus options");
  }
  const auto motifs = synthetic_motifs(o);
  const auto half = o.feature_dim / 2;
  Rng rng(o.seed, "synthetic.video", index);
  SyntheticVideo out;
  out.features.video_id = "synth_" + std::to_string(index);
  out.features.fps = o.fps;
  out.features.frames = Tensor::matrix(o.num_frames, o.feature_dim);

  const auto hold = static_cast<std::size_t>(
      rng.uniform_int(static_cast<std::int64_t>(o.hold_min), static_cast<std::int64_t>(o.hold_max)));
  const auto phase = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(hold * o.num_motifs - 1)));
  for (std::size_t t = 0; t < o.num_frames; ++t) {
    const auto& m = motifs[((t + phase) / hold) % o.num_motifs];
    auto row = out.features.frames.row(t);
    for (std::size_t j = 0; j < o.feature_dim; ++j) {
      row[j] = m[j] + static_cast<float>(rng.normal(0.0, o.noise));
    }
  }

  // Outliers: distinct, non-adjacent frames.
  const auto count = static_cast<std::size_t>(std::llround(o.outlier_fraction * static_cast<double>(o.num_frames)));
  std::vector<char> blocked(o.num_frames, 0);
  std::size_t attempts = 0;
  while (out.outliers.size() < count && attempts++ < 100 * o.num_frames) {
    const auto t = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(o.num_frames - 1)));
    if (blocked[t]) continue;
    for (auto u = t > 0 ? t - 1 : 0; u <= std::min(o.num_frames - 1, t + 1); ++u) blocked[u] = 1;
    out.outliers.push_back(t);
    auto row = out.features.frames.row(t);
    double norm = 0;
    std::vector<double> dir(o.feature_dim - half);
    for (auto& d : dir) {
      d = rng.normal(0.0, 1.0);
      norm += d * d;
    }
    std::fill(row.begin(), row.end(), 0.0f);
    for (std::size_t j = half; j < o.feature_dim; ++j) {
      row[j] = static_cast<float>(std::sqrt(2.0) * dir[j - half] / std::sqrt(norm));
    }
  }
  std::sort(out.outliers.begin(), out.outliers.end());
  return out;
}

inline std::vector<SyntheticVideo> synthetic_corpus(const SyntheticOptions& o) {
  std::vector<SyntheticVideo> out;
  for (std::size_t i = 0; i < o.num_videos; ++i) out.push_back(synthetic_video(o, i));
  return out;
}

inline std::vector<FeatureSequence> features_of(const std::vector<SyntheticVideo>& corpus) {
  std::vector<FeatureSequence> out;
  for (const auto& v : corpus) out.push_back(v.features);
  return out;
}

// TVSum-style annotations: shots of shot_min..shot_max frames, each annotator
// gives every shot an integer score in [1, 5] drawn independently.
inline AnnotationSet synthetic_tvsum_annotations(const std::string& video_id, std::size_t num_frames,
                                                 std::size_t annotators, Rng& rng,
                                                 std::size_t shot_min = 10, std::size_t shot_max = 30) {
  AnnotationSet a;
  a.video_id = video_id;
  for (std::size_t b = 0; b < num_frames;) {
    auto len = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(shot_min), static_cast<std::int64_t>(shot_max)));
    len = std::min(len, num_frames - b);
    a.change_points.emplace_back(b, b + len);
    b += len;
  }
  for (std::size_t k = 0; k < annotators; ++k) {
    std::vector<double> row(num_frames);
    for (const auto& [b, e] : a.change_points) {
      const auto s = static_cast<double>(rng.uniform_int(1, 5));
      std::fill(row.begin() + static_cast<std::ptrdiff_t>(b), row.begin() + static_cast<std::ptrdiff_t>(e), s);
    }
    a.scores.push_back(std::move(row));
  }
  return a;
}

}  // namespace framemae
