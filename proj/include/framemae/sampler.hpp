#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <string>

#include "framemae/datastore.hpp"
#include "framemae/errors.hpp"
#include "framemae/rng.hpp"
#include "framemae/tensor.hpp"

namespace framemae {

// Temporal stride for training clips: a fixed value or a uniform draw from
// [lo, hi] per sample.
struct StridePolicy {
  std::size_t lo = 1;
  std::size_t hi = 8;

  static StridePolicy fixed(std::size_t s) { return {s, s}; }
  static StridePolicy uniform(std::size_t lo, std::size_t hi) { return {lo, hi}; }

  bool is_fixed() const { return lo == hi; }

  void validate() const {
    if (lo < 1 || lo > hi) {
      throw ConfigError("stride policy needs 1 <= lo <= hi, got " + to_string());
    }
  }

  std::size_t draw(Rng& rng) const {
    if (is_fixed()) return lo;
    return static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)));
  }

  std::string to_string() const {
    if (is_fixed()) return std::to_string(lo);
    return "rand(" + std::to_string(lo) + "," + std::to_string(hi) + ")";
  }

  // Accepts "4", "fixed(4)", or "rand(1,8)".
  static StridePolicy parse(const std::string& text) {
    auto number = [&](std::string_view s) {
      std::size_t v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) {
        throw ConfigError("cannot parse stride policy '" + text + "'");
      }
      return v;
    };
    std::string_view s(text);
    StridePolicy policy;
    if (s.starts_with("rand(") && s.ends_with(")")) {
      auto body = s.substr(5, s.size() - 6);
      const auto comma = body.find(',');
      if (comma == std::string_view::npos) throw ConfigError("cannot parse stride policy '" + text + "'");
      policy = uniform(number(body.substr(0, comma)), number(body.substr(comma + 1)));
    } else if (s.starts_with("fixed(") && s.ends_with(")")) {
      policy = fixed(number(s.substr(6, s.size() - 7)));
    } else {
      policy = fixed(number(s));
    }
    policy.validate();
    return policy;
  }

  friend bool operator==(const StridePolicy&, const StridePolicy&) = default;
};

struct ClipSpec {
  std::string video_id;
  std::size_t start = 0;
  std::size_t stride = 1;
  std::size_t clip_len = 0;

  std::size_t span() const { return 1 + (clip_len - 1) * stride; }
  std::size_t frame(std::size_t i) const { return start + i * stride; }

  std::string to_string() const {
    return video_id + "@" + std::to_string(start) + "+" + std::to_string(stride) + "x" +
           std::to_string(clip_len);
  }

  friend bool operator==(const ClipSpec&, const ClipSpec&) = default;
};

// Largest stride at which clip_len frames fit in num_frames; 0 if none.
inline std::size_t max_feasible_stride(std::size_t num_frames, std::size_t clip_len) {
  if (clip_len < 2 || num_frames < clip_len) return 0;
  return (num_frames - 1) / (clip_len - 1);
}

// Draws a stride from the policy (clamped so the clip fits) and a start
// frame uniformly from every position where the clip does not overflow.
inline ClipSpec sample_clip(const std::string& video_id, std::size_t num_frames,
                            const StridePolicy& policy, std::size_t clip_len, Rng& rng) {
  if (clip_len < 2) throw ConfigError("clip_len must be at least 2");
  const auto max_stride = max_feasible_stride(num_frames, clip_len);
  if (max_stride == 0) {
    throw SamplingError("video '" + video_id + "' has " + std::to_string(num_frames) +
                        " frames, fewer than clip_len " + std::to_string(clip_len));
  }
  ClipSpec spec{video_id, 0, std::min(policy.draw(rng), max_stride), clip_len};
  const auto last_start = num_frames - spec.span();
  spec.start = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(last_start)));
  return spec;
}

inline ClipSpec sample_clip(const FeatureSequence& video, const StridePolicy& policy,
                            std::size_t clip_len, Rng& rng) {
  return sample_clip(video.video_id, video.num_frames(), policy, clip_len, rng);
}

inline Tensor materialize(const ClipSpec& spec, const FeatureSequence& video) {
  if (spec.clip_len == 0 || spec.stride == 0 || spec.start + (spec.clip_len - 1) * spec.stride >= video.num_frames()) {
    throw UsageError("clip " + spec.to_string() + " does not fit video '" + video.video_id +
                     "' with " + std::to_string(video.num_frames()) + " frames");
  }
  auto clip = Tensor::matrix(spec.clip_len, video.feature_dim());
  for (std::size_t i = 0; i < spec.clip_len; ++i) {
    auto src = video.frames.row(spec.frame(i));
    std::copy(src.begin(), src.end(), clip.row(i).begin());
  }
  return clip;
}

}  // namespace framemae
