#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "framemae/datastore.hpp"
#include "framemae/errors.hpp"
#include "framemae/model.hpp"
#include "framemae/sampler.hpp"

namespace framemae {

struct ScoringConfig {
  std::size_t stride = 2;
  std::size_t clip_len = 30;
  std::size_t target_slot = 15;
  std::size_t threads = 1;

  static ScoringConfig for_clip_len(std::size_t clip_len, std::size_t stride = 2) {
    return {stride, clip_len, clip_len / 2, 1};
  }

  void validate() const {
    if (stride < 1) throw ConfigError("scoring stride must be positive");
    if (clip_len < 2) throw ConfigError("scoring clip_len must be at least 2");
    if (target_slot >= clip_len) {
      throw ConfigError("target_slot " + std::to_string(target_slot) + " must be below clip_len " +
                        std::to_string(clip_len));
    }
    if (threads == 0) throw ConfigError("scoring threads must be positive");
  }
};

struct TargetWindow {
  ClipSpec clip;
  std::size_t slot = 0;
};

// Window of clip_len frames containing t. Ideally t sits at target_slot with
// the configured stride; near either end of the video the window is shifted
// along t's stride lattice until it fits. If no shift fits, the stride is
// lowered one step at a time (stride 1 always fits once num_frames >= clip_len).
inline TargetWindow window_for_target(std::size_t num_frames, std::size_t t,
                                      const ScoringConfig& cfg, const std::string& video_id = "") {
  cfg.validate();
  const auto L = cfg.clip_len;
  if (num_frames < L) {
    throw ScoringError("video '" + video_id + "' has " + std::to_string(num_frames) +
                       " frames, fewer than clip_len " + std::to_string(L));
  }
  if (t >= num_frames) {
    throw UsageError("target frame " + std::to_string(t) + " outside video of " +
                     std::to_string(num_frames) + " frames");
  }
  for (auto s = std::min(cfg.stride, max_feasible_stride(num_frames, L)); s >= 1; --s) {
    const auto span = 1 + (L - 1) * s;
    const auto last_start = num_frames - span;
    const auto ideal = static_cast<long long>(t) - static_cast<long long>(cfg.target_slot * s);
    std::size_t start;
    if (ideal < 0) {
      start = t % s;
      if (start > last_start) continue;
    } else if (static_cast<std::size_t>(ideal) > last_start) {
      const auto back = (last_start + s - t % s) % s;  // last_start - start, start ≡ t (mod s)
      if (back > last_start) continue;
      start = last_start - back;
    } else {
      start = static_cast<std::size_t>(ideal);
    }
    return {ClipSpec{video_id, start, s, L}, (t - start) / s};
  }
  throw ScoringError("no window fits frame " + std::to_string(t));  // unreachable for s = 1
}

inline constexpr double kCosineEps = 1e-12;

// 1 − cos(a, b), clamped to [0, 2]. Norms below kCosineEps are floored.
inline double cosine_dissimilarity(std::span<const float> a, std::span<const float> b) {
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  const double cos = dot / (std::max(std::sqrt(na), kCosineEps) * std::max(std::sqrt(nb), kCosineEps));
  return std::clamp(1.0 - cos, 0.0, 2.0);
}

struct FrameScore {
  double score = 0;
  bool zero_norm_original = false;
};

inline FrameScore score_frame(const Autoencoder& model, const FeatureSequence& video,
                              std::size_t t, const ScoringConfig& cfg) {
  if (cfg.clip_len != model.config().clip_len) {
    throw ConfigError("scoring clip_len " + std::to_string(cfg.clip_len) +
                      " differs from model clip_len " + std::to_string(model.config().clip_len));
  }
  const auto w = window_for_target(video.num_frames(), t, cfg, video.video_id);
  const auto clip = materialize(w.clip, video);
  const auto plan = single_mask(cfg.clip_len, w.slot);
  const auto recon = forward(model, clip, plan);
  const auto target = reconstruction_target(model.config(), clip);
  const auto original = target.row(w.slot);
  double norm = 0;
  for (float v : original) norm += static_cast<double>(v) * v;
  return {cosine_dissimilarity(recon.row(w.slot), original), std::sqrt(norm) < kCosineEps};
}

struct ImportanceCurve {
  std::string video_id;
  std::vector<double> scores;
  std::vector<std::size_t> zero_norm_frames;  // diagnostic: frames scored via the epsilon guard
};

// Every frame scored independently; threads write disjoint entries, so the
// result does not depend on the thread count.
inline ImportanceCurve score_video(const Autoencoder& model, const FeatureSequence& video,
                                   const ScoringConfig& cfg) {
  cfg.validate();
  const auto n = video.num_frames();
  if (n < cfg.clip_len) {
    throw ScoringError("video '" + video.video_id + "' has " + std::to_string(n) +
                       " frames, fewer than clip_len " + std::to_string(cfg.clip_len));
  }
  if (video.feature_dim() != model.config().input_dim) {
    throw ScoringError("video '" + video.video_id + "' has feature_dim " +
                       std::to_string(video.feature_dim()) + ", model expects " +
                       std::to_string(model.config().input_dim));
  }
  std::vector<FrameScore> frames(n);
  std::vector<std::string> errors(cfg.threads);
  auto work = [&](std::size_t w) {
    for (std::size_t t = w; t < n; t += cfg.threads) {
      try {
        frames[t] = score_frame(model, video, t, cfg);
      } catch (const Error& e) {
        errors[w] = "frame " + std::to_string(t) + " of '" + video.video_id + "': " + e.what();
        return;
      }
    }
  };
  if (cfg.threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < cfg.threads; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (!e.empty()) throw ScoringError(e);
  }
  ImportanceCurve curve{video.video_id, {}, {}};
  curve.scores.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    curve.scores.push_back(frames[t].score);
    if (frames[t].zero_norm_original) curve.zero_norm_frames.push_back(t);
  }
  return curve;
}

// Curve CSV: header "frame_index,score", one row per frame.
inline std::string format_curve_csv(const ImportanceCurve& c) {
  std::ostringstream os;
  os << "frame_index,score\n";
  char buf[64];
  for (std::size_t i = 0; i < c.scores.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i, c.scores[i]);
    os << buf;
  }
  return os.str();
}

inline void save_curve(const ImportanceCurve& c, const std::string& path) {
  write_text_file(path, format_curve_csv(c));
}

inline ImportanceCurve parse_curve_csv(const std::string& text, const std::string& video_id,
                                       const std::string& source = "curve") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind("frame_index,score", 0) != 0) {
    throw FormatError(source + ": expected header 'frame_index,score'");
  }
  ImportanceCurve c{video_id, {}, {}};
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    try {
      if (comma == std::string::npos) throw std::invalid_argument("no comma");
      const auto idx = std::stoull(line.substr(0, comma));
      if (idx != c.scores.size()) throw std::invalid_argument("frame index out of sequence");
      c.scores.push_back(std::stod(line.substr(comma + 1)));
    } catch (const std::exception& e) {
      throw FormatError(source + ":" + std::to_string(lineno) + ": malformed row (" + e.what() + ")");
    }
  }
  return c;
}

inline ImportanceCurve load_curve(const std::string& path, const std::string& video_id) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_curve_csv(ss.str(), video_id, path);
}

}  // namespace framemae
