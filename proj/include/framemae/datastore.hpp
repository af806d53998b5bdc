#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "framemae/binary_io.hpp"
#include "framemae/errors.hpp"
#include "framemae/rng.hpp"
#include "framemae/tensor.hpp"

namespace framemae {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ===========================================================================
// Feature sequences: the "VFT1" binary format.
//
//   bytes 0..3   magic "VFT1"
//   u32          format version (1)
//   u32          feature_dim
//   u32          num_frames
//   f32          fps
//   u32          video_id length in bytes
//   ...          video_id, UTF-8
//   f32 × num_frames·feature_dim, row-major
//
// All integers and floats little-endian.

inline constexpr std::string_view kFeatureMagic = "VFT1";
inline constexpr std::uint32_t kFeatureVersion = 1;

struct FeatureSequence {
  std::string video_id;
  float fps = 0;
  Tensor frames;  // [num_frames × feature_dim]

  std::size_t num_frames() const noexcept { return frames.rows(); }
  std::size_t feature_dim() const noexcept { return frames.cols(); }

  friend bool operator==(const FeatureSequence&, const FeatureSequence&) = default;
};

struct FeatureHeader {
  std::string video_id;
  float fps = 0;
  std::uint32_t feature_dim = 0;
  std::uint32_t num_frames = 0;
  std::size_t payload_offset = 0;
};

inline std::vector<std::uint8_t> encode_features(const FeatureSequence& seq) {
  if (seq.frames.rank() != 2 || seq.frames.empty()) {
    throw UsageError("feature sequence '" + seq.video_id + "' has no frames");
  }
  if (!(seq.fps > 0) || !std::isfinite(seq.fps)) {
    throw UsageError("feature sequence '" + seq.video_id + "' has invalid fps");
  }
  ByteWriter w;
  w.put_bytes(kFeatureMagic);
  w.put_u32(kFeatureVersion);
  w.put_u32(static_cast<std::uint32_t>(seq.feature_dim()));
  w.put_u32(static_cast<std::uint32_t>(seq.num_frames()));
  w.put_f32(seq.fps);
  w.put_u32(static_cast<std::uint32_t>(seq.video_id.size()));
  w.put_bytes(seq.video_id);
  for (float v : seq.frames.flat()) w.put_f32(v);
  return w.bytes();
}

inline void write_features(const FeatureSequence& seq, const std::string& path) {
  write_bytes_file(path, encode_features(seq));
}

inline FeatureHeader read_feature_header(ByteReader& r) {
  if (r.bytes(4, "magic") != kFeatureMagic) r.fail("bad magic, expected VFT1", 0);
  const auto version_at = r.offset();
  if (r.u32("version") != kFeatureVersion) r.fail("unsupported format version", version_at);
  FeatureHeader h;
  const auto dim_at = r.offset();
  h.feature_dim = r.u32("feature_dim");
  if (h.feature_dim == 0) r.fail("feature_dim must be positive", dim_at);
  const auto frames_at = r.offset();
  h.num_frames = r.u32("num_frames");
  if (h.num_frames == 0) r.fail("num_frames must be positive", frames_at);
  const auto fps_at = r.offset();
  h.fps = r.f32("fps");
  if (!(h.fps > 0) || !std::isfinite(h.fps)) r.fail("fps must be positive and finite", fps_at);
  const auto id_len = r.u32("video_id length");
  h.video_id = r.bytes(id_len, "video_id");
  h.payload_offset = r.offset();
  return h;
}

inline FeatureHeader read_feature_header(const std::string& path) {
  auto r = ByteReader::from_file(path);
  return read_feature_header(r);
}

inline FeatureSequence decode_features(ByteReader& r) {
  const auto h = read_feature_header(r);
  const std::size_t count = std::size_t{h.num_frames} * h.feature_dim;
  if (r.remaining() != count * 4) {
    r.fail("payload length " + std::to_string(r.remaining()) +
           " bytes disagrees with declared " + std::to_string(h.num_frames) + "x" +
           std::to_string(h.feature_dim) + " floats (" + std::to_string(count * 4) +
           " bytes)");
  }
  FeatureSequence seq;
  seq.video_id = h.video_id;
  seq.fps = h.fps;
  seq.frames = Tensor::matrix(h.num_frames, h.feature_dim);
  for (std::size_t i = 0; i < count; ++i) {
    const auto at = r.offset();
    const float v = r.f32("payload");
    if (!std::isfinite(v)) r.fail("non-finite feature value", at);
    seq.frames[i] = v;
  }
  return seq;
}

inline FeatureSequence read_features(const std::string& path) {
  auto r = ByteReader::from_file(path);
  return decode_features(r);
}

// ===========================================================================
// Annotations: JSON documents
//
//   {
//     "video_id": "video_1",
//     "fps": 30.0,                         optional
//     "scores": [[...], ...],              one row per annotator
//     "change_points": [[0, 45], ...],     optional, half-open, covering
//     "segment_frames": [45, ...]          optional, frames per segment
//   }

struct AnnotationSet {
  std::string video_id;
  std::optional<double> fps;
  std::vector<std::vector<double>> scores;  // [annotator][frame]
  std::vector<std::pair<std::size_t, std::size_t>> change_points;
  std::vector<std::size_t> segment_frames;

  std::size_t num_frames() const { return scores.empty() ? 0 : scores.front().size(); }
  std::size_t num_annotators() const { return scores.size(); }
  bool has_change_points() const { return !change_points.empty(); }

  // Frame-wise mean over annotators.
  std::vector<double> mean_scores() const {
    std::vector<double> mean(num_frames(), 0.0);
    for (const auto& row : scores) {
      for (std::size_t i = 0; i < row.size(); ++i) mean[i] += row[i];
    }
    for (auto& v : mean) v /= static_cast<double>(scores.size());
    return mean;
  }

  void validate() const {
    auto fail = [&](const std::string& m) {
      throw FormatError("annotations for '" + video_id + "': " + m);
    };
    if (scores.empty()) fail("no annotator rows");
    const auto n = scores.front().size();
    if (n == 0) fail("annotator rows are empty");
    for (std::size_t a = 0; a < scores.size(); ++a) {
      if (scores[a].size() != n) {
        fail("annotator row " + std::to_string(a) + " has " +
             std::to_string(scores[a].size()) + " frames, expected " + std::to_string(n));
      }
      for (double v : scores[a]) {
        if (!std::isfinite(v)) fail("non-finite score in annotator row " + std::to_string(a));
      }
    }
    if (!change_points.empty()) {
      std::size_t expected_start = 0;
      for (std::size_t s = 0; s < change_points.size(); ++s) {
        const auto [b, e] = change_points[s];
        if (b != expected_start || e <= b) {
          fail("change point " + std::to_string(s) + " [" + std::to_string(b) + "," +
               std::to_string(e) + ") is not contiguous with the previous segment");
        }
        expected_start = e;
      }
      if (expected_start != n) {
        fail("change points cover " + std::to_string(expected_start) + " frames, expected " +
             std::to_string(n));
      }
      if (!segment_frames.empty()) {
        if (segment_frames.size() != change_points.size()) fail("segment_frames length differs from change_points");
        for (std::size_t s = 0; s < segment_frames.size(); ++s) {
          if (segment_frames[s] != change_points[s].second - change_points[s].first) {
            fail("segment_frames[" + std::to_string(s) + "] disagrees with change points");
          }
        }
      }
    } else if (!segment_frames.empty()) {
      fail("segment_frames given without change_points");
    }
  }

  friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

inline AnnotationSet annotations_from_json(const json& j, const std::string& source) {
  static const std::set<std::string> known{"video_id", "fps", "scores", "change_points",
                                           "segment_frames"};
  try {
    if (!j.is_object()) throw FormatError(source + ": annotation document must be an object");
    for (const auto& [k, _] : j.items()) {
      if (!known.count(k)) throw FormatError(source + ": unknown annotation key '" + k + "'");
    }
    AnnotationSet a;
    a.video_id = j.at("video_id").get<std::string>();
    if (j.contains("fps")) a.fps = j.at("fps").get<double>();
    a.scores = j.at("scores").get<std::vector<std::vector<double>>>();
    if (j.contains("change_points")) {
      for (const auto& cp : j.at("change_points")) {
        const auto pair = cp.get<std::vector<std::int64_t>>();
        if (pair.size() != 2 || pair[0] < 0 || pair[1] < 0) {
          throw FormatError(source + ": change points must be [start, end) pairs");
        }
        a.change_points.emplace_back(pair[0], pair[1]);
      }
    }
    if (j.contains("segment_frames")) a.segment_frames = j.at("segment_frames").get<std::vector<std::size_t>>();
    a.validate();
    return a;
  } catch (const json::exception& e) {
    throw FormatError(source + ": " + e.what());
  }
}

inline json annotations_to_json(const AnnotationSet& a) {
  json j;
  j["video_id"] = a.video_id;
  if (a.fps) j["fps"] = *a.fps;
  j["scores"] = a.scores;
  if (!a.change_points.empty()) {
    json cps = json::array();
    for (auto [b, e] : a.change_points) cps.push_back({b, e});
    j["change_points"] = cps;
  }
  if (!a.segment_frames.empty()) j["segment_frames"] = a.segment_frames;
  return j;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw UsageError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw UsageError("failed writing '" + path + "'");
}

inline AnnotationSet load_annotations(const std::string& path) {
  return annotations_from_json(read_json_file(path), path);
}

inline void save_annotations(const AnnotationSet& a, const std::string& path) {
  a.validate();
  write_text_file(path, annotations_to_json(a).dump(1) + "\n");
}

// ===========================================================================
// Dataset manifests
//
//   {
//     "name": "tvsum",
//     "roles": ["ssl", "eval"],
//     "entries": [{"video_id": "...", "features": "f.vft",
//                  "annotations": "a.json"}, ...]
//   }
//
// Relative paths resolve against the manifest's directory.

struct ManifestEntry {
  std::string video_id;
  std::string features;
  std::optional<std::string> annotations;
};

struct DatasetManifest {
  std::string name;
  bool ssl = true;
  bool eval = false;
  std::vector<ManifestEntry> entries;

  void validate() const {
    std::set<std::string> seen;
    for (const auto& e : entries) {
      if (!seen.insert(e.video_id).second) {
        throw FormatError("manifest '" + name + "': duplicate video_id '" + e.video_id + "'");
      }
      if (eval && !e.annotations) {
        throw FormatError("manifest '" + name + "': evaluation entry '" + e.video_id +
                          "' has no annotations");
      }
    }
  }

  std::vector<std::string> video_ids() const {
    std::vector<std::string> ids;
    for (const auto& e : entries) ids.push_back(e.video_id);
    return ids;
  }

  const ManifestEntry& entry(const std::string& id) const {
    for (const auto& e : entries) {
      if (e.video_id == id) return e;
    }
    throw UsageError("video '" + id + "' is not in manifest '" + name + "'");
  }
};

inline DatasetManifest manifest_from_json(const json& j, const fs::path& base_dir,
                                          const std::string& source) {
  try {
    static const std::set<std::string> known{"name", "roles", "entries"};
    for (const auto& [k, _] : j.items()) {
      if (!known.count(k)) throw FormatError(source + ": unknown manifest key '" + k + "'");
    }
    DatasetManifest m;
    m.name = j.at("name").get<std::string>();
    m.ssl = false;
    for (const auto& role : j.value("roles", std::vector<std::string>{"ssl"})) {
      if (role == "ssl") {
        m.ssl = true;
      } else if (role == "eval") {
        m.eval = true;
      } else {
        throw FormatError(source + ": unknown role '" + role + "'");
      }
    }
    auto resolve = [&](const std::string& p) {
      fs::path path(p);
      return (path.is_absolute() ? path : base_dir / path).lexically_normal().string();
    };
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.video_id = e.at("video_id").get<std::string>();
      entry.features = resolve(e.at("features").get<std::string>());
      if (e.contains("annotations")) entry.annotations = resolve(e.at("annotations").get<std::string>());
      m.entries.push_back(std::move(entry));
    }
    m.validate();
    return m;
  } catch (const json::exception& e) {
    throw FormatError(source + ": " + e.what());
  }
}

inline DatasetManifest load_manifest(const std::string& path) {
  return manifest_from_json(read_json_file(path), fs::path(path).parent_path(), path);
}

inline json manifest_to_json(const DatasetManifest& m) {
  json j;
  j["name"] = m.name;
  std::vector<std::string> roles;
  if (m.ssl) roles.push_back("ssl");
  if (m.eval) roles.push_back("eval");
  j["roles"] = roles;
  j["entries"] = json::array();
  for (const auto& e : m.entries) {
    json je{{"video_id", e.video_id}, {"features", e.features}};
    if (e.annotations) je["annotations"] = *e.annotations;
    j["entries"].push_back(je);
  }
  return j;
}

inline void save_manifest(const DatasetManifest& m, const std::string& path) {
  write_text_file(path, manifest_to_json(m).dump(1) + "\n");
}

inline std::vector<FeatureSequence> load_features(const DatasetManifest& m) {
  std::vector<FeatureSequence> out;
  out.reserve(m.entries.size());
  for (const auto& e : m.entries) {
    auto seq = read_features(e.features);
    if (seq.video_id != e.video_id) {
      throw FormatError(e.features + ": video_id '" + seq.video_id +
                        "' does not match manifest id '" + e.video_id + "'");
    }
    out.push_back(std::move(seq));
  }
  return out;
}

inline std::map<std::string, AnnotationSet> load_all_annotations(const DatasetManifest& m) {
  std::map<std::string, AnnotationSet> out;
  for (const auto& e : m.entries) {
    if (e.annotations) out.emplace(e.video_id, load_annotations(*e.annotations));
  }
  return out;
}

// ===========================================================================
// Manifest validation. Never throws on data problems; collects them.

struct ValidationIssue {
  std::string video_id;
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
};

inline ValidationReport validate_manifest(const DatasetManifest& m) {
  ValidationReport report;
  std::map<std::uint32_t, std::vector<std::string>> by_dim;
  for (const auto& e : m.entries) {
    std::optional<FeatureHeader> header;
    if (!fs::exists(e.features)) {
      report.issues.push_back({e.video_id, "feature file missing: " + e.features});
    } else {
      try {
        auto r = ByteReader::from_file(e.features);
        header = read_feature_header(r);
        const std::size_t expected = std::size_t{header->num_frames} * header->feature_dim * 4;
        if (r.remaining() != expected) {
          report.issues.push_back({e.video_id, "feature payload is " + std::to_string(r.remaining()) +
                                                   " bytes, header declares " + std::to_string(expected)});
        }
        if (header->video_id != e.video_id) {
          report.issues.push_back({e.video_id, "feature file declares video_id '" +
                                                   header->video_id + "'"});
        }
        by_dim[header->feature_dim].push_back(e.video_id);
      } catch (const Error& err) {
        report.issues.push_back({e.video_id, err.what()});
      }
    }
    if (e.annotations) {
      if (!fs::exists(*e.annotations)) {
        report.issues.push_back({e.video_id, "annotation file missing: " + *e.annotations});
      } else {
        try {
          const auto ann = load_annotations(*e.annotations);
          if (header && ann.num_frames() != header->num_frames) {
            report.issues.push_back(
                {e.video_id, "frame count mismatch: features have " +
                                 std::to_string(header->num_frames) + ", annotations have " +
                                 std::to_string(ann.num_frames())});
          }
        } catch (const Error& err) {
          report.issues.push_back({e.video_id, err.what()});
        }
      }
    } else if (m.eval) {
      report.issues.push_back({e.video_id, "evaluation entry without annotations"});
    }
  }
  if (by_dim.size() > 1) {
    // The most common dimension is taken as the dataset's; the rest are listed.
    auto majority = std::max_element(by_dim.begin(), by_dim.end(), [](const auto& a, const auto& b) {
      return a.second.size() < b.second.size();
    });
    std::ostringstream os;
    os << "mixed feature_dim (dataset uses " << majority->first << "); offending ids:";
    for (const auto& [dim, ids] : by_dim) {
      if (dim == majority->first) continue;
      for (const auto& id : ids) os << ' ' << id << '(' << dim << ')';
    }
    report.issues.push_back({"", os.str()});
  }
  return report;
}

// ===========================================================================
// Split sets. Text layout:
//
//   Split 1:
//     video_35
//     video_23
//   Split 2:
//     ...

struct Split {
  std::string name;
  std::vector<std::string> video_ids;
  friend bool operator==(const Split&, const Split&) = default;
};

struct SplitSet {
  std::vector<Split> splits;
  friend bool operator==(const SplitSet&, const SplitSet&) = default;
};

inline SplitSet generate_splits(const std::vector<std::string>& ids, std::size_t num_splits,
                                double test_fraction, std::uint64_t seed) {
  if (ids.empty()) throw UsageError("generate_splits: empty manifest");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw UsageError("generate_splits: test_fraction must lie in (0,1)");
  }
  if (num_splits == 0) throw UsageError("generate_splits: num_splits must be positive");
  const auto count = static_cast<std::size_t>(
      std::llround(test_fraction * static_cast<double>(ids.size())));
  if (count == 0) throw UsageError("generate_splits: test_fraction selects no videos");
  SplitSet set;
  for (std::size_t s = 0; s < num_splits; ++s) {
    Rng rng(seed, "splits", s);
    auto pool = ids;
    for (std::size_t i = 0; i < count; ++i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(
          static_cast<std::int64_t>(i), static_cast<std::int64_t>(pool.size() - 1)));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    set.splits.push_back({"Split " + std::to_string(s + 1), std::move(pool)});
  }
  return set;
}

inline SplitSet generate_splits(const DatasetManifest& m, std::size_t num_splits,
                                double test_fraction, std::uint64_t seed) {
  return generate_splits(m.video_ids(), num_splits, test_fraction, seed);
}

inline std::string format_splits(const SplitSet& set) {
  std::ostringstream os;
  for (const auto& s : set.splits) {
    os << s.name << ":\n";
    for (const auto& id : s.video_ids) os << "  " << id << '\n';
  }
  return os.str();
}

inline SplitSet parse_splits(const std::string& text, const std::string& source = "splits") {
  SplitSet set;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t");
    const auto body = line.substr(first, last - first + 1);
    if (first == 0) {
      if (body.back() != ':') {
        throw FormatError(source + ":" + std::to_string(lineno) + ": expected 'Split N:' header");
      }
      set.splits.push_back({body.substr(0, body.size() - 1), {}});
    } else {
      if (set.splits.empty()) {
        throw FormatError(source + ":" + std::to_string(lineno) + ": video id before any split header");
      }
      set.splits.back().video_ids.push_back(body);
    }
  }
  return set;
}

inline SplitSet load_splits(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_splits(ss.str(), path);
}

inline void require_splits_in_manifest(const SplitSet& set, const DatasetManifest& m) {
  const auto ids = m.video_ids();
  const std::set<std::string> known(ids.begin(), ids.end());
  for (const auto& s : set.splits) {
    for (const auto& id : s.video_ids) {
      if (!known.count(id)) {
        throw UsageError(s.name + " references '" + id + "', which is not in manifest '" +
                         m.name + "'");
      }
    }
  }
}

}  // namespace framemae
