#pragma once

#include <cstdint>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "framemae/binary_io.hpp"
#include "framemae/errors.hpp"
#include "framemae/model.hpp"

namespace framemae {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// ModelConfig <-> JSON. Unknown keys are rejected.

inline json model_config_to_json(const ModelConfig& c) {
  return json{{"clip_len", c.clip_len},   {"input_dim", c.input_dim},
              {"enc_depth", c.enc_depth}, {"enc_heads", c.enc_heads},
              {"enc_dim", c.enc_dim},     {"dec_depth", c.dec_depth},
              {"dec_heads", c.dec_heads}, {"dec_dim", c.dec_dim},
              {"mlp_ratio", c.mlp_ratio}, {"normalize_target", c.normalize_target}};
}

inline ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  const std::set<std::string> known{"clip_len",  "input_dim", "enc_depth", "enc_heads",
                                    "enc_dim",   "dec_depth", "dec_heads", "dec_dim",
                                    "mlp_ratio", "normalize_target"};
  for (const auto& [k, _] : j.items()) {
    if (!known.count(k)) throw ConfigError("unknown model config key '" + k + "'");
  }
  try {
    c.clip_len = j.value("clip_len", c.clip_len);
    c.input_dim = j.value("input_dim", c.input_dim);
    c.enc_depth = j.value("enc_depth", c.enc_depth);
    c.enc_heads = j.value("enc_heads", c.enc_heads);
    c.enc_dim = j.value("enc_dim", c.enc_dim);
    c.dec_depth = j.value("dec_depth", c.dec_depth);
    c.dec_heads = j.value("dec_heads", c.dec_heads);
    c.dec_dim = j.value("dec_dim", c.dec_dim);
    c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
    c.normalize_target = j.value("normalize_target", c.normalize_target);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Checkpoint file ("VCK1"), little-endian:
//
//   "VCK1", u32 version
//   u32 metadata length, metadata JSON {"model": {...}, "train": {...}}
//   u32 tensor count, then per tensor:
//     u32 name length, name, u32 rank, u32 × rank extents,
//     u64 offset (in floats from the start of the payload)
//   u64 payload float count, f32 × count

inline constexpr std::string_view kCheckpointMagic = "VCK1";
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Autoencoder model;
  json train_config;  // opaque to this module; null if absent
};

inline std::vector<std::uint8_t> encode_checkpoint(const Autoencoder& model,
                                                   const json& train_config) {
  ByteWriter w;
  w.put_bytes(kCheckpointMagic);
  w.put_u32(kCheckpointVersion);
  json meta{{"model", model_config_to_json(model.config())}};
  if (!train_config.is_null()) meta["train"] = train_config;
  const auto meta_text = meta.dump();
  w.put_u32(static_cast<std::uint32_t>(meta_text.size()));
  w.put_bytes(meta_text);
  const auto& params = model.parameters();
  w.put_u32(static_cast<std::uint32_t>(params.size()));
  std::uint64_t offset = 0;
  for (const auto& p : params) {
    w.put_u32(static_cast<std::uint32_t>(p.name.size()));
    w.put_bytes(p.name);
    w.put_u32(static_cast<std::uint32_t>(p.value.rank()));
    for (auto extent : p.value.shape()) w.put_u32(static_cast<std::uint32_t>(extent));
    w.put_u64(offset);
    offset += p.value.size();
  }
  w.put_u64(offset);
  for (const auto& p : params) {
    for (float v : p.value.flat()) w.put_f32(v);
  }
  return w.bytes();
}

inline void save_checkpoint(const Autoencoder& model, const json& train_config,
                            const std::string& path) {
  write_bytes_file(path, encode_checkpoint(model, train_config));
}

namespace detail {

struct TensorEntry {
  std::string name;
  Shape shape;
  std::uint64_t offset = 0;
};

}  // namespace detail

// Reads a checkpoint. When `expected` is given, the stored tensors must match
// the layout that config implies; otherwise the stored config is used.
inline Checkpoint load_checkpoint(const std::string& path,
                                  const ModelConfig* expected = nullptr) {
  auto r = ByteReader::from_file(path);
  if (r.bytes(4, "magic") != kCheckpointMagic) r.fail("bad magic, expected VCK1", 0);
  const auto version_at = r.offset();
  if (r.u32("version") != kCheckpointVersion) r.fail("unsupported checkpoint version", version_at);
  const auto meta_len = r.u32("metadata length");
  const auto meta_at = r.offset();
  json meta;
  try {
    meta = json::parse(r.bytes(meta_len, "metadata"));
  } catch (const json::parse_error& e) {
    r.fail(std::string("malformed metadata: ") + e.what(), meta_at);
  }
  if (!meta.is_object() || !meta.contains("model")) r.fail("metadata has no model config", meta_at);
  const auto stored_config = model_config_from_json(meta.at("model"));

  const auto count = r.u32("tensor count");
  std::vector<detail::TensorEntry> entries(count);
  for (auto& e : entries) {
    e.name = r.bytes(r.u32("name length"), "tensor name");
    const auto rank = r.u32("rank");
    for (std::uint32_t i = 0; i < rank; ++i) e.shape.push_back(r.u32("extent"));
    e.offset = r.u64("offset");
  }
  const auto payload_count = r.u64("payload count");
  if (r.remaining() != payload_count * 4) {
    r.fail("payload is " + std::to_string(r.remaining()) + " bytes, manifest declares " +
           std::to_string(payload_count) + " floats");
  }

  const ModelConfig& config = expected ? *expected : stored_config;
  Autoencoder model(config);
  auto& params = model.parameters();

  std::vector<std::string> problems;
  std::set<std::string> stored_names;
  for (const auto& e : entries) stored_names.insert(e.name);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    if (i >= entries.size() || entries[i].name != p.name) {
      if (!stored_names.count(p.name)) {
        problems.push_back("missing tensor '" + p.name + "'");
      } else {
        problems.push_back("tensor '" + p.name + "' is out of order");
      }
      continue;
    }
    if (entries[i].shape != p.value.shape()) {
      problems.push_back("tensor '" + p.name + "' has shape " + shape_string(entries[i].shape) +
                         ", config expects " + shape_string(p.value.shape()));
    }
    total += shape_size(entries[i].shape);
  }
  for (std::size_t i = params.size(); i < entries.size(); ++i) {
    problems.push_back("unexpected tensor '" + entries[i].name + "'");
  }
  if (problems.empty() && total != payload_count) {
    problems.push_back("payload holds " + std::to_string(payload_count) +
                       " floats, tensors need " + std::to_string(total));
  }
  if (!problems.empty()) {
    std::ostringstream os;
    os << path << ": checkpoint does not match model config; first mismatch: " << problems.front();
    if (problems.size() > 1) {
      os << " (" << problems.size() << " discrepancies:";
      for (const auto& p : problems) os << "\n  " << p;
      os << ")";
    }
    throw CheckpointError(os.str());
  }

  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto expected_offset = (i == 0) ? 0 : entries[i - 1].offset + params[i - 1].value.size();
    if (entries[i].offset != expected_offset) {
      throw CheckpointError(path + ": tensor '" + entries[i].name + "' has offset " +
                            std::to_string(entries[i].offset) + ", expected " +
                            std::to_string(expected_offset));
    }
    for (auto& v : params[i].value.storage()) {
      const auto at = r.offset();
      v = r.f32("payload");
      if (!std::isfinite(v)) r.fail("non-finite parameter in '" + params[i].name + "'", at);
    }
  }
  return Checkpoint{std::move(model), meta.contains("train") ? meta.at("train") : json()};
}

}  // namespace framemae
