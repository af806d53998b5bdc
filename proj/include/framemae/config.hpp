#pragma once

#include <cstdlib>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "framemae/checkpoint.hpp"
#include "framemae/errors.hpp"
#include "framemae/evaluator.hpp"
#include "framemae/scorer.hpp"
#include "framemae/trainer.hpp"

namespace framemae {

// Run configuration: one nested JSON document. Sections "model", "train",
// "score", "eval", "data", "splits" and "gradcheck" plus the top-level keys
// seed, threads and output_dir. Every leaf has a default; a config file and
// then command-line overrides are layered on top.

inline constexpr const char* kThreadsEnv = "FRAMEMAE_THREADS";

inline std::size_t default_threads() {
  if (const char* env = std::getenv(kThreadsEnv)) {
    try {
      std::size_t used = 0;
      const auto v = std::stoul(env, &used);
      if (used == std::string(env).size() && v > 0) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string(kThreadsEnv) + " must be a positive integer, got '" + env + "'");
  }
  return 1;
}

inline json default_run_config() {
  auto train = train_config_to_json(TrainConfig{});
  train.erase("seed");  // top-level seed and threads feed every module
  train.erase("threads");
  const ScoringConfig score;
  const EvalOptions eval;
  return json{
      {"seed", 0},
      {"threads", default_threads()},
      {"output_dir", "out"},
      {"model", model_config_to_json(ModelConfig{})},
      {"train", train},
      {"score", {{"stride", score.stride}, {"target_slot", -1}}},
      {"eval",
       {{"aggregation", to_string(eval.aggregation)},
        {"budget_fraction", eval.budget_fraction},
        {"f1_convention", to_string(eval.f1_convention)}}},
      {"data",
       {{"manifest", ""},
        {"checkpoint", ""},
        {"curves_dir", ""},
        {"splits", ""},
        {"models", json::object()},
        {"datasets", json::array()}}},
      {"splits", {{"count", 5}, {"test_fraction", 0.2}}},
      {"gradcheck", {{"preset", "tiny"}, {"seeds", 1}, {"fraction", 1.0}, {"mask_ratio", 0.5}}},
  };
}

// Fine-tuning presets, applied beneath the config file and flags.
inline json finetune_preset() {
  const auto f = TrainConfig::fine_tune(10000);
  return json{{"train",
               {{"mode", "samples"},
                {"total_samples", f.total_samples},
                {"warmup_epochs", f.warmup_epochs},
                {"clips_per_video", f.clips_per_video}}}};
}

inline const char* help_text(const std::string& key) {
  static const std::map<std::string, const char*> text{
      {"seed", "seed for initialization, sampling and splits"},
      {"threads", "worker threads (default from FRAMEMAE_THREADS)"},
      {"output_dir", "directory for all artifacts"},
      {"model.clip_len", "frames per clip"},
      {"model.input_dim", "feature dimension"},
      {"model.normalize_target", "standardize each target frame before the loss"},
      {"train.mode", "epochs | samples"},
      {"train.total_epochs", "training length in epochs mode"},
      {"train.total_samples", "training length in samples mode (clips)"},
      {"train.base_lr", "peak lr is base_lr * batch_size / 256"},
      {"train.weight_decay", "AdamW decoupled weight decay"},
      {"train.mask_ratio", "fraction of clip frames masked"},
      {"train.warmup_epochs", "linear warmup length in epochs"},
      {"train.stride", "clip stride policy: N, fixed(N) or rand(lo,hi)"},
      {"train.clips_per_video", "clips drawn per video per epoch"},
      {"score.stride", "scoring clip stride"},
      {"score.target_slot", "clip slot of the scored frame; -1 means clip_len/2"},
      {"eval.aggregation", "per_annotator_mean | mean_annotation"},
      {"eval.budget_fraction", "summary length as a fraction of the video"},
      {"eval.f1_convention", "mean | max over annotators"},
      {"data.manifest", "dataset manifest (JSON)"},
      {"data.checkpoint", "model checkpoint (VCK1)"},
      {"data.curves_dir", "curve CSV directory (default: <output_dir>/curves)"},
      {"data.splits", "split file; eval reports per split when set"},
      {"data.models", "crossval models as {\"tag\": \"checkpoint\"}"},
      {"data.datasets", "crossval manifests"},
      {"splits.count", "number of random splits"},
      {"splits.test_fraction", "fraction of videos per split"},
      {"gradcheck.preset", "tiny | model (use the model section)"},
      {"gradcheck.seeds", "number of seeds to check"},
      {"gradcheck.fraction", "fraction of parameters checked"},
  };
  const auto it = text.find(key);
  return it == text.end() ? "" : it->second;
}

// Leaf keys of the defaults in dotted form. Empty objects and arrays are
// leaves (free-form values).
inline void collect_leaves(const json& j, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [k, v] : j.items()) {
    const auto key = prefix.empty() ? k : prefix + "." + k;
    if (v.is_object() && !v.empty()) {
      collect_leaves(v, key, out);
    } else {
      out.push_back(key);
    }
  }
}

inline std::vector<std::string> config_keys(const json& defaults) {
  std::vector<std::string> out;
  collect_leaves(defaults, "", out);
  return out;
}

inline json::json_pointer key_pointer(const std::string& dotted) {
  std::string p;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    p += "/" + dotted.substr(start, dot - start);
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return json::json_pointer(p);
}

namespace detail {

inline bool same_kind(const json& def, const json& v) {
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_number_unsigned()) return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  if (def.is_object()) return v.is_object();
  return true;
}

inline const char* kind_name(const json& def) {
  if (def.is_boolean()) return "a boolean";
  if (def.is_number_unsigned()) return "a non-negative integer";
  if (def.is_number_integer()) return "an integer";
  if (def.is_number()) return "a number";
  if (def.is_string()) return "a string";
  if (def.is_array()) return "an array";
  return "an object";
}

inline void merge_into(json& base, const json& layer, const json& defaults, const std::string& prefix,
                       std::vector<std::string>& unknown, std::vector<std::string>& bad) {
  for (const auto& [k, v] : layer.items()) {
    const auto key = prefix.empty() ? k : prefix + "." + k;
    if (!defaults.contains(k)) {
      unknown.push_back(key);
      continue;
    }
    const auto& def = defaults.at(k);
    if (def.is_object() && !def.empty()) {
      if (!v.is_object()) {
        bad.push_back(key + " must be an object");
        continue;
      }
      merge_into(base[k], v, def, key, unknown, bad);
    } else if (!same_kind(def, v)) {
      bad.push_back(key + " must be " + kind_name(def));
    } else {
      base[k] = v;
    }
  }
}

}  // namespace detail

// Layers `layer` over `base`. Every unknown key and type mismatch is
// reported in a single ConfigError.
inline void merge_config(json& base, const json& layer, const json& defaults, const std::string& source) {
  if (!layer.is_object()) throw ConfigError(source + ": config must be a JSON object");
  std::vector<std::string> unknown, bad;
  detail::merge_into(base, layer, defaults, "", unknown, bad);
  std::string msg;
  if (!unknown.empty()) {
    msg = source + ": unknown config key" + (unknown.size() > 1 ? "s" : "") + ":";
    for (const auto& k : unknown) msg += " " + k;
  }
  for (const auto& b : bad) msg += (msg.empty() ? source + ": " : "; ") + b;
  if (!msg.empty()) throw ConfigError(msg);
}

// Parses a command-line value according to the type of the default.
inline json parse_override(const std::string& key, const std::string& text, const json& def) {
  auto fail = [&] { throw ConfigError("--" + key + ": cannot parse '" + text + "' as " + detail::kind_name(def)); };
  if (def.is_string()) return text;
  json v;
  try {
    v = json::parse(text);
  } catch (const json::parse_error&) {
    fail();
  }
  if (!detail::same_kind(def, v)) fail();
  return v;
}

inline std::string default_display(const json& v) {
  if (!v.is_string()) return v.dump();
  return v.get<std::string>().empty() ? "\"\"" : v.get<std::string>();
}

// Typed views of a resolved config.

inline TrainConfig train_config_of(const json& cfg) {
  auto t = cfg.at("train");
  t["seed"] = cfg.at("seed");
  t["threads"] = cfg.at("threads");
  auto c = train_config_from_json(t);
  c.validate();
  return c;
}

inline ModelConfig model_config_of(const json& cfg) { return model_config_from_json(cfg.at("model")); }

inline ScoringConfig scoring_config_of(const json& cfg, std::size_t clip_len) {
  auto c = ScoringConfig::for_clip_len(clip_len, cfg.at("score").at("stride").get<std::size_t>());
  const auto slot = cfg.at("score").at("target_slot").get<long long>();
  if (slot < -1) throw ConfigError("score.target_slot must be -1 or a clip slot");
  if (slot >= 0) c.target_slot = static_cast<std::size_t>(slot);
  c.threads = cfg.at("threads").get<std::size_t>();
  c.validate();
  return c;
}

inline EvalOptions eval_options_of(const json& cfg) {
  const auto& e = cfg.at("eval");
  EvalOptions o;
  o.aggregation = parse_aggregation(e.at("aggregation").get<std::string>());
  o.budget_fraction = e.at("budget_fraction").get<double>();
  o.f1_convention = parse_f1_convention(e.at("f1_convention").get<std::string>());
  if (!(o.budget_fraction >= 0 && o.budget_fraction <= 1)) {
    throw ConfigError("eval.budget_fraction must lie in [0,1]");
  }
  return o;
}

}  // namespace framemae
