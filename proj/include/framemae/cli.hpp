#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "framemae/checkpoint.hpp"
#include "framemae/config.hpp"
#include "framemae/datastore.hpp"
#include "framemae/evaluator.hpp"
#include "framemae/gradcheck.hpp"
#include "framemae/scorer.hpp"
#include "framemae/trainer.hpp"

namespace framemae {

namespace cli_detail {

namespace fs = std::filesystem;

struct Context {
  json cfg;
  fs::path out_dir;
  std::ostream& out;
  std::ostream& err;
};

inline std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

inline std::string require_path(const json& cfg, const std::string& key) {
  const auto v = cfg.at(key_pointer(key)).get<std::string>();
  if (v.empty()) throw UsageError("this command needs --" + key);
  return v;
}

// Video ids become file names.
inline std::string file_name_for(const std::string& id, const std::string& ext) {
  if (id.empty() || id == "." || id == ".." || id.find_first_of("/\\") != std::string::npos) {
    throw UsageError("video id '" + id + "' cannot be used as a file name");
  }
  return id + ext;
}

inline fs::path curves_dir(const Context& c) {
  const auto d = c.cfg.at("data").at("curves_dir").get<std::string>();
  return d.empty() ? c.out_dir / "curves" : fs::path(d);
}

inline void write_json(const fs::path& p, const json& j) { write_text_file(p.string(), j.dump(2) + "\n"); }

inline CurveMap load_curves(const fs::path& dir, const AnnotationMap& anns) {
  CurveMap curves;
  for (const auto& [id, _] : anns) {
    curves[id] = load_curve((dir / file_name_for(id, ".csv")).string(), id).scores;
  }
  return curves;
}

inline std::string run_training(Context& c, Autoencoder model, const TrainConfig& tc) {
  const auto manifest = load_manifest(require_path(c.cfg, "data.manifest"));
  const auto corpus = load_features(manifest);
  if (corpus.empty()) throw UsageError("manifest '" + manifest.name + "' has no videos");
  std::ofstream trace(c.out_dir / "trace.csv");
  if (!trace) throw UsageError("cannot write " + (c.out_dir / "trace.csv").string());
  write_trace_header(trace);
  TrainHooks hooks;
  hooks.trace_csv = &trace;
  const auto result = train(model, corpus, tc, hooks);
  const auto ckpt = c.out_dir / "checkpoint.vck";
  save_checkpoint(model, train_config_to_json(tc), ckpt.string());
  std::ostringstream os;
  os << result.trace.size() << " iterations over " << corpus.size() << " videos, final loss "
     << (result.trace.empty() ? 0.0 : result.trace.back().loss) << ", checkpoint " << ckpt.string();
  return os.str();
}

inline std::string cmd_train(Context& c) {
  const auto tc = train_config_of(c.cfg);
  return run_training(c, Autoencoder::initialize(model_config_of(c.cfg), c.cfg.at("seed").get<std::uint64_t>()), tc);
}

inline std::string cmd_finetune(Context& c) {
  const auto tc = train_config_of(c.cfg);
  auto ck = load_checkpoint(require_path(c.cfg, "data.checkpoint"));
  return run_training(c, std::move(ck.model), tc);
}

inline std::string cmd_score(Context& c) {
  const auto ck = load_checkpoint(require_path(c.cfg, "data.checkpoint"));
  const auto manifest = load_manifest(require_path(c.cfg, "data.manifest"));
  const auto sc = scoring_config_of(c.cfg, ck.model.config().clip_len);
  const auto dir = curves_dir(c);
  fs::create_directories(dir);
  std::size_t flagged = 0;
  for (const auto& video : load_features(manifest)) {
    const auto curve = score_video(ck.model, video, sc);
    if (!curve.zero_norm_frames.empty()) {
      c.err << "warning: " << video.video_id << ": " << curve.zero_norm_frames.size()
            << " zero-norm frame(s) scored as 1\n";
      ++flagged;
    }
    save_curve(curve, (dir / file_name_for(video.video_id, ".csv")).string());
  }
  std::ostringstream os;
  os << manifest.entries.size() << " curves written to " << dir.string();
  if (flagged) os << " (" << flagged << " with zero-norm frames)";
  return os.str();
}

inline std::string cmd_eval(Context& c) {
  const auto manifest = load_manifest(require_path(c.cfg, "data.manifest"));
  const auto anns = load_all_annotations(manifest);
  if (anns.empty()) throw UsageError("manifest '" + manifest.name + "' has no annotated videos");
  const auto curves = load_curves(curves_dir(c), anns);
  const auto opt = eval_options_of(c.cfg);
  const auto splits_path = c.cfg.at("data").at("splits").get<std::string>();
  std::ostringstream os;
  if (!splits_path.empty()) {
    const auto set = load_splits(splits_path);
    require_splits_in_manifest(set, manifest);
    const auto r = evaluate_splits(curves, anns, set, opt);
    write_json(c.out_dir / "split_report.json", split_report_to_json(r));
    os << r.splits.size() << " splits, mean tau " << fmt_opt(r.mean_tau) << ", rho " << fmt_opt(r.mean_rho)
       << ", F1 " << (r.mean_f1 ? fmt_opt(r.mean_f1) : "unsupported");
  } else {
    const auto r = evaluate_dataset(curves, anns, opt);
    write_json(c.out_dir / "report.json", report_to_json(r));
    write_text_file((c.out_dir / "report.csv").string(), format_report_csv(r));
    os << r.videos.size() << " videos, mean tau " << fmt_opt(r.mean_tau) << ", rho " << fmt_opt(r.mean_rho)
       << ", F1 " << (r.mean_f1 ? fmt_opt(r.mean_f1) : "unsupported");
    if (r.undefined_tau || r.undefined_rho) {
      os << " (" << r.undefined_tau << " undefined tau, " << r.undefined_rho << " undefined rho)";
    }
  }
  return os.str();
}

inline std::string cmd_crossval(Context& c) {
  const auto& models_j = c.cfg.at("data").at("models");
  const auto& datasets_j = c.cfg.at("data").at("datasets");
  if (models_j.empty()) throw UsageError("crossval needs at least one --model TAG=CHECKPOINT");
  if (datasets_j.empty()) throw UsageError("crossval needs at least one --dataset MANIFEST");
  std::vector<std::pair<std::string, std::unique_ptr<Autoencoder>>> owned;
  for (const auto& [tag, path] : models_j.items()) {
    if (!path.is_string()) throw ConfigError("data.models." + tag + " must be a checkpoint path");
    owned.emplace_back(tag, std::make_unique<Autoencoder>(load_checkpoint(path.get<std::string>()).model));
  }
  const auto clip_len = owned.front().second->config().clip_len;
  std::vector<std::pair<std::string, const Autoencoder*>> models;
  for (const auto& [tag, m] : owned) {
    if (m->config().clip_len != clip_len) throw UsageError("crossval models must share one clip_len");
    models.emplace_back(tag, m.get());
  }
  std::vector<EvalDataset> datasets;
  for (const auto& p : datasets_j) {
    if (!p.is_string()) throw ConfigError("data.datasets entries must be manifest paths");
    const auto m = load_manifest(p.get<std::string>());
    datasets.push_back({m.name, load_features(m), load_all_annotations(m)});
  }
  const auto matrix = cross_matrix(models, datasets, scoring_config_of(c.cfg, clip_len), eval_options_of(c.cfg));
  write_text_file((c.out_dir / "cross.csv").string(), format_cross_csv(matrix));
  json cells = json::object();
  for (std::size_t i = 0; i < matrix.models.size(); ++i) {
    for (std::size_t j = 0; j < matrix.datasets.size(); ++j) {
      cells[matrix.models[i]][matrix.datasets[j]] = {{"tau", optional_json(matrix.cells[i][j].tau)},
                                                     {"rho", optional_json(matrix.cells[i][j].rho)}};
    }
  }
  write_json(c.out_dir / "cross.json", cells);
  return std::to_string(models.size()) + " models x " + std::to_string(datasets.size()) + " datasets written to " +
         (c.out_dir / "cross.csv").string();
}

inline std::string cmd_splitgen(Context& c) {
  const auto manifest = load_manifest(require_path(c.cfg, "data.manifest"));
  const auto& s = c.cfg.at("splits");
  const auto set = generate_splits(manifest, s.at("count").get<std::size_t>(), s.at("test_fraction").get<double>(),
                                   c.cfg.at("seed").get<std::uint64_t>());
  const auto path = c.out_dir / "splits.txt";
  write_text_file(path.string(), format_splits(set));
  return std::to_string(set.splits.size()) + " splits of " + std::to_string(set.splits.front().video_ids.size()) +
         " videos written to " + path.string();
}

inline std::string cmd_gradcheck(Context& c) {
  const auto& g = c.cfg.at("gradcheck");
  const auto preset = g.at("preset").get<std::string>();
  ModelConfig mc;
  if (preset == "tiny") {
    mc = ModelConfig::tiny();
  } else if (preset == "model") {
    mc = model_config_of(c.cfg);
  } else {
    throw ConfigError("gradcheck.preset must be tiny or model, got '" + preset + "'");
  }
  const auto seeds = g.at("seeds").get<std::size_t>();
  if (seeds == 0) throw ConfigError("gradcheck.seeds must be positive");
  const auto fraction = g.at("fraction").get<double>();
  if (!(fraction > 0 && fraction <= 1)) throw ConfigError("gradcheck.fraction must lie in (0,1]");
  const auto base = c.cfg.at("seed").get<std::uint64_t>();
  GradCheckResult worst;
  std::uint64_t worst_seed = base;
  std::size_t checked = 0;
  for (std::uint64_t s = base; s < base + seeds; ++s) {
    const auto r = check_model_gradients(mc, s, g.at("mask_ratio").get<double>(), fraction);
    checked += r.checked;
    if (s == base || r.max_relative_error > worst.max_relative_error) {
      worst = r;
      worst_seed = s;
    }
  }
  const bool pass = worst.max_relative_error < kRelativeErrorFloor;
  write_json(c.out_dir / "gradcheck.json", {{"max_relative_error", worst.max_relative_error},
                                            {"parameter", worst.worst_parameter},
                                            {"index", worst.worst_index},
                                            {"seed", worst_seed},
                                            {"checked", checked},
                                            {"threshold", kRelativeErrorFloor},
                                            {"pass", pass}});
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3e", worst.max_relative_error);
  const auto summary = std::string("max relative error ") + buf + " (" + worst.worst_parameter + "[" +
                       std::to_string(worst.worst_index) + "], seed " + std::to_string(worst_seed) + ") over " +
                       std::to_string(checked) + " checks";
  if (!pass) throw TrainingError("gradient check failed: " + summary);
  return summary;
}

inline std::string cmd_export_curves(Context& c) {
  const auto manifest = load_manifest(require_path(c.cfg, "data.manifest"));
  const auto anns = load_all_annotations(manifest);
  if (anns.empty()) throw UsageError("manifest '" + manifest.name + "' has no annotated videos");
  const auto curves = load_curves(curves_dir(c), anns);
  const auto dir = c.out_dir / "plots";
  fs::create_directories(dir);
  for (const auto& [id, ann] : anns) {
    write_text_file((dir / file_name_for(id, ".csv")).string(), format_plot_csv(curves.at(id), ann));
  }
  return std::to_string(anns.size()) + " plot files written to " + dir.string();
}

inline std::string cmd_validate(Context& c) {
  const auto manifest = load_manifest(require_path(c.cfg, "data.manifest"));
  const auto report = validate_manifest(manifest);
  json issues = json::array();
  for (const auto& i : report.issues) {
    c.out << i.video_id << ": " << i.message << '\n';
    issues.push_back({{"video_id", i.video_id}, {"message", i.message}});
  }
  write_json(c.out_dir / "validation.json", {{"manifest", manifest.name}, {"issues", issues}});
  if (!report.ok()) {
    throw FormatError("manifest '" + manifest.name + "': " + std::to_string(report.issues.size()) + " issue(s)");
  }
  return "manifest '" + manifest.name + "' OK (" + std::to_string(manifest.entries.size()) + " videos)";
}

struct Command {
  const char* name;
  const char* help;
  std::string (*run)(Context&);
};

inline const std::vector<Command>& commands() {
  static const std::vector<Command> list{
      {"train", "self-supervised training from scratch", cmd_train},
      {"finetune", "continue training a checkpoint on a summarization corpus", cmd_finetune},
      {"score", "write one importance curve per video", cmd_score},
      {"eval", "rank correlations and F1 of curves against annotations", cmd_eval},
      {"crossval", "models x datasets correlation matrix", cmd_crossval},
      {"splitgen", "random evaluation splits for a manifest", cmd_splitgen},
      {"gradcheck", "finite-difference check of the model gradients", cmd_gradcheck},
      {"export-curves", "min-max scaled ground truth and prediction per video", cmd_export_curves},
      {"validate", "check a manifest's files and annotations", cmd_validate},
  };
  return list;
}

inline std::string keys_footer(const json& defaults) {
  std::ostringstream os;
  os << "Config keys (set in --config FILE or as --KEY VALUE after the subcommand):\n";
  for (const auto& key : config_keys(defaults)) {
    os << "  " << key << " = " << default_display(defaults.at(key_pointer(key)));
    if (const char* h = help_text(key); *h) os << "  (" << h << ")";
    os << '\n';
  }
  return os.str();
}

}  // namespace cli_detail

// Runs one command line. Returns the process exit status: 0 on success, the
// ErrorKind value for library errors, 3 for command-line misuse.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  using namespace cli_detail;
  json defaults;
  try {
    defaults = default_run_config();
  } catch (const Error& e) {
    err << "framemae: " << e.category() << ": " << e.what() << '\n';
    return static_cast<int>(e.kind());
  }
  const auto keys = config_keys(defaults);

  CLI::App app{"Masked frame-feature autoencoder for unsupervised video summarization", "framemae"};
  app.require_subcommand(1);
  app.footer(keys_footer(defaults));
  app.set_version_flag("--version", "framemae 0.1.0");

  struct Parsed {
    std::string config_file;
    std::map<std::string, std::string> values;
    std::vector<std::string> models;
    std::vector<std::string> datasets;
  };
  std::map<std::string, Parsed> parsed;
  std::map<std::string, std::map<std::string, CLI::Option*>> opts;
  for (const auto& cmd : commands()) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    auto& p = parsed[cmd.name];
    sub->add_option("--config", p.config_file, "JSON config file")->check(CLI::ExistingFile);
    for (const auto& key : keys) {
      opts[cmd.name][key] = sub->add_option("--" + key, p.values[key], help_text(key))
                                ->default_str(default_display(defaults.at(key_pointer(key))))
                                ->group("Config keys");
    }
    if (std::string(cmd.name) == "crossval") {
      sub->add_option("--model", p.models, "model as TAG=CHECKPOINT (repeatable)");
      sub->add_option("--dataset", p.datasets, "dataset manifest (repeatable)");
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::kUsage);
  }

  const auto* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  const auto& p = parsed.at(name);
  try {
    json cfg = defaults;
    if (name == "finetune") merge_config(cfg, finetune_preset(), defaults, "finetune preset");
    if (!p.config_file.empty()) merge_config(cfg, read_json_file(p.config_file), defaults, p.config_file);
    json flags = json::object();
    for (const auto& key : keys) {
      if (opts.at(name).at(key)->count() == 0) continue;
      flags[key_pointer(key)] = parse_override(key, p.values.at(key), defaults.at(key_pointer(key)));
    }
    for (const auto& m : p.models) {
      const auto eq = m.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == m.size()) {
        throw UsageError("--model expects TAG=CHECKPOINT, got '" + m + "'");
      }
      flags["data"]["models"][m.substr(0, eq)] = m.substr(eq + 1);
    }
    for (const auto& d : p.datasets) flags["data"]["datasets"].push_back(d);
    merge_config(cfg, flags, defaults, "command line");
    if (cfg.at("threads").get<std::size_t>() == 0) throw ConfigError("threads must be positive");

    Context ctx{cfg, fs::path(cfg.at("output_dir").get<std::string>()), out, err};
    fs::create_directories(ctx.out_dir);
    write_json(ctx.out_dir / "resolved_config.json", cfg);
    for (const auto& cmd : commands()) {
      if (name == cmd.name) {
        out << name << ": " << cmd.run(ctx) << '\n';
        break;
      }
    }
    return 0;
  } catch (const Error& e) {
    err << "framemae " << name << ": " << e.category() << ": " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const fs::filesystem_error& e) {
    err << "framemae " << name << ": usage error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::kUsage);
  }
}

}  // namespace framemae
