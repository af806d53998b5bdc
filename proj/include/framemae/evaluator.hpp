#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "framemae/datastore.hpp"
#include "framemae/errors.hpp"
#include "framemae/metrics.hpp"
#include "framemae/model.hpp"
#include "framemae/scorer.hpp"

namespace framemae {

enum class Aggregation { kPerAnnotatorMean, kMeanAnnotation };
enum class F1Convention { kMean, kMax };  // over annotators: TVSum-style / SumMe-style

inline std::string to_string(Aggregation a) {
  return a == Aggregation::kPerAnnotatorMean ? "per_annotator_mean" : "mean_annotation";
}
inline Aggregation parse_aggregation(const std::string& s) {
  if (s == "per_annotator_mean") return Aggregation::kPerAnnotatorMean;
  if (s == "mean_annotation") return Aggregation::kMeanAnnotation;
  throw ConfigError("unknown aggregation '" + s + "' (per_annotator_mean | mean_annotation)");
}
inline std::string to_string(F1Convention c) { return c == F1Convention::kMean ? "mean" : "max"; }
inline F1Convention parse_f1_convention(const std::string& s) {
  if (s == "mean") return F1Convention::kMean;
  if (s == "max") return F1Convention::kMax;
  throw ConfigError("unknown f1 convention '" + s + "' (mean | max)");
}

struct EvalOptions {
  Aggregation aggregation = Aggregation::kPerAnnotatorMean;
  double budget_fraction = 0.15;
  F1Convention f1_convention = F1Convention::kMean;
};

struct RankScores {
  std::optional<double> tau;
  std::optional<double> rho;
};

// Mean of the defined values, or nullopt if there are none.
inline std::optional<double> mean_defined(const std::vector<std::optional<double>>& v) {
  double s = 0;
  std::size_t n = 0;
  for (const auto& x : v) {
    if (x) {
      s += *x;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return s / static_cast<double>(n);
}

inline RankScores evaluate_curve(std::span<const double> curve, const AnnotationSet& ann,
                                 Aggregation mode = Aggregation::kPerAnnotatorMean) {
  if (curve.size() != ann.num_frames()) {
    throw UsageError("curve for '" + ann.video_id + "' has " + std::to_string(curve.size()) +
                     " frames, annotations have " + std::to_string(ann.num_frames()));
  }
  if (mode == Aggregation::kMeanAnnotation) {
    const auto mean = ann.mean_scores();
    return {kendall_tau_b(curve, mean), spearman_rho(curve, mean)};
  }
  std::vector<std::optional<double>> taus, rhos;
  for (const auto& row : ann.scores) {
    taus.push_back(kendall_tau_b(curve, row));
    rhos.push_back(spearman_rho(curve, row));
  }
  return {mean_defined(taus), mean_defined(rhos)};
}

inline bool is_binary_row(const std::vector<double>& row) {
  return std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

// Key-fragment F1 ×100. Binary annotator rows are taken as keyshots; graded
// rows are turned into keyshots by the same knapsack at the same budget.
// nullopt when the annotations carry no change points.
inline std::optional<double> f1_keyfragment(std::span<const double> curve, const AnnotationSet& ann,
                                            double budget_fraction = 0.15,
                                            F1Convention convention = F1Convention::kMean,
                                            FragmentSelection* selection = nullptr) {
  if (!ann.has_change_points()) return std::nullopt;
  if (curve.size() != ann.num_frames()) {
    throw UsageError("curve for '" + ann.video_id + "' has " + std::to_string(curve.size()) +
                     " frames, annotations have " + std::to_string(ann.num_frames()));
  }
  if (!(budget_fraction >= 0 && budget_fraction <= 1)) throw ConfigError("budget_fraction must lie in [0,1]");
  const auto budget = static_cast<std::size_t>(std::floor(budget_fraction * static_cast<double>(curve.size())));
  const auto predicted = keyshot_summary(curve, ann.change_points, budget, selection);
  std::vector<double> f1s;
  for (const auto& row : ann.scores) {
    std::vector<char> truth;
    if (is_binary_row(row)) {
      for (double v : row) truth.push_back(v != 0.0);
    } else {
      truth = keyshot_summary(row, ann.change_points, budget);
    }
    f1s.push_back(summary_f1(predicted, truth));
  }
  double agg = convention == F1Convention::kMax ? *std::max_element(f1s.begin(), f1s.end())
                                                : std::accumulate(f1s.begin(), f1s.end(), 0.0) /
                                                      static_cast<double>(f1s.size());
  return 100.0 * agg;
}

// ---------------------------------------------------------------------------
// Dataset-level reports

struct VideoMetrics {
  std::string video_id;
  std::optional<double> tau;
  std::optional<double> rho;
  std::optional<double> f1;
};

struct RankMetricReport {
  std::vector<VideoMetrics> videos;
  std::optional<double> mean_tau;
  std::optional<double> mean_rho;
  std::optional<double> mean_f1;
  std::size_t undefined_tau = 0;
  std::size_t undefined_rho = 0;
  EvalOptions options;
};

using CurveMap = std::map<std::string, std::vector<double>>;
using AnnotationMap = std::map<std::string, AnnotationSet>;

inline RankMetricReport summarize(std::vector<VideoMetrics> videos, const EvalOptions& opt) {
  RankMetricReport r;
  r.options = opt;
  std::vector<std::optional<double>> t, p, f;
  for (const auto& v : videos) {
    t.push_back(v.tau);
    p.push_back(v.rho);
    f.push_back(v.f1);
    r.undefined_tau += !v.tau;
    r.undefined_rho += !v.rho;
  }
  r.mean_tau = mean_defined(t);
  r.mean_rho = mean_defined(p);
  r.mean_f1 = mean_defined(f);
  r.videos = std::move(videos);
  return r;
}

inline VideoMetrics evaluate_video(const std::string& id, const CurveMap& curves,
                                   const AnnotationMap& anns, const EvalOptions& opt) {
  const auto c = curves.find(id);
  if (c == curves.end()) throw UsageError("no curve for video '" + id + "'");
  const auto a = anns.find(id);
  if (a == anns.end()) throw UsageError("no annotations for video '" + id + "'");
  const auto rank = evaluate_curve(c->second, a->second, opt.aggregation);
  return {id, rank.tau, rank.rho,
          f1_keyfragment(c->second, a->second, opt.budget_fraction, opt.f1_convention)};
}

// Evaluates the listed videos (or every annotated video when `ids` is empty),
// in the given order.
inline RankMetricReport evaluate_dataset(const CurveMap& curves, const AnnotationMap& anns,
                                         const EvalOptions& opt = {},
                                         std::vector<std::string> ids = {}) {
  if (ids.empty()) {
    for (const auto& [id, _] : anns) ids.push_back(id);
  }
  std::vector<VideoMetrics> videos;
  for (const auto& id : ids) videos.push_back(evaluate_video(id, curves, anns, opt));
  return summarize(std::move(videos), opt);
}

struct SplitReport {
  std::vector<std::pair<std::string, RankMetricReport>> splits;
  std::optional<double> mean_tau;  // across-split mean of per-split means
  std::optional<double> mean_rho;
  std::optional<double> mean_f1;
};

inline SplitReport evaluate_splits(const CurveMap& curves, const AnnotationMap& anns,
                                   const SplitSet& set, const EvalOptions& opt = {}) {
  if (set.splits.empty()) throw UsageError("evaluate_splits: no splits");
  SplitReport out;
  std::vector<std::optional<double>> t, p, f;
  for (const auto& s : set.splits) {
    if (s.video_ids.empty()) throw UsageError(s.name + " has no videos");
    auto r = evaluate_dataset(curves, anns, opt, s.video_ids);
    t.push_back(r.mean_tau);
    p.push_back(r.mean_rho);
    f.push_back(r.mean_f1);
    out.splits.emplace_back(s.name, std::move(r));
  }
  out.mean_tau = mean_defined(t);
  out.mean_rho = mean_defined(p);
  out.mean_f1 = mean_defined(f);
  return out;
}

// ---------------------------------------------------------------------------
// Cross-dataset matrix

struct EvalDataset {
  std::string name;
  std::vector<FeatureSequence> videos;
  AnnotationMap annotations;
};

struct CrossCell {
  std::optional<double> tau;
  std::optional<double> rho;
};

struct CrossMatrix {
  std::vector<std::string> models;    // rows
  std::vector<std::string> datasets;  // columns
  std::vector<std::vector<CrossCell>> cells;
};

inline CurveMap score_dataset(const Autoencoder& model, const std::vector<FeatureSequence>& videos,
                              const ScoringConfig& cfg) {
  CurveMap curves;
  for (const auto& v : videos) curves[v.video_id] = score_video(model, v, cfg).scores;
  return curves;
}

inline CrossMatrix cross_matrix(const std::vector<std::pair<std::string, const Autoencoder*>>& models,
                                const std::vector<EvalDataset>& datasets,
                                const ScoringConfig& cfg, const EvalOptions& opt = {}) {
  CrossMatrix m;
  for (const auto& [tag, _] : models) m.models.push_back(tag);
  for (const auto& d : datasets) m.datasets.push_back(d.name);
  for (const auto& [tag, model] : models) {
    std::vector<CrossCell> row;
    for (const auto& d : datasets) {
      try {
        const auto r = evaluate_dataset(score_dataset(*model, d.videos, cfg), d.annotations, opt);
        row.push_back({r.mean_tau, r.mean_rho});
      } catch (const Error& e) {
        throw ScoringError("cross_matrix (" + tag + ", " + d.name + "): " + e.what());
      }
    }
    m.cells.push_back(std::move(row));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Serialization

inline json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json report_to_json(const RankMetricReport& r) {
  json videos = json::array();
  for (const auto& v : r.videos) {
    videos.push_back({{"video_id", v.video_id},
                      {"tau", optional_json(v.tau)},
                      {"rho", optional_json(v.rho)},
                      {"f1", optional_json(v.f1)}});
  }
  return json{{"aggregation", to_string(r.options.aggregation)},
              {"budget_fraction", r.options.budget_fraction},
              {"f1_convention", to_string(r.options.f1_convention)},
              {"mean_tau", optional_json(r.mean_tau)},
              {"mean_rho", optional_json(r.mean_rho)},
              {"mean_f1", optional_json(r.mean_f1)},
              {"undefined_tau", r.undefined_tau},
              {"undefined_rho", r.undefined_rho},
              {"videos", videos}};
}

inline json split_report_to_json(const SplitReport& r) {
  json splits = json::array();
  for (const auto& [name, rep] : r.splits) {
    auto j = report_to_json(rep);
    j["split"] = name;
    splits.push_back(std::move(j));
  }
  return json{{"mean_tau", optional_json(r.mean_tau)},
              {"mean_rho", optional_json(r.mean_rho)},
              {"mean_f1", optional_json(r.mean_f1)},
              {"splits", splits}};
}

inline std::string format_optional(const std::optional<double>& v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

// Per-video rows followed by the dataset aggregate.
inline std::string format_report_csv(const RankMetricReport& r) {
  std::ostringstream os;
  os << "video_id,tau,rho,f1\n";
  for (const auto& v : r.videos) {
    os << v.video_id << ',' << format_optional(v.tau) << ',' << format_optional(v.rho) << ','
       << (v.f1 ? format_optional(v.f1) : "unsupported") << '\n';
  }
  os << "MEAN," << format_optional(r.mean_tau) << ',' << format_optional(r.mean_rho) << ','
     << (r.mean_f1 ? format_optional(r.mean_f1) : "unsupported") << '\n';
  return os.str();
}

// Rows are model tags, columns datasets; each cell "tau/rho".
inline std::string format_cross_csv(const CrossMatrix& m) {
  std::ostringstream os;
  os << "model";
  for (const auto& d : m.datasets) os << ',' << d;
  os << '\n';
  for (std::size_t i = 0; i < m.models.size(); ++i) {
    os << m.models[i];
    for (const auto& c : m.cells[i]) os << ',' << format_optional(c.tau) << '/' << format_optional(c.rho);
    os << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Plot export: min-max scaling to [0,1]; a constant series maps to 0.

inline std::vector<double> min_max_scale(std::span<const double> v) {
  std::vector<double> out(v.size(), 0.0);
  if (v.empty()) return out;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = *hi - *lo;
  if (range <= 0) return out;
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - *lo) / range;
  return out;
}

inline std::string format_plot_csv(std::span<const double> curve, const AnnotationSet& ann) {
  if (curve.size() != ann.num_frames()) {
    throw UsageError("curve for '" + ann.video_id + "' has " + std::to_string(curve.size()) +
                     " frames, annotations have " + std::to_string(ann.num_frames()));
  }
  const auto gt = min_max_scale(ann.mean_scores());
  const auto pred = min_max_scale(curve);
  std::ostringstream os;
  os << "frame_index,ground_truth,prediction\n";
  char buf[96];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.9g,%.9g\n", i, gt[i], pred[i]);
    os << buf;
  }
  return os.str();
}

struct PlotSeries {
  std::vector<double> ground_truth;
  std::vector<double> prediction;
};

inline PlotSeries parse_plot_csv(const std::string& text, const std::string& source = "plot") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "frame_index,ground_truth,prediction") {
    throw FormatError(source + ": expected header 'frame_index,ground_truth,prediction'");
  }
  PlotSeries s;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string idx, gt, pred;
    if (!std::getline(row, idx, ',') || !std::getline(row, gt, ',') || !std::getline(row, pred)) {
      throw FormatError(source + ": malformed row '" + line + "'");
    }
    s.ground_truth.push_back(std::stod(gt));
    s.prediction.push_back(std::stod(pred));
  }
  return s;
}

}  // namespace framemae
