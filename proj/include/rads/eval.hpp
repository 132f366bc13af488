#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rads/detector.hpp"
#include "rads/errors.hpp"
#include "rads/occ.hpp"
#include "rads/rng.hpp"
#include "rads/simulator.hpp"
#include "rads/timeseries.hpp"
#include "rads/wtsa.hpp"

namespace rads {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t total() const { return tp + fp + fn + tn; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

struct MetricsReport {
  FeatureMode mode = FeatureMode::avg_sd;
  ConfusionCounts counts;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double fpr = 0.0;
};

// Four-way tally of verdicts against truth on an identical window grid.
inline ConfusionCounts confusion(const std::vector<DetectionResult>& verdicts,
                                 const std::vector<WindowLabel>& truth) {
  std::map<double, bool> truth_by_end;
  for (const WindowLabel& w : truth) truth_by_end[w.window_end] = w.anomaly;
  ConfusionCounts counts;
  for (const DetectionResult& r : verdicts) {
    auto it = truth_by_end.find(r.window_end);
    if (it == truth_by_end.end())
      throw GridMismatchError("confusion: no truth label for window ending at " +
                              std::to_string(r.window_end));
    bool anomalous = it->second;
    bool flagged = r.verdict == Verdict::anomaly;
    if (anomalous && flagged) ++counts.tp;
    else if (anomalous && !flagged) ++counts.fn;
    else if (!anomalous && flagged) ++counts.fp;
    else ++counts.tn;
  }
  return counts;
}

// precision tp/(tp+fp), recall tp/(tp+fn), f1 harmonic mean, fpr fp/(fp+tn);
// every 0/0 resolves to 0 so degenerate rows stay well-defined.
inline MetricsReport metrics(const ConfusionCounts& counts) {
  auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  MetricsReport r;
  r.counts = counts;
  r.precision = ratio(counts.tp, counts.tp + counts.fp);
  r.recall = ratio(counts.tp, counts.tp + counts.fn);
  r.f1 = r.precision + r.recall == 0.0
             ? 0.0
             : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  r.fpr = ratio(counts.fp, counts.fp + counts.tn);
  return r;
}

struct EvalConfig {
  double window_len = 60.0;
  double train_duration = 0.0;  // 0 = take the scenario's own prelude
  std::uint64_t seed = 1;
  FitOptions fit;
};

struct EvalRun {
  MetricsReport report;
  std::vector<DetectionResult> verdicts;  // test windows only
};

// Offline protocol behind the results table: fit one model on the normal
// prelude, then score every later window against the frozen model.
inline EvalRun evaluate_static(const LabeledSeries& labeled, FeatureMode mode,
                               const EvalConfig& cfg) {
  double train_duration = cfg.train_duration > 0.0 ? cfg.train_duration : labeled.train_duration;
  if (train_duration <= 0.0)
    throw ConfigError("evaluate: no training duration configured");
  const RawSeries& series = labeled.series;
  if (series.samples.empty()) throw EmptyInputError("evaluate: empty series");
  double t0 = series.samples.front().timestamp;
  double split = t0 + train_duration;

  RawSeries prelude;
  prelude.vm_id = series.vm_id;
  prelude.metric = series.metric;
  prelude.sample_interval = series.sample_interval;
  for (const Sample& s : series.samples)
    if (s.timestamp < split - 1e-9) prelude.samples.push_back(s);

  TrainingMatrix matrix = build_training_set(prelude, mode, cfg.window_len);
  OccModel model =
      train_occ(matrix, derive_seed(cfg.seed, series.vm_id, to_string(series.metric)), cfg.fit);

  EvalRun run;
  std::vector<WindowLabel> test_truth;
  for (const WindowBin& bin : partition_windows(series, cfg.window_len)) {
    if (bin.window_end <= split + 1e-9) continue;
    FeatureInstance instance = build_test_instance(bin, model.bounds, mode);
    DetectionResult r;
    r.vm_id = series.vm_id;
    r.metric = series.metric;
    r.window_end = bin.window_end;
    r.verdict = occ_classify(model, instance.features) == Classification::positive
                    ? Verdict::normal
                    : Verdict::anomaly;
    r.features = instance.features;
    run.verdicts.push_back(std::move(r));
  }
  for (const WindowLabel& w : labeled.truth)
    if (w.window_end > split + 1e-9) test_truth.push_back(w);

  run.report = metrics(confusion(run.verdicts, test_truth));
  run.report.mode = mode;
  return run;
}

// Side-by-side reports for several feature modes on identical data.
inline std::vector<MetricsReport> compare_modes(const LabeledSeries& labeled,
                                                const std::vector<FeatureMode>& modes,
                                                const EvalConfig& cfg) {
  std::vector<MetricsReport> reports;
  for (FeatureMode mode : modes) reports.push_back(evaluate_static(labeled, mode, cfg).report);
  return reports;
}

inline std::string report_csv(const std::vector<MetricsReport>& reports) {
  std::string out = "mode,tp,fp,fn,tn,precision,recall,f1,fpr\n";
  char line[160];
  for (const MetricsReport& r : reports) {
    std::snprintf(line, sizeof line, "%s,%zu,%zu,%zu,%zu,%.4f,%.4f,%.4f,%.4f\n",
                  to_string(r.mode), r.counts.tp, r.counts.fp, r.counts.fn, r.counts.tn,
                  r.precision, r.recall, r.f1, r.fpr);
    out += line;
  }
  return out;
}

}  // namespace rads
