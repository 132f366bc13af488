#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "rads/errors.hpp"
#include "rads/modelstore.hpp"
#include "rads/occ.hpp"
#include "rads/rng.hpp"
#include "rads/timeseries.hpp"
#include "rads/wtsa.hpp"

namespace rads {

enum class TrainingStatusKind { first_run, running, stopped, completed };

inline const char* to_string(TrainingStatusKind s) {
  switch (s) {
    case TrainingStatusKind::first_run: return "first_run";
    case TrainingStatusKind::running: return "running";
    case TrainingStatusKind::stopped: return "stopped";
    case TrainingStatusKind::completed: return "completed";
  }
  return "?";
}

enum class Verdict { normal, anomaly };

struct DetectionResult {
  std::string vm_id;
  Metric metric = Metric::cpu_percent;
  double window_end = 0.0;
  Verdict verdict = Verdict::normal;
  std::vector<double> features;
  bool alert_emitted = false;
};

struct VmTrainingState {
  std::string vm_id;
  Metric metric = Metric::cpu_percent;
  TrainingStatusKind status = TrainingStatusKind::first_run;
  double stability_minutes = 0.0;
  std::vector<DetectionResult> adr;  // verdicts since the last optimiser tick
  std::uint64_t model_version = 0;
  double spt_minutes = 30.0;
};

// Classifies the last complete window. The verdict lands in the ADR buffer
// until training completes; alerts are only raised by a completed model.
inline DetectionResult detect(VmTrainingState& state, const OccModel& model,
                              const WindowBin& last_window) {
  FeatureInstance instance = build_test_instance(last_window, model.bounds, model.mode);
  Classification cls = occ_classify(model, instance.features);
  DetectionResult result;
  result.vm_id = state.vm_id;
  result.metric = state.metric;
  result.window_end = last_window.window_end;
  result.verdict = cls == Classification::positive ? Verdict::normal : Verdict::anomaly;
  result.features = instance.features;
  result.alert_emitted =
      result.verdict == Verdict::anomaly && state.status == TrainingStatusKind::completed;
  if (state.status != TrainingStatusKind::completed) state.adr.push_back(result);
  return result;
}

enum class TickOutcome { skipped, retrained, retrain_failed, stopped, completed };

struct TickOptions {
  FeatureMode mode = FeatureMode::avg_sd;
  double window_len = 60.0;
  std::uint64_t seed = 1;
  FitOptions fit;
};

struct TickResult {
  TickOutcome outcome = TickOutcome::skipped;
  std::optional<OccModel> model;  // set when outcome == retrained
};

// Training optimisation step, run every optimiser period. Retrains from full
// history on the first run or after any buffered anomaly; otherwise stability
// accrues until the threshold declares training complete.
inline TickResult training_tick(VmTrainingState& state, const RawSeries& history,
                                const TickOptions& opt) {
  TickResult result;
  if (state.status == TrainingStatusKind::completed) return result;

  bool has_anomaly = std::any_of(state.adr.begin(), state.adr.end(), [](const DetectionResult& r) {
    return r.verdict == Verdict::anomaly;
  });
  if (state.status == TrainingStatusKind::first_run || has_anomaly) {
    try {
      TrainingMatrix matrix = build_training_set(history, opt.mode, opt.window_len);
      std::uint64_t model_seed =
          derive_seed(opt.seed, state.vm_id, to_string(state.metric), state.model_version + 1);
      result.model = train_occ(matrix, model_seed, opt.fit);
      result.outcome = TickOutcome::retrained;
      state.status = TrainingStatusKind::running;
      state.stability_minutes = 0.0;
      state.model_version += 1;
    } catch (const Error&) {
      // Prior model stays active; a VM that never trained remains first_run.
      result.outcome = TickOutcome::retrain_failed;
      if (state.status != TrainingStatusKind::first_run)
        state.status = TrainingStatusKind::stopped;
    }
  } else {
    state.stability_minutes =
        std::min(state.spt_minutes, state.stability_minutes + 5.0);
    if (state.stability_minutes >= state.spt_minutes) {
      state.status = TrainingStatusKind::completed;
      result.outcome = TickOutcome::completed;
    } else {
      state.status = TrainingStatusKind::stopped;
      result.outcome = TickOutcome::stopped;
    }
  }
  state.adr.clear();
  return result;
}

struct RunConfig {
  double window_len = 60.0;
  double detection_period = 60.0;
  double optimiser_period = 300.0;
  double spt_minutes = 30.0;
  FeatureMode mode = FeatureMode::avg_sd;
  std::uint64_t seed = 1;
  FitOptions fit;
  unsigned parallelism = 0;  // 0 = hardware concurrency
  double pace = 0.0;         // wall seconds per stream minute; 0 = unpaced

  void validate() const {
    if (window_len <= 0.0) throw ConfigError("run config: window_len must be positive");
    if (detection_period != window_len)
      throw ConfigError("run config: detection period must equal window_len");
    double ratio = optimiser_period / detection_period;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 || ratio < 1.0)
      throw ConfigError("run config: optimiser period must be a multiple of the detection period");
    if (spt_minutes <= 0.0) throw ConfigError("run config: spt must be positive");
  }
};

enum class EngineEventKind { retrain, retrain_failed, stopped, completed, alert, gap_warning };

inline const char* to_string(EngineEventKind k) {
  switch (k) {
    case EngineEventKind::retrain: return "retrain";
    case EngineEventKind::retrain_failed: return "retrain_failed";
    case EngineEventKind::stopped: return "stopped";
    case EngineEventKind::completed: return "completed";
    case EngineEventKind::alert: return "alert";
    case EngineEventKind::gap_warning: return "gap_warning";
  }
  return "?";
}

struct EngineEvent {
  EngineEventKind kind = EngineEventKind::retrain;
  std::string vm_id;
  Metric metric = Metric::cpu_percent;
  long minute = 0;  // stream minutes since the pipeline's first sample
};

struct RunOutput {
  std::vector<DetectionResult> results;
  std::vector<EngineEvent> events;
  std::vector<VmTrainingState> final_states;
};

namespace detail {

struct PipelineOutput {
  std::vector<DetectionResult> results;
  std::vector<EngineEvent> events;
  VmTrainingState state;
};

inline PipelineOutput run_pipeline(const RawSeries& series, const RunConfig& cfg,
                                   ModelStore* store) {
  PipelineOutput out;
  VmTrainingState& st = out.state;
  st.vm_id = series.vm_id;
  st.metric = series.metric;
  st.spt_minutes = cfg.spt_minutes;

  std::optional<OccModel> model;
  if (store) {
    if (auto existing = store->load(series.vm_id, series.metric);
        existing && existing->model.mode == cfg.mode) {
      model = existing->model;
      st.model_version = existing->model_version;
      st.stability_minutes = existing->stability_period;
      if (existing->status == "completed") st.status = TrainingStatusKind::completed;
      else if (existing->status != "first_run") st.status = TrainingStatusKind::stopped;
    }
  }

  if (series.samples.empty()) return out;
  const double interval = series.sample_interval;
  const double t0 = series.samples.front().timestamp;
  const double t_last = series.samples.back().timestamp;
  const auto per_window = static_cast<std::size_t>(std::llround(cfg.window_len / interval));
  if (per_window == 0)
    throw ConfigError("run: window shorter than the sample interval");

  for (std::size_t i = 1; i < series.samples.size(); ++i) {
    double gap = series.samples[i].timestamp - series.samples[i - 1].timestamp;
    if (gap > 2.0 * cfg.window_len) {
      out.events.push_back(
          {EngineEventKind::gap_warning, st.vm_id, st.metric,
           static_cast<long>((series.samples[i].timestamp - t0) / cfg.window_len)});
    }
  }

  TickOptions tick_opt{cfg.mode, cfg.window_len, cfg.seed, cfg.fit};
  auto persist = [&](const OccModel& m) {
    if (!store) return;
    ModelRecord record;
    record.vm_id = st.vm_id;
    record.metric = st.metric;
    record.model = m;
    record.status = to_string(st.status);
    record.stability_period = st.stability_minutes;
    record.spt_minutes = st.spt_minutes;
    st.model_version = store->save(record);
  };

  std::size_t lo = 0;  // first sample index not yet behind the window start
  for (long k = 1;; ++k) {
    double boundary = t0 + static_cast<double>(k) * cfg.window_len;
    if (boundary > t_last + interval + 1e-9) break;
    double w0 = boundary - cfg.window_len;
    while (lo < series.samples.size() && series.samples[lo].timestamp < w0 - 1e-9) ++lo;
    std::size_t hi = lo;
    while (hi < series.samples.size() && series.samples[hi].timestamp < boundary - 1e-9) ++hi;

    // Warm-up covers the whole first optimiser period even when a stored
    // model is already loaded; the first detectable window ends after it.
    bool warmed_up = boundary - t0 > cfg.optimiser_period + 1e-9;
    if (model && warmed_up && hi - lo == per_window) {
      WindowBin window;
      window.window_start = w0;
      window.window_end = boundary;
      for (std::size_t i = lo; i < hi; ++i) window.values.push_back(series.samples[i].value);
      DetectionResult r = detect(st, *model, window);
      if (r.alert_emitted)
        out.events.push_back({EngineEventKind::alert, st.vm_id, st.metric, k});
      out.results.push_back(std::move(r));
    }

    bool tick_due = std::fmod(boundary - t0, cfg.optimiser_period) < 1e-9 ||
                    cfg.optimiser_period - std::fmod(boundary - t0, cfg.optimiser_period) < 1e-9;
    if (tick_due && st.status != TrainingStatusKind::completed) {
      RawSeries history;
      history.vm_id = series.vm_id;
      history.metric = series.metric;
      history.sample_interval = interval;
      for (const Sample& s : series.samples) {
        if (s.timestamp >= boundary - 1e-9) break;
        history.samples.push_back(s);
      }
      TickResult tick = training_tick(st, history, tick_opt);
      switch (tick.outcome) {
        case TickOutcome::retrained:
          model = std::move(tick.model);
          out.events.push_back({EngineEventKind::retrain, st.vm_id, st.metric, k});
          persist(*model);
          break;
        case TickOutcome::retrain_failed:
          out.events.push_back({EngineEventKind::retrain_failed, st.vm_id, st.metric, k});
          break;
        case TickOutcome::stopped:
          out.events.push_back({EngineEventKind::stopped, st.vm_id, st.metric, k});
          break;
        case TickOutcome::completed:
          out.events.push_back({EngineEventKind::completed, st.vm_id, st.metric, k});
          if (model) persist(*model);
          break;
        case TickOutcome::skipped:
          break;
      }
    }

    if (cfg.pace > 0.0)
      std::this_thread::sleep_for(std::chrono::duration<double>(cfg.pace));
  }
  return out;
}

}  // namespace detail

// Replays each (vm, metric) stream through its own detection pipeline:
// five-minute warm-up (the first optimiser tick trains the initial model),
// detection at every window boundary, optimiser tick every five minutes.
// Pipelines are independent; results are merged in timestamp order.
inline RunOutput run_online(const std::vector<RawSeries>& streams, const RunConfig& cfg,
                            ModelStore* store = nullptr) {
  cfg.validate();
  std::vector<detail::PipelineOutput> outputs(streams.size());
  unsigned workers = cfg.parallelism > 0 ? cfg.parallelism
                                         : std::max(1u, std::thread::hardware_concurrency());
  if (streams.size() < workers)
    workers = streams.empty() ? 1u : static_cast<unsigned>(streams.size());
  if (workers <= 1 || streams.size() <= 1) {
    for (std::size_t i = 0; i < streams.size(); ++i)
      outputs[i] = detail::run_pipeline(streams[i], cfg, store);
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          std::size_t i = next.fetch_add(1);
          if (i >= streams.size()) return;
          outputs[i] = detail::run_pipeline(streams[i], cfg, store);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  RunOutput merged;
  for (detail::PipelineOutput& po : outputs) {
    merged.results.insert(merged.results.end(), po.results.begin(), po.results.end());
    merged.events.insert(merged.events.end(), po.events.begin(), po.events.end());
    merged.final_states.push_back(std::move(po.state));
  }
  std::stable_sort(merged.results.begin(), merged.results.end(),
                   [](const DetectionResult& a, const DetectionResult& b) {
                     if (a.window_end != b.window_end) return a.window_end < b.window_end;
                     if (a.vm_id != b.vm_id) return a.vm_id < b.vm_id;
                     return static_cast<int>(a.metric) < static_cast<int>(b.metric);
                   });
  std::stable_sort(merged.events.begin(), merged.events.end(),
                   [](const EngineEvent& a, const EngineEvent& b) {
                     if (a.minute != b.minute) return a.minute < b.minute;
                     if (a.vm_id != b.vm_id) return a.vm_id < b.vm_id;
                     return static_cast<int>(a.metric) < static_cast<int>(b.metric);
                   });
  return merged;
}

}  // namespace rads
