#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "rads/errors.hpp"
#include "rads/rng.hpp"
#include "rads/timeseries.hpp"

namespace rads {

// Square-wave load phase: busy for the first duty fraction of each period,
// calm for the rest. amplitude shifts the busy-phase mean; calm_noise_scale
// shrinks noise while calm. period == 0 disables phasing (always busy).
struct PeriodicComponent {
  double period = 0.0;
  double duty = 0.5;
  double amplitude = 0.0;
  double calm_noise_scale = 1.0;
};

struct BaseLoad {
  double mean = 0.0;
  double noise_amplitude = 0.0;  // uniform noise in [-a, a]
  PeriodicComponent periodic;
};

// Short legitimate burst; magnitude adds to the base value (signed).
struct SpikeEvent {
  double time = 0.0;
  double duration = 5.0;
  double magnitude = 0.0;
};

// Sustained hostile load; replaces the base signal with level +- jitter.
struct AttackEvent {
  double start = 0.0;
  double end = 0.0;
  double level = 0.0;
  double jitter = 0.0;
};

struct ScenarioSpec {
  std::string vm_id = "vm1";
  Metric metric = Metric::cpu_percent;
  double duration = 0.0;
  double sample_interval = 5.0;
  BaseLoad base;
  std::vector<SpikeEvent> spikes;
  std::vector<AttackEvent> attacks;
  double train_duration = 0.0;  // normal prelude recommended for offline splits
  std::uint64_t seed = 1;

  void validate() const {
    if (duration <= 0.0 || sample_interval <= 0.0)
      throw ConfigError("scenario: duration and sample_interval must be positive");
    for (const SpikeEvent& s : spikes) {
      if (s.time < 0.0 || s.time >= duration)
        throw ConfigError("scenario: spike outside duration");
      if (s.duration > 2.0 * sample_interval)
        throw ConfigError("scenario: spike longer than two samples");
    }
    for (const AttackEvent& a : attacks) {
      if (!(a.start < a.end) || a.start < 0.0 || a.end > duration)
        throw ConfigError("scenario: attack interval outside duration");
      if (a.level <= base.mean + base.periodic.amplitude)
        throw ConfigError("scenario: attack level must exceed the busy base level");
    }
  }
};

struct WindowLabel {
  double window_end = 0.0;
  bool anomaly = false;
};

struct LabeledSeries {
  RawSeries series;
  std::vector<WindowLabel> truth;  // one per complete 1-minute window
  double train_duration = 0.0;
};

namespace detail {

inline bool in_attack(const std::vector<AttackEvent>& attacks, double t) {
  for (const AttackEvent& a : attacks)
    if (t >= a.start && t < a.end) return true;
  return false;
}

}  // namespace detail

// Deterministic for a given spec: exactly one noise draw per sample, so event
// placement never shifts the stream that follows it.
inline LabeledSeries generate(const ScenarioSpec& spec, double label_window_len = 60.0) {
  spec.validate();
  LabeledSeries out;
  out.series.vm_id = spec.vm_id;
  out.series.metric = spec.metric;
  out.series.sample_interval = spec.sample_interval;
  out.train_duration = spec.train_duration;

  Rng rng(derive_seed(spec.seed, spec.vm_id, to_string(spec.metric)));
  auto n = static_cast<std::size_t>(spec.duration / spec.sample_interval + 1e-9);
  out.series.samples.reserve(n);
  const PeriodicComponent& ph = spec.base.periodic;
  for (std::size_t k = 0; k < n; ++k) {
    double t = static_cast<double>(k) * spec.sample_interval;
    double u = rng.uniform(-1.0, 1.0);
    double value = 0.0;
    if (detail::in_attack(spec.attacks, t)) {
      for (const AttackEvent& a : spec.attacks)
        if (t >= a.start && t < a.end) value = a.level + u * a.jitter;
    } else {
      bool busy = ph.period <= 0.0 || std::fmod(t, ph.period) < ph.duty * ph.period;
      double mean = spec.base.mean + (busy ? ph.amplitude : 0.0);
      double scale = busy ? 1.0 : ph.calm_noise_scale;
      value = mean + u * spec.base.noise_amplitude * scale;
      for (const SpikeEvent& s : spec.spikes)
        if (t >= s.time && t < s.time + s.duration) value += s.magnitude;
    }
    out.series.samples.push_back({t, std::max(0.0, value)});
  }

  auto whole_windows = static_cast<std::size_t>(spec.duration / label_window_len + 1e-9);
  for (std::size_t w = 0; w < whole_windows; ++w) {
    double w0 = static_cast<double>(w) * label_window_len;
    double w1 = w0 + label_window_len;
    bool anomaly = false;
    for (std::size_t k = 0; k < n && !anomaly; ++k) {
      double t = static_cast<double>(k) * spec.sample_interval;
      if (t >= w0 && t < w1 && detail::in_attack(spec.attacks, t)) anomaly = true;
    }
    out.truth.push_back({w1, anomaly});
  }
  return out;
}

enum class PresetName {
  attack_test,
  spike_test,
  figure5_timeline,
  media_streaming_normal,
  graph_analytics_normal,
};

inline PresetName preset_from_string(const std::string& s) {
  if (s == "attack_test") return PresetName::attack_test;
  if (s == "spike_test") return PresetName::spike_test;
  if (s == "figure5_timeline") return PresetName::figure5_timeline;
  if (s == "media_streaming_normal") return PresetName::media_streaming_normal;
  if (s == "graph_analytics_normal") return PresetName::graph_analytics_normal;
  throw ConfigError("unknown preset: " + s);
}

namespace detail {

// Batch-compute style load: alternating busy/calm minutes, near-flat calm.
inline BaseLoad cpu_base() {
  BaseLoad b;
  b.mean = 30.0;
  b.noise_amplitude = 1.5;
  b.periodic = {120.0, 0.5, 5.0, 0.15};
  return b;
}

// Streaming style load: bursty throughput, equally noisy in both phases.
// The viewer-driven level swings dominate the sample noise, so one minute of
// fresh traffic stays well inside the trained feature range.
inline BaseLoad net_base() {
  BaseLoad b;
  b.mean = 300.0;
  b.noise_amplitude = 15.0;
  b.periodic = {600.0, 0.5, 100.0, 0.5};
  return b;
}

struct FlavorParams {
  double spike_magnitude;
  double attack_level;
  double attack_jitter;
};

inline FlavorParams flavor(Metric m) {
  if (m == Metric::cpu_percent) return {95.0, 95.0, 0.5};
  return {4500.0, 5000.0, 8.0};
}

}  // namespace detail

// Canonical scenarios. attack_test and spike_test carry a 30-minute normal
// prelude sized for offline train/test splits; figure5_timeline scripts the
// reference online run (flutter burst in minute 12, attack in minute 49).
inline ScenarioSpec preset(PresetName name, Metric metric = Metric::cpu_percent,
                           std::uint64_t seed = 1) {
  ScenarioSpec spec;
  spec.metric = metric;
  spec.seed = seed;
  spec.base = metric == Metric::cpu_percent ? detail::cpu_base() : detail::net_base();
  detail::FlavorParams fp = detail::flavor(metric);
  switch (name) {
    case PresetName::attack_test:
      spec.duration = 2400.0;
      spec.train_duration = 1800.0;
      spec.attacks.push_back({1830.0, 2400.0, fp.attack_level, fp.attack_jitter});
      break;
    case PresetName::spike_test: {
      spec.duration = 3600.0;
      spec.train_duration = 1800.0;
      Rng rng(derive_seed(seed, "spike-times"));
      std::vector<std::size_t> slots(360);  // 5 s sample slots in [1800, 3600)
      std::iota(slots.begin(), slots.end(), std::size_t{360});
      for (std::size_t i = 0; i < 10; ++i) {
        std::size_t j = i + rng.below(slots.size() - i);
        std::swap(slots[i], slots[j]);
      }
      slots.resize(10);
      std::sort(slots.begin(), slots.end());
      for (std::size_t s : slots)
        spec.spikes.push_back({static_cast<double>(s) * 5.0, 5.0, fp.spike_magnitude});
      break;
    }
    case PresetName::figure5_timeline:
      spec.duration = 3000.0;
      spec.train_duration = 1800.0;
      // Zero-mean flutter: average stays at base, dispersion jumps, so an
      // immature model flags it while a mature one has seen it in training.
      spec.spikes.push_back({690.0, 5.0, +20.0});
      spec.spikes.push_back({695.0, 5.0, -20.0});
      spec.attacks.push_back({2880.0, 2940.0, fp.attack_level, fp.attack_jitter});
      break;
    case PresetName::media_streaming_normal:
      spec.metric = Metric::net_kbps;
      spec.base = detail::net_base();
      spec.duration = 3600.0;
      spec.train_duration = 1800.0;
      break;
    case PresetName::graph_analytics_normal:
      spec.metric = Metric::cpu_percent;
      spec.base = detail::cpu_base();
      spec.duration = 3600.0;
      spec.train_duration = 1800.0;
      break;
  }
  return spec;
}

}  // namespace rads
