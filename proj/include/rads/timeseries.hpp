#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "rads/errors.hpp"

namespace rads {

enum class Metric { cpu_percent, net_kbps };

inline const char* to_string(Metric m) {
  return m == Metric::cpu_percent ? "cpu_percent" : "net_kbps";
}

inline Metric metric_from_string(const std::string& s) {
  if (s == "cpu_percent" || s == "cpu") return Metric::cpu_percent;
  if (s == "net_kbps" || s == "net") return Metric::net_kbps;
  throw DataFormatError("unknown metric: " + s);
}

struct Sample {
  double timestamp = 0.0;  // seconds
  double value = 0.0;
};

// One metric stream for one VM, sampled at a fixed cadence.
struct RawSeries {
  std::string vm_id;
  Metric metric = Metric::cpu_percent;
  double sample_interval = 5.0;  // seconds
  std::vector<Sample> samples;   // timestamps strictly increasing
};

struct WindowBin {
  double window_start = 0.0;
  double window_end = 0.0;
  std::vector<double> values;
};

struct WindowStats {
  double avg = 0.0;
  double sd = 0.0;  // sample standard deviation (n-1)
};

// Splits a series into fixed-length bins aligned to the first sample.
// Bins that are not completely filled (the trailing remainder, or bins
// thinned out by stream gaps) are dropped.
inline std::vector<WindowBin> partition_windows(const RawSeries& series, double window_len) {
  if (series.samples.empty()) throw EmptyInputError("partition_windows: empty series");
  if (window_len <= 0 || series.sample_interval <= 0)
    throw ConfigError("partition_windows: non-positive window or interval");
  double ratio = window_len / series.sample_interval;
  auto per_window = static_cast<std::size_t>(std::llround(ratio));
  if (per_window == 0 || std::fabs(ratio - static_cast<double>(per_window)) > 1e-9)
    throw ConfigError("partition_windows: window_len must be a multiple of sample_interval");

  double t0 = series.samples.front().timestamp;
  std::vector<WindowBin> bins;
  for (const Sample& s : series.samples) {
    auto k = static_cast<std::size_t>(std::floor((s.timestamp - t0) / window_len + 1e-9));
    while (bins.size() <= k) {
      double start = t0 + static_cast<double>(bins.size()) * window_len;
      bins.push_back(WindowBin{start, start + window_len, {}});
    }
    bins[k].values.push_back(s.value);
  }
  std::vector<WindowBin> full;
  full.reserve(bins.size());
  for (auto& b : bins)
    if (b.values.size() == per_window) full.push_back(std::move(b));
  return full;
}

inline WindowStats window_stats(const WindowBin& bin) {
  if (bin.values.empty()) throw EmptyInputError("window_stats: empty window");
  double sum = 0.0;
  for (double v : bin.values) sum += v;
  double n = static_cast<double>(bin.values.size());
  double mean = sum / n;
  if (bin.values.size() == 1) return {mean, 0.0};
  double ss = 0.0;
  for (double v : bin.values) {
    double d = v - mean;
    ss += d * d;
  }
  return {mean, std::sqrt(ss / (n - 1.0))};
}

// (x - min) / (max - min). Deliberately not clamped: values outside the
// training range land outside [0, 1] and that is meaningful downstream.
inline double min_max_normalize(double x, double x_min, double x_max) {
  if (!(x_max > x_min)) throw DegenerateRangeError("min_max_normalize: x_max <= x_min");
  return (x - x_min) / (x_max - x_min);
}

// Dispersion of one window's values over ten equal sub-bins of the
// normalized [0, 1] range. Values are normalized against the full data set's
// min/max and clamped into [0, 1] before sub-binning. Natural log, so the
// result lies in [0, ln 10].
inline double entropy(const WindowBin& bin, double x_min, double x_max) {
  if (bin.values.empty()) throw EmptyInputError("entropy: empty window");
  if (!(x_max > x_min)) return 0.0;  // all mass in one sub-bin
  std::size_t counts[10] = {};
  for (double v : bin.values) {
    double t = (v - x_min) / (x_max - x_min);
    t = std::clamp(t, 0.0, 1.0);
    auto k = static_cast<std::size_t>(t * 10.0);
    if (k > 9) k = 9;
    ++counts[k];
  }
  // H = ln n - (1/n) * sum c*ln c; exact ln 10 when 10 values land in 10 bins.
  double n = static_cast<double>(bin.values.size());
  double acc = 0.0;
  for (std::size_t c : counts) {
    if (c < 2) continue;  // ln 1 = 0
    auto cd = static_cast<double>(c);
    acc += cd * std::log(cd);
  }
  double h = std::log(n) - acc / n;
  return h < 0.0 ? 0.0 : h;
}

// Linear-interpolation quantile on a sorted vector, position q * (n - 1).
inline double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw EmptyInputError("sorted_quantile: empty input");
  double pos = q * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(pos);
  double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

// Indices of values strictly above Q3 + 1.5 * IQR. Upper fence only: this
// flags load spikes, and a low outlier is not a spike.
inline std::vector<std::size_t> iqr_spike_flags(const std::vector<double>& values) {
  if (values.size() < 4)
    throw InsufficientDataError("iqr_spike_flags: need at least 4 values");
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  double q1 = sorted_quantile(sorted, 0.25);
  double q3 = sorted_quantile(sorted, 0.75);
  double fence = q3 + 1.5 * (q3 - q1);
  std::vector<std::size_t> flags;
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] > fence) flags.push_back(i);
  return flags;
}

}  // namespace rads
