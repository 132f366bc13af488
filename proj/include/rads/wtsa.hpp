#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rads/errors.hpp"
#include "rads/timeseries.hpp"

namespace rads {

// Which summary of each one-minute window feeds the classifier.
enum class FeatureMode { average_only, entropy_only, avg_sd };

inline const char* to_string(FeatureMode m) {
  switch (m) {
    case FeatureMode::average_only: return "average_only";
    case FeatureMode::entropy_only: return "entropy_only";
    default: return "avg_sd";
  }
}

inline FeatureMode feature_mode_from_string(const std::string& s) {
  if (s == "average_only" || s == "avg" || s == "average") return FeatureMode::average_only;
  if (s == "entropy_only" || s == "entropy") return FeatureMode::entropy_only;
  if (s == "avg_sd" || s == "avg-sd" || s == "avgsd") return FeatureMode::avg_sd;
  throw DataFormatError("unknown feature mode: " + s);
}

inline std::size_t feature_dim(FeatureMode m) { return m == FeatureMode::avg_sd ? 2 : 1; }

struct FeatureInstance {
  std::vector<double> features;
};

// Normalization state captured at training time. feature_min/max are the raw
// per-dimension window-feature extremes; raw_min/max are the extremes of the
// underlying samples, needed to reproduce the entropy sub-binning on test
// windows.
struct NormalizationBounds {
  std::vector<double> feature_min;
  std::vector<double> feature_max;
  double raw_min = 0.0;
  double raw_max = 0.0;
};

struct TrainingMatrix {
  std::vector<FeatureInstance> instances;  // real windows first, then artificial
  NormalizationBounds bounds;
  FeatureMode mode = FeatureMode::avg_sd;
  std::size_t window_count = 0;
  std::size_t artificial_count = 0;
};

namespace detail {

inline std::vector<double> raw_window_features(const WindowBin& bin, FeatureMode mode,
                                               double raw_min, double raw_max) {
  WindowStats st = window_stats(bin);
  switch (mode) {
    case FeatureMode::average_only: return {st.avg};
    case FeatureMode::entropy_only: return {entropy(bin, raw_min, raw_max)};
    default: return {st.avg, st.sd};
  }
}

// Degenerate dimensions (max == min) map every value to 0.
inline double normalize_or_zero(double x, double lo, double hi) {
  if (!(hi > lo)) return 0.0;
  return (x - lo) / (hi - lo);
}

}  // namespace detail

// Windows a series, extracts the mode's features, min-max normalizes each
// feature dimension across windows, and appends one all-ones artificial
// instance per window for the modes that model the spike signature.
// entropy_only gets no artificial instances.
inline TrainingMatrix build_training_set(const RawSeries& series, FeatureMode mode,
                                         double window_len) {
  std::vector<WindowBin> bins = partition_windows(series, window_len);
  if (bins.size() < 2)
    throw InsufficientDataError("build_training_set: need at least 2 complete windows");

  TrainingMatrix m;
  m.mode = mode;
  m.window_count = bins.size();

  double raw_min = series.samples.front().value;
  double raw_max = raw_min;
  for (const Sample& s : series.samples) {
    raw_min = std::min(raw_min, s.value);
    raw_max = std::max(raw_max, s.value);
  }
  m.bounds.raw_min = raw_min;
  m.bounds.raw_max = raw_max;

  std::size_t dim = feature_dim(mode);
  std::vector<std::vector<double>> raw;
  raw.reserve(bins.size());
  for (const WindowBin& b : bins)
    raw.push_back(detail::raw_window_features(b, mode, raw_min, raw_max));

  m.bounds.feature_min.assign(dim, 0.0);
  m.bounds.feature_max.assign(dim, 0.0);
  for (std::size_t d = 0; d < dim; ++d) {
    double lo = raw.front()[d], hi = raw.front()[d];
    for (const auto& r : raw) {
      lo = std::min(lo, r[d]);
      hi = std::max(hi, r[d]);
    }
    m.bounds.feature_min[d] = lo;
    m.bounds.feature_max[d] = hi;
  }

  for (const auto& r : raw) {
    FeatureInstance inst;
    inst.features.resize(dim);
    for (std::size_t d = 0; d < dim; ++d)
      inst.features[d] =
          detail::normalize_or_zero(r[d], m.bounds.feature_min[d], m.bounds.feature_max[d]);
    m.instances.push_back(std::move(inst));
  }

  if (mode != FeatureMode::entropy_only) {
    for (std::size_t i = 0; i < bins.size(); ++i)
      m.instances.push_back(FeatureInstance{std::vector<double>(dim, 1.0)});
    m.artificial_count = bins.size();
  }
  return m;
}

// Normalizes one test window against the training bounds. In avg_sd mode a
// window that exceeds the training range in both dimensions carries the spike
// signature and is mapped onto the artificial instance (1, 1); everything
// else passes through unclamped, including out-of-range values.
inline FeatureInstance build_test_instance(const WindowBin& bin, const NormalizationBounds& bounds,
                                           FeatureMode mode) {
  std::vector<double> raw =
      detail::raw_window_features(bin, mode, bounds.raw_min, bounds.raw_max);
  FeatureInstance inst;
  inst.features.resize(raw.size());
  for (std::size_t d = 0; d < raw.size(); ++d)
    inst.features[d] =
        detail::normalize_or_zero(raw[d], bounds.feature_min[d], bounds.feature_max[d]);
  if (mode == FeatureMode::avg_sd && inst.features[0] > 1.0 && inst.features[1] > 1.0)
    inst.features = {1.0, 1.0};
  return inst;
}

}  // namespace rads
