#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rads/errors.hpp"
#include "rads/timeseries.hpp"

namespace rads {

struct MetricRecord {
  std::string vm_id;
  double timestamp = 0.0;  // seconds
  double cpu_percent = 0.0;
  double net_kbps = 0.0;
};

inline constexpr std::string_view kCanonicalHeader = "vm_id,timestamp,cpu_percent,net_kbps";

namespace detail {

inline std::vector<std::string_view> split_line(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::optional<double> parse_double(std::string_view field) {
  while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
  while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
    field.remove_suffix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) return std::nullopt;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

inline std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

inline std::string_view chomp(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

}  // namespace detail

// Strict reader for the canonical layout: exact header, numeric fields,
// non-decreasing timestamps per VM. Errors carry 1-based line numbers.
inline std::vector<MetricRecord> parse_canonical_csv(std::string_view text) {
  if (text.empty()) throw EmptyInputError("canonical csv: empty input");
  std::vector<MetricRecord> out;
  std::map<std::string, double, std::less<>> last_ts;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t eol = text.find('\n', start);
    std::string_view line = text.substr(start, eol == std::string_view::npos ? std::string_view::npos
                                                                             : eol - start);
    start = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    line = detail::chomp(line);
    ++line_no;
    if (line_no == 1) {
      if (line != kCanonicalHeader)
        throw DataFormatError("canonical csv: line 1: expected header \"" +
                              std::string(kCanonicalHeader) + "\"");
      continue;
    }
    if (line.empty()) continue;
    auto fields = detail::split_line(line, ',');
    if (fields.size() != 4)
      throw DataFormatError("canonical csv: line " + std::to_string(line_no) +
                            ": expected 4 fields, got " + std::to_string(fields.size()));
    MetricRecord r;
    r.vm_id = std::string(fields[0]);
    auto ts = detail::parse_double(fields[1]);
    auto cpu = detail::parse_double(fields[2]);
    auto net = detail::parse_double(fields[3]);
    if (r.vm_id.empty() || !ts || !cpu || !net)
      throw DataFormatError("canonical csv: line " + std::to_string(line_no) +
                            ": non-numeric or empty field");
    if (*cpu < 0.0 || *net < 0.0)
      throw DataFormatError("canonical csv: line " + std::to_string(line_no) +
                            ": negative metric value");
    r.timestamp = *ts;
    r.cpu_percent = *cpu;
    r.net_kbps = *net;
    auto it = last_ts.find(r.vm_id);
    if (it != last_ts.end() && r.timestamp < it->second)
      throw DataFormatError("canonical csv: line " + std::to_string(line_no) +
                            ": timestamp out of order for vm " + r.vm_id);
    last_ts[r.vm_id] = r.timestamp;
    out.push_back(std::move(r));
  }
  if (out.empty()) throw EmptyInputError("canonical csv: no data rows");
  return out;
}

// Shortest-round-trip formatting; parse(emit(x)) == x exactly.
inline std::string emit_canonical_csv(const std::vector<MetricRecord>& records) {
  std::string out(kCanonicalHeader);
  out.push_back('\n');
  for (const MetricRecord& r : records) {
    out += r.vm_id;
    out.push_back(',');
    out += detail::format_double(r.timestamp);
    out.push_back(',');
    out += detail::format_double(r.cpu_percent);
    out.push_back(',');
    out += detail::format_double(r.net_kbps);
    out.push_back('\n');
  }
  return out;
}

// Column layout for third-party trace exports. Column indices are 0-based;
// net throughput is reported as rx + tx. vm_col < 0 means the file covers a
// single VM whose id the caller supplies.
struct ColumnMapping {
  char delimiter = ';';
  int ts_col = 0;
  int cpu_col = 1;
  int net_rx_col = 2;
  int net_tx_col = 3;
  int vm_col = -1;
  std::string ts_unit = "s";  // "s" or "ms"
  bool has_header = true;
};

inline std::vector<MetricRecord> parse_external_trace(std::string_view text,
                                                      const ColumnMapping& mapping,
                                                      const std::string& default_vm_id = "vm1") {
  if (text.empty()) throw EmptyInputError("external trace: empty input");
  if (mapping.ts_unit != "s" && mapping.ts_unit != "ms")
    throw ConfigError("external trace: ts_unit must be \"s\" or \"ms\"");
  int max_col = std::max({mapping.ts_col, mapping.cpu_col, mapping.net_rx_col,
                          mapping.net_tx_col, mapping.vm_col});
  std::vector<MetricRecord> out;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t eol = text.find('\n', start);
    std::string_view line = text.substr(start, eol == std::string_view::npos ? std::string_view::npos
                                                                             : eol - start);
    start = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    line = detail::chomp(line);
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && mapping.has_header) continue;
    auto fields = detail::split_line(line, mapping.delimiter);
    if (static_cast<int>(fields.size()) <= max_col)
      throw DataFormatError("external trace: line " + std::to_string(line_no) +
                            ": missing mapped column (have " + std::to_string(fields.size()) +
                            ")");
    auto ts = detail::parse_double(fields[static_cast<std::size_t>(mapping.ts_col)]);
    auto cpu = detail::parse_double(fields[static_cast<std::size_t>(mapping.cpu_col)]);
    auto rx = detail::parse_double(fields[static_cast<std::size_t>(mapping.net_rx_col)]);
    auto tx = detail::parse_double(fields[static_cast<std::size_t>(mapping.net_tx_col)]);
    if (!ts || !cpu || !rx || !tx)
      throw DataFormatError("external trace: line " + std::to_string(line_no) +
                            ": non-numeric field");
    MetricRecord r;
    r.vm_id = mapping.vm_col >= 0 ? std::string(fields[static_cast<std::size_t>(mapping.vm_col)])
                                  : default_vm_id;
    r.timestamp = mapping.ts_unit == "ms" ? *ts / 1000.0 : *ts;
    r.cpu_percent = std::max(0.0, *cpu);
    r.net_kbps = std::max(0.0, *rx + *tx);
    out.push_back(std::move(r));
  }
  if (out.empty()) throw EmptyInputError("external trace: no data rows");
  std::stable_sort(out.begin(), out.end(), [](const MetricRecord& a, const MetricRecord& b) {
    return a.vm_id == b.vm_id ? a.timestamp < b.timestamp : a.vm_id < b.vm_id;
  });
  return out;
}

// key=value mapping file: delimiter, ts_col, cpu_col, net_rx_col, net_tx_col,
// vm_col, ts_unit, has_header. Unknown keys rejected.
inline ColumnMapping parse_mapping_file(std::string_view text) {
  ColumnMapping m;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start <= text.size()) {
    std::size_t eol = text.find('\n', start);
    std::string_view line = text.substr(start, eol == std::string_view::npos ? std::string_view::npos
                                                                             : eol - start);
    start = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    line = detail::chomp(line);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("mapping: line " + std::to_string(line_no) + ": expected key=value");
    std::string key(line.substr(0, eq));
    std::string value(line.substr(eq + 1));
    auto as_int = [&]() {
      auto v = detail::parse_double(value);
      if (!v) throw ConfigError("mapping: bad integer for " + key);
      return static_cast<int>(*v);
    };
    if (key == "delimiter") {
      if (value.size() != 1) throw ConfigError("mapping: delimiter must be one character");
      m.delimiter = value[0];
    } else if (key == "ts_col") {
      m.ts_col = as_int();
    } else if (key == "cpu_col") {
      m.cpu_col = as_int();
    } else if (key == "net_rx_col") {
      m.net_rx_col = as_int();
    } else if (key == "net_tx_col") {
      m.net_tx_col = as_int();
    } else if (key == "vm_col") {
      m.vm_col = as_int();
    } else if (key == "ts_unit") {
      m.ts_unit = value;
    } else if (key == "has_header") {
      m.has_header = value == "1" || value == "true" || value == "yes";
    } else {
      throw ConfigError("mapping: unknown key " + key);
    }
  }
  return m;
}

// Splits records into per-(vm, metric) series; sample interval inferred as the
// median timestamp gap so 5 s emulations and 300 s trace exports both work.
inline std::map<std::pair<std::string, Metric>, RawSeries> group_series(
    const std::vector<MetricRecord>& records) {
  if (records.empty()) throw EmptyInputError("group_series: no records");
  std::map<std::pair<std::string, Metric>, RawSeries> out;
  for (const MetricRecord& r : records) {
    for (Metric m : {Metric::cpu_percent, Metric::net_kbps}) {
      RawSeries& s = out[{r.vm_id, m}];
      if (s.samples.empty()) {
        s.vm_id = r.vm_id;
        s.metric = m;
      }
      s.samples.push_back({r.timestamp, m == Metric::cpu_percent ? r.cpu_percent : r.net_kbps});
    }
  }
  for (auto& [key, s] : out) {
    std::vector<double> gaps;
    for (std::size_t i = 1; i < s.samples.size(); ++i)
      gaps.push_back(s.samples[i].timestamp - s.samples[i - 1].timestamp);
    if (!gaps.empty()) {
      std::sort(gaps.begin(), gaps.end());
      double median = gaps[gaps.size() / 2];
      if (median > 0.0) s.sample_interval = median;
    }
  }
  return out;
}

struct SelectionThresholds {
  double cpu_mean = 10.0;    // percent
  double net_mean = 100.0;   // KB/s
};

struct SelectionReport {
  std::vector<std::string> cpu_vms;
  std::vector<std::string> net_vms;
  double cpu_spike_fraction = 0.0;  // share of all VMs with at least one spike
  double net_spike_fraction = 0.0;
};

// Keeps VMs that are both active (mean above threshold) and spiky (at least
// one upper-fence outlier), mirroring how bursty production VMs are picked
// out of a large trace; also reports the spike census over the population.
inline SelectionReport select_vms(
    const std::map<std::pair<std::string, Metric>, RawSeries>& series,
    const SelectionThresholds& thresholds = {}) {
  SelectionReport report;
  std::size_t cpu_total = 0, net_total = 0, cpu_spiky = 0, net_spiky = 0;
  for (const auto& [key, s] : series) {
    if (s.samples.empty()) continue;
    double mean = 0.0;
    std::vector<double> values;
    values.reserve(s.samples.size());
    for (const Sample& smp : s.samples) values.push_back(smp.value);
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    bool spiky = false;
    if (values.size() >= 4) spiky = !iqr_spike_flags(values).empty();
    bool is_cpu = key.second == Metric::cpu_percent;
    (is_cpu ? cpu_total : net_total) += 1;
    if (spiky) (is_cpu ? cpu_spiky : net_spiky) += 1;
    double threshold = is_cpu ? thresholds.cpu_mean : thresholds.net_mean;
    if (mean > threshold && spiky)
      (is_cpu ? report.cpu_vms : report.net_vms).push_back(key.first);
  }
  if (cpu_total > 0)
    report.cpu_spike_fraction = static_cast<double>(cpu_spiky) / static_cast<double>(cpu_total);
  if (net_total > 0)
    report.net_spike_fraction = static_cast<double>(net_spiky) / static_cast<double>(net_total);
  return report;
}

struct ReplaySplit {
  double train_window = 0.0;  // seconds from the first record
  double test_window = 0.0;   // seconds following the training window
};

struct ReplayResult {
  std::vector<MetricRecord> training;
  std::vector<MetricRecord> test;
};

// Cuts one record stream into a materialized training prefix and an ordered
// test segment. speed <= 0 means unpaced; otherwise the test segment is
// delivered to the sink at stream-time / speed pacing by the caller.
inline ReplayResult replay(const std::vector<MetricRecord>& records, const ReplaySplit& split) {
  if (records.empty()) throw EmptyInputError("replay: no records");
  if (split.train_window <= 0.0 || split.test_window <= 0.0)
    throw ConfigError("replay: train and test windows must be positive");
  double t0 = records.front().timestamp;
  for (const MetricRecord& r : records) t0 = std::min(t0, r.timestamp);
  double train_end = t0 + split.train_window;
  double test_end = train_end + split.test_window;
  ReplayResult out;
  for (const MetricRecord& r : records) {
    if (r.timestamp < train_end)
      out.training.push_back(r);
    else if (r.timestamp < test_end)
      out.test.push_back(r);
  }
  if (out.training.empty() || out.test.empty())
    throw InsufficientDataError("replay: split leaves an empty segment");
  return out;
}

}  // namespace rads
