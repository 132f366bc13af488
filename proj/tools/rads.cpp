// rads: per-VM anomaly detection over CPU and network metrics.
// Subcommands: simulate, train, detect, run, evaluate, trace-eval.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rads/rads.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitIo = 3;
constexpr int kExitDataFormat = 4;

std::string read_input(const std::string& path) {
  if (path == "-") {
    std::stringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw rads::IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& content) {
  if (path == "-") {
    std::cout << content;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw rads::IoError("cannot write " + path);
  out << content;
  if (!out.flush()) throw rads::IoError("write failed for " + path);
}

std::vector<rads::MetricRecord> load_records(const std::string& input,
                                             const std::string& mapping_path,
                                             const std::string& vm_id) {
  std::string text = read_input(input);
  if (mapping_path.empty()) return rads::parse_canonical_csv(text);
  rads::ColumnMapping mapping = rads::parse_mapping_file(read_input(mapping_path));
  std::string fallback = vm_id;
  if (fallback.empty()) {
    fallback = input == "-" ? "vm1" : std::filesystem::path(input).stem().string();
  }
  return rads::parse_external_trace(text, mapping, fallback);
}

std::vector<rads::RawSeries> pick_streams(
    const std::map<std::pair<std::string, rads::Metric>, rads::RawSeries>& grouped,
    const std::string& metric_sel) {
  std::vector<rads::RawSeries> streams;
  for (const auto& [key, series] : grouped) {
    if (metric_sel == "cpu" && key.second != rads::Metric::cpu_percent) continue;
    if (metric_sel == "net" && key.second != rads::Metric::net_kbps) continue;
    streams.push_back(series);
  }
  return streams;
}

std::string verdict_line(double ts, const std::string& vm, rads::Metric metric,
                         const char* verdict) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%.0f,%s,%s,%s\n", ts, vm.c_str(), rads::to_string(metric),
                verdict);
  return buf;
}

std::vector<rads::MetricRecord> series_to_records(const rads::LabeledSeries& labeled) {
  std::vector<rads::MetricRecord> records;
  records.reserve(labeled.series.samples.size());
  for (const rads::Sample& s : labeled.series.samples) {
    rads::MetricRecord r;
    r.vm_id = labeled.series.vm_id;
    r.timestamp = s.timestamp;
    if (labeled.series.metric == rads::Metric::cpu_percent)
      r.cpu_percent = s.value;
    else
      r.net_kbps = s.value;
    records.push_back(std::move(r));
  }
  return records;
}

std::vector<rads::WindowLabel> parse_truth(const std::string& text) {
  std::vector<rads::WindowLabel> truth;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line == "window_end,label") continue;
    std::size_t comma = line.find(',');
    if (comma == std::string::npos)
      throw rads::DataFormatError("truth: line " + std::to_string(line_no) +
                                  ": expected window_end,label");
    std::string label = line.substr(comma + 1);
    if (label != "normal" && label != "anomaly")
      throw rads::DataFormatError("truth: line " + std::to_string(line_no) +
                                  ": unknown label " + label);
    truth.push_back({std::stod(line.substr(0, comma)), label == "anomaly"});
  }
  if (truth.empty()) throw rads::EmptyInputError("truth: no labels");
  return truth;
}

rads::ScenarioSpec spec_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  rads::ScenarioSpec spec;
  spec.vm_id = j.value("vm_id", spec.vm_id);
  spec.metric = rads::metric_from_string(j.value("metric", "cpu"));
  spec.duration = j.at("duration").get<double>();
  spec.sample_interval = j.value("sample_interval", spec.sample_interval);
  spec.train_duration = j.value("train_duration", 0.0);
  spec.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("base")) {
    const auto& b = j.at("base");
    spec.base.mean = b.value("mean", 0.0);
    spec.base.noise_amplitude = b.value("noise_amplitude", 0.0);
    if (b.contains("periodic")) {
      const auto& p = b.at("periodic");
      spec.base.periodic.period = p.value("period", 0.0);
      spec.base.periodic.duty = p.value("duty", 0.5);
      spec.base.periodic.amplitude = p.value("amplitude", 0.0);
      spec.base.periodic.calm_noise_scale = p.value("calm_noise_scale", 1.0);
    }
  }
  for (const auto& s : j.value("spikes", nlohmann::json::array()))
    spec.spikes.push_back({s.at("time").get<double>(), s.value("duration", 5.0),
                           s.at("magnitude").get<double>()});
  for (const auto& a : j.value("attacks", nlohmann::json::array()))
    spec.attacks.push_back({a.at("start").get<double>(), a.at("end").get<double>(),
                            a.at("level").get<double>(), a.value("jitter", 0.0)});
  return spec;
}

int cmd_simulate(const std::string& preset_name, const std::string& spec_file,
                 const std::string& metric_sel, std::uint64_t seed, const std::string& out,
                 const std::string& truth_out) {
  rads::LabeledSeries labeled;
  if (!spec_file.empty()) {
    labeled = rads::generate(spec_from_json(read_input(spec_file)));
  } else {
    rads::Metric metric = rads::metric_from_string(metric_sel);
    labeled = rads::generate(rads::preset(rads::preset_from_string(preset_name), metric, seed));
  }
  write_output(out, rads::emit_canonical_csv(series_to_records(labeled)));
  if (!truth_out.empty()) {
    std::string truth = "window_end,label\n";
    for (const rads::WindowLabel& w : labeled.truth) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.0f,%s\n", w.window_end,
                    w.anomaly ? "anomaly" : "normal");
      truth += buf;
    }
    write_output(truth_out, truth);
  }
  return kExitOk;
}

int cmd_run(const std::string& input, const std::string& mapping, const std::string& vm_id,
            const std::string& metric_sel, rads::RunConfig cfg, const std::string& store_path,
            const std::string& alert_out, double speed) {
  auto grouped = rads::group_series(load_records(input, mapping, vm_id));
  std::vector<rads::RawSeries> streams = pick_streams(grouped, metric_sel);
  if (streams.empty()) throw rads::EmptyInputError("run: no streams selected");
  cfg.pace = speed > 0.0 ? cfg.window_len / speed : 0.0;

  std::optional<rads::ModelStore> store;
  if (!store_path.empty()) store.emplace(store_path);
  rads::RunOutput output = rads::run_online(streams, cfg, store ? &*store : nullptr);

  for (const rads::EngineEvent& e : output.events)
    std::fprintf(stderr, "[min %ld] %s/%s %s\n", e.minute, e.vm_id.c_str(),
                 rads::to_string(e.metric), rads::to_string(e.kind));

  std::string alerts;
  std::size_t alert_count = 0;
  for (const rads::DetectionResult& r : output.results) {
    if (!r.alert_emitted) continue;
    alerts += verdict_line(r.window_end, r.vm_id, r.metric, "anomaly");
    ++alert_count;
  }
  write_output(alert_out, alerts);
  std::fprintf(stderr, "processed %zu windows across %zu streams, %zu alerts\n",
               output.results.size(), streams.size(), alert_count);
  return kExitOk;
}

int cmd_train(const std::string& input, const std::string& mapping, const std::string& vm_id,
              const std::string& metric_sel, const std::string& store_path, rads::FeatureMode mode,
              std::uint64_t seed, double window_len, double spt) {
  if (store_path.empty()) throw rads::ConfigError("train: --store (or RADS_STORE) is required");
  auto grouped = rads::group_series(load_records(input, mapping, vm_id));
  rads::ModelStore store(store_path);
  std::size_t trained = 0;
  for (const rads::RawSeries& series : pick_streams(grouped, metric_sel)) {
    rads::TrainingMatrix matrix = rads::build_training_set(series, mode, window_len);
    rads::OccModel model = rads::train_occ(
        matrix, rads::derive_seed(seed, series.vm_id, rads::to_string(series.metric)));
    rads::ModelRecord record;
    record.vm_id = series.vm_id;
    record.metric = series.metric;
    record.model = model;
    record.status = "completed";
    record.stability_period = spt;
    record.spt_minutes = spt;
    std::uint64_t version = store.save(record);
    std::fprintf(stderr, "trained %s/%s from %zu windows (v%llu)\n", series.vm_id.c_str(),
                 rads::to_string(series.metric), matrix.window_count,
                 static_cast<unsigned long long>(version));
    ++trained;
  }
  if (trained == 0) throw rads::EmptyInputError("train: no streams selected");
  return kExitOk;
}

int cmd_detect(const std::string& input, const std::string& mapping, const std::string& vm_id,
               const std::string& metric_sel, const std::string& store_path,
               const std::string& out, double window_len) {
  if (store_path.empty()) throw rads::ConfigError("detect: --store (or RADS_STORE) is required");
  auto grouped = rads::group_series(load_records(input, mapping, vm_id));
  rads::ModelStore store(store_path);
  std::string lines;
  for (const rads::RawSeries& series : pick_streams(grouped, metric_sel)) {
    auto record = store.load(series.vm_id, series.metric);
    if (!record)
      throw rads::NotTrainedError("detect: no model for " + series.vm_id + "/" +
                                  rads::to_string(series.metric));
    for (const rads::WindowBin& bin : rads::partition_windows(series, window_len)) {
      rads::FeatureInstance instance =
          rads::build_test_instance(bin, record->model.bounds, record->model.mode);
      bool normal = rads::occ_classify(record->model, instance.features) ==
                    rads::Classification::positive;
      lines += verdict_line(bin.window_end, series.vm_id, series.metric,
                            normal ? "normal" : "anomaly");
    }
  }
  write_output(out, lines);
  return kExitOk;
}

int cmd_evaluate(const std::string& input, const std::string& truth_path,
                 const std::string& metric_sel, const std::vector<std::string>& mode_names,
                 double train_duration, double window_len, std::uint64_t seed,
                 const std::string& report_out) {
  auto grouped = rads::group_series(rads::parse_canonical_csv(read_input(input)));
  std::vector<rads::RawSeries> streams = pick_streams(grouped, metric_sel);
  if (streams.size() != 1)
    throw rads::ConfigError("evaluate: input must resolve to exactly one (vm, metric) series; "
                            "use --metric to pick one");
  rads::LabeledSeries labeled;
  labeled.series = streams.front();
  labeled.truth = parse_truth(read_input(truth_path));
  labeled.train_duration = train_duration;

  std::vector<rads::FeatureMode> modes;
  for (const std::string& name : mode_names)
    modes.push_back(rads::feature_mode_from_string(name));

  rads::EvalConfig cfg;
  cfg.window_len = window_len;
  cfg.train_duration = train_duration;
  cfg.seed = seed;
  std::vector<rads::MetricsReport> reports = rads::compare_modes(labeled, modes, cfg);

  std::printf("%-14s %4s %4s %4s %4s %10s %8s %8s %8s\n", "mode", "tp", "fp", "fn", "tn",
              "precision", "recall", "f1", "fpr");
  for (const rads::MetricsReport& r : reports)
    std::printf("%-14s %4zu %4zu %4zu %4zu %10.4f %8.4f %8.4f %8.4f\n", rads::to_string(r.mode),
                r.counts.tp, r.counts.fp, r.counts.fn, r.counts.tn, r.precision, r.recall, r.f1,
                r.fpr);
  if (!report_out.empty()) write_output(report_out, rads::report_csv(reports));
  return kExitOk;
}

int cmd_trace_eval(const std::string& input, const std::string& mapping,
                   const std::string& vm_id, double cpu_threshold, double net_threshold,
                   double train_window, double test_window, double window_len,
                   std::uint64_t seed, const std::string& report_out) {
  std::vector<rads::MetricRecord> records = load_records(input, mapping, vm_id);
  rads::ReplayResult split = rads::replay(records, {train_window, test_window});
  auto grouped_all = rads::group_series(records);
  rads::SelectionThresholds thresholds{cpu_threshold, net_threshold};
  rads::SelectionReport selection = rads::select_vms(grouped_all, thresholds);
  std::fprintf(stderr, "spike census: cpu %.0f%%, net %.0f%%\n",
               100.0 * selection.cpu_spike_fraction, 100.0 * selection.net_spike_fraction);
  std::fprintf(stderr, "selected: %zu cpu VMs, %zu net VMs\n", selection.cpu_vms.size(),
               selection.net_vms.size());

  auto grouped_train = rads::group_series(split.training);
  auto grouped_test = rads::group_series(split.test);

  std::string csv = "vm_id,metric,windows,fpr_average_only,fpr_avg_sd\n";
  std::size_t trend_hits = 0, trend_total = 0;
  auto eval_vm = [&](const std::string& vm, rads::Metric metric) {
    auto train_it = grouped_train.find({vm, metric});
    auto test_it = grouped_test.find({vm, metric});
    if (train_it == grouped_train.end() || test_it == grouped_test.end()) return;
    double fpr[2] = {0.0, 0.0};
    std::size_t windows = 0;
    rads::FeatureMode modes[2] = {rads::FeatureMode::average_only, rads::FeatureMode::avg_sd};
    try {
      for (int i = 0; i < 2; ++i) {
        rads::TrainingMatrix matrix =
            rads::build_training_set(train_it->second, modes[i], window_len);
        rads::OccModel model = rads::train_occ(
            matrix, rads::derive_seed(seed, vm, rads::to_string(metric)));
        std::size_t flags = 0, count = 0;
        for (const rads::WindowBin& bin :
             rads::partition_windows(test_it->second, window_len)) {
          rads::FeatureInstance inst =
              rads::build_test_instance(bin, model.bounds, modes[i]);
          if (rads::occ_classify(model, inst.features) == rads::Classification::negative)
            ++flags;
          ++count;
        }
        if (count == 0) return;
        fpr[i] = static_cast<double>(flags) / static_cast<double>(count);
        windows = count;
      }
    } catch (const rads::Error&) {
      return;  // series too short or degenerate for a fair comparison
    }
    char line[160];
    std::snprintf(line, sizeof line, "%s,%s,%zu,%.4f,%.4f\n", vm.c_str(),
                  rads::to_string(metric), windows, fpr[0], fpr[1]);
    csv += line;
    ++trend_total;
    if (fpr[1] <= fpr[0]) ++trend_hits;
  };
  for (const std::string& vm : selection.cpu_vms) eval_vm(vm, rads::Metric::cpu_percent);
  for (const std::string& vm : selection.net_vms) eval_vm(vm, rads::Metric::net_kbps);

  if (trend_total > 0)
    std::fprintf(stderr, "avg_sd FPR <= average_only FPR for %zu/%zu selected series (%.0f%%)\n",
                 trend_hits, trend_total,
                 100.0 * static_cast<double>(trend_hits) / static_cast<double>(trend_total));
  write_output(report_out.empty() ? "-" : report_out, csv);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"per-VM anomaly detection over CPU and network metrics"};
  app.require_subcommand(1);

  std::string input = "-", mapping, vm_id, metric_sel = "both", store_path, alert_out = "-";
  std::string out = "-", truth_out, report_out, truth_path, spec_file, preset_name;
  std::string mode_name = "avg-sd";
  std::vector<std::string> mode_names;
  std::uint64_t seed = 1;
  double window_len = 60.0, spt = 30.0, speed = 0.0, train_duration = 1800.0;
  double cpu_threshold = 10.0, net_threshold = 100.0;
  double train_window = 0.0, test_window = 0.0;
  unsigned parallelism = 0;

  auto* sim = app.add_subcommand("simulate", "generate a labeled synthetic workload");
  sim->add_option("--preset", preset_name,
                  "attack_test | spike_test | figure5_timeline | media_streaming_normal | "
                  "graph_analytics_normal");
  sim->add_option("--spec-file", spec_file, "JSON scenario spec instead of a preset");
  sim->add_option("--metric", metric_sel, "cpu | net")->default_val("cpu");
  sim->add_option("--seed", seed);
  sim->add_option("--out", out, "canonical CSV path, - for stdout");
  sim->add_option("--truth-out", truth_out, "window_end,label sidecar path");

  auto* run = app.add_subcommand("run", "online detection with the training optimiser");
  run->add_option("--input", input, "canonical CSV, - for stdin");
  run->add_option("--mapping", mapping, "key=value column mapping for external traces");
  run->add_option("--vm-id", vm_id, "VM id for single-VM external traces");
  run->add_option("--metric", metric_sel, "cpu | net | both");
  run->add_option("--mode", mode_name, "avg | entropy | avg-sd");
  run->add_option("--window-len", window_len, "seconds per analysis window");
  run->add_option("--spt", spt, "stability period threshold, minutes");
  run->add_option("--seed", seed);
  run->add_option("--store", store_path, "model store root (env RADS_STORE overrides)");
  run->add_option("--alert-out", alert_out, "alert sink, - for stdout");
  run->add_option("--speed", speed, "replay speed multiplier, 0 = as fast as possible");
  run->add_option("--parallelism", parallelism, "pipeline threads, 0 = hardware");

  auto* train = app.add_subcommand("train", "batch-train models from a whole file");
  train->add_option("--input", input);
  train->add_option("--mapping", mapping);
  train->add_option("--vm-id", vm_id);
  train->add_option("--metric", metric_sel, "cpu | net | both");
  train->add_option("--mode", mode_name, "avg | entropy | avg-sd");
  train->add_option("--window-len", window_len);
  train->add_option("--spt", spt);
  train->add_option("--seed", seed);
  train->add_option("--store", store_path, "model store root (env RADS_STORE overrides)");

  auto* detect = app.add_subcommand("detect", "score windows against stored models");
  detect->add_option("--input", input);
  detect->add_option("--mapping", mapping);
  detect->add_option("--vm-id", vm_id);
  detect->add_option("--metric", metric_sel, "cpu | net | both");
  detect->add_option("--window-len", window_len);
  detect->add_option("--store", store_path, "model store root (env RADS_STORE overrides)");
  detect->add_option("--out", out, "verdict sink, - for stdout");

  auto* evaluate = app.add_subcommand("evaluate", "offline train/test split metrics");
  evaluate->add_option("--input", input);
  evaluate->add_option("--truth", truth_path, "window_end,label sidecar")->required();
  evaluate->add_option("--metric", metric_sel, "cpu | net (must pick one series)");
  evaluate->add_option("--modes", mode_names, "feature modes to compare")
      ->delimiter(',');
  evaluate->add_option("--train-duration", train_duration, "training prelude, seconds");
  evaluate->add_option("--window-len", window_len);
  evaluate->add_option("--seed", seed);
  evaluate->add_option("--report-out", report_out, "CSV report path");

  auto* trace = app.add_subcommand("trace-eval", "multi-VM trace selection and FPR comparison");
  trace->add_option("--input", input);
  trace->add_option("--mapping", mapping);
  trace->add_option("--vm-id", vm_id);
  trace->add_option("--cpu-threshold", cpu_threshold, "mean CPU %% floor for selection");
  trace->add_option("--net-threshold", net_threshold, "mean net KB/s floor for selection");
  trace->add_option("--train-window", train_window, "seconds of trace used for training")
      ->required();
  trace->add_option("--test-window", test_window, "seconds of trace used for scoring")
      ->required();
  trace->add_option("--window-len", window_len);
  trace->add_option("--seed", seed);
  trace->add_option("--report-out", report_out, "per-VM CSV report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  if (const char* env_store = std::getenv("RADS_STORE"); env_store && *env_store)
    store_path = env_store;

  try {
    if (sim->parsed()) {
      if (preset_name.empty() == spec_file.empty())
        throw rads::ConfigError("simulate: exactly one of --preset or --spec-file is required");
      return cmd_simulate(preset_name, spec_file, metric_sel, seed, out, truth_out);
    }
    if (run->parsed()) {
      rads::RunConfig cfg;
      cfg.window_len = window_len;
      cfg.detection_period = window_len;
      cfg.spt_minutes = spt;
      cfg.mode = rads::feature_mode_from_string(mode_name);
      cfg.seed = seed;
      cfg.parallelism = parallelism;
      return cmd_run(input, mapping, vm_id, metric_sel, cfg, store_path, alert_out, speed);
    }
    if (train->parsed())
      return cmd_train(input, mapping, vm_id, metric_sel, store_path,
                       rads::feature_mode_from_string(mode_name), seed, window_len, spt);
    if (detect->parsed())
      return cmd_detect(input, mapping, vm_id, metric_sel, store_path, out, window_len);
    if (evaluate->parsed()) {
      if (mode_names.empty()) mode_names = {"avg", "entropy", "avg-sd"};
      if (metric_sel == "both") metric_sel = "cpu";
      return cmd_evaluate(input, truth_path, metric_sel, mode_names, train_duration, window_len,
                          seed, report_out);
    }
    if (trace->parsed())
      return cmd_trace_eval(input, mapping, vm_id, cpu_threshold, net_threshold, train_window,
                            test_window, window_len, seed, report_out);
  } catch (const rads::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const rads::NotTrainedError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const rads::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const rads::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDataFormat;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDataFormat;
  }
  return kExitOk;
}
