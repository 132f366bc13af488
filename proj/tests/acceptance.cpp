// Acceptance gate: one line per criterion, nonzero exit when any fails.
// Checks run against the library defaults, exactly as a fresh build ships.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rads/rads.hpp"

using namespace rads;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

// ---- criterion 1: detection quality on seeded synthetic scenarios ----------

struct FlavorTally {
  int detector_ok = 0;   // pooled F1 >= 0.85 and FPR <= 0.05
  int baseline_ok = 0;   // average-only FPR >= 0.15 (the noisy baseline stays noisy)
};

FlavorTally run_flavor(Metric metric) {
  FlavorTally tally;
  for (unsigned seed = 1; seed <= 10; ++seed) {
    EvalConfig cfg;
    cfg.seed = seed;
    ConfusionCounts pooled_sd, pooled_avg;
    for (PresetName p : {PresetName::attack_test, PresetName::spike_test}) {
      LabeledSeries lab = generate(preset(p, metric, seed));
      pooled_sd += evaluate_static(lab, FeatureMode::avg_sd, cfg).report.counts;
      pooled_avg += evaluate_static(lab, FeatureMode::average_only, cfg).report.counts;
    }
    MetricsReport sd = metrics(pooled_sd);
    MetricsReport avg = metrics(pooled_avg);
    if (sd.f1 >= 0.85 && sd.fpr <= 0.05) ++tally.detector_ok;
    if (avg.fpr >= 0.15) ++tally.baseline_ok;
  }
  return tally;
}

bool criterion1(std::string& detail) {
  Clock::time_point t0 = Clock::now();
  FlavorTally cpu = run_flavor(Metric::cpu_percent);
  FlavorTally net = run_flavor(Metric::net_kbps);

  // an average-only view has no handle on a busy-but-flat CPU thief
  double worst_entropy_recall = 0.0;
  for (unsigned seed = 1; seed <= 10; ++seed) {
    EvalConfig cfg;
    cfg.seed = seed;
    LabeledSeries lab = generate(preset(PresetName::attack_test, Metric::cpu_percent, seed));
    EvalRun run = evaluate_static(lab, FeatureMode::entropy_only, cfg);
    worst_entropy_recall = std::max(worst_entropy_recall, run.report.recall);
  }
  double elapsed = seconds_since(t0);

  bool pass = cpu.detector_ok >= 8 && net.detector_ok >= 8 && cpu.baseline_ok >= 8 &&
              net.baseline_ok >= 8 && worst_entropy_recall <= 0.2 && elapsed < 30.0;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "detector cpu %d/10 net %d/10 seeds, baseline fpr cpu %d/10 net %d/10, "
                "entropy-only max recall %.2f, %.1f s",
                cpu.detector_ok, net.detector_ok, cpu.baseline_ok, net.baseline_ok,
                worst_entropy_recall, elapsed);
  detail = buf;
  return pass;
}

// ---- criterion 2: metrics arithmetic against reference confusion tuples ----

bool criterion2(std::string& detail) {
  struct Row {
    ConfusionCounts counts;  // {tp, fp, fn, tn}
    const char* f1;
    const char* fpr;
  };
  const Row rows[] = {
      {{9, 1, 1, 29}, "0.90", "0.03"},  {{9, 0, 1, 30}, "0.95", "0.00"},
      {{10, 6, 0, 24}, "0.77", "0.20"}, {{10, 8, 0, 22}, "0.71", "0.27"},
      {{0, 2, 10, 28}, "0.00", "0.07"}, {{10, 0, 0, 30}, "1.00", "0.00"},
  };
  int ok = 0;
  for (const Row& row : rows) {
    MetricsReport r = metrics(row.counts);
    char f1[16], fpr[16];
    std::snprintf(f1, sizeof f1, "%.2f", r.f1);
    std::snprintf(fpr, sizeof fpr, "%.2f", r.fpr);
    if (std::string(f1) == row.f1 && std::string(fpr) == row.fpr) ++ok;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%d/6 confusion tuples reproduce F1 and FPR", ok);
  detail = buf;
  return ok == 6;
}

// ---- criterion 3: online training and alert timeline --------------------

bool criterion3(std::string& detail) {
  LabeledSeries lab = generate(preset(PresetName::figure5_timeline, Metric::cpu_percent, 1));
  RunConfig cfg;
  RunOutput out = run_online({lab.series}, cfg);
  std::string got;
  for (const EngineEvent& e : out.events) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s@%ld ", to_string(e.kind), e.minute);
    got += buf;
  }
  const std::string want =
      "retrain@5 stopped@10 retrain@15 stopped@20 stopped@25 stopped@30 "
      "stopped@35 stopped@40 completed@45 alert@49 ";
  detail = got == want ? "event trace matches" : "got \"" + got + "\"";
  return got == want;
}

// ---- criterion 4: score combination oracle + 1-D separation ---------------

// Density recomputed through an explicit inverse rather than the library's
// Cholesky path, so the two agree only if both are right.
double oracle_log_pdf(const GaussianDensity& d, const std::vector<double>& x) {
  constexpr double kLogTwoPi = 1.8378770664093454836;
  if (d.dim() == 1) {
    double var = d.cov[0];
    double dx = x[0] - d.mean[0];
    return -0.5 * (kLogTwoPi + std::log(var)) - dx * dx / (2.0 * var);
  }
  double a = d.cov[0], b = d.cov[1], c = d.cov[2], e = d.cov[3];
  double det = a * e - b * c;
  double dx = x[0] - d.mean[0], dy = x[1] - d.mean[1];
  double q = (e * dx * dx - (b + c) * dx * dy + a * dy * dy) / det;
  return -kLogTwoPi - 0.5 * std::log(det) - 0.5 * q;
}

bool criterion4(std::string& detail) {
  double max_rel = 0.0;
  std::size_t cases = 0;
  for (int c = 0; c < 50; ++c) {
    Rng rng(derive_seed(4000 + c, "cloud"));
    bool planar = c % 2 == 0;
    double cx = rng.uniform(-5.0, 5.0), cy = rng.uniform(-5.0, 5.0);
    double sx = rng.uniform(0.3, 2.0), sy = rng.uniform(0.3, 2.0);
    double rho = rng.uniform(-0.8, 0.8);
    std::vector<std::vector<double>> points;
    for (int i = 0; i < 40; ++i) {
      double n1 = rng.normal01(), n2 = rng.normal01();
      if (planar)
        points.push_back({cx + sx * n1, cy + sy * (rho * n1 + std::sqrt(1 - rho * rho) * n2)});
      else
        points.push_back({cx + sx * n1});
    }
    OccModel model = fit_occ(points, derive_seed(4000 + c, "fit"));
    for (int k = 0; k < 20; ++k) {
      std::vector<double> x{cx + rng.uniform(-8.0, 8.0)};
      if (planar) x.push_back(cy + rng.uniform(-8.0, 8.0));
      double p = occ_p_target(model, x);
      double oracle = std::log1p(-model.target_prior) - std::log(model.target_prior) +
                      std::log(p) - std::log1p(-p) + oracle_log_pdf(model.reference, x);
      double got = occ_score(model, x);
      max_rel = std::max(max_rel,
                         std::abs(got - oracle) / std::max({1.0, std::abs(oracle), std::abs(got)}));
      ++cases;
    }
  }

  Rng rng(derive_seed(77, "sep"));
  std::vector<std::vector<double>> train;
  for (int i = 0; i < 200; ++i) train.push_back({rng.normal01()});
  OccModel model = fit_occ(train, derive_seed(77, "sepfit"));
  int correct = 0;
  for (int i = 0; i < 500; ++i)
    if (occ_classify(model, {rng.normal01()}) == Classification::positive) ++correct;
  for (int i = 0; i < 500; ++i)
    if (occ_classify(model, {6.0 + rng.normal01()}) == Classification::negative) ++correct;
  double accuracy = correct / 1000.0;

  bool pass = cases == 1000 && max_rel <= 1e-9 && accuracy >= 0.95;
  char buf[128];
  std::snprintf(buf, sizeof buf, "max rel err %.2e over %zu cases, 1-D split accuracy %.1f%%",
                max_rel, cases, 100.0 * accuracy);
  detail = buf;
  return pass;
}

// ---- criterion 5: window statistics, entropy bounds, spike flags ----------

double brute_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  double pos = q * static_cast<double>(v.size() - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  double frac = pos - static_cast<double>(lo);
  return v[lo] + frac * (v[hi] - v[lo]);
}

bool criterion5(std::string& detail) {
  Clock::time_point t0 = Clock::now();

  double max_rel = 0.0;
  for (int c = 0; c < 1000; ++c) {
    Rng rng(derive_seed(5000 + c, "stats"));
    WindowBin bin;
    bin.window_end = 60.0;
    std::size_t n = 4 + rng.below(60);
    double offset = c % 7 == 0 ? 1e6 : 0.0;  // stress cancellation
    for (std::size_t i = 0; i < n; ++i) bin.values.push_back(offset + rng.uniform(-50.0, 50.0));
    WindowStats got = window_stats(bin);
    long double mean = 0.0L;
    for (double v : bin.values) mean += v;
    mean /= static_cast<long double>(n);
    long double ss = 0.0L;
    for (double v : bin.values) ss += (v - mean) * (v - mean);
    double sd = std::sqrt(static_cast<double>(ss / static_cast<long double>(n - 1)));
    if (!rel_close(got.avg, static_cast<double>(mean), 1e-9) || !rel_close(got.sd, sd, 1e-9)) {
      detail = "window stats diverge from the two-pass oracle";
      return false;
    }
    max_rel = std::max({max_rel, std::abs(got.avg - static_cast<double>(mean)),
                        std::abs(got.sd - sd)});
  }

  WindowBin uniform;
  uniform.window_end = 60.0;
  for (int i = 0; i < 10; ++i) uniform.values.push_back((i + 0.5) / 10.0);
  if (entropy(uniform, 0.0, 1.0) != std::log(10.0)) {
    detail = "uniform spread must hit the entropy ceiling exactly";
    return false;
  }
  for (int c = 0; c < 500; ++c) {
    Rng rng(derive_seed(5500 + c, "entropy"));
    WindowBin bin;
    bin.window_end = 60.0;
    std::size_t n = 1 + rng.below(40);
    for (std::size_t i = 0; i < n; ++i) bin.values.push_back(rng.uniform(-10.0, 110.0));
    double h = entropy(bin, 0.0, 100.0);
    if (h < 0.0 || h > std::log(10.0) + 1e-12) {
      detail = "entropy left its [0, ln 10] range";
      return false;
    }
  }

  for (int c = 0; c < 1000; ++c) {
    Rng rng(derive_seed(6000 + c, "iqr"));
    std::size_t n = 4 + rng.below(200);
    std::vector<double> values;
    for (std::size_t i = 0; i < n; ++i) {
      double v = rng.uniform(0.0, 100.0);
      if (rng.uniform01() < 0.1) v += rng.uniform(100.0, 600.0);
      values.push_back(v);
    }
    if (c % 4 == 0 && n > 6) values[n - 1] = values[0];  // introduce ties
    double q1 = brute_quantile(values, 0.25);
    double q3 = brute_quantile(values, 0.75);
    double fence = q3 + 1.5 * (q3 - q1);
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < values.size(); ++i)
      if (values[i] > fence) expected.push_back(i);
    if (iqr_spike_flags(values) != expected) {
      detail = "spike flags diverge from the brute-force fence";
      return false;
    }
  }

  double elapsed = seconds_since(t0);
  char buf[128];
  std::snprintf(buf, sizeof buf,
                "stats max abs err %.2e, entropy bounded, 1000 flag vectors match, %.1f s",
                max_rel, elapsed);
  detail = buf;
  return elapsed < 10.0;
}

// ---- criterion 6: sustained-load probes against low-utilization clusters --

bool criterion6(std::string& detail) {
  int bad = 0;
  std::size_t checks = 0;
  for (int d = 0; d < 100; ++d) {
    Rng rng(derive_seed(900 + d, "cluster"));
    // correlated low-utilization cluster: load bursts raise avg and sd together
    std::vector<std::vector<double>> pts;
    for (int i = 0; i < 30; ++i) {
      double t = rng.uniform01();
      double a = 0.15 + 0.6 * t + 0.05 * rng.normal01();
      double s = 0.20 + 0.5 * t + 0.05 * rng.normal01();
      pts.push_back({a, s});
    }
    double amin = 1e9, amax = -1e9, smin = 1e9, smax = -1e9;
    for (const auto& p : pts) {
      amin = std::min(amin, p[0]);
      amax = std::max(amax, p[0]);
      smin = std::min(smin, p[1]);
      smax = std::max(smax, p[1]);
    }
    for (auto& p : pts) {
      p[0] = (p[0] - amin) / (amax - amin);
      p[1] = (p[1] - smin) / (smax - smin);
    }
    for (int i = 0; i < 30; ++i) pts.push_back({1.0, 1.0});
    OccModel model = fit_occ(pts, derive_seed(900 + d, "fit"));

    // sustained high load, spread inside the trained band: must be rejected
    for (int k = 0; k < 20; ++k) {
      double pa = 1.2 + 0.8 * rng.uniform01();
      double ps = 0.6 * rng.uniform01();
      if (occ_classify(model, {pa, ps}) == Classification::positive) ++bad;
      ++checks;
    }
    // the clamp corner carries training mass and must stay accepted
    for (int k = 0; k < 3; ++k) {
      if (occ_classify(model, {1.0, 1.0}) == Classification::negative) ++bad;
      ++checks;
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof buf, "%d stray classifications over 100 cluster draws (%zu checks)",
                bad, checks);
  detail = buf;
  return bad == 0;
}

// ---- criterion 7: optional external trace comparison ----------------------

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double env_seconds(const char* name, double fallback) {
  const char* value = std::getenv(name);
  return value && *value ? std::atof(value) : fallback;
}

// Returns true for PASS or SKIP; SKIP is reported in the detail text.
bool criterion7(std::string& detail) {
  const char* trace_path = std::getenv("RADS_TRACE");
  if (!trace_path || !*trace_path) {
    detail = "SKIP no external trace supplied; set RADS_TRACE "
             "(optional RADS_TRACE_MAPPING, RADS_TRACE_TRAIN, RADS_TRACE_TEST)";
    return true;
  }

  std::string text = read_file(trace_path);
  std::vector<MetricRecord> records;
  if (const char* mapping_path = std::getenv("RADS_TRACE_MAPPING");
      mapping_path && *mapping_path) {
    ColumnMapping mapping = parse_mapping_file(read_file(mapping_path));
    records = parse_external_trace(text, mapping, "vm1");
  } else {
    records = parse_canonical_csv(text);
  }

  double t_min = records.front().timestamp, t_max = records.front().timestamp;
  for (const MetricRecord& r : records) {
    t_min = std::min(t_min, r.timestamp);
    t_max = std::max(t_max, r.timestamp);
  }
  double span = t_max - t_min;
  double train_window = env_seconds("RADS_TRACE_TRAIN", span / 2.0);
  double test_window = env_seconds("RADS_TRACE_TEST", span - span / 2.0);

  ReplayResult split = replay(records, {train_window, test_window});
  SelectionReport selection = select_vms(group_series(records), {});
  auto grouped_train = group_series(split.training);
  auto grouped_test = group_series(split.test);

  std::size_t hits = 0, total = 0;
  auto eval_vm = [&](const std::string& vm, Metric metric) {
    auto train_it = grouped_train.find({vm, metric});
    auto test_it = grouped_test.find({vm, metric});
    if (train_it == grouped_train.end() || test_it == grouped_test.end()) return;
    double fpr[2] = {0.0, 0.0};
    FeatureMode modes[2] = {FeatureMode::average_only, FeatureMode::avg_sd};
    try {
      for (int i = 0; i < 2; ++i) {
        TrainingMatrix matrix = build_training_set(train_it->second, modes[i], 60.0);
        OccModel model = train_occ(matrix, derive_seed(1, vm, to_string(metric)));
        std::size_t flags = 0, count = 0;
        for (const WindowBin& bin : partition_windows(test_it->second, 60.0)) {
          FeatureInstance inst = build_test_instance(bin, model.bounds, modes[i]);
          if (occ_classify(model, inst.features) == Classification::negative) ++flags;
          ++count;
        }
        if (count == 0) return;
        fpr[i] = static_cast<double>(flags) / static_cast<double>(count);
      }
    } catch (const Error&) {
      return;  // series too short or degenerate for a fair comparison
    }
    ++total;
    if (fpr[1] <= fpr[0]) ++hits;
  };
  for (const std::string& vm : selection.cpu_vms) eval_vm(vm, Metric::cpu_percent);
  for (const std::string& vm : selection.net_vms) eval_vm(vm, Metric::net_kbps);

  if (total == 0) {
    detail = "SKIP trace selected no evaluable series";
    return true;
  }
  double fraction = static_cast<double>(hits) / static_cast<double>(total);
  char buf[128];
  std::snprintf(buf, sizeof buf, "two-feature FPR <= average-only FPR on %zu/%zu series (%.0f%%)",
                hits, total, 100.0 * fraction);
  detail = buf;
  return fraction >= 0.7;
}

}  // namespace

int main() {
  struct Entry {
    int number;
    bool (*check)(std::string&);
  };
  const Entry entries[] = {
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4},
      {5, criterion5}, {6, criterion6}, {7, criterion7},
  };
  int failures = 0;
  for (const Entry& entry : entries) {
    std::string detail;
    bool pass = false;
    try {
      pass = entry.check(detail);
    } catch (const std::exception& e) {
      detail = std::string("threw: ") + e.what();
    }
    const char* verdict = pass ? "PASS" : "FAIL";
    if (pass && detail.rfind("SKIP", 0) == 0) {
      std::printf("criterion %d: %s\n", entry.number, detail.c_str());
    } else {
      std::printf("criterion %d: %s %s\n", entry.number, verdict, detail.c_str());
    }
    if (!pass) ++failures;
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
