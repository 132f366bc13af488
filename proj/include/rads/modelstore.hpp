#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "rads/errors.hpp"
#include "rads/occ.hpp"
#include "rads/rng.hpp"

namespace rads {

// Persisted snapshot of one per-VM, per-metric model plus its training state.
struct ModelRecord {
  std::string vm_id;
  Metric metric = Metric::cpu_percent;
  OccModel model;
  std::string status = "completed";
  double stability_period = 0.0;
  double spt_minutes = 30.0;
  std::uint64_t model_version = 0;
  std::string created_at;  // informational, excluded from the checksum payload
};

namespace detail {

inline nlohmann::json model_to_json(const OccModel& m) {
  nlohmann::json j;
  j["mode"] = to_string(m.mode);
  j["bounds"] = {{"feature_min", m.bounds.feature_min},
                 {"feature_max", m.bounds.feature_max},
                 {"raw_min", m.bounds.raw_min},
                 {"raw_max", m.bounds.raw_max}};
  j["reference"] = {{"mean", m.reference.mean}, {"cov", m.reference.cov}};
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& tree : m.estimator.trees) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const TreeNode& n : tree)
      nodes.push_back({{"f", n.feature},
                       {"t", n.threshold},
                       {"l", n.left},
                       {"r", n.right},
                       {"p", n.p_target}});
    trees.push_back(std::move(nodes));
  }
  j["estimator"] = {{"trees", trees},
                    {"target_prior", m.estimator.target_prior},
                    {"artificial_prior", m.estimator.artificial_prior}};
  j["target_prior"] = m.target_prior;
  j["score_margin"] = m.score_margin;
  j["score_cutoff"] = m.score_cutoff;
  j["seed"] = m.seed;
  return j;
}

inline OccModel model_from_json(const nlohmann::json& j) {
  OccModel m;
  m.mode = feature_mode_from_string(j.at("mode").get<std::string>());
  const auto& b = j.at("bounds");
  m.bounds.feature_min = b.at("feature_min").get<std::vector<double>>();
  m.bounds.feature_max = b.at("feature_max").get<std::vector<double>>();
  m.bounds.raw_min = b.at("raw_min").get<double>();
  m.bounds.raw_max = b.at("raw_max").get<double>();
  m.reference.mean = j.at("reference").at("mean").get<std::vector<double>>();
  m.reference.cov = j.at("reference").at("cov").get<std::vector<double>>();
  const auto& e = j.at("estimator");
  for (const auto& tj : e.at("trees")) {
    std::vector<TreeNode> tree;
    for (const auto& nj : tj) {
      TreeNode n;
      n.feature = nj.at("f").get<int>();
      n.threshold = nj.at("t").get<double>();
      n.left = nj.at("l").get<int>();
      n.right = nj.at("r").get<int>();
      n.p_target = nj.at("p").get<double>();
      tree.push_back(n);
    }
    m.estimator.trees.push_back(std::move(tree));
  }
  m.estimator.target_prior = e.at("target_prior").get<double>();
  m.estimator.artificial_prior = e.at("artificial_prior").get<double>();
  m.target_prior = j.at("target_prior").get<double>();
  m.score_margin = j.at("score_margin").get<double>();
  m.score_cutoff = j.at("score_cutoff").get<double>();
  m.seed = j.at("seed").get<std::uint64_t>();
  return m;
}

inline std::string checksum_hex(const std::string& payload) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(payload)));
  return std::string(buf);
}

inline std::string now_iso8601() {
  auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return std::string(buf);
}

}  // namespace detail

// Serialized model payload without volatile fields; byte-identical for
// identical training inputs and seeds.
inline std::string serialize_model(const OccModel& m) { return detail::model_to_json(m).dump(); }

// Filesystem-backed store, one JSON document per (vm, metric), written
// atomically via a temp file and rename.
class ModelStore {
 public:
  explicit ModelStore(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }

  std::filesystem::path path_for(const std::string& vm_id, Metric metric) const {
    return root_ / vm_id / (std::string(to_string(metric)) + ".model.json");
  }

  // Returns the stored version. Versions increase by one per save of a key.
  std::uint64_t save(ModelRecord record) {
    std::uint64_t prev = 0;
    if (auto existing = try_load_quiet(record.vm_id, record.metric)) prev = existing->model_version;
    record.model_version = prev + 1;
    if (record.created_at.empty()) record.created_at = detail::now_iso8601();

    nlohmann::json j;
    j["schema_version"] = 1;
    j["vm_id"] = record.vm_id;
    j["metric"] = to_string(record.metric);
    j["model"] = detail::model_to_json(record.model);
    j["status"] = record.status;
    j["stability_period"] = record.stability_period;
    j["spt_minutes"] = record.spt_minutes;
    j["model_version"] = record.model_version;
    std::string payload = j.dump();
    j["checksum"] = detail::checksum_hex(payload);
    j["created_at"] = record.created_at;

    std::filesystem::path target = path_for(record.vm_id, record.metric);
    std::error_code ec;
    std::filesystem::create_directories(target.parent_path(), ec);
    if (ec) throw IoError("model store: cannot create " + target.parent_path().string());

    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("model store: cannot write " + tmp.string());
      out << j.dump(2) << "\n";
      if (!out.flush()) throw IoError("model store: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, target, ec);
    if (ec) throw IoError("model store: rename failed for " + target.string());
    return record.model_version;
  }

  std::optional<ModelRecord> load(const std::string& vm_id, Metric metric) const {
    std::filesystem::path target = path_for(vm_id, metric);
    if (!std::filesystem::exists(target)) return std::nullopt;
    std::ifstream in(target, std::ios::binary);
    if (!in) throw IoError("model store: cannot read " + target.string());
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::exception& e) {
      throw IntegrityError("model store: corrupt document " + target.string() + ": " + e.what());
    }
    try {
      std::string stored = j.at("checksum").get<std::string>();
      nlohmann::json body = j;
      body.erase("checksum");
      body.erase("created_at");
      if (detail::checksum_hex(body.dump()) != stored)
        throw IntegrityError("model store: checksum mismatch in " + target.string());
      ModelRecord r;
      r.vm_id = j.at("vm_id").get<std::string>();
      r.metric = metric_from_string(j.at("metric").get<std::string>());
      r.model = detail::model_from_json(j.at("model"));
      r.status = j.at("status").get<std::string>();
      r.stability_period = j.at("stability_period").get<double>();
      r.spt_minutes = j.at("spt_minutes").get<double>();
      r.model_version = j.at("model_version").get<std::uint64_t>();
      r.created_at = j.value("created_at", "");
      return r;
    } catch (const nlohmann::json::exception& e) {
      throw IntegrityError("model store: invalid schema in " + target.string() + ": " + e.what());
    }
  }

 private:
  std::optional<ModelRecord> try_load_quiet(const std::string& vm_id, Metric metric) const {
    try {
      return load(vm_id, metric);
    } catch (const Error&) {
      return std::nullopt;
    }
  }

  std::filesystem::path root_;
};

}  // namespace rads
