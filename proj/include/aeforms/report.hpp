#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aeforms/version.hpp"

namespace aeforms {

enum class Status { Pass, Fail, Flagged };

inline const char* status_name(Status s) {
  switch (s) {
    case Status::Pass: return "PASS";
    case Status::Fail: return "FAIL";
    case Status::Flagged: return "FLAGGED";
  }
  return "?";
}

/// One verdict: a task outcome tied to the condition it audits, with the
/// numbers that produced it.
struct TaskVerdict {
  std::string task;
  std::string condition;
  Status status = Status::Flagged;
  std::vector<std::pair<std::string, double>> numbers;
  std::string note;
};

struct VerdictBundle {
  int schema_version = kBundleSchemaVersion;
  std::string toolkit_version = kVersion;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string metric_family;
  int grid_points = 0;
  int dim = 0;
  std::vector<TaskVerdict> verdicts;

  bool all_pass() const {
    for (const auto& v : verdicts)
      if (v.status == Status::Fail) return false;
    return true;
  }
};

inline nlohmann::json to_json(const VerdictBundle& b) {
  nlohmann::json j;
  j["schema_version"] = b.schema_version;
  j["toolkit_version"] = b.toolkit_version;
  j["config_hash"] = b.config_hash;
  j["seed"] = b.seed;
  j["metric_family"] = b.metric_family;
  j["grid_points"] = b.grid_points;
  j["dim"] = b.dim;
  j["verdicts"] = nlohmann::json::array();
  for (const auto& v : b.verdicts) {
    nlohmann::json jv;
    jv["task"] = v.task;
    jv["condition"] = v.condition;
    jv["status"] = status_name(v.status);
    nlohmann::json nums = nlohmann::json::object();
    for (const auto& [k, val] : v.numbers) nums[k] = val;
    jv["numbers"] = nums;
    jv["note"] = v.note;
    j["verdicts"].push_back(jv);
  }
  return j;
}

inline VerdictBundle bundle_from_json(const nlohmann::json& j) {
  VerdictBundle b;
  b.schema_version = j.at("schema_version").get<int>();
  b.toolkit_version = j.at("toolkit_version").get<std::string>();
  b.config_hash = j.at("config_hash").get<std::string>();
  b.seed = j.at("seed").get<std::uint64_t>();
  b.metric_family = j.at("metric_family").get<std::string>();
  b.grid_points = j.at("grid_points").get<int>();
  b.dim = j.at("dim").get<int>();
  for (const auto& jv : j.at("verdicts")) {
    TaskVerdict v;
    v.task = jv.at("task").get<std::string>();
    v.condition = jv.at("condition").get<std::string>();
    const std::string st = jv.at("status").get<std::string>();
    v.status = st == "PASS" ? Status::Pass
               : st == "FAIL" ? Status::Fail
                              : Status::Flagged;
    for (auto it = jv.at("numbers").begin(); it != jv.at("numbers").end(); ++it)
      v.numbers.emplace_back(it.key(), it.value().get<double>());
    v.note = jv.at("note").get<std::string>();
    b.verdicts.push_back(std::move(v));
  }
  return b;
}

inline std::string bundle_to_json_text(const VerdictBundle& b) {
  return to_json(b).dump(2) + "\n";
}

/// Human-readable summary; stable byte-for-byte for a fixed bundle.
inline std::string bundle_to_text(const VerdictBundle& b) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "verdict bundle (schema %d, toolkit %s)\n",
                b.schema_version, b.toolkit_version.c_str());
  out += buf;
  std::snprintf(buf, sizeof(buf),
                "metric=%s dim=%d grid_points=%d seed=%llu config=%s\n",
                b.metric_family.c_str(), b.dim, b.grid_points,
                static_cast<unsigned long long>(b.seed), b.config_hash.c_str());
  out += buf;
  for (const auto& v : b.verdicts) {
    std::snprintf(buf, sizeof(buf), "[%s] %s (%s)", status_name(v.status),
                  v.task.c_str(), v.condition.c_str());
    out += buf;
    for (const auto& [k, val] : v.numbers) {
      std::snprintf(buf, sizeof(buf), " %s=%.12g", k.c_str(), val);
      out += buf;
    }
    if (!v.note.empty()) out += " note: " + v.note;
    out += "\n";
  }
  out += b.all_pass() ? "overall: PASS\n" : "overall: FAIL\n";
  return out;
}

/// Minimal deterministic CSV writer: comma separator, dot decimal, header row.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : os_(path) {
    if (!os_) throw std::runtime_error("cannot open " + path);
    for (std::size_t i = 0; i < header.size(); ++i)
      os_ << (i ? "," : "") << header[i];
    os_ << "\n";
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      os_ << (i ? "," : "") << cells[i];
    os_ << "\n";
  }

  static std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
  }

 private:
  std::ofstream os_;
};

}  // namespace aeforms
