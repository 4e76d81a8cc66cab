#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aeforms/grid.hpp"
#include "aeforms/metrics.hpp"

namespace aeforms {

enum class Task { CheckMetric, Spectrum, Dos, Scatter, Forms, TraceCheck };

inline const char* task_name(Task t) {
  switch (t) {
    case Task::CheckMetric: return "check-metric";
    case Task::Spectrum: return "spectrum";
    case Task::Dos: return "dos";
    case Task::Scatter: return "scatter";
    case Task::Forms: return "forms";
    case Task::TraceCheck: return "tracecheck";
  }
  return "?";
}

/// Thrown on invalid configuration; carries every violation found.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations)
      : std::runtime_error(join(violations)), violations_(std::move(violations)) {}
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "invalid config:";
    for (const auto& e : v) s += "\n  - " + e;
    return s;
  }
  std::vector<std::string> violations_;
};

struct CheckMetricParams {
  double k_decay = 0.0;
  std::vector<double> radii;
  double fit_tol = 0.2;
};

struct SpectrumParams {
  int count = 5;
  SpectrumSide side = SpectrumSide::Smallest;
  double tol = 1e-8;
  double negative_tol = 1e-8;
};

struct DosParams {
  double lo = 0.0, hi = 4.0;
  int bins = 64;
  int probes = 32;
  int moments = 200;
  double l1_threshold = 0.05;
};

struct ScatterParams {
  double x0 = -50.0;
  double momentum = 1.5;
  double sigma = 10.0;
  std::vector<double> times{10, 20, 30, 40, 50, 60};
  double tol = 1e-8;
  double boundary_cap = 1e-6;
  bool mirrored = true;
};

struct FormsParams {
  double a_threshold = 10.0;
};

struct TraceCheckParams {
  double lo = 0.2, hi = 1.0;
  int rank = 20;
  int fine_points = 0;  // 0: 3/2 of the base grid
  int degree = 1500;
  double stability_threshold = 0.10;
};

struct RunConfig {
  MetricSpec metric;
  GridSpec grid;
  std::vector<Task> tasks;
  std::uint64_t seed = 0;
  bool seed_set = false;

  CheckMetricParams check_metric;
  SpectrumParams spectrum;
  DosParams dos;
  ScatterParams scatter;
  FormsParams forms;
  TraceCheckParams trace;

  /// Canonical serialized view (sorted keys); hashed into the bundle.
  std::string canonical;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

class KeyReader {
 public:
  KeyReader(std::map<std::string, std::string> kv, std::vector<std::string>& errors)
      : kv_(std::move(kv)), errors_(&errors) {}

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string str(const std::string& key, const std::string& fallback) {
    used_.insert(key);
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
  }

  double num(const std::string& key, double fallback) {
    used_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
      std::size_t pos = 0;
      double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument("");
      return v;
    } catch (...) {
      errors_->push_back(key + ": not a number ('" + it->second + "')");
      return fallback;
    }
  }

  long integer(const std::string& key, long fallback) {
    const double v = num(key, double(fallback));
    if (v != double(long(v))) {
      errors_->push_back(key + ": not an integer");
      return fallback;
    }
    return long(v);
  }

  bool flag(const std::string& key, bool fallback) {
    const std::string v = str(key, fallback ? "true" : "false");
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    errors_->push_back(key + ": not a boolean ('" + v + "')");
    return fallback;
  }

  std::vector<double> numbers(const std::string& key,
                              const std::vector<double>& fallback) {
    used_.insert(key);
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    std::vector<double> out;
    for (const auto& tok : split(it->second, ',')) {
      try {
        out.push_back(std::stod(tok));
      } catch (...) {
        errors_->push_back(key + ": bad list entry '" + tok + "'");
      }
    }
    return out;
  }

  void finish() {
    for (const auto& [k, v] : kv_)
      if (!used_.count(k)) errors_->push_back("unknown key: " + k);
  }

  const std::map<std::string, std::string>& raw() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
  std::set<std::string> used_;
  std::vector<std::string>* errors_;
};

}  // namespace detail

/// Parses the flat key-value config format (dotted section names, '#'
/// comments) and validates every task's parameters up front. Throws
/// ConfigError carrying the full violation list.
inline RunConfig parse_config(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::vector<std::string> errors;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty()) {
      errors.push_back("line " + std::to_string(lineno) + ": empty key");
      continue;
    }
    if (kv.count(key)) errors.push_back("duplicate key: " + key);
    kv[key] = val;
  }

  detail::KeyReader r(kv, errors);
  RunConfig cfg;

  const std::string fam = r.str("metric.family", "flat");
  try {
    cfg.metric.family = family_from_name(fam);
  } catch (const std::exception& e) {
    errors.push_back(e.what());
  }
  cfg.metric.dim = int(r.integer("metric.dim", 2));
  cfg.metric.amplitude = r.num("metric.amplitude", 0.0);
  cfg.metric.decay_p = r.num("metric.p", 4.0);
  try {
    cfg.metric.validate();
  } catch (const std::exception& e) {
    errors.push_back(std::string("metric: ") + e.what());
  }

  cfg.grid.dim = cfg.metric.dim;
  cfg.grid.half_width = r.num("grid.half_width", 8.0);
  cfg.grid.points_per_axis = int(r.integer("grid.points", 33));
  try {
    cfg.grid.validate();
  } catch (const std::exception& e) {
    errors.push_back(std::string("grid: ") + e.what());
  }

  for (const auto& t : detail::split(r.str("tasks", ""), ',')) {
    if (t.empty()) continue;
    if (t == "check-metric") cfg.tasks.push_back(Task::CheckMetric);
    else if (t == "spectrum") cfg.tasks.push_back(Task::Spectrum);
    else if (t == "dos") cfg.tasks.push_back(Task::Dos);
    else if (t == "scatter") cfg.tasks.push_back(Task::Scatter);
    else if (t == "forms") cfg.tasks.push_back(Task::Forms);
    else if (t == "tracecheck") cfg.tasks.push_back(Task::TraceCheck);
    else errors.push_back("unknown task: " + t);
  }

  cfg.seed_set = r.has("seed");
  cfg.seed = std::uint64_t(r.integer("seed", 0));

  auto has_task = [&](Task t) {
    return std::find(cfg.tasks.begin(), cfg.tasks.end(), t) != cfg.tasks.end();
  };
  const bool stochastic = has_task(Task::Spectrum) || has_task(Task::Dos) ||
                          has_task(Task::Forms) || has_task(Task::TraceCheck);
  if (stochastic && !cfg.seed_set)
    errors.push_back("seed: required for stochastic tasks (spectrum, dos, forms, tracecheck)");

  cfg.check_metric.k_decay = r.num("check-metric.k_decay", cfg.metric.dim + 1.0);
  cfg.check_metric.radii = r.numbers("check-metric.radii", {2, 4, 8, 16});
  cfg.check_metric.fit_tol = r.num("check-metric.fit_tol", 0.2);
  if (has_task(Task::CheckMetric)) {
    if (!(cfg.check_metric.k_decay > cfg.metric.dim))
      errors.push_back(
          "check-metric.k_decay: must exceed the dimension (theorem hypothesis "
          "k > n)");
    if (cfg.check_metric.radii.size() < 3)
      errors.push_back("check-metric.radii: need at least 3 dyadic levels");
  }

  cfg.spectrum.count = int(r.integer("spectrum.count", 5));
  const std::string side = r.str("spectrum.side", "smallest");
  if (side == "smallest") cfg.spectrum.side = SpectrumSide::Smallest;
  else if (side == "largest") cfg.spectrum.side = SpectrumSide::Largest;
  else errors.push_back("spectrum.side: expected smallest|largest");
  cfg.spectrum.tol = r.num("spectrum.tol", 1e-8);
  cfg.spectrum.negative_tol = r.num("spectrum.negative_tol", 1e-8);
  if (has_task(Task::Spectrum)) {
    if (cfg.spectrum.count < 1) errors.push_back("spectrum.count: must be >= 1");
    if (!(cfg.spectrum.tol > 0)) errors.push_back("spectrum.tol: must be > 0");
  }

  cfg.dos.lo = r.num("dos.lo", 0.0);
  cfg.dos.hi = r.num("dos.hi", 4.0);
  cfg.dos.bins = int(r.integer("dos.bins", 64));
  cfg.dos.probes = int(r.integer("dos.probes", 32));
  cfg.dos.moments = int(r.integer("dos.moments", 200));
  cfg.dos.l1_threshold = r.num("dos.l1_threshold", 0.05);
  if (has_task(Task::Dos)) {
    if (!(cfg.dos.lo < cfg.dos.hi)) errors.push_back("dos: empty interval");
    if (cfg.dos.probes < 8) errors.push_back("dos.probes: must be >= 8");
    if (cfg.dos.bins < 1) errors.push_back("dos.bins: must be >= 1");
    if (cfg.dos.moments < 16) errors.push_back("dos.moments: must be >= 16");
  }

  cfg.scatter.x0 = r.num("scatter.x0", -50.0);
  cfg.scatter.momentum = r.num("scatter.momentum", 1.5);
  cfg.scatter.sigma = r.num("scatter.sigma", 10.0);
  cfg.scatter.times = r.numbers("scatter.times", {10, 20, 30, 40, 50, 60});
  cfg.scatter.tol = r.num("scatter.tol", 1e-8);
  cfg.scatter.boundary_cap = r.num("scatter.boundary_cap", 1e-6);
  cfg.scatter.mirrored = r.flag("scatter.mirrored", true);
  if (has_task(Task::Scatter)) {
    if (cfg.metric.dim != 1)
      errors.push_back("scatter: shipped scenarios are one-dimensional");
    if (cfg.scatter.times.size() < 3)
      errors.push_back("scatter.times: need at least 3 increasing times");
    for (std::size_t i = 1; i < cfg.scatter.times.size(); ++i)
      if (!(cfg.scatter.times[i] > cfg.scatter.times[i - 1])) {
        errors.push_back("scatter.times: must strictly increase");
        break;
      }
    if (!(cfg.scatter.sigma > 0)) errors.push_back("scatter.sigma: must be > 0");
    if (std::abs(cfg.scatter.x0) + 6.0 * cfg.scatter.sigma > cfg.grid.half_width)
      errors.push_back("scatter: packet violates the six-sigma support margin");
  }

  cfg.forms.a_threshold = r.num("forms.a_threshold", 10.0);

  cfg.trace.lo = r.num("tracecheck.lo", 0.2);
  cfg.trace.hi = r.num("tracecheck.hi", 1.0);
  cfg.trace.rank = int(r.integer("tracecheck.rank", 20));
  cfg.trace.fine_points = int(r.integer("tracecheck.fine_points", 0));
  cfg.trace.degree = int(r.integer("tracecheck.degree", 1500));
  cfg.trace.stability_threshold = r.num("tracecheck.stability_threshold", 0.10);
  if (has_task(Task::TraceCheck)) {
    if (!(cfg.trace.lo < cfg.trace.hi)) errors.push_back("tracecheck: empty interval");
    if (cfg.trace.rank < 1 || cfg.trace.rank > 64)
      errors.push_back("tracecheck.rank: must be in [1, 64]");
    if (cfg.trace.fine_points != 0 &&
        cfg.trace.fine_points <= cfg.grid.points_per_axis)
      errors.push_back("tracecheck.fine_points: must exceed grid.points");
  }

  r.finish();
  if (!errors.empty()) throw ConfigError(std::move(errors));

  std::ostringstream canon;
  for (const auto& [k, v] : r.raw()) canon << k << "=" << v << "\n";
  cfg.canonical = canon.str();
  return cfg;
}

inline RunConfig parse_config_string(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

inline std::uint64_t config_hash(const RunConfig& cfg) {
  return detail::fnv1a(cfg.canonical);
}

}  // namespace aeforms
