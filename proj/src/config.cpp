#include "stqa/config.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <set>
#include <stdexcept>

namespace stqa {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  if (!obj.is_object()) throw std::invalid_argument(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (!known.count(key)) throw std::invalid_argument(where + ": unknown key '" + key + "'");
  }
}

double number(const json& obj, const char* key, double fallback, double lo, double hi,
              const std::string& where, bool open_lo = false) {
  if (!obj.contains(key)) return fallback;
  const auto& v = obj.at(key);
  if (!v.is_number()) throw std::invalid_argument(where + "." + key + ": expected a number");
  const double x = v.get<double>();
  if ((open_lo ? x <= lo : x < lo) || x > hi) {
    throw std::invalid_argument(where + "." + key + "=" + v.dump() + " outside [" +
                                std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  return x;
}

std::filesystem::path path_of(const json& obj, const char* key,
                              const std::filesystem::path& fallback,
                              const std::filesystem::path& base) {
  if (!obj.contains(key)) return fallback;
  std::filesystem::path p = obj.at(key).get<std::string>();
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

}  // namespace

Config Config::from_json(const json& doc, const std::filesystem::path& base) {
  Config c;
  reject_unknown(doc,
                 {"paths", "fps", "broadcast_half_window_s", "clip_min_s", "clip_max_s",
                  "max_rejected_rate", "max_step", "gate", "motion_thresholds", "quotas",
                  "default_quota", "window_lengths_s", "weights", "seed", "threads"},
                 "config");
  if (doc.contains("paths")) {
    const auto& p = doc.at("paths");
    reject_unknown(p, {"annotations", "vocabulary", "templates", "output"}, "paths");
    c.paths.annotations = path_of(p, "annotations", {}, base);
    c.paths.vocabulary = path_of(p, "vocabulary", {}, base);
    c.paths.templates = path_of(p, "templates", {}, base);
    c.paths.output = path_of(p, "output", c.paths.output, base);
  }
  c.fps = number(doc, "fps", c.fps, 0.0, 1000.0, "config", true);
  c.broadcast_half_window_s =
      number(doc, "broadcast_half_window_s", c.broadcast_half_window_s, 0.0, 60.0, "config");
  c.clip_min_s = number(doc, "clip_min_s", c.clip_min_s, 0.0, 86400.0, "config", true);
  c.clip_max_s = number(doc, "clip_max_s", c.clip_max_s, 0.0, 86400.0, "config", true);
  if (c.clip_min_s > c.clip_max_s) throw std::invalid_argument("config: clip_min_s > clip_max_s");
  c.max_rejected_rate = number(doc, "max_rejected_rate", c.max_rejected_rate, 0.0, 1.0, "config");

  auto& g = c.generation;
  g.scene.max_step = number(doc, "max_step", g.scene.max_step, 0.0, 2.0, "config", true);
  g.scene.gate = number(doc, "gate", g.scene.gate, 0.0, 2.0, "config", true);
  if (doc.contains("motion_thresholds")) {
    const auto& m = doc.at("motion_thresholds");
    reject_unknown(m, {"slow", "active"}, "motion_thresholds");
    g.thresholds.slow = number(m, "slow", g.thresholds.slow, 0.0, 10.0, "motion_thresholds");
    g.thresholds.active = number(m, "active", g.thresholds.active, 0.0, 10.0, "motion_thresholds");
    if (g.thresholds.slow > g.thresholds.active) {
      throw std::invalid_argument("motion_thresholds: slow > active");
    }
  }
  g.default_quota =
      static_cast<int>(number(doc, "default_quota", g.default_quota, 0, 1e6, "config"));
  if (doc.contains("quotas")) {
    const auto& q = doc.at("quotas");
    if (!q.is_object()) throw std::invalid_argument("quotas: expected an object");
    for (const auto& [key, value] : q.items()) {
      const auto st = subtask_from_string(key);
      if (!st) throw std::invalid_argument("quotas: unknown subtask '" + key + "'");
      g.quotas[*st] = static_cast<int>(number(q, key.c_str(), 0, 0, 1e6, "quotas"));
    }
  }
  if (doc.contains("window_lengths_s")) {
    g.window_lengths_s = doc.at("window_lengths_s").get<std::vector<double>>();
    if (g.window_lengths_s.empty()) throw std::invalid_argument("window_lengths_s: empty");
    for (double w : g.window_lengths_s) {
      if (!(w > 0.0)) throw std::invalid_argument("window_lengths_s: lengths must be positive");
    }
  }
  if (doc.contains("weights")) {
    const auto& w = doc.at("weights");
    reject_unknown(w, {"velocity_numeric", "comparison_verdict", "cot_conclusion", "speed_floor"},
                   "weights");
    auto& mw = c.weights;
    mw.velocity_numeric = number(w, "velocity_numeric", mw.velocity_numeric, 0, 1, "weights");
    mw.comparison_verdict = number(w, "comparison_verdict", mw.comparison_verdict, 0, 1, "weights");
    mw.cot_conclusion = number(w, "cot_conclusion", mw.cot_conclusion, 0, 1, "weights");
    mw.speed_floor = number(w, "speed_floor", mw.speed_floor, 0, 1, "weights", true);
  }
  if (doc.contains("seed")) {
    const auto& s = doc.at("seed");
    if (!s.is_number_integer() || (!s.is_number_unsigned() && s.get<std::int64_t>() < 0)) {
      throw std::invalid_argument("config.seed: expected a non-negative integer");
    }
    g.master_seed = s.get<std::uint64_t>();
  }
  g.threads = static_cast<unsigned>(number(doc, "threads", g.threads, 1, 256, "config"));
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  return from_json(doc, path.parent_path());
}

json Config::to_json() const {
  const auto& g = generation;
  json quotas = json::object();
  for (const auto& [st, n] : g.quotas) quotas[stqa::to_string(st)] = n;
  return {{"paths",
           {{"annotations", paths.annotations.string()},
            {"vocabulary", paths.vocabulary.string()},
            {"templates", paths.templates.string()},
            {"output", paths.output.string()}}},
          {"fps", fps},
          {"broadcast_half_window_s", broadcast_half_window_s},
          {"clip_min_s", clip_min_s},
          {"clip_max_s", clip_max_s},
          {"max_rejected_rate", max_rejected_rate},
          {"max_step", g.scene.max_step},
          {"gate", g.scene.gate},
          {"motion_thresholds", {{"slow", g.thresholds.slow}, {"active", g.thresholds.active}}},
          {"default_quota", g.default_quota},
          {"quotas", quotas},
          {"window_lengths_s", g.window_lengths_s},
          {"weights",
           {{"velocity_numeric", weights.velocity_numeric},
            {"comparison_verdict", weights.comparison_verdict},
            {"cot_conclusion", weights.cot_conclusion},
            {"speed_floor", weights.speed_floor}}},
          {"seed", g.master_seed},
          {"threads", g.threads}};
}

LogLevel log_level_from_env() {
  const char* v = std::getenv("STQA_LOG");
  if (v == nullptr) return LogLevel::info;
  const std::string s(v);
  if (s == "error") return LogLevel::error;
  if (s == "warn") return LogLevel::warn;
  if (s == "debug") return LogLevel::debug;
  return LogLevel::info;
}

void log(LogLevel level, const std::string& message) {
  static const LogLevel threshold = log_level_from_env();
  static std::mutex mu;
  if (level > threshold) return;
  static const char* names[] = {"error", "warn", "info", "debug"};
  std::lock_guard<std::mutex> lock(mu);
  std::cerr << '[' << names[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace stqa
