#pragma once

// Flat key = value experiment configuration.
//
// Blank lines and '#' comments are ignored. Every key is typed; unknown keys,
// duplicate keys and unparsable values are errors naming the key and line.
//
//   kind, input_dim, output_dim, block_size, noise_sigma, seed, eval_size,
//   window, seeds, iterations, regimes,
//   regime.<i>.duration, regime.<i>.truth  (q*p values, row-major),
//   learners  (space-separated ids),
//   learner.<id>.{kind, learning_rate, iterations, weight_decay, beta, delta,
//                 alpha, batch_size}

#include <charconv>
#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "rlsol/drift.hpp"
#include "rlsol/errors.hpp"

namespace rlsol {

struct BenchConfig {
  DriftScenario scenario;
  std::vector<LearnerSpec> learners;
  std::size_t window = 10;
  std::size_t seeds = 50;
  // Normalized "key = value" lines in sorted key order; equal for configs
  // that differ only in comments, spacing or key order.
  std::string canonical;
};

namespace detail {

struct ConfigEntry {
  std::string value;
  std::size_t line = 0;
};

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::string normalize_spaces(const std::string& s) {
  std::istringstream ss(s);
  std::string out;
  for (std::string w; ss >> w;) out += (out.empty() ? "" : " ") + w;
  return out;
}

inline std::vector<std::string> split_words(const std::string& s) {
  std::istringstream ss(s);
  std::vector<std::string> out;
  for (std::string w; ss >> w;) out.push_back(w);
  return out;
}

class ConfigReader {
 public:
  explicit ConfigReader(std::map<std::string, ConfigEntry> entries) : entries_(std::move(entries)) {}

  bool has(const std::string& key) const { return entries_.count(key) != 0; }

  const std::string& raw(const std::string& key) {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("missing required key '" + key + "'");
    used_.insert(key);
    return it->second.value;
  }

  template <typename T>
  T number(const std::string& key) {
    const std::string& v = raw(key);
    T out{};
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
      throw ConfigError(where(key) + "key '" + key + "': cannot parse '" + v + "'");
    return out;
  }

  template <typename T>
  T number_or(const std::string& key, T fallback) {
    return has(key) ? number<T>(key) : fallback;
  }

  std::vector<double> numbers(const std::string& key) {
    std::vector<double> out;
    for (const std::string& w : split_words(raw(key))) {
      double d{};
      auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), d);
      if (ec != std::errc() || ptr != w.data() + w.size())
        throw ConfigError(where(key) + "key '" + key + "': cannot parse '" + w + "'");
      out.push_back(d);
    }
    return out;
  }

  std::string where(const std::string& key) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? std::string() : "line " + std::to_string(it->second.line) + ": ";
  }

  // Any key that was never consumed is unknown.
  void reject_unused() const {
    for (const auto& [key, entry] : entries_)
      if (!used_.count(key)) throw ConfigError("line " + std::to_string(entry.line) + ": unknown key '" + key + "'");
  }

  std::string canonical() const {
    std::string out;
    for (const auto& [key, entry] : entries_) out += key + " = " + entry.value + "\n";
    return out;
  }

 private:
  std::map<std::string, ConfigEntry> entries_;
  std::set<std::string> used_;
};

// Rejects keys outside the vocabulary before any value is read, so a typo is
// reported as itself rather than as a missing required key.
inline void check_key_vocabulary(const std::map<std::string, ConfigEntry>& entries) {
  static const std::set<std::string> top = {"kind",   "input_dim", "output_dim", "block_size",
                                            "noise_sigma", "seed", "eval_size", "window",
                                            "seeds",  "iterations", "regimes",   "learners"};
  static const std::set<std::string> regime_fields = {"duration", "truth"};
  static const std::set<std::string> learner_fields = {"kind",  "learning_rate", "iterations", "weight_decay",
                                                       "beta",  "delta",         "alpha",      "batch_size"};
  for (const auto& [key, entry] : entries) {
    bool known = top.count(key) != 0;
    const auto first = key.find('.');
    const auto last = key.rfind('.');
    if (!known && first != std::string::npos && last != first) {
      const std::string head = key.substr(0, first);
      const std::string mid = key.substr(first + 1, last - first - 1);
      const std::string field = key.substr(last + 1);
      if (head == "regime")
        known = !mid.empty() && mid.find_first_not_of("0123456789") == std::string::npos && regime_fields.count(field);
      else if (head == "learner")
        known = !mid.empty() && learner_fields.count(field);
    }
    if (!known) throw ConfigError("line " + std::to_string(entry.line) + ": unknown key '" + key + "'");
  }
}

inline ScenarioKind parse_scenario_kind(const std::string& v, const std::string& where) {
  if (v == "piecewise_linear_regression" || v == "regression") return ScenarioKind::piecewise_linear_regression;
  if (v == "rotating_gaussian_classification" || v == "classification")
    return ScenarioKind::rotating_gaussian_classification;
  throw ConfigError(where + "key 'kind': unknown scenario kind '" + v + "'");
}

}  // namespace detail

inline BenchConfig parse_bench_config(std::istream& in) {
  std::map<std::string, detail::ConfigEntry> entries;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    const std::string body = detail::trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected 'key = value', got '" + body + "'");
    const std::string key = detail::trim(body.substr(0, eq));
    const std::string value = detail::normalize_spaces(body.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (value.empty()) throw ConfigError("line " + std::to_string(lineno) + ": key '" + key + "' has no value");
    if (!entries.emplace(key, detail::ConfigEntry{value, lineno}).second)
      throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }

  detail::check_key_vocabulary(entries);
  detail::ConfigReader rd(std::move(entries));
  BenchConfig cfg;
  DriftScenario& sc = cfg.scenario;
  sc.kind = detail::parse_scenario_kind(rd.raw("kind"), rd.where("kind"));
  sc.input_dim = rd.number<std::size_t>("input_dim");
  sc.output_dim = rd.number<std::size_t>("output_dim");
  sc.block_size = rd.number<std::size_t>("block_size");
  sc.noise_sigma = rd.number<double>("noise_sigma");
  sc.seed = rd.number<std::uint64_t>("seed");
  sc.eval_size = rd.number_or<std::size_t>("eval_size", sc.eval_size);
  cfg.window = rd.number_or<std::size_t>("window", cfg.window);
  cfg.seeds = rd.number_or<std::size_t>("seeds", cfg.seeds);
  const std::size_t default_iterations = rd.number_or<std::size_t>("iterations", 5);

  const std::size_t regime_count = rd.number<std::size_t>("regimes");
  for (std::size_t r = 1; r <= regime_count; ++r) {
    const std::string prefix = "regime." + std::to_string(r) + ".";
    Regime g;
    g.duration = rd.number<std::size_t>(prefix + "duration");
    std::vector<double> values = rd.numbers(prefix + "truth");
    if (values.size() != sc.output_dim * sc.input_dim)
      throw ConfigError(rd.where(prefix + "truth") + "key '" + prefix + "truth': expected " +
                        std::to_string(sc.output_dim * sc.input_dim) + " values, got " +
                        std::to_string(values.size()));
    g.truth = Matrix(sc.output_dim, sc.input_dim, std::move(values));
    sc.regimes.push_back(std::move(g));
  }

  for (const std::string& id : detail::split_words(rd.raw("learners"))) {
    const std::string prefix = "learner." + id + ".";
    LearnerSpec spec;
    spec.id = id;
    const std::string kind = rd.raw(prefix + "kind");
    auto parsed = parse_learner_kind(kind);
    if (!parsed) throw ConfigError(rd.where(prefix + "kind") + "key '" + prefix + "kind': unknown learner '" + kind + "'");
    spec.kind = *parsed;
    spec.gd.learning_rate = rd.number_or<double>(prefix + "learning_rate", spec.gd.learning_rate);
    spec.gd.iterations = rd.number_or<std::size_t>(prefix + "iterations", default_iterations);
    spec.gd.weight_decay = rd.number_or<double>(prefix + "weight_decay", spec.gd.weight_decay);
    spec.beta = rd.number_or<double>(prefix + "beta", spec.beta);
    spec.delta = rd.number_or<double>(prefix + "delta", spec.delta);
    spec.ema_alpha = rd.number_or<double>(prefix + "alpha", spec.ema_alpha);
    spec.batch_size = rd.number_or<std::size_t>(prefix + "batch_size", spec.batch_size);
    try {
      spec.validate();
    } catch (const ConfigError& e) {
      throw ConfigError("learner '" + id + "': " + e.what());
    }
    for (const auto& other : cfg.learners)
      if (other.id == id) throw ConfigError("key 'learners': learner id '" + id + "' listed twice");
    cfg.learners.push_back(std::move(spec));
  }

  rd.reject_unused();
  if (cfg.window == 0) throw ConfigError("key 'window': must be positive");
  if (cfg.seeds == 0) throw ConfigError("key 'seeds': must be positive");
  sc.validate();
  if (cfg.learners.empty()) throw ConfigError("key 'learners': at least one learner is required");
  cfg.canonical = rd.canonical();
  return cfg;
}

inline BenchConfig parse_bench_config(const std::string& text) {
  std::istringstream in(text);
  return parse_bench_config(in);
}

}  // namespace rlsol
