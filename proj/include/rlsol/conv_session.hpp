#pragma once

// Online conv-filter session: samples flow into a fixed-size set and the
// RLS-aided update stage fires on a fixed frame schedule or on hard negatives.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <tuple>
#include <vector>

#include "rlsol/conv.hpp"
#include "rlsol/errors.hpp"
#include "rlsol/trace.hpp"

namespace rlsol {

struct ConvEvent {
  std::int64_t t = 0;
  std::optional<WeightedSample> sample;  // present means update_flag
  double sample_weight = 1.0;
  bool hard_negative = false;
};

struct ConvSessionConfig {
  std::size_t set_capacity = 50;
  std::int64_t update_period = kDefaultUpdatePeriod;
  GdConfig update_cfg{kShortStreamLearningRate, 5, 0.0};  // weight_decay is λ_d

  void validate() const {
    if (set_capacity == 0) throw ConfigError("sample set capacity must be positive");
    if (update_period < 1) throw ConfigError("update period must be at least 1");
    update_cfg.validate();
  }
};

// Update fires when (t − 1) mod period == 0 or on a hard negative.
inline bool conv_update_due(std::int64_t t, std::int64_t period, bool hard_negative) {
  const std::int64_t r = (t - 1) % period;
  return r == 0 || hard_negative;
}

enum class ConvAuditKind { insert, evict, update_scheduled, update_hard_negative, skipped };

struct ConvAuditEntry {
  std::int64_t t = 0;
  ConvAuditKind kind = ConvAuditKind::insert;
  std::int64_t value = 0;  // frame tag for insert/evict, set size for updates
  bool operator==(const ConvAuditEntry&) const = default;
};

inline const char* conv_audit_kind_name(ConvAuditKind k) {
  switch (k) {
    case ConvAuditKind::insert: return "insert";
    case ConvAuditKind::evict: return "evict";
    case ConvAuditKind::update_scheduled: return "update_scheduled";
    case ConvAuditKind::update_hard_negative: return "update_hard_negative";
    case ConvAuditKind::skipped: return "skipped";
  }
  return "?";
}

inline std::string to_string(const ConvAuditEntry& e) {
  std::string s = "t=" + std::to_string(e.t) + " " + conv_audit_kind_name(e.kind);
  if (e.kind != ConvAuditKind::skipped) s += " " + std::to_string(e.value);
  return s;
}

inline std::string format_audit_log(const std::vector<ConvAuditEntry>& log) {
  std::string out;
  for (const auto& e : log) out += to_string(e) + "\n";
  return out;
}

struct ConvSessionResult {
  ConvLayer layer;
  ConvRlsState state;
  std::vector<ConvAuditEntry> log;
  std::vector<std::int64_t> update_steps;
  std::size_t set_size = 0;
};

// P persists across update stages and advances only when a stage runs.
inline ConvSessionResult run_conv_session(ConvLayer layer, ConvRlsState state, const std::vector<ConvEvent>& events,
                                          const ConvSessionConfig& cfg) {
  cfg.validate();
  SampleSet set(cfg.set_capacity);
  ConvSessionResult result{std::move(layer), std::move(state), {}, {}, 0};
  std::optional<std::int64_t> last_t;
  for (const ConvEvent& ev : events) {
    if (last_t && ev.t <= *last_t)
      throw ProtocolError("event step " + std::to_string(ev.t) + " does not follow step " + std::to_string(*last_t));
    last_t = ev.t;
    if (ev.sample) {
      auto evicted = set.insert(*ev.sample, ev.sample_weight, ev.t);
      result.log.push_back({ev.t, ConvAuditKind::insert, ev.t});
      if (evicted) result.log.push_back({ev.t, ConvAuditKind::evict, *evicted});
    }
    if (!conv_update_due(ev.t, cfg.update_period, ev.hard_negative)) continue;
    if (set.empty()) {
      result.log.push_back({ev.t, ConvAuditKind::skipped, 0});
      continue;
    }
    std::tie(result.layer, result.state) = conv_update_stage(result.layer, set, result.state, cfg.update_cfg);
    const bool scheduled = conv_update_due(ev.t, cfg.update_period, false);
    result.log.push_back({ev.t, scheduled ? ConvAuditKind::update_scheduled : ConvAuditKind::update_hard_negative,
                          static_cast<std::int64_t>(set.size())});
    result.update_steps.push_back(ev.t);
  }
  result.set_size = set.size();
  return result;
}

inline std::vector<ConvEvent> to_conv_events(const std::vector<ConvRecord>& records,
                                             const std::map<std::string, WeightedSample>& samples) {
  std::vector<ConvEvent> events;
  events.reserve(records.size());
  for (const auto& r : records) {
    ConvEvent ev;
    ev.t = r.t;
    ev.hard_negative = r.hard_negative;
    if (r.sample_ref) ev.sample = resolve_sample(samples, *r.sample_ref);
    events.push_back(std::move(ev));
  }
  return events;
}

}  // namespace rlsol
