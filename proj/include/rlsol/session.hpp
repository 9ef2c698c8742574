#pragma once

// Online MLP session controller: bounded frame memory, score-triggered
// occasional updates with weight backup, and periodic RLS-aided updates.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "rlsol/errors.hpp"
#include "rlsol/mlp.hpp"
#include "rlsol/optimizers.hpp"
#include "rlsol/trace.hpp"

namespace rlsol {

struct SessionEvent {
  std::int64_t t = 0;
  std::optional<SampleBlock> samples;
  double score = 0.0;
};

struct SessionConfig {
  std::size_t memory_capacity = 20;  // τ
  std::int64_t regular_period = 10;
  double score_threshold = 0.0;
  std::size_t batch_size = 32;
  // Regular updates take their iteration count from here; step sizes and
  // weight decay come from the per-layer bank.
  GdConfig regular_cfg{1e-3, 5, 0.0};
  GdConfig occasional_cfg{1e-3, 5, 0.0};
  std::uint64_t seed = 0;

  void validate() const {
    if (memory_capacity == 0) throw ConfigError("memory capacity must be at least 1");
    if (regular_period < 1) throw ConfigError("regular period must be at least 1");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    regular_cfg.validate();
    occasional_cfg.validate();
  }
};

enum class AuditKind { append, evict, backup, occasional_update, restore, backup_cleared, regular_update, skipped };

struct AuditEntry {
  std::int64_t t = 0;
  AuditKind kind = AuditKind::append;
  std::int64_t value = 0;  // frame index for append/evict, iteration count for updates

  bool operator==(const AuditEntry&) const = default;
};

inline const char* audit_kind_name(AuditKind k) {
  switch (k) {
    case AuditKind::append: return "append";
    case AuditKind::evict: return "evict";
    case AuditKind::backup: return "backup";
    case AuditKind::occasional_update: return "occasional_update";
    case AuditKind::restore: return "restore";
    case AuditKind::backup_cleared: return "backup_cleared";
    case AuditKind::regular_update: return "regular_update";
    case AuditKind::skipped: return "skipped";
  }
  return "?";
}

inline std::string to_string(const AuditEntry& e) {
  std::string s = "t=" + std::to_string(e.t) + " " + audit_kind_name(e.kind);
  switch (e.kind) {
    case AuditKind::append:
    case AuditKind::evict:
    case AuditKind::occasional_update:
    case AuditKind::regular_update: s += " " + std::to_string(e.value); break;
    default: break;
  }
  return s;
}

inline std::string format_audit_log(const std::vector<AuditEntry>& log) {
  std::string out;
  for (const auto& e : log) out += to_string(e) + "\n";
  return out;
}

struct SessionResult {
  MlpModel model;
  LayerRlsBank bank;
  std::vector<AuditEntry> log;
  std::vector<std::int64_t> memory_frames;  // indices left in memory, ascending
};

namespace detail {

struct FrameMemory {
  std::deque<std::pair<std::int64_t, SampleBlock>> frames;

  std::size_t sample_count() const {
    std::size_t n = 0;
    for (const auto& f : frames) n += f.second.size();
    return n;
  }

  // Draws a mini-batch without replacement from all remembered samples.
  SampleBlock draw(std::size_t batch_size, std::mt19937_64& rng) const {
    std::vector<std::pair<std::size_t, std::size_t>> index;
    for (std::size_t f = 0; f < frames.size(); ++f)
      for (std::size_t r = 0; r < frames[f].second.size(); ++r) index.emplace_back(f, r);
    std::vector<std::size_t> order(index.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t b = std::min(batch_size, order.size());
    const SampleBlock& first = frames.front().second;
    SampleBlock batch{Matrix(b, first.x.cols()), Matrix(b, first.y.cols()), std::vector<double>(b)};
    for (std::size_t j = 0; j < b; ++j) {
      const auto [f, r] = index[order[j]];
      const SampleBlock& src = frames[f].second;
      std::ranges::copy(src.x.row(r), batch.x.row(j).begin());
      std::ranges::copy(src.y.row(r), batch.y.row(j).begin());
      batch.weights[j] = src.weight(r);
    }
    return batch;
  }
};

}  // namespace detail

// Called after every audit entry with the model and bank as they stand then.
using SessionObserver = std::function<void(const AuditEntry&, const MlpModel&, const LayerRlsBank&)>;

inline SessionResult run_session(MlpModel model, LayerRlsBank bank, const std::vector<SessionEvent>& events,
                                 const SessionConfig& cfg, const SessionObserver& observer = {}) {
  cfg.validate();
  model.validate();
  std::mt19937_64 rng(cfg.seed);
  detail::FrameMemory memory;
  std::optional<MlpModel> backup;
  SessionResult result;
  std::optional<std::int64_t> last_t;

  for (const SessionEvent& ev : events) {
    if (last_t && ev.t <= *last_t)
      throw ProtocolError("event step " + std::to_string(ev.t) + " does not follow step " + std::to_string(*last_t));
    last_t = ev.t;
    auto record = [&](AuditKind kind, std::int64_t value) {
      result.log.push_back({ev.t, kind, value});
      if (observer) observer(result.log.back(), model, bank);
    };

    if (ev.score > cfg.score_threshold) {
      if (ev.samples) {
        memory.frames.emplace_back(ev.t, *ev.samples);
        record(AuditKind::append, ev.t);
        if (memory.frames.size() > cfg.memory_capacity) {
          record(AuditKind::evict, memory.frames.front().first);
          memory.frames.pop_front();
        }
      }
    }

    if (ev.score <= cfg.score_threshold) {
      if (!backup) {
        backup = model;
        record(AuditKind::backup, 0);
      }
      if (memory.frames.empty()) {
        record(AuditKind::skipped, 0);
        continue;
      }
      // P states stay frozen during occasional updates.
      for (std::size_t it = 0; it < cfg.occasional_cfg.iterations; ++it)
        model = plain_update_layers(model, memory.draw(cfg.batch_size, rng), cfg.occasional_cfg.learning_rate,
                                    cfg.occasional_cfg.weight_decay);
      record(AuditKind::occasional_update, static_cast<std::int64_t>(cfg.occasional_cfg.iterations));
    } else if (ev.t % cfg.regular_period == 0) {
      if (backup) {
        model = std::move(*backup);
        backup.reset();
        record(AuditKind::restore, 0);
        record(AuditKind::backup_cleared, 0);
      }
      if (memory.frames.empty()) {
        record(AuditKind::skipped, 0);
        continue;
      }
      for (std::size_t it = 0; it < cfg.regular_cfg.iterations; ++it)
        std::tie(model, bank) = rls_update_layers(model, bank, memory.draw(cfg.batch_size, rng));
      record(AuditKind::regular_update, static_cast<std::int64_t>(cfg.regular_cfg.iterations));
    }
  }
  result.model = std::move(model);
  result.bank = std::move(bank);
  for (const auto& f : memory.frames) result.memory_frames.push_back(f.first);
  return result;
}

inline std::vector<SessionEvent> to_session_events(const std::vector<SessionRecord>& records,
                                                   const std::map<std::string, SampleBlock>& samples) {
  std::vector<SessionEvent> events;
  events.reserve(records.size());
  for (const auto& r : records) {
    SessionEvent ev{r.t, std::nullopt, r.score};
    if (r.sample_ref) ev.samples = resolve_sample(samples, *r.sample_ref);
    events.push_back(std::move(ev));
  }
  return events;
}

}  // namespace rlsol
