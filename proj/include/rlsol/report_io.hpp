#pragma once

// CSV and JSON renderings of a paired comparison.
//
// CSV columns, one row per (seed, learner, step):
//   seed, learner, step, adaptation_error, retention_error_regime1, ...,
//   retention_error_regime<R-1>, forgetting_gap, wall_ms
// Steps are 1-based block indices. Numbers use the shortest round-trip form.

#include <charconv>
#include <string>
#include <vector>

#include <json.hpp>

#include "rlsol/bench_config.hpp"
#include "rlsol/drift.hpp"

namespace rlsol {

inline constexpr const char* kToolVersion = "1.0.0";
inline constexpr const char* kReportSchemaVersion = "1";

inline std::vector<std::string> csv_columns(std::size_t regimes) {
  std::vector<std::string> cols = {"seed", "learner", "step", "adaptation_error"};
  for (std::size_t r = 1; r < regimes; ++r) cols.push_back("retention_error_regime" + std::to_string(r));
  cols.push_back("forgetting_gap");
  cols.push_back("wall_ms");
  return cols;
}

namespace detail {
inline void append_number(std::string& out, double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, ptr);
}
}  // namespace detail

inline std::string format_csv(const ComparisonSummary& summary, std::size_t regimes) {
  std::string out;
  const auto cols = csv_columns(regimes);
  for (std::size_t i = 0; i < cols.size(); ++i) out += (i ? "," : "") + cols[i];
  out += "\n";
  for (const SeedResult& sr : summary.seeds)
    for (const RunReport& rep : sr.reports)
      for (std::size_t t = 0; t < rep.length(); ++t) {
        out += std::to_string(sr.seed) + "," + rep.learner + "," + std::to_string(t + 1) + ",";
        detail::append_number(out, rep.adaptation_error[t]);
        for (const auto& col : rep.retention_error) {
          out += ",";
          detail::append_number(out, col[t]);
        }
        out += ",";
        detail::append_number(out, rep.forgetting_gap[t]);
        out += ",";
        detail::append_number(out, rep.wall_ms[t]);
        out += "\n";
      }
  return out;
}

inline nlohmann::ordered_json report_json(const BenchConfig& cfg, const ComparisonSummary& summary, bool timing) {
  using nlohmann::ordered_json;
  const DriftScenario& sc = cfg.scenario;
  ordered_json meta;
  meta["tool"] = "rlsol";
  meta["version"] = kToolVersion;
  meta["schema_version"] = kReportSchemaVersion;
  meta["config_digest"] = digest_hex(detail::fnv1a(detail::kFnvOffset, cfg.canonical.data(), cfg.canonical.size()));
  meta["scenario"] = {{"kind", scenario_kind_name(sc.kind)},
                      {"input_dim", sc.input_dim},
                      {"output_dim", sc.output_dim},
                      {"block_size", sc.block_size},
                      {"noise_sigma", sc.noise_sigma},
                      {"regimes", sc.regimes.size()},
                      {"total_blocks", sc.total_blocks()},
                      {"eval_size", sc.eval_size},
                      {"seed_base", sc.seed}};
  meta["window"] = cfg.window;
  meta["seeds"] = summary.seeds.size();
  meta["timing"] = timing;
  meta["csv_columns"] = csv_columns(sc.regimes.size());

  ordered_json learners = ordered_json::array();
  std::vector<std::string> ids;
  for (const LearnerSummary& s : summary.learners) {
    ids.push_back(s.id);
    learners.push_back({{"id", s.id},
                        {"kind", s.kind},
                        {"mean_final_adaptation_error", s.mean_final_adaptation},
                        {"mean_final_retention_error", s.mean_final_retention},
                        {"mean_final_forgetting_gap", s.mean_final_forgetting_gap},
                        {"divergences", s.divergences},
                        {"mean_wall_ms", s.mean_wall_ms}});
  }

  ordered_json seeds = ordered_json::array();
  for (const SeedResult& sr : summary.seeds) {
    ordered_json finals = ordered_json::array();
    for (const RunReport& rep : sr.reports) {
      std::vector<double> ret;
      for (const auto& col : rep.retention_error) ret.push_back(col.back());
      ordered_json f = {{"learner", rep.learner},
                        {"stream_digest", digest_hex(rep.stream_digest)},
                        {"final_adaptation_error", rep.adaptation_error.back()},
                        {"final_retention_error", ret},
                        {"final_forgetting_gap", rep.forgetting_gap.back()},
                        {"diverged", rep.diverged}};
      if (rep.diverged) f["divergence_step"] = rep.divergence_step;
      finals.push_back(std::move(f));
    }
    seeds.push_back({{"seed", sr.seed}, {"stream_digest", digest_hex(sr.digest)}, {"final", std::move(finals)}});
  }

  ordered_json out;
  out["metadata"] = std::move(meta);
  out["learners"] = std::move(learners);
  out["win_rate"] = {{"learners", ids}, {"matrix", summary.win_rate}};
  out["mean_gap_difference"] = summary.mean_gap_difference;
  out["seeds"] = std::move(seeds);
  return out;
}

inline std::string format_json(const BenchConfig& cfg, const ComparisonSummary& summary, bool timing) {
  return report_json(cfg, summary, timing).dump(2) + "\n";
}

}  // namespace rlsol
