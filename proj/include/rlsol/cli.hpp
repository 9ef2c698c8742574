#pragma once

// Command-line front end.
//
//   rlsol verify [--timing] [--threads n]
//   rlsol bench run --config <file> [--seeds n] [--out dir] [--format csv|json]
//                   [--threads n] [--timing]
//   rlsol demo rls
//
// Exit status: 0 success, 1 verification failure or runtime error, 2 usage or
// configuration error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rlsol/bench_config.hpp"
#include "rlsol/drift.hpp"
#include "rlsol/report_io.hpp"
#include "rlsol/rls.hpp"
#include "rlsol/verify.hpp"

namespace rlsol {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

namespace detail {

inline int run_verify(bool timing, std::size_t threads, std::ostream& out) {
  const auto results = verify::run_all(threads);
  bool all = true;
  for (const auto& r : results) {
    out << verify::format_result(r, timing) << "\n";
    all = all && r.passed;
  }
  out << (all ? "all checks passed" : "verification FAILED") << "\n";
  return all ? kExitOk : kExitFailure;
}

struct BenchArgs {
  std::string config;
  std::size_t seeds = 0;  // 0 means the config value
  std::string out_dir = ".";
  std::string format;     // empty means both
  std::size_t threads = 1;
  bool timing = false;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open '" + path.string() + "' for writing");
  f << text;
  if (!f) throw InputError("write to '" + path.string() + "' failed");
}

inline int run_bench(const BenchArgs& args, std::ostream& out, std::ostream& err) {
  BenchConfig cfg;
  try {
    std::ifstream in(args.config);
    if (!in) throw ConfigError("cannot read config file '" + args.config + "'");
    cfg = parse_bench_config(in);
    if (cfg.learners.size() < 2) throw ConfigError("key 'learners': a comparison needs at least two learners");
  } catch (const Error& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  }
  if (args.seeds) cfg.seeds = args.seeds;

  CompareOptions opts{cfg.seeds, std::max<std::size_t>(1, args.threads), {cfg.window, args.timing}};
  const ComparisonSummary summary = compare_retention(cfg.scenario, cfg.learners, opts);

  const std::filesystem::path dir(args.out_dir);
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  if (args.format.empty() || args.format == "csv") {
    written.push_back(dir / "report.csv");
    write_file(written.back(), format_csv(summary, cfg.scenario.regimes.size()));
  }
  if (args.format.empty() || args.format == "json") {
    written.push_back(dir / "report.json");
    write_file(written.back(), format_json(cfg, summary, args.timing));
  }

  char buf[256];
  out << "learner            final_adaptation  final_retention  forgetting_gap  divergences\n";
  for (const LearnerSummary& s : summary.learners) {
    double ret = 0.0;
    for (double v : s.mean_final_retention) ret += v;
    if (!s.mean_final_retention.empty()) ret /= static_cast<double>(s.mean_final_retention.size());
    std::snprintf(buf, sizeof buf, "%-18s %16.6g %16.6g %15.6g %12zu\n", s.id.c_str(), s.mean_final_adaptation, ret,
                  s.mean_final_forgetting_gap, s.divergences);
    out << buf;
  }
  out << "win rate (row beats column on end-of-stream retention):\n";
  for (std::size_t a = 0; a < summary.learners.size(); ++a) {
    std::snprintf(buf, sizeof buf, "  %-18s", summary.learners[a].id.c_str());
    out << buf;
    for (double v : summary.win_rate[a]) {
      std::snprintf(buf, sizeof buf, " %6.2f", v);
      out << buf;
    }
    out << "\n";
  }
  for (const auto& p : written) out << "wrote " << p.generic_string() << "\n";
  return kExitOk;
}

// A 20-step recursion on a noisy 2-input stream, checked against the batch
// solution after every step.
inline int run_demo_rls(std::ostream& out) {
  const RlsConfig cfg{1.0, 1.0, 2, 1};
  const Matrix truth{{1.5, -0.5}};
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g(0.0, 1.0);
  RlsState state = init_state(cfg);
  Matrix w(1, 2);
  std::vector<SampleBlock> seen;
  out << "RLS recursion, p=2, q=1, beta=1, delta=1, true W = [1.5, -0.5], noise sigma 0.1\n";
  out << "   n        x1        x2         y   residual     gain1     gain2        w1        w2    tr(P)  "
         "rel_err_vs_batch\n";
  char buf[256];
  for (int n = 1; n <= 20; ++n) {
    const Vector x{g(rng), g(rng)};
    const Vector y{dot(Vector(truth.row_copy(0)), x) + 0.1 * g(rng)};
    const double residual = matvec(w, x)[0] - y[0];
    const Vector k = gain_vector(state, x);
    std::tie(w, state) = rls_step(state, w, x, y);
    seen.push_back(single_sample(x, y));
    const Matrix oracle = batch_solve(seen, cfg);
    const double rel = frobenius_norm(w - oracle) / frobenius_norm(oracle);
    std::snprintf(buf, sizeof buf, "%4d %9.4f %9.4f %9.4f %10.4f %9.4f %9.4f %9.4f %9.4f %8.4f  %.1e\n", n, x[0], x[1],
                  y[0], residual, k[0], k[1], w(0, 0), w(0, 1), state.p_mat(0, 0) + state.p_mat(1, 1), rel);
    out << buf;
  }
  out << "residual is the a-priori error W_{n-1}x - y; the update is W_n = W_{n-1} - residual * gain\n";
  return kExitOk;
}

}  // namespace detail

inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"rlsol: recursive least-squares aided online learning toolkit", "rlsol"};
  app.require_subcommand(1);

  bool verify_timing = false;
  std::size_t verify_threads = 0;
  auto* verify_cmd = app.add_subcommand("verify", "Run the oracle-equivalence and identity checks");
  verify_cmd->add_flag("--timing", verify_timing, "Print elapsed time per check");
  verify_cmd->add_option("--threads", verify_threads, "Worker threads for the retention experiment (0 = all cores)");

  detail::BenchArgs bench;
  auto* bench_cmd = app.add_subcommand("bench", "Drift benchmark");
  bench_cmd->require_subcommand(1);
  auto* run_cmd = bench_cmd->add_subcommand("run", "Run a scenario config and write CSV/JSON reports");
  run_cmd->add_option("--config", bench.config, "Scenario config file")->required();
  run_cmd->add_option("--seeds", bench.seeds, "Number of paired seeds (overrides the config)")->check(CLI::PositiveNumber);
  run_cmd->add_option("--out", bench.out_dir, "Output directory");
  run_cmd->add_option("--format", bench.format, "Write only one report format")->check(CLI::IsMember({"csv", "json"}));
  run_cmd->add_option("--threads", bench.threads, "Worker threads")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--timing", bench.timing, "Record wall time per update (makes reports non-reproducible)");

  auto* demo_cmd = app.add_subcommand("demo", "Demonstrations");
  demo_cmd->require_subcommand(1);
  auto* demo_rls = demo_cmd->add_subcommand("rls", "Print a 20-step annotated RLS recursion trace");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    if (code == 0) return kExitOk;
    if (er.str().find("--help") == std::string::npos) err << app.help();
    return kExitUsage;
  }

  try {
    if (verify_cmd->parsed()) return detail::run_verify(verify_timing, verify_threads, out);
    if (run_cmd->parsed()) return detail::run_bench(bench, out, err);
    if (demo_rls->parsed()) return detail::run_demo_rls(out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace rlsol
