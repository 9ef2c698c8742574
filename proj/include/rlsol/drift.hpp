#pragma once

// Synthetic drifting streams, per-learner replay through a sliding window,
// and paired multi-seed retention comparisons.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <exception>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <tuple>
#include <utility>
#include <vector>

#include "rlsol/errors.hpp"
#include "rlsol/linalg.hpp"
#include "rlsol/optimizers.hpp"
#include "rlsol/rls.hpp"

namespace rlsol {

enum class ScenarioKind { piecewise_linear_regression, rotating_gaussian_classification };

inline const char* scenario_kind_name(ScenarioKind k) {
  return k == ScenarioKind::piecewise_linear_regression ? "piecewise_linear_regression"
                                                        : "rotating_gaussian_classification";
}

struct Regime {
  // Regression: the q x p ground-truth map. Classification: row c is the mean of class c.
  Matrix truth;
  std::size_t duration = 1;  // in blocks
};

struct DriftScenario {
  ScenarioKind kind = ScenarioKind::piecewise_linear_regression;
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;  // number of classes for classification
  std::vector<Regime> regimes;
  std::size_t block_size = 1;
  // Observation noise for regression, within-class spread for classification.
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::size_t eval_size = 256;  // held-out samples per regime

  void validate() const {
    if (input_dim == 0 || output_dim == 0) throw ConfigError("scenario dimensions must be positive");
    if (regimes.empty()) throw ConfigError("scenario needs at least one regime");
    if (block_size == 0) throw ConfigError("block size must be positive");
    if (eval_size == 0) throw ConfigError("evaluation set size must be positive");
    if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) throw ConfigError("noise sigma must be non-negative");
    if (kind == ScenarioKind::rotating_gaussian_classification && output_dim < 2)
      throw ConfigError("classification needs at least two classes");
    for (std::size_t r = 0; r < regimes.size(); ++r) {
      const Regime& g = regimes[r];
      if (g.duration == 0) throw ConfigError("regime " + std::to_string(r + 1) + " has zero duration");
      if (g.truth.rows() != output_dim || g.truth.cols() != input_dim)
        throw DimensionError("regime " + std::to_string(r + 1) + " parameters " + g.truth.shape() +
                             " do not match q=" + std::to_string(output_dim) + ", p=" + std::to_string(input_dim));
    }
  }

  std::size_t total_blocks() const {
    std::size_t n = 0;
    for (const Regime& g : regimes) n += g.duration;
    return n;
  }
};

// Class means on a circle in the plane of the first two inputs, rotated by
// `angle_step` radians per regime; remaining coordinates are zero.
inline std::vector<Regime> rotating_class_means(std::size_t classes, std::size_t input_dim, double radius,
                                                double angle_step, std::size_t regime_count,
                                                std::size_t duration) {
  if (input_dim < 2) throw ConfigError("rotating class means need at least two input dimensions");
  std::vector<Regime> out;
  for (std::size_t r = 0; r < regime_count; ++r) {
    Matrix means(classes, input_dim);
    for (std::size_t c = 0; c < classes; ++c) {
      const double a = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(classes) +
                       angle_step * static_cast<double>(r);
      means(c, 0) = radius * std::cos(a);
      means(c, 1) = radius * std::sin(a);
    }
    out.push_back({std::move(means), duration});
  }
  return out;
}

struct DriftStream {
  std::vector<SampleBlock> blocks;
  std::vector<std::size_t> regime_of_block;
  std::vector<SampleBlock> eval_sets;  // one per regime
  std::vector<std::size_t> regime_end;  // index of each regime's last block
};

namespace detail {

inline SampleBlock draw_samples(const DriftScenario& sc, const Regime& regime, std::size_t n,
                                std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::size_t p = sc.input_dim, q = sc.output_dim;
  SampleBlock blk{Matrix(n, p), Matrix(n, q), {}};
  if (sc.kind == ScenarioKind::piecewise_linear_regression) {
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t a = 0; a < p; ++a) blk.x(j, a) = gauss(rng);
      for (std::size_t r = 0; r < q; ++r) {
        double v = 0.0;
        for (std::size_t a = 0; a < p; ++a) v += regime.truth(r, a) * blk.x(j, a);
        blk.y(j, r) = v + sc.noise_sigma * gauss(rng);
      }
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, q - 1);
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t c = pick(rng);
      for (std::size_t a = 0; a < p; ++a) blk.x(j, a) = regime.truth(c, a) + sc.noise_sigma * gauss(rng);
      blk.y(j, c) = 1.0;
    }
  }
  return blk;
}

inline std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* b = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(std::uint64_t h, std::span<const double> values) {
  for (double v : values) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    unsigned char le[8];
    for (int i = 0; i < 8; ++i) le[i] = static_cast<unsigned char>(bits >> (8 * i));
    h = fnv1a(h, le, 8);
  }
  return h;
}

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;

// splitmix64 finalizer, used to derive independent sub-seeds.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Deterministic in the scenario seed. Held-out sets are drawn first, one per
// regime, then the training blocks in stream order.
inline DriftStream generate_stream(const DriftScenario& sc) {
  sc.validate();
  std::mt19937_64 rng(sc.seed);
  DriftStream s;
  for (const Regime& g : sc.regimes) s.eval_sets.push_back(detail::draw_samples(sc, g, sc.eval_size, rng));
  for (std::size_t r = 0; r < sc.regimes.size(); ++r) {
    for (std::size_t i = 0; i < sc.regimes[r].duration; ++i) {
      s.blocks.push_back(detail::draw_samples(sc, sc.regimes[r], sc.block_size, rng));
      s.regime_of_block.push_back(r);
    }
    s.regime_end.push_back(s.blocks.size() - 1);
  }
  return s;
}

// FNV-1a over every block and held-out value in stream order.
inline std::uint64_t stream_digest(const DriftStream& s) {
  std::uint64_t h = detail::kFnvOffset;
  for (const auto* set : {&s.eval_sets, &s.blocks})
    for (const SampleBlock& b : *set) {
      h = detail::fnv1a(h, b.x.span());
      h = detail::fnv1a(h, b.y.span());
    }
  return h;
}

inline std::string digest_hex(std::uint64_t h) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = kHex[h & 0xf];
  return out;
}

// Mean squared error per output for regression, mean cross-entropy of
// softmax(W x) for classification.
inline double evaluation_loss(ScenarioKind kind, const Matrix& w, const SampleBlock& eval) {
  const std::size_t n = eval.size(), q = eval.y.cols();
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const Vector z = matvec(w, eval.x.row_copy(j));
    if (kind == ScenarioKind::piecewise_linear_regression) {
      for (std::size_t r = 0; r < q; ++r) total += (z[r] - eval.y(j, r)) * (z[r] - eval.y(j, r));
    } else {
      double m = z[0];
      for (double v : z) m = std::max(m, v);
      double lse = 0.0;
      for (double v : z) lse += std::exp(v - m);
      lse = m + std::log(lse);
      for (std::size_t r = 0; r < q; ++r) total += eval.y(j, r) * (lse - z[r]);
    }
  }
  const double denom = kind == ScenarioKind::piecewise_linear_regression ? static_cast<double>(n * q)
                                                                         : static_cast<double>(n);
  return total / denom;
}

enum class LearnerKind { plain_bgd, mbsgd, ema, rls_precond, exact_rls };

inline const char* learner_kind_name(LearnerKind k) {
  switch (k) {
    case LearnerKind::plain_bgd: return "plain_bgd";
    case LearnerKind::mbsgd: return "mbsgd";
    case LearnerKind::ema: return "ema";
    case LearnerKind::rls_precond: return "rls_precond";
    case LearnerKind::exact_rls: return "exact_rls";
  }
  return "?";
}

inline std::optional<LearnerKind> parse_learner_kind(const std::string& s) {
  for (LearnerKind k : {LearnerKind::plain_bgd, LearnerKind::mbsgd, LearnerKind::ema, LearnerKind::rls_precond,
                        LearnerKind::exact_rls})
    if (s == learner_kind_name(k)) return k;
  return std::nullopt;
}

struct LearnerSpec {
  std::string id;
  LearnerKind kind = LearnerKind::plain_bgd;
  GdConfig gd{};
  double beta = 1.0;   // forgetting factor of P (rls) or of the window correlation (bgd, ema)
  double delta = 1.0;  // regularizer
  double ema_alpha = 1.0;
  std::size_t batch_size = 8;  // mbsgd only

  void validate() const {
    if (id.empty()) throw ConfigError("learner id must not be empty");
    gd.validate();
    EmaConfig{ema_alpha}.validate();
    RlsConfig{beta, delta, 1, 1}.validate();
    if (kind == LearnerKind::mbsgd && batch_size == 0) throw ConfigError("mbsgd batch size must be positive");
  }
};

struct RunReport {
  std::string learner;
  std::vector<double> adaptation_error;               // per block
  std::vector<std::vector<double>> retention_error;   // [regime][block], regimes 1..R-1
  std::vector<double> forgetting_gap;                 // per block
  std::vector<double> wall_ms;                        // per block, zero unless timing is on
  bool diverged = false;
  std::size_t divergence_step = 0;  // first block (1-based) whose update failed
  std::string divergence_reason;
  std::uint64_t stream_digest = 0;  // digest of the stream this run consumed
  Matrix final_weights;

  std::size_t length() const noexcept { return adaptation_error.size(); }
};

struct RunOptions {
  std::size_t window_capacity = 10;
  bool timing = false;
};

// Feeds the stream block by block: the block enters the window, the learner's
// update stage runs, and every held-out set is evaluated. Retention error for
// regime r is recorded at every step; it counts toward the forgetting gap once
// regime r has ended. A failed update freezes the weights and is reported.
inline RunReport run_learner(const LearnerSpec& spec, const DriftScenario& sc, const DriftStream& stream,
                             const RunOptions& opts) {
  spec.validate();
  sc.validate();
  const std::size_t p = sc.input_dim, q = sc.output_dim, regimes = sc.regimes.size();
  const RlsConfig rls_cfg{spec.beta, spec.delta, p, q};
  SlidingWindow window(opts.window_capacity);
  RlsState state = init_state(rls_cfg);
  Matrix w(q, p);

  RunReport rep;
  rep.learner = spec.id;
  rep.stream_digest = stream_digest(stream);
  rep.retention_error.assign(regimes > 1 ? regimes - 1 : 0, {});
  std::vector<std::optional<double>> at_end(regimes);

  for (std::size_t t = 0; t < stream.blocks.size(); ++t) {
    const SampleBlock& blk = stream.blocks[t];
    window.push(blk);
    double ms = 0.0;
    if (!rep.diverged) {
      const auto start = std::chrono::steady_clock::now();
      try {
        Matrix next;
        switch (spec.kind) {
          case LearnerKind::plain_bgd: next = bgd_update(w, window, spec.gd, rls_cfg); break;
          case LearnerKind::ema:
            next = ema_combine(w, bgd_update(w, window, spec.gd, rls_cfg), EmaConfig{spec.ema_alpha});
            break;
          case LearnerKind::mbsgd:
            next = mbsgd_update(w, window, spec.gd, std::min(spec.batch_size, window.sample_count()),
                                detail::mix_seed(sc.seed, t));
            break;
          case LearnerKind::rls_precond: std::tie(next, state) = precond_update_stage(w, blk, state, spec.gd); break;
          case LearnerKind::exact_rls: std::tie(next, state) = rls_block_step(state, w, blk); break;
        }
        if (!all_finite(next.span())) throw DivergenceError(spec.gd.iterations);
        w = std::move(next);
      } catch (const DivergenceError& e) {
        rep.diverged = true;
        rep.divergence_step = t + 1;
        rep.divergence_reason = e.what();
      } catch (const DegeneracyError& e) {
        rep.diverged = true;
        rep.divergence_step = t + 1;
        rep.divergence_reason = e.what();
      }
      if (opts.timing)
        ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    }
    const std::size_t cur = stream.regime_of_block[t];
    rep.adaptation_error.push_back(evaluation_loss(sc.kind, w, stream.eval_sets[cur]));
    double gap = 0.0;
    std::size_t past = 0;
    for (std::size_t r = 0; r + 1 < regimes; ++r) {
      const double ret = evaluation_loss(sc.kind, w, stream.eval_sets[r]);
      rep.retention_error[r].push_back(ret);
      if (t == stream.regime_end[r]) at_end[r] = ret;
      if (r < cur && at_end[r]) {
        gap += ret - *at_end[r];
        ++past;
      }
    }
    rep.forgetting_gap.push_back(past ? gap / static_cast<double>(past) : 0.0);
    rep.wall_ms.push_back(ms);
  }
  rep.final_weights = std::move(w);
  return rep;
}

struct SeedResult {
  std::uint64_t seed = 0;
  std::uint64_t digest = 0;
  std::vector<RunReport> reports;  // in learner order
};

struct LearnerSummary {
  std::string id;
  std::string kind;
  double mean_final_adaptation = 0.0;
  std::vector<double> mean_final_retention;  // regimes 1..R-1
  double mean_final_forgetting_gap = 0.0;
  std::size_t divergences = 0;
  double mean_wall_ms = 0.0;  // per block
};

struct ComparisonSummary {
  std::vector<SeedResult> seeds;
  std::vector<LearnerSummary> learners;
  // wins[a][b]: fraction of seeds where learner a has lower end-of-stream
  // retention error than learner b. Ties go to the row learner on even seeds.
  std::vector<std::vector<double>> win_rate;
  // Per-seed paired mean of (gap_a − gap_b) at stream end.
  std::vector<std::vector<double>> mean_gap_difference;
};

// End-of-stream retention: mean over regimes 1..R-1 of the final retention
// error, or the final adaptation error for a single-regime stream.
inline double final_retention(const RunReport& r) {
  if (r.retention_error.empty()) return r.adaptation_error.back();
  double s = 0.0;
  for (const auto& col : r.retention_error) s += col.back();
  return s / static_cast<double>(r.retention_error.size());
}

inline bool beats(const RunReport& a, const RunReport& b, std::uint64_t seed) {
  const double ra = final_retention(a), rb = final_retention(b);
  if (ra != rb) return ra < rb;
  return seed % 2 == 0;
}

struct CompareOptions {
  std::size_t seeds = 50;
  std::size_t threads = 1;
  RunOptions run{};
};

// Runs every learner on the identical stream for seeds base, base+1, ...
// Workers each own a seed at a time; results are merged in seed order.
inline ComparisonSummary compare_retention(const DriftScenario& scenario, const std::vector<LearnerSpec>& learners,
                                           const CompareOptions& opts) {
  scenario.validate();
  if (learners.size() < 2) throw ConfigError("compare_retention needs at least two learners");
  if (opts.seeds == 0) throw ConfigError("seed count must be positive");
  for (const auto& l : learners) l.validate();

  ComparisonSummary out;
  out.seeds.resize(opts.seeds);
  auto run_seed = [&](std::size_t i) {
    DriftScenario sc = scenario;
    sc.seed = scenario.seed + i;
    const DriftStream stream = generate_stream(sc);
    SeedResult res{sc.seed, stream_digest(stream), {}};
    for (const auto& l : learners) res.reports.push_back(run_learner(l, sc, stream, opts.run));
    out.seeds[i] = std::move(res);
  };

  const std::size_t workers = std::max<std::size_t>(1, std::min(opts.threads, opts.seeds));
  if (workers == 1) {
    for (std::size_t i = 0; i < opts.seeds; ++i) run_seed(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t k = 0; k < workers; ++k)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < opts.seeds;) {
          try {
            run_seed(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
  }

  const std::size_t m = learners.size();
  const double n = static_cast<double>(opts.seeds);
  out.win_rate.assign(m, std::vector<double>(m, 0.0));
  out.mean_gap_difference.assign(m, std::vector<double>(m, 0.0));
  for (std::size_t a = 0; a < m; ++a) {
    LearnerSummary s;
    s.id = learners[a].id;
    s.kind = learner_kind_name(learners[a].kind);
    s.mean_final_retention.assign(scenario.regimes.size() - 1, 0.0);
    double wall = 0.0;
    for (const SeedResult& sr : out.seeds) {
      const RunReport& r = sr.reports[a];
      s.mean_final_adaptation += r.adaptation_error.back() / n;
      for (std::size_t g = 0; g < r.retention_error.size(); ++g)
        s.mean_final_retention[g] += r.retention_error[g].back() / n;
      s.mean_final_forgetting_gap += r.forgetting_gap.back() / n;
      if (r.diverged) ++s.divergences;
      for (double v : r.wall_ms) wall += v;
      for (std::size_t b = 0; b < m; ++b) {
        if (beats(r, sr.reports[b], sr.seed)) out.win_rate[a][b] += 1.0 / n;
        out.mean_gap_difference[a][b] += (r.forgetting_gap.back() - sr.reports[b].forgetting_gap.back()) / n;
      }
    }
    s.mean_wall_ms = wall / (n * static_cast<double>(scenario.total_blocks()));
    out.learners.push_back(std::move(s));
  }
  return out;
}

}  // namespace rlsol
