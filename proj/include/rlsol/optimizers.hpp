#pragma once

// Update-stage optimizers: sliding-window BGD / MBSGD baselines, parameter
// EMA, and gradient descent preconditioned by the RLS precision matrix.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rlsol/errors.hpp"
#include "rlsol/linalg.hpp"
#include "rlsol/rls.hpp"

namespace rlsol {

// Fixed-capacity store of the most recent blocks, oldest first.
class SlidingWindow {
 public:
  explicit SlidingWindow(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("sliding window capacity must be positive");
  }

  // Returns the evicted block, if any.
  std::optional<SampleBlock> push(SampleBlock block) {
    std::optional<SampleBlock> evicted;
    if (blocks_.size() == capacity_) {
      evicted = std::move(blocks_.front());
      blocks_.erase(blocks_.begin());
    }
    blocks_.push_back(std::move(block));
    return evicted;
  }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return blocks_.size(); }
  bool empty() const noexcept { return blocks_.empty(); }
  std::span<const SampleBlock> blocks() const noexcept { return blocks_; }
  std::size_t sample_count() const noexcept {
    std::size_t n = 0;
    for (const auto& b : blocks_) n += b.size();
    return n;
  }

 private:
  std::size_t capacity_;
  std::vector<SampleBlock> blocks_;
};

struct GdConfig {
  double learning_rate = 3e-2;
  std::size_t iterations = 5;
  double weight_decay = 0.0;

  void validate() const {
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (iterations == 0) throw ConfigError("iterations must be at least 1");
    if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  }
};

inline constexpr double kShortStreamLearningRate = 3e-2;
inline constexpr double kLongStreamLearningRate = 3e-3;

struct EmaConfig {
  double alpha = 1.0;

  void validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("EMA alpha must lie in [0, 1]");
  }
  static constexpr EmaConfig slow() { return {0.01}; }
  static constexpr EmaConfig moderate() { return {0.5}; }
  static constexpr EmaConfig fast() { return {0.99}; }
};

// Quadratic objective ½tr(WΦWᵀ) − tr(ZWᵀ); equals b/2 times the windowed
// least-squares cost up to a constant when all blocks share one size.
inline double quadratic_objective(const Matrix& w, const CorrelationPair& c) {
  Matrix wphi = matmul(w, c.phi_mat);
  double quad = 0.0, lin = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    quad += wphi.span()[i] * w.span()[i];
    lin += c.z_mat.span()[i] * w.span()[i];
  }
  return 0.5 * quad - lin;
}

// `iterations` steps of W ← W − η(WΦ − Z) with Φ, Z accumulated over the window.
inline Matrix bgd_update(const Matrix& w, const SlidingWindow& window, const GdConfig& config,
                         const RlsConfig& rls_cfg) {
  config.validate();
  if (window.empty()) throw InputError("bgd_update: window is empty");
  detail::check_weights(w, rls_cfg);
  const CorrelationPair c = accumulate_correlation(window.blocks(), rls_cfg);
  Matrix cur = w;
  double last = quadratic_objective(cur, c);
  int rising = 0;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    Matrix grad = matmul(cur, c.phi_mat);
    grad -= c.z_mat;
    grad *= config.learning_rate;
    cur -= grad;
    const double obj = quadratic_objective(cur, c);
    if (!std::isfinite(obj)) throw DivergenceError(it);
    rising = obj > last ? rising + 1 : 0;
    if (rising >= 3) throw DivergenceError(it);
    last = obj;
  }
  return cur;
}

// Mean squared-error gradient (1/b) Σ (W xⱼ − yⱼ) xⱼᵀ over sqrt-weight scaled rows.
inline Matrix mean_block_gradient(const Matrix& w, const SampleBlock& block) {
  block.validate();
  if (block.x.cols() != w.cols() || block.y.cols() != w.rows())
    throw DimensionError("block x " + block.x.shape() + ", y " + block.y.shape() + " vs weights " + w.shape());
  auto [xs, ys] = block.scaled();
  Matrix g(w.rows(), w.cols());
  for (std::size_t j = 0; j < xs.rows(); ++j) {
    auto xr = xs.row(j);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      auto wr = w.row(r);
      double e = -ys(j, r);
      for (std::size_t a = 0; a < w.cols(); ++a) e += wr[a] * xr[a];
      auto gr = g.row(r);
      for (std::size_t a = 0; a < w.cols(); ++a) gr[a] += e * xr[a];
    }
  }
  g *= 1.0 / static_cast<double>(block.size());
  return g;
}

// Seeded mini-batch SGD over the flattened window: W ← W − η(∇L_batch + λW).
// Each pass draws batches from a fresh shuffle; a trailing partial batch is skipped.
inline Matrix mbsgd_update(const Matrix& w, const SlidingWindow& window, const GdConfig& config,
                           std::size_t batch_size, std::uint64_t seed) {
  config.validate();
  if (window.empty()) throw InputError("mbsgd_update: window is empty");
  const std::size_t total = window.sample_count();
  if (batch_size == 0 || batch_size > total)
    throw ConfigError("mini-batch size " + std::to_string(batch_size) + " not in [1, " + std::to_string(total) +
                      "]");
  std::vector<std::pair<std::size_t, std::size_t>> index;  // (block, row)
  index.reserve(total);
  for (std::size_t b = 0; b < window.size(); ++b)
    for (std::size_t r = 0; r < window.blocks()[b].size(); ++r) index.emplace_back(b, r);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> order(total);
  std::size_t pos = total;  // forces a shuffle on the first draw
  Matrix cur = w;
  const auto blocks = window.blocks();
  for (std::size_t it = 0; it < config.iterations; ++it) {
    if (pos + batch_size > total) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      pos = 0;
    }
    SampleBlock batch{Matrix(batch_size, w.cols()), Matrix(batch_size, w.rows()), {}};
    batch.weights.resize(batch_size);
    for (std::size_t j = 0; j < batch_size; ++j) {
      const auto [b, r] = index[order[pos + j]];
      std::ranges::copy(blocks[b].x.row(r), batch.x.row(j).begin());
      std::ranges::copy(blocks[b].y.row(r), batch.y.row(j).begin());
      batch.weights[j] = blocks[b].weight(r);
    }
    pos += batch_size;
    Matrix step = mean_block_gradient(cur, batch);
    if (config.weight_decay > 0.0) step += config.weight_decay * cur;
    step *= config.learning_rate;
    cur -= step;
  }
  return cur;
}

// W ← W − η · grad · P
inline Matrix precond_gd_iterate(const Matrix& w, const Matrix& grad, const Matrix& p_mat, double eta) {
  if (grad.rows() != w.rows() || grad.cols() != w.cols())
    throw DimensionError("precond_gd_iterate: gradient " + grad.shape() + " vs weights " + w.shape());
  if (p_mat.rows() != w.cols() || p_mat.cols() != w.cols())
    throw DimensionError("precond_gd_iterate: preconditioner " + p_mat.shape() + " vs weights " + w.shape());
  Matrix step = matmul(grad, p_mat);
  step *= eta;
  return w - step;
}

enum class GradientSource {
  real_block,      // mean gradient over all rows of the block
  virtual_sample,  // gradient of ½‖ȳ − W x̄‖² at the block's virtual sample
};

// Advances P once with the block's virtual input, then runs `iterations`
// preconditioned steps starting from w. Weight decay acts as W(I − ηλP).
inline std::pair<Matrix, RlsState> precond_update_stage(const Matrix& w, const SampleBlock& block,
                                                        const RlsState& state, const GdConfig& config,
                                                        GradientSource source = GradientSource::real_block) {
  config.validate();
  block.validate(state.config);
  detail::check_weights(w, state.config);
  auto [xm, ym] = block_virtual_input(block);
  RlsState next = update_precision(state, xm);
  const SampleBlock virtual_block = single_sample(xm, ym);
  const SampleBlock& grad_block = source == GradientSource::real_block ? block : virtual_block;
  Matrix cur = w;
  for (std::size_t it = 0; it < config.iterations; ++it) {
    Matrix grad = mean_block_gradient(cur, grad_block);
    if (config.weight_decay > 0.0) grad += config.weight_decay * cur;
    cur = precond_gd_iterate(cur, grad, next.p_mat, config.learning_rate);
  }
  return {std::move(cur), std::move(next)};
}

// (1 − α) w_prev + α w_new
inline Matrix ema_combine(const Matrix& w_prev, const Matrix& w_new, const EmaConfig& config) {
  config.validate();
  if (w_prev.rows() != w_new.rows() || w_prev.cols() != w_new.cols())
    throw DimensionError("ema_combine: " + w_prev.shape() + " vs " + w_new.shape());
  Matrix out(w_prev.rows(), w_prev.cols());
  // std::lerp is exact at both ends and never leaves [w_prev, w_new].
  for (std::size_t i = 0; i < out.size(); ++i)
    out.span()[i] = std::lerp(w_prev.span()[i], w_new.span()[i], config.alpha);
  return out;
}

}  // namespace rlsol
