#pragma once

// Exponentially weighted, regularized least squares and its exact recursive
// solution through rank-one updates of the precision matrix P = Φ⁻¹.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rlsol/errors.hpp"
#include "rlsol/linalg.hpp"

namespace rlsol {

struct RlsConfig {
  double beta = 1.0;   // forgetting factor, 0 < beta <= 1
  double delta = 1.0;  // regularizer, P0 = I / delta
  std::size_t input_dim = 1;
  std::size_t output_dim = 1;

  void validate() const {
    if (!(beta > 0.0 && beta <= 1.0))
      throw ConfigError("forgetting factor beta must lie in (0, 1], got " + std::to_string(beta));
    if (!(delta > 0.0)) throw ConfigError("regularizer delta must be positive, got " + std::to_string(delta));
    if (input_dim == 0 || output_dim == 0) throw ConfigError("input_dim and output_dim must be positive");
  }
};

struct RlsState {
  Matrix p_mat;  // precision matrix, input_dim x input_dim
  std::size_t step = 0;
  RlsConfig config;
};

// A block of b input/target rows with optional non-negative row weights.
// Weights act as row scaling by sqrt(weight).
struct SampleBlock {
  Matrix x;  // b x p
  Matrix y;  // b x q
  std::vector<double> weights;  // empty means all ones

  std::size_t size() const noexcept { return x.rows(); }
  double weight(std::size_t j) const { return weights.empty() ? 1.0 : weights[j]; }

  void validate() const {
    if (x.rows() == 0) throw InputError("sample block is empty");
    if (y.rows() != x.rows())
      throw DimensionError("sample block rows disagree: x " + x.shape() + " vs y " + y.shape());
    if (!weights.empty() && weights.size() != x.rows())
      throw DimensionError("sample block has " + std::to_string(weights.size()) + " weights for " +
                           std::to_string(x.rows()) + " rows");
    for (double w : weights)
      if (!(w >= 0.0) || !std::isfinite(w)) throw InputError("sample weights must be finite and non-negative");
  }
  void validate(const RlsConfig& cfg) const {
    validate();
    if (x.cols() != cfg.input_dim || y.cols() != cfg.output_dim)
      throw DimensionError("sample block x " + x.shape() + ", y " + y.shape() + " does not match p=" +
                           std::to_string(cfg.input_dim) + ", q=" + std::to_string(cfg.output_dim));
  }

  // Rows scaled by sqrt(weight); returns (x, y).
  std::pair<Matrix, Matrix> scaled() const {
    Matrix xs = x, ys = y;
    if (weights.empty()) return {std::move(xs), std::move(ys)};
    for (std::size_t j = 0; j < x.rows(); ++j) {
      const double s = std::sqrt(weights[j]);
      for (double& v : xs.row(j)) v *= s;
      for (double& v : ys.row(j)) v *= s;
    }
    return {std::move(xs), std::move(ys)};
  }
};

inline SampleBlock single_sample(const Vector& x, const Vector& y) {
  return SampleBlock{Matrix::row_vector(x), Matrix::row_vector(y), {}};
}

struct CorrelationPair {
  Matrix z_mat;    // q x p
  Matrix phi_mat;  // p x p
};

inline RlsState init_state(const RlsConfig& config) {
  config.validate();
  Matrix p = Matrix::identity(config.input_dim);
  p *= 1.0 / config.delta;
  return RlsState{std::move(p), 0, config};
}

// Z = Σ β^{n-i} Yᵢᵀ Xᵢ and Φ = Σ β^{n-i} Xᵢᵀ Xᵢ + δ βⁿ I over n ordered blocks.
inline CorrelationPair accumulate_correlation(std::span<const SampleBlock> blocks, const RlsConfig& cfg) {
  cfg.validate();
  const std::size_t p = cfg.input_dim, q = cfg.output_dim;
  Matrix z(q, p), phi(p, p);
  for (const SampleBlock& blk : blocks) {
    blk.validate(cfg);
    z *= cfg.beta;
    phi *= cfg.beta;
    auto [xs, ys] = blk.scaled();
    for (std::size_t j = 0; j < xs.rows(); ++j) {
      auto xr = xs.row(j);
      auto yr = ys.row(j);
      for (std::size_t a = 0; a < p; ++a) {
        const double xa = xr[a];
        for (std::size_t c = 0; c < p; ++c) phi(a, c) += xa * xr[c];
        for (std::size_t r = 0; r < q; ++r) z(r, a) += yr[r] * xa;
      }
    }
  }
  const double reg = cfg.delta * std::pow(cfg.beta, static_cast<double>(blocks.size()));
  for (std::size_t a = 0; a < p; ++a) phi(a, a) += reg;
  return CorrelationPair{std::move(z), std::move(phi)};
}

// Ŵ = Z Φ⁻¹: the exact minimizer of the weighted regularized cost.
inline Matrix batch_solve(std::span<const SampleBlock> blocks, const RlsConfig& cfg) {
  if (blocks.empty()) throw InputError("batch_solve needs at least one block");
  CorrelationPair c = accumulate_correlation(blocks, cfg);
  // Φ Wᵀ = Zᵀ
  return transpose(spd_solve(c.phi_mat, transpose(c.z_mat)));
}

// Σ β^{n-i} (1/b)‖Yᵢ − Xᵢ Wᵀ‖² + (δ/b) βⁿ ‖W‖²; b is taken from the last block.
inline double lse_cost(const Matrix& w, std::span<const SampleBlock> blocks, const RlsConfig& cfg) {
  if (blocks.empty()) throw InputError("lse_cost needs at least one block");
  if (w.rows() != cfg.output_dim || w.cols() != cfg.input_dim)
    throw DimensionError("lse_cost: weights " + w.shape() + " do not match config");
  const std::size_t n = blocks.size();
  double data = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const SampleBlock& blk = blocks[i];
    blk.validate(cfg);
    auto [xs, ys] = blk.scaled();
    double block_sse = 0.0;
    for (std::size_t j = 0; j < xs.rows(); ++j) {
      auto xr = xs.row(j);
      for (std::size_t r = 0; r < cfg.output_dim; ++r) {
        double pred = 0.0;
        for (std::size_t a = 0; a < cfg.input_dim; ++a) pred += w(r, a) * xr[a];
        const double e = ys(j, r) - pred;
        block_sse += e * e;
      }
    }
    data += std::pow(cfg.beta, static_cast<double>(n - 1 - i)) * block_sse / static_cast<double>(blk.size());
  }
  const double b = static_cast<double>(blocks.back().size());
  const double wn = frobenius_norm(w);
  return data + cfg.delta / b * std::pow(cfg.beta, static_cast<double>(n)) * wn * wn;
}

namespace detail {
inline void check_input(const RlsState& state, const Vector& x) {
  if (x.size() != state.config.input_dim)
    throw DimensionError("input of length " + std::to_string(x.size()) + " for RLS state of dimension " +
                         std::to_string(state.config.input_dim));
  if (!all_finite(x.span())) throw InputError("non-finite RLS input at step " + std::to_string(state.step));
}
}  // namespace detail

// k = β⁻¹xᵀP / (1 + β⁻¹xᵀPx), computed from the current (pre-update) P.
inline Vector gain_vector(const RlsState& state, const Vector& x) {
  detail::check_input(state, x);
  Vector px = matvec(state.p_mat, x);  // P symmetric, so xᵀP == (Px)ᵀ
  const double denom = state.config.beta + dot(x, px);
  px *= 1.0 / denom;
  return px;
}

// P ← β⁻¹P − β⁻¹P x k, then re-symmetrized.
inline RlsState update_precision(const RlsState& state, const Vector& x) {
  detail::check_input(state, x);
  const std::size_t p = state.config.input_dim;
  const double beta = state.config.beta;
  Vector px = matvec(state.p_mat, x);
  const double denom = beta + dot(x, px);
  if (!(denom > 0.0) || !std::isfinite(denom))
    throw DegeneracyError(state.step + 1, "non-positive innovation denominator");
  RlsState next{state.p_mat, state.step + 1, state.config};
  Matrix& pm = next.p_mat;
  const double inv_beta = 1.0 / beta;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) pm(i, j) = inv_beta * (pm(i, j) - px[i] * px[j] / denom);
  symmetrize(pm);
  for (std::size_t i = 0; i < p; ++i)
    if (!(pm(i, i) > 0.0)) throw DegeneracyError(next.step, "precision matrix lost positive definiteness");
  if (!all_finite(pm.span())) throw DegeneracyError(next.step, "precision matrix has non-finite entries");
  return next;
}

// Condition estimate of Φ = P⁻¹: squared ratio of the extreme diagonal entries
// of the Cholesky factor of P. Throws FactorizationError if P is not SPD.
inline double condition_estimate(const RlsState& state) {
  Matrix l = cholesky(state.p_mat);
  double lo = l(0, 0), hi = l(0, 0);
  for (std::size_t i = 1; i < l.rows(); ++i) {
    lo = std::min(lo, l(i, i));
    hi = std::max(hi, l(i, i));
  }
  const double r = hi / lo;
  return r * r;
}

namespace detail {
// W ← W − (W x − y) kᵀ
inline Matrix apply_gain(const Matrix& w, const Vector& x, const Vector& y, const Vector& k) {
  Vector residual = matvec(w, x) - y;
  Matrix out = w;
  for (std::size_t r = 0; r < w.rows(); ++r)
    for (std::size_t c = 0; c < w.cols(); ++c) out(r, c) -= residual[r] * k[c];
  return out;
}
inline void check_weights(const Matrix& w, const RlsConfig& cfg) {
  if (w.rows() != cfg.output_dim || w.cols() != cfg.input_dim)
    throw DimensionError("weights " + w.shape() + " do not match RLS config (" +
                         std::to_string(cfg.output_dim) + "x" + std::to_string(cfg.input_dim) + ")");
}
}  // namespace detail

// One exact recursive least-squares step on a single sample pair.
inline std::pair<Matrix, RlsState> rls_step(const RlsState& state, const Matrix& w_prev, const Vector& x,
                                            const Vector& y) {
  detail::check_weights(w_prev, state.config);
  if (y.size() != state.config.output_dim)
    throw DimensionError("target of length " + std::to_string(y.size()) + " for output_dim " +
                         std::to_string(state.config.output_dim));
  Vector k = gain_vector(state, x);
  RlsState next = update_precision(state, x);
  return {detail::apply_gain(w_prev, x, y, k), std::move(next)};
}

// Virtual sample pair: means of the (sqrt-weight scaled) rows.
inline std::pair<Vector, Vector> block_virtual_input(const SampleBlock& block) {
  block.validate();
  auto [xs, ys] = block.scaled();
  const double inv_b = 1.0 / static_cast<double>(block.size());
  Vector xm(xs.cols()), ym(ys.cols());
  for (std::size_t j = 0; j < xs.rows(); ++j) {
    for (std::size_t a = 0; a < xs.cols(); ++a) xm[a] += xs(j, a);
    for (std::size_t r = 0; r < ys.cols(); ++r) ym[r] += ys(j, r);
  }
  xm *= inv_b;
  ym *= inv_b;
  return {std::move(xm), std::move(ym)};
}

// Approximate recursive step for b > 1 driven by the block's virtual sample.
inline std::pair<Matrix, RlsState> rls_block_step(const RlsState& state, const Matrix& w_prev,
                                                  const SampleBlock& block) {
  block.validate(state.config);
  auto [xm, ym] = block_virtual_input(block);
  return rls_step(state, w_prev, xm, ym);
}

}  // namespace rlsol
