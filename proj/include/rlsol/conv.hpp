#pragma once

// Single-output-channel convolution lowered to a matrix product (im2col),
// its weighted squared-error objective, and the RLS-aided BGD update stage.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rlsol/errors.hpp"
#include "rlsol/half.hpp"
#include "rlsol/linalg.hpp"
#include "rlsol/optimizers.hpp"
#include "rlsol/rls.hpp"

namespace rlsol {

// Dense (channel, row, col) tensor; used for feature maps and kernels.
struct FeatureMap {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> data;

  FeatureMap() = default;
  FeatureMap(std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
      : channels(c), height(h), width(w), data(c * h * w, fill) {}
  FeatureMap(std::size_t c, std::size_t h, std::size_t w, std::vector<double> values)
      : channels(c), height(h), width(w), data(std::move(values)) {
    if (data.size() != c * h * w) throw DimensionError("feature map data length does not match c*h*w");
  }

  double& at(std::size_t c, std::size_t r, std::size_t col) { return data[(c * height + r) * width + col]; }
  double at(std::size_t c, std::size_t r, std::size_t col) const { return data[(c * height + r) * width + col]; }
  std::size_t size() const noexcept { return data.size(); }
  std::string shape() const {
    return "(" + std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width) + ")";
  }
  bool operator==(const FeatureMap&) const = default;
};

struct ConvLayer {
  FeatureMap kernel;  // channels x kh x kw, one output channel
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t patch_size() const noexcept { return kernel.size(); }
};

struct OutputShape {
  std::size_t height;
  std::size_t width;
  std::size_t positions() const noexcept { return height * width; }
};

inline OutputShape conv_output_shape(const FeatureMap& fm, const ConvLayer& layer) {
  if (layer.stride == 0) throw ConfigError("convolution stride must be positive");
  if (fm.channels != layer.kernel.channels)
    throw DimensionError("feature map " + fm.shape() + " has a different channel count than kernel " +
                         layer.kernel.shape());
  const std::size_t ph = fm.height + 2 * layer.padding, pw = fm.width + 2 * layer.padding;
  if (layer.kernel.height > ph || layer.kernel.width > pw || layer.kernel.height == 0 || layer.kernel.width == 0)
    throw ConfigError("kernel " + layer.kernel.shape() + " does not fit padded input " + fm.shape());
  return {(ph - layer.kernel.height) / layer.stride + 1, (pw - layer.kernel.width) / layer.stride + 1};
}

// p x M matrix whose column k is the zero-padded receptive field of output
// position k; rows ordered (channel, kernel row, kernel col).
inline Matrix im2col(const FeatureMap& fm, const ConvLayer& layer) {
  const OutputShape out = conv_output_shape(fm, layer);
  const std::size_t kh = layer.kernel.height, kw = layer.kernel.width;
  Matrix cols(layer.patch_size(), out.positions());
  for (std::size_t c = 0; c < fm.channels; ++c)
    for (std::size_t i = 0; i < kh; ++i)
      for (std::size_t j = 0; j < kw; ++j) {
        const std::size_t row = (c * kh + i) * kw + j;
        for (std::size_t oy = 0; oy < out.height; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * layer.stride + i) -
                                    static_cast<std::ptrdiff_t>(layer.padding);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(fm.height)) continue;
          for (std::size_t ox = 0; ox < out.width; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * layer.stride + j) -
                                      static_cast<std::ptrdiff_t>(layer.padding);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(fm.width)) continue;
            cols(row, oy * out.width + ox) = fm.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
          }
        }
      }
  return cols;
}

// f(W): the kernel flattened in im2col row order.
inline Vector unroll_kernel(const FeatureMap& kernel) { return Vector(kernel.data); }

inline FeatureMap roll_kernel(const Vector& flat, std::size_t channels, std::size_t kh, std::size_t kw) {
  if (flat.size() != channels * kh * kw) throw DimensionError("roll_kernel: length does not match kernel shape");
  return FeatureMap(channels, kh, kw, flat.values());
}

// Output map (h' x w') computed as f(W)ᵀ · im2col(X).
inline Matrix conv_forward(const FeatureMap& fm, const ConvLayer& layer) {
  const OutputShape out = conv_output_shape(fm, layer);
  const Vector resp = vecmat(unroll_kernel(layer.kernel), im2col(fm, layer));
  return Matrix(out.height, out.width, resp.values());
}

// A training sample with its confidence-map target and per-position weights γ.
struct WeightedSample {
  FeatureMap features;
  Matrix target;  // h' x w'
  Matrix gamma;   // h' x w', non-negative
};

// Fixed-capacity sample set, oldest evicted first. Each entry carries a sample
// weight that multiplies its γ.
class SampleSet {
 public:
  struct Entry {
    WeightedSample sample;
    double weight = 1.0;
    std::int64_t tag = 0;  // caller-defined, e.g. the frame index
  };

  explicit SampleSet(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw ConfigError("sample set capacity must be positive");
  }

  // Returns the tag of the evicted entry, if any.
  std::optional<std::int64_t> insert(WeightedSample sample, double weight = 1.0, std::int64_t tag = 0) {
    if (!(weight >= 0.0)) throw InputError("sample weight must be non-negative");
    std::optional<std::int64_t> evicted;
    if (entries_.size() == capacity_) {
      evicted = entries_.front().tag;
      entries_.pop_front();
    }
    entries_.push_back({std::move(sample), weight, tag});
    return evicted;
  }

  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  const std::deque<Entry>& entries() const noexcept { return entries_; }

 private:
  std::size_t capacity_;
  std::deque<Entry> entries_;
};

namespace detail {

struct LoweredSample {
  Matrix cols;                // p x M
  std::vector<double> y;      // M
  std::vector<double> gamma;  // M, already multiplied by the sample weight
};

inline LoweredSample lower(const SampleSet::Entry& e, const ConvLayer& layer) {
  const OutputShape out = conv_output_shape(e.sample.features, layer);
  const WeightedSample& s = e.sample;
  if (s.target.rows() != out.height || s.target.cols() != out.width || s.gamma.rows() != out.height ||
      s.gamma.cols() != out.width)
    throw DimensionError("sample target " + s.target.shape() + " / gamma " + s.gamma.shape() +
                         " do not match conv output (" + std::to_string(out.height) + "x" +
                         std::to_string(out.width) + ")");
  LoweredSample l{im2col(s.features, layer), s.target.values(), s.gamma.values()};
  for (double& g : l.gamma) {
    if (!(g >= 0.0)) throw InputError("gamma weights must be non-negative");
    g *= e.weight;
  }
  return l;
}

inline void require_nonempty(const SampleSet& set) {
  if (set.empty()) throw InputError("sample set is empty");
}

}  // namespace detail

// Σⱼ Σₖ γⱼₖ (yⱼₖ − f(W)ᵀ xⱼₖ)² + (λ/2)‖W‖² in the lowered representation.
inline double conv_loss(const SampleSet& set, const ConvLayer& layer, double lambda_d) {
  detail::require_nonempty(set);
  const Vector w = unroll_kernel(layer.kernel);
  double loss = 0.0;
  for (const auto& e : set.entries()) {
    const detail::LoweredSample l = detail::lower(e, layer);
    const Vector resp = vecmat(w, l.cols);
    for (std::size_t k = 0; k < resp.size(); ++k) {
      const double r = l.y[k] - resp[k];
      loss += l.gamma[k] * r * r;
    }
  }
  const double wn = norm(w);
  return loss + 0.5 * lambda_d * wn * wn;
}

// Exact gradient of conv_loss with respect to the kernel, kernel-shaped.
inline FeatureMap conv_gradient(const SampleSet& set, const ConvLayer& layer, double lambda_d) {
  detail::require_nonempty(set);
  const Vector w = unroll_kernel(layer.kernel);
  Vector g(w.size());
  for (const auto& e : set.entries()) {
    const detail::LoweredSample l = detail::lower(e, layer);
    const Vector resp = vecmat(w, l.cols);
    Vector coef(resp.size());
    for (std::size_t k = 0; k < resp.size(); ++k) coef[k] = -2.0 * l.gamma[k] * (l.y[k] - resp[k]);
    g += matvec(l.cols, coef);
  }
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += lambda_d * w[i];
  return roll_kernel(g, layer.kernel.channels, layer.kernel.height, layer.kernel.width);
}

// x̄ = (1/√(NM)) Σⱼ Σₖ √γⱼₖ xⱼₖ
inline Vector conv_virtual_input(const SampleSet& set, const ConvLayer& layer) {
  detail::require_nonempty(set);
  Vector sum(layer.patch_size());
  std::size_t total_columns = 0;
  for (const auto& e : set.entries()) {
    const detail::LoweredSample l = detail::lower(e, layer);
    Vector sg(l.gamma.size());
    for (std::size_t k = 0; k < sg.size(); ++k) sg[k] = std::sqrt(l.gamma[k]);
    sum += matvec(l.cols, sg);
    total_columns += l.cols.cols();
  }
  // NM counts columns over the whole set, which equals N·M for equal-sized maps.
  sum *= 1.0 / std::sqrt(static_cast<double>(total_columns));
  return sum;
}

enum class PrecisionMode { full, reduced };

inline constexpr double kDefaultConvDelta = 0.1;
inline constexpr std::int64_t kDefaultUpdatePeriod = 20;

// RLS state for the conv filter. In reduced mode P is stored as 16-bit floats
// scaled by the largest magnitude entry, and widened to double for arithmetic.
class ConvRlsState {
 public:
  static ConvRlsState init(const RlsConfig& config, PrecisionMode mode = PrecisionMode::full) {
    ConvRlsState s;
    s.mode_ = mode;
    s.store(init_state(config));
    return s;
  }

  PrecisionMode mode() const noexcept { return mode_; }
  std::size_t step() const noexcept { return step_; }
  const RlsConfig& config() const noexcept { return config_; }

  RlsState widened() const {
    if (mode_ == PrecisionMode::full) return full_;
    const std::size_t p = config_.input_dim;
    Matrix m(p, p);
    for (std::size_t i = 0; i < packed_.size(); ++i)
      m.span()[i] = static_cast<double>(half_to_float(packed_[i])) * scale_;
    return RlsState{std::move(m), step_, config_};
  }

  void store(const RlsState& state) {
    step_ = state.step;
    config_ = state.config;
    if (mode_ == PrecisionMode::full) {
      full_ = state;
      return;
    }
    scale_ = max_abs(state.p_mat.span());
    if (!(scale_ > 0.0)) scale_ = 1.0;
    packed_.resize(state.p_mat.size());
    for (std::size_t i = 0; i < packed_.size(); ++i)
      packed_[i] = float_to_half(static_cast<float>(state.p_mat.span()[i] / scale_));
  }

  // Bytes held for P, for diagnostics.
  std::size_t storage_bytes() const noexcept {
    return mode_ == PrecisionMode::full ? full_.p_mat.size() * sizeof(double)
                                        : packed_.size() * sizeof(std::uint16_t) + sizeof(double);
  }

 private:
  PrecisionMode mode_ = PrecisionMode::full;
  RlsConfig config_;
  std::size_t step_ = 0;
  RlsState full_;
  std::vector<std::uint16_t> packed_;
  double scale_ = 1.0;
};

// Advances P once with the set's virtual input, then runs `iterations` steps
// of f(W) ← f(W) − η f(ΔW) P where ΔW carries the λ_d W decay term.
inline std::pair<ConvLayer, ConvRlsState> conv_update_stage(const ConvLayer& layer, const SampleSet& set,
                                                            const ConvRlsState& state, const GdConfig& cfg) {
  cfg.validate();
  detail::require_nonempty(set);
  if (state.config().input_dim != layer.patch_size())
    throw DimensionError("RLS state dimension " + std::to_string(state.config().input_dim) +
                         " does not match kernel patch size " + std::to_string(layer.patch_size()));
  const RlsState advanced = update_precision(state.widened(), conv_virtual_input(set, layer));
  ConvRlsState next_state = state;
  next_state.store(advanced);
  // Arithmetic uses the stored (possibly rounded) P.
  const Matrix p_mat = next_state.widened().p_mat;

  ConvLayer cur = layer;
  const std::size_t dim = layer.patch_size();
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const FeatureMap grad = conv_gradient(set, cur, cfg.weight_decay);
    const Matrix w = precond_gd_iterate(Matrix(1, dim, cur.kernel.data), Matrix(1, dim, grad.data), p_mat,
                                        cfg.learning_rate);
    cur.kernel.data = w.values();
  }
  return {std::move(cur), std::move(next_state)};
}

// Plain BGD on conv_loss until the gradient norm drops below `tolerance`.
// Returns the fitted layer and the number of iterations used.
inline std::pair<ConvLayer, std::size_t> conv_initialize(const ConvLayer& layer, const SampleSet& set,
                                                         double lambda_d, double learning_rate, double tolerance,
                                                         std::size_t max_iterations) {
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  ConvLayer cur = layer;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    const FeatureMap g = conv_gradient(set, cur, lambda_d);
    double gn = 0.0;
    for (double v : g.data) gn += v * v;
    if (std::sqrt(gn) < tolerance) return {std::move(cur), it};
    for (std::size_t i = 0; i < g.size(); ++i) cur.kernel.data[i] -= learning_rate * g.data[i];
  }
  return {std::move(cur), max_iterations};
}

}  // namespace rlsol
