#pragma once

// Bias-free multi-layer perceptron with per-layer RLS preconditioning.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rlsol/errors.hpp"
#include "rlsol/linalg.hpp"
#include "rlsol/optimizers.hpp"
#include "rlsol/rls.hpp"

namespace rlsol {

enum class ActivationKind { identity, relu, leaky_relu };

struct Activation {
  ActivationKind kind = ActivationKind::identity;
  double slope = 0.01;  // leaky_relu only

  double apply(double v) const noexcept {
    switch (kind) {
      case ActivationKind::relu: return v > 0.0 ? v : 0.0;
      case ActivationKind::leaky_relu: return v > 0.0 ? v : slope * v;
      case ActivationKind::identity: break;
    }
    return v;
  }
  double derivative(double v) const noexcept {
    switch (kind) {
      case ActivationKind::relu: return v > 0.0 ? 1.0 : 0.0;
      case ActivationKind::leaky_relu: return v > 0.0 ? 1.0 : slope;
      case ActivationKind::identity: break;
    }
    return 1.0;
  }

  static constexpr Activation identity() { return {ActivationKind::identity, 0.0}; }
  static constexpr Activation relu() { return {ActivationKind::relu, 0.0}; }
  static constexpr Activation leaky_relu(double slope = 0.01) { return {ActivationKind::leaky_relu, slope}; }
};

enum class HeadKind { squared_error_identity, cross_entropy_softmax };

struct Layer {
  Matrix weight;  // out x in
  Activation activation;
};

struct MlpModel {
  std::vector<Layer> layers;
  HeadKind head = HeadKind::squared_error_identity;

  std::size_t input_dim() const { return layers.front().weight.cols(); }
  std::size_t output_dim() const { return layers.back().weight.rows(); }

  void validate() const {
    if (layers.empty()) throw ConfigError("MLP needs at least one layer");
    for (std::size_t l = 0; l + 1 < layers.size(); ++l)
      if (layers[l].weight.rows() != layers[l + 1].weight.cols())
        throw DimensionError("layer " + std::to_string(l) + " output " + layers[l].weight.shape() +
                             " does not chain into layer " + std::to_string(l + 1) + " " +
                             layers[l + 1].weight.shape());
    if (layers.back().activation.kind != ActivationKind::identity)
      throw ConfigError("final layer activation must be identity; the head supplies the output nonlinearity");
  }
};

struct ForwardCache {
  std::vector<Vector> inputs;          // uˡ, the input to layer l
  std::vector<Vector> pre_activations;  // zˡ = Wˡ uˡ
};

inline std::pair<Vector, ForwardCache> forward(const MlpModel& model, const Vector& x) {
  model.validate();
  if (x.size() != model.input_dim())
    throw DimensionError("forward: input length " + std::to_string(x.size()) + " vs model input " +
                         std::to_string(model.input_dim()));
  ForwardCache cache;
  cache.inputs.reserve(model.layers.size());
  cache.pre_activations.reserve(model.layers.size());
  Vector u = x;
  for (const Layer& layer : model.layers) {
    Vector z = matvec(layer.weight, u);
    cache.inputs.push_back(std::move(u));
    u = z;
    for (double& v : u) v = layer.activation.apply(v);
    cache.pre_activations.push_back(std::move(z));
  }
  return {cache.pre_activations.back(), std::move(cache)};
}

inline Vector softmax(const Vector& z) {
  const double m = *std::max_element(z.begin(), z.end());
  Vector u(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (u[i] = std::exp(z[i] - m));
  u *= 1.0 / s;
  return u;
}

// Head output u: z itself for the identity head, softmax(z) for cross-entropy.
inline Vector head_output(HeadKind head, const Vector& z) {
  return head == HeadKind::cross_entropy_softmax ? softmax(z) : z;
}

// ½‖z − y‖² or −Σ y log softmax(z).
inline double head_loss(HeadKind head, const Vector& z, const Vector& y) {
  if (z.size() != y.size()) throw DimensionError("head_loss: output/target length mismatch");
  if (head == HeadKind::squared_error_identity) {
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += (z[i] - y[i]) * (z[i] - y[i]);
    return 0.5 * s;
  }
  const double m = *std::max_element(z.begin(), z.end());
  double lse = 0.0;
  for (double v : z) lse += std::exp(v - m);
  lse = m + std::log(lse);
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += y[i] * (lse - z[i]);
  return s;
}

struct Gradients {
  Vector head;                  // ∇_z L = u − y
  std::vector<Matrix> weights;  // ∇_{Wˡ} L per layer
};

inline Gradients backward(const MlpModel& model, const ForwardCache& cache, const Vector& target) {
  const std::size_t depth = model.layers.size();
  if (cache.inputs.size() != depth || cache.pre_activations.size() != depth)
    throw DimensionError("backward: cache depth does not match model");
  const Vector& z = cache.pre_activations.back();
  if (target.size() != z.size())
    throw DimensionError("backward: target length " + std::to_string(target.size()) + " vs output " +
                         std::to_string(z.size()));
  Gradients g;
  g.head = head_output(model.head, z) - target;
  g.weights.resize(depth);
  Vector delta = g.head;  // gradient w.r.t. the current layer's pre-activation
  for (std::size_t l = depth; l-- > 0;) {
    g.weights[l] = outer(delta, cache.inputs[l]);
    if (l == 0) break;
    Vector up = vecmat(delta, model.layers[l].weight);  // Wˡᵀ δ
    const Activation& act = model.layers[l - 1].activation;
    const Vector& zprev = cache.pre_activations[l - 1];
    for (std::size_t i = 0; i < up.size(); ++i) up[i] *= act.derivative(zprev[i]);
    delta = std::move(up);
  }
  return g;
}

inline Vector layer_virtual_input(std::span<const ForwardCache> caches, std::size_t layer) {
  if (caches.empty()) throw InputError("layer_virtual_input: empty batch");
  Vector mean(caches.front().inputs.at(layer).size());
  for (const ForwardCache& c : caches) mean += c.inputs.at(layer);
  mean *= 1.0 / static_cast<double>(caches.size());
  return mean;
}

inline constexpr double kDefaultLayerDelta = 5e-4;

struct LayerUpdateConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
};

struct LayerRlsBank {
  std::vector<RlsState> states;
  std::vector<LayerUpdateConfig> configs;
};

inline LayerRlsBank make_layer_bank(const MlpModel& model, double delta = kDefaultLayerDelta,
                                    LayerUpdateConfig update = {}, double beta = 1.0) {
  model.validate();
  LayerRlsBank bank;
  for (const Layer& layer : model.layers) {
    bank.states.push_back(init_state(RlsConfig{beta, delta, layer.weight.cols(), layer.weight.rows()}));
    bank.configs.push_back(update);
  }
  return bank;
}

struct BatchPass {
  std::vector<Matrix> mean_gradients;  // weighted mean over the batch, no decay
  std::vector<ForwardCache> caches;    // inputs already scaled by sqrt(weight)
};

// Forward/backward over every row of the batch. Row weights multiply the
// per-sample loss; the cached inputs are scaled by sqrt(weight) so their mean
// is the weighted virtual input.
inline BatchPass batch_pass(const MlpModel& model, const SampleBlock& batch) {
  batch.validate();
  model.validate();
  if (batch.x.cols() != model.input_dim() || batch.y.cols() != model.output_dim())
    throw DimensionError("batch x " + batch.x.shape() + ", y " + batch.y.shape() + " does not match model");
  BatchPass pass;
  for (const Layer& layer : model.layers) pass.mean_gradients.emplace_back(layer.weight.rows(), layer.weight.cols());
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    auto [z, cache] = forward(model, batch.x.row_copy(j));
    Gradients g = backward(model, cache, batch.y.row_copy(j));
    const double w = batch.weight(j);
    for (std::size_t l = 0; l < g.weights.size(); ++l) {
      g.weights[l] *= w * inv_b;
      pass.mean_gradients[l] += g.weights[l];
    }
    if (!batch.weights.empty())
      for (Vector& u : cache.inputs) u *= std::sqrt(w);
    pass.caches.push_back(std::move(cache));
  }
  return pass;
}

// One improved mini-batch iteration: Pˡ advanced with the layer's virtual input,
// then Wˡ ← Wˡ − η̃ˡ (∇ˡ + λˡWˡ) Pˡ.
inline std::pair<MlpModel, LayerRlsBank> rls_update_layers(const MlpModel& model, const LayerRlsBank& bank,
                                                           const SampleBlock& batch) {
  if (bank.states.size() != model.layers.size() || bank.configs.size() != model.layers.size())
    throw DimensionError("layer bank size does not match model depth");
  BatchPass pass = batch_pass(model, batch);
  MlpModel next_model = model;
  LayerRlsBank next_bank = bank;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const Vector xbar = layer_virtual_input(pass.caches, l);
    try {
      next_bank.states[l] = update_precision(bank.states[l], xbar);
    } catch (const DegeneracyError& e) {
      throw DegeneracyError(e.step(), "precision update failed", static_cast<std::ptrdiff_t>(l));
    }
    const LayerUpdateConfig& cfg = bank.configs[l];
    Matrix grad = pass.mean_gradients[l];
    if (cfg.weight_decay > 0.0) grad += cfg.weight_decay * model.layers[l].weight;
    next_model.layers[l].weight =
        precond_gd_iterate(model.layers[l].weight, grad, next_bank.states[l].p_mat, cfg.learning_rate);
  }
  return {std::move(next_model), std::move(next_bank)};
}

// Plain mini-batch iteration Wˡ ← Wˡ − η(∇ˡ + λWˡ) for every layer.
inline MlpModel plain_update_layers(const MlpModel& model, const SampleBlock& batch, double learning_rate,
                                    double weight_decay) {
  BatchPass pass = batch_pass(model, batch);
  MlpModel next = model;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    Matrix step = pass.mean_gradients[l];
    if (weight_decay > 0.0) step += weight_decay * model.layers[l].weight;
    step *= learning_rate;
    next.layers[l].weight -= step;
  }
  return next;
}

}  // namespace rlsol
