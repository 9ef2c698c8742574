#pragma once

// Oracle-equivalence and identity checks shared by `rlsol verify` and the
// acceptance suite. Every check is seeded and deterministic; each returns its
// worst observed error next to the tolerance it was held to.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "rlsol/bench_config.hpp"
#include "rlsol/canonical.hpp"
#include "rlsol/conv.hpp"
#include "rlsol/conv_session.hpp"
#include "rlsol/drift.hpp"
#include "rlsol/linalg.hpp"
#include "rlsol/mlp.hpp"
#include "rlsol/rls.hpp"
#include "rlsol/session.hpp"
#include "rlsol/trace.hpp"

namespace rlsol::verify {

struct CheckResult {
  int criterion = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double elapsed_ms = 0.0;
  double budget_ms = 0.0;
};

namespace detail {

inline std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(r, c);
  for (double& v : m.span()) v = g(rng);
  return m;
}

inline Vector random_vector(std::size_t n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(n);
  for (double& x : v) x = g(rng);
  return v;
}

inline double rel_frobenius(const Matrix& a, const Matrix& b) {
  const double denom = std::max(frobenius_norm(b), 1e-300);
  return frobenius_norm(a - b) / denom;
}

// Direct spatial convolution with zero padding, one output channel.
inline Matrix direct_conv(const FeatureMap& x, const FeatureMap& k, std::size_t stride, std::size_t pad) {
  const std::size_t oh = (x.height + 2 * pad - k.height) / stride + 1;
  const std::size_t ow = (x.width + 2 * pad - k.width) / stride + 1;
  Matrix out(oh, ow);
  for (std::size_t oy = 0; oy < oh; ++oy)
    for (std::size_t ox = 0; ox < ow; ++ox) {
      double s = 0.0;
      for (std::size_t c = 0; c < x.channels; ++c)
        for (std::size_t i = 0; i < k.height; ++i)
          for (std::size_t j = 0; j < k.width; ++j) {
            const long iy = static_cast<long>(oy * stride + i) - static_cast<long>(pad);
            const long ix = static_cast<long>(ox * stride + j) - static_cast<long>(pad);
            if (iy < 0 || ix < 0 || iy >= static_cast<long>(x.height) || ix >= static_cast<long>(x.width)) continue;
            s += k.at(c, i, j) * x.at(c, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
          }
      out(oy, ox) = s;
    }
  return out;
}

// Loss of an MLP evaluated with plain loops, independent of forward().
inline double oracle_mlp_loss(const MlpModel& m, const Vector& x, const Vector& y) {
  std::vector<double> u(x.begin(), x.end());
  std::vector<double> z;
  for (const Layer& layer : m.layers) {
    z.assign(layer.weight.rows(), 0.0);
    for (std::size_t r = 0; r < layer.weight.rows(); ++r)
      for (std::size_t c = 0; c < layer.weight.cols(); ++c) z[r] += layer.weight(r, c) * u[c];
    u.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double v = z[i];
      switch (layer.activation.kind) {
        case ActivationKind::identity: u[i] = v; break;
        case ActivationKind::relu: u[i] = std::max(v, 0.0); break;
        case ActivationKind::leaky_relu: u[i] = v > 0 ? v : layer.activation.slope * v; break;
      }
    }
  }
  double loss = 0.0;
  if (m.head == HeadKind::squared_error_identity) {
    for (std::size_t i = 0; i < z.size(); ++i) loss += 0.5 * (z[i] - y[i]) * (z[i] - y[i]);
  } else {
    double sum = 0.0;
    for (double v : z) sum += std::exp(v);
    for (std::size_t i = 0; i < z.size(); ++i) loss -= y[i] * std::log(std::exp(z[i]) / sum);
  }
  return loss;
}

template <typename F>
CheckResult timed(int criterion, std::string name, double budget_ms, F&& body) {
  const auto start = std::chrono::steady_clock::now();
  CheckResult r = body();
  r.criterion = criterion;
  r.name = std::move(name);
  r.budget_ms = budget_ms;
  r.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace detail

// Criterion 1: rls_step against batch_solve at every step of 20 streams.
inline CheckResult recursive_batch_equivalence() {
  return detail::timed(1, "recursive/batch equivalence", 5000.0, [] {
    std::mt19937_64 rng(101);
    const std::size_t ps[] = {5, 10, 20}, qs[] = {1, 3};
    const double betas[] = {0.9, 1.0}, deltas[] = {1e-3, 1.0};
    double worst = 0.0;
    for (std::size_t s = 0; s < 20; ++s) {
      const RlsConfig cfg{betas[(s / 6) % 2], deltas[(s / 12 + s) % 2], ps[s % 3], qs[(s / 3) % 2]};
      RlsState state = init_state(cfg);
      Matrix w(cfg.output_dim, cfg.input_dim);
      std::vector<SampleBlock> blocks;
      for (std::size_t n = 0; n < 200; ++n) {
        const Vector x = detail::random_vector(cfg.input_dim, rng);
        const Vector y = detail::random_vector(cfg.output_dim, rng);
        std::tie(w, state) = rls_step(state, w, x, y);
        blocks.push_back(single_sample(x, y));
        worst = std::max(worst, detail::rel_frobenius(w, batch_solve(blocks, cfg)));
      }
    }
    return CheckResult{0, {}, worst <= 1e-8, "max rel error " + detail::sci(worst) + " (tol 1e-8)"};
  });
}

// Criterion 2: P·Φ = I along 10⁴ updates, Φ from a shadow accumulator.
inline CheckResult sherman_morrison_consistency() {
  return detail::timed(2, "Sherman-Morrison consistency", 5000.0, [] {
    std::mt19937_64 rng(202);
    const RlsConfig cfg{0.999, 1.0, 8, 1};
    RlsState state = init_state(cfg);
    Matrix phi = Matrix::identity(cfg.input_dim);
    phi *= cfg.delta;
    double worst = 0.0;
    const Matrix eye = Matrix::identity(cfg.input_dim);
    for (std::size_t n = 0; n < 10000; ++n) {
      const Vector x = detail::random_vector(cfg.input_dim, rng);
      state = update_precision(state, x);
      phi *= cfg.beta;
      phi += outer(x, x);
      worst = std::max(worst, frobenius_norm(matmul(state.p_mat, phi) - eye));
    }
    return CheckResult{0, {}, worst <= 1e-8, "max |P*Phi - I|_F " + detail::sci(worst) + " (tol 1e-8)"};
  });
}

// Criterion 3: the gain vector equals xᵀ P_n with the updated P.
inline CheckResult gain_identity() {
  return detail::timed(3, "gain identity", 1000.0, [] {
    std::mt19937_64 rng(303);
    std::uniform_int_distribution<std::size_t> dim(1, 12), warm(0, 15);
    std::uniform_real_distribution<double> beta(0.9, 1.0), logdelta(-3.0, 0.0);
    double worst = 0.0;
    for (std::size_t i = 0; i < 1000; ++i) {
      const RlsConfig cfg{beta(rng), std::pow(10.0, logdelta(rng)), dim(rng), 1};
      RlsState state = init_state(cfg);
      for (std::size_t k = warm(rng); k > 0; --k) state = update_precision(state, detail::random_vector(cfg.input_dim, rng));
      const Vector x = detail::random_vector(cfg.input_dim, rng);
      const Vector k = gain_vector(state, x);
      const Vector xp = vecmat(x, update_precision(state, x).p_mat);
      for (std::size_t a = 0; a < k.size(); ++a) worst = std::max(worst, std::abs(k[a] - xp[a]));
    }
    return CheckResult{0, {}, worst <= 1e-10, "max |k - x'P| " + detail::sci(worst) + " (tol 1e-10)"};
  });
}

// Criterion 4: ‖ȳ − W x̄‖² ≤ (1/b)‖Y − X Wᵀ‖² on weighted random blocks.
inline CheckResult virtual_input_bound() {
  return detail::timed(4, "virtual-input bound", 2000.0, [] {
    std::mt19937_64 rng(404);
    std::uniform_int_distribution<std::size_t> bs(2, 32), dim(1, 8);
    std::uniform_real_distribution<double> wdist(0.0, 2.0);
    double worst = -1e300;  // max of lhs − rhs, normalized
    for (std::size_t i = 0; i < 1000; ++i) {
      const std::size_t b = bs(rng), p = dim(rng), q = dim(rng);
      SampleBlock blk{detail::random_matrix(b, p, rng), detail::random_matrix(b, q, rng), {}};
      if (i % 2) {
        blk.weights.resize(b);
        for (double& w : blk.weights) w = wdist(rng);
      }
      const Matrix w = detail::random_matrix(q, p, rng);
      auto [xm, ym] = block_virtual_input(blk);
      const double lhs = [&] {
        const Vector r = ym - matvec(w, xm);
        return dot(r, r);
      }();
      auto [xs, ys] = blk.scaled();
      const double rhs = [&] {
        const Matrix r = ys - matmul(xs, transpose(w));
        const double f = frobenius_norm(r);
        return f * f / static_cast<double>(b);
      }();
      worst = std::max(worst, (lhs - rhs) / std::max(1.0, rhs));
    }
    return CheckResult{0, {}, worst <= 1e-12, "max (lhs - rhs)/max(1, rhs) " + detail::sci(worst) + " (tol 1e-12)"};
  });
}

namespace detail {

inline MlpModel random_mlp(std::mt19937_64& rng, HeadKind head) {
  std::uniform_int_distribution<std::size_t> depth(2, 4), width(2, 6), act(0, 2);
  MlpModel m;
  m.head = head;
  std::size_t in = width(rng);
  const std::size_t layers = depth(rng);
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t out = width(rng);
    Activation a = Activation::identity();
    if (l + 1 < layers) {
      const std::size_t k = act(rng);
      a = k == 0 ? Activation::relu() : k == 1 ? Activation::leaky_relu() : Activation::identity();
    }
    m.layers.push_back({random_matrix(out, in, rng, 1.0 / std::sqrt(static_cast<double>(in))), a});
    in = out;
  }
  return m;
}

inline bool near_kink(const MlpModel& m, const ForwardCache& c) {
  for (std::size_t l = 0; l + 1 < m.layers.size(); ++l) {
    if (m.layers[l].activation.kind == ActivationKind::identity) continue;
    for (double v : c.pre_activations[l])
      if (std::abs(v) < 1e-3) return true;
  }
  return false;
}

}  // namespace detail

// Criterion 5: backward() against central finite differences of an
// independent loss evaluation, and the softmax head identity.
inline CheckResult mlp_gradient_checks() {
  return detail::timed(5, "MLP gradient checks", 10000.0, [] {
    std::mt19937_64 rng(505);
    const double h = 1e-5;
    double worst_se = 0.0, worst_ce = 0.0, worst_head = 0.0;
    for (std::size_t net = 0; net < 50;) {
      const HeadKind head = net % 2 ? HeadKind::cross_entropy_softmax : HeadKind::squared_error_identity;
      MlpModel m = detail::random_mlp(rng, head);
      const Vector x = detail::random_vector(m.input_dim(), rng);
      Vector y(m.output_dim());
      if (head == HeadKind::cross_entropy_softmax)
        y[std::uniform_int_distribution<std::size_t>(0, y.size() - 1)(rng)] = 1.0;
      else
        y = detail::random_vector(m.output_dim(), rng);
      auto [z, cache] = forward(m, x);
      if (detail::near_kink(m, cache)) continue;  // redraw away from ReLU kinks
      ++net;
      const Gradients g = backward(m, cache, y);

      if (head == HeadKind::cross_entropy_softmax) {
        double sum = 0.0;
        for (double v : z) sum += std::exp(v);
        for (std::size_t i = 0; i < z.size(); ++i)
          worst_head = std::max(worst_head, std::abs(g.head[i] - (std::exp(z[i]) / sum - y[i])));
      } else {
        for (std::size_t i = 0; i < z.size(); ++i)
          if (g.head[i] != z[i] - y[i]) worst_head = std::max(worst_head, 1.0);
      }

      double& worst = head == HeadKind::cross_entropy_softmax ? worst_ce : worst_se;
      for (std::size_t l = 0; l < m.layers.size(); ++l)
        for (std::size_t i = 0; i < m.layers[l].weight.size(); ++i) {
          MlpModel plus = m, minus = m;
          plus.layers[l].weight.span()[i] += h;
          minus.layers[l].weight.span()[i] -= h;
          const double fd =
              (detail::oracle_mlp_loss(plus, x, y) - detail::oracle_mlp_loss(minus, x, y)) / (2.0 * h);
          const double an = g.weights[l].span()[i];
          worst = std::max(worst, std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-4}));
        }
    }
    const bool ok = worst_se <= 1e-5 && worst_ce <= 1e-4 && worst_head <= 1e-10;
    return CheckResult{0, {}, ok,
                       "SE " + detail::sci(worst_se) + " (tol 1e-5), CE " + detail::sci(worst_ce) +
                           " (tol 1e-4), head " + detail::sci(worst_head) + " (tol 1e-10)"};
  });
}

// Criterion 6: im2col/GEMM forward and lowered loss against direct spatial
// convolution and the spatially weighted loss with Γ = √γ.
inline CheckResult conv_lowering() {
  return detail::timed(6, "conv lowering", 10000.0, [] {
    std::mt19937_64 rng(606);
    std::uniform_int_distribution<std::size_t> chan(1, 3), side(3, 9), ks(1, 5), stride(1, 2), pad(0, 2), count(1, 4);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double worst_fwd = 0.0, worst_loss = 0.0;
    for (std::size_t shape = 0; shape < 200; ++shape) {
      const std::size_t c = chan(rng), hgt = side(rng), wid = side(rng), p = pad(rng);
      const std::size_t kh = std::min(ks(rng), hgt + 2 * p), kw = std::min(ks(rng), wid + 2 * p);
      ConvLayer layer{FeatureMap(c, kh, kw), stride(rng), p};
      for (double& v : layer.kernel.data) v = std::normal_distribution<double>(0.0, 1.0)(rng);
      const double lambda = unif(rng);
      SampleSet set(8);
      double spatial = 0.0;
      for (std::size_t s = count(rng); s > 0; --s) {
        WeightedSample ws;
        ws.features = FeatureMap(c, hgt, wid);
        for (double& v : ws.features.data) v = std::normal_distribution<double>(0.0, 1.0)(rng);
        const Matrix direct = detail::direct_conv(ws.features, layer.kernel, layer.stride, layer.padding);
        const Matrix lowered = conv_forward(ws.features, layer);
        worst_fwd = std::max(worst_fwd, max_abs((lowered - direct).span()) / std::max(1.0, max_abs(direct.span())));
        ws.target = detail::random_matrix(direct.rows(), direct.cols(), rng);
        ws.gamma = Matrix(direct.rows(), direct.cols());
        for (double& g : ws.gamma.span()) g = unif(rng);
        const double weight = 0.5 + unif(rng);
        for (std::size_t k = 0; k < direct.size(); ++k) {
          const double gam = std::sqrt(weight * ws.gamma.span()[k]);
          const double r = gam * (ws.target.span()[k] - direct.span()[k]);
          spatial += r * r;
        }
        set.insert(std::move(ws), weight);
      }
      double wn = 0.0;
      for (double v : layer.kernel.data) wn += v * v;
      spatial += 0.5 * lambda * wn;
      const double lowered_loss = conv_loss(set, layer, lambda);
      worst_loss = std::max(worst_loss, std::abs(lowered_loss - spatial) / std::max(1.0, spatial));
    }
    const bool ok = worst_fwd <= 1e-10 && worst_loss <= 1e-10;
    return CheckResult{0, {}, ok,
                       "forward " + detail::sci(worst_fwd) + ", loss " + detail::sci(worst_loss) + " (tol 1e-10)"};
  });
}

// Criterion 7: at a constructed zero-gradient point of a 2-layer ReLU net
// the first layer satisfies W u uᵀ = y' uᵀ with y' = z − (WrᵀWr)⁻¹ diag(f') δ.
inline CheckResult stationary_point_normal_equations() {
  return detail::timed(7, "stationary-point normal equations", 5000.0, [] {
    std::mt19937_64 rng(707);
    std::uniform_int_distribution<std::size_t> hid(2, 5), extra(1, 3), in_dim(2, 6);
    std::uniform_real_distribution<double> pos(0.5, 2.0);
    double worst_grad = 0.0, worst_normal = 0.0, worst_subst = 0.0;
    for (std::size_t inst = 0; inst < 20; ++inst) {
      const std::size_t h = hid(rng), q = h + extra(rng), p = in_dim(rng);
      const Matrix w2 = detail::random_matrix(q, h, rng);
      Vector v(h);
      for (double& e : v) e = pos(rng);
      // r = (I − W2 (W2ᵀW2)⁻¹ W2ᵀ) g lies outside range(W2).
      const Vector gvec = detail::random_vector(q, rng);
      const Matrix gram = matmul(transpose(w2), w2);
      const Matrix coef = spd_solve(gram, Matrix::column_vector(vecmat(gvec, w2)));
      Vector r = gvec - matvec(w2, Vector(coef.values()));
      const Vector y = matvec(w2, v) + r;
      // W1 = v xᵀ/|x|² + R (I − x xᵀ/|x|²), so W1 x = v.
      const Vector x = detail::random_vector(p, rng);
      const double xx = dot(x, x);
      const Matrix rmat = detail::random_matrix(h, p, rng);
      Matrix proj = Matrix::identity(p) - (1.0 / xx) * outer(x, x);
      Matrix w1 = (1.0 / xx) * outer(v, x) + matmul(rmat, proj);

      MlpModel m{{{w1, Activation::relu()}, {w2, Activation::identity()}}, HeadKind::squared_error_identity};
      auto [z, cache] = forward(m, x);
      const Gradients g = backward(m, cache, y);
      worst_grad = std::max(worst_grad, max_abs(g.weights[0].span()));

      // Wr = W2 diag(f'); δ = W2ᵀ(z − y) is the gradient reaching layer 1's output.
      const Vector& z1 = cache.pre_activations[0];
      Vector fprime(h);
      for (std::size_t i = 0; i < h; ++i) fprime[i] = m.layers[0].activation.derivative(z1[i]);
      Matrix wr = w2;
      for (std::size_t a = 0; a < q; ++a)
        for (std::size_t b = 0; b < h; ++b) wr(a, b) *= fprime[b];
      Vector scaled_delta = vecmat(g.head, w2);
      for (std::size_t i = 0; i < h; ++i) scaled_delta[i] *= fprime[i];
      const Matrix wrtwr = matmul(transpose(wr), wr);
      const Vector correction(spd_solve(wrtwr, Matrix::column_vector(scaled_delta)).values());
      const Vector target = z1 - correction;
      const Vector& u = cache.inputs[0];
      const Matrix lhs = matmul(matmul(w1, Matrix::column_vector(u)), Matrix::row_vector(u));
      const Matrix rhs = outer(target, u);
      worst_normal = std::max(worst_normal, max_abs((lhs - rhs).span()) / std::max(1.0, max_abs(rhs.span())));
      // The substitution step: (WrᵀWr)⁻¹ Wrᵀ y equals the layer target.
      const Vector ls(spd_solve(wrtwr, Matrix::column_vector(vecmat(y, wr))).values());
      worst_subst = std::max(worst_subst, max_abs((ls - target).span()) / std::max(1.0, max_abs(target.span())));
    }
    const bool ok = worst_grad <= 1e-8 && worst_normal <= 1e-8 && worst_subst <= 1e-8;
    return CheckResult{0, {}, ok,
                       "grad " + detail::sci(worst_grad) + ", normal eq " + detail::sci(worst_normal) +
                           ", substitution " + detail::sci(worst_subst) + " (tol 1e-8)"};
  });
}

// Criterion 8: the canonical paired retention experiment.
inline CheckResult retention_experiment(std::size_t threads = 0) {
  return detail::timed(8, "memory-retention experiment", 60000.0, [threads] {
    const BenchConfig cfg = parse_bench_config(std::string(kCanonicalConfig));
    std::size_t rls = cfg.learners.size(), bgd = cfg.learners.size();
    for (std::size_t i = 0; i < cfg.learners.size(); ++i) {
      if (cfg.learners[i].kind == LearnerKind::rls_precond) rls = i;
      if (cfg.learners[i].kind == LearnerKind::plain_bgd) bgd = i;
    }
    if (rls == cfg.learners.size() || bgd == cfg.learners.size())
      return CheckResult{0, {}, false, "canonical config lacks rls_precond or plain_bgd"};
    CompareOptions opts{cfg.seeds, threads ? threads : std::max(1u, std::thread::hardware_concurrency()),
                        {cfg.window, false}};
    const ComparisonSummary s = compare_retention(cfg.scenario, cfg.learners, opts);
    const double win = s.win_rate[rls][bgd];
    const double ratio = s.learners[rls].mean_final_adaptation / s.learners[bgd].mean_final_adaptation;
    const bool ok = win >= 0.9 && ratio <= 2.0;
    char buf[160];
    std::snprintf(buf, sizeof buf, "win rate %.2f over %zu seeds (need >= 0.90), adaptation ratio %.3f (need <= 2)",
                  win, cfg.seeds, ratio);
    return CheckResult{0, {}, ok, buf};
  });
}

// Scripted MLP session: every branch of the controller, with the trace
// written out by hand.
inline constexpr const char* kSessionScript = R"(# t score [frame]
1 0.1
2 0.9 A
3 0.2
4 0.8 B
5 0.9 C
6 0.1
7 0.4
10 0.7
15 0.6
)";

inline constexpr const char* kSessionExpectedTrace = R"(t=1 backup
t=1 skipped
t=2 append 2
t=3 occasional_update 3
t=4 append 4
t=5 append 5
t=5 evict 2
t=5 restore
t=5 backup_cleared
t=5 regular_update 2
t=6 backup
t=6 occasional_update 3
t=7 occasional_update 3
t=10 restore
t=10 backup_cleared
t=10 regular_update 2
t=15 regular_update 2
)";

inline constexpr const char* kConvScript = R"(# t hard_negative [sample]
1 0
2 0 S
3 0 S
4 0 S
5 0 S
10 1
21 0 S
22 0
30 1
41 0
61 1
)";

inline constexpr const char* kConvExpectedTrace = R"(t=1 skipped
t=2 insert 2
t=3 insert 3
t=4 insert 4
t=5 insert 5
t=5 evict 2
t=10 update_hard_negative 3
t=21 insert 21
t=21 evict 3
t=21 update_scheduled 3
t=30 update_hard_negative 3
t=41 update_scheduled 3
t=61 update_scheduled 3
)";

struct ReplayOutcome {
  std::string session_trace;
  std::string conv_trace;
  bool restore_matches_backup = true;  // model at restore equals the model backed up
  bool precision_frozen_during_occasional = true;
  std::size_t conv_precision_steps = 0;
};

inline ReplayOutcome replay_scripts() {
  std::mt19937_64 rng(909);
  ReplayOutcome out;

  MlpModel model{{{detail::random_matrix(4, 3, rng, 0.5), Activation::relu()},
                  {detail::random_matrix(2, 4, rng, 0.5), Activation::identity()}},
                 HeadKind::squared_error_identity};
  const LayerRlsBank bank = make_layer_bank(model, 1.0, {1e-2, 0.0});
  std::map<std::string, SampleBlock> frames;
  for (const char* name : {"A", "B", "C"})
    frames[name] = SampleBlock{detail::random_matrix(3, 3, rng), detail::random_matrix(3, 2, rng), {}};
  std::istringstream session_in(kSessionScript);
  const auto events = to_session_events(parse_session_records(session_in), frames);
  SessionConfig cfg;
  cfg.memory_capacity = 2;
  cfg.regular_period = 5;
  cfg.score_threshold = 0.5;
  cfg.batch_size = 4;
  cfg.regular_cfg = {1e-2, 2, 0.0};
  cfg.occasional_cfg = {1e-2, 3, 0.0};
  cfg.seed = 7;

  std::optional<MlpModel> backed_up;
  const auto observer = [&](const AuditEntry& e, const MlpModel& m, const LayerRlsBank& b) {
    if (e.kind == AuditKind::backup) backed_up = m;
    if (e.kind == AuditKind::restore && backed_up) {
      for (std::size_t l = 0; l < m.layers.size(); ++l)
        if (!(m.layers[l].weight == backed_up->layers[l].weight)) out.restore_matches_backup = false;
    }
    if (e.kind == AuditKind::occasional_update && e.t == 3)
      for (std::size_t l = 0; l < b.states.size(); ++l)
        if (!(b.states[l].p_mat == bank.states[l].p_mat)) out.precision_frozen_during_occasional = false;
  };
  out.session_trace = format_audit_log(run_session(model, bank, events, cfg, observer).log);

  WeightedSample s;
  s.features = FeatureMap(1, 5, 5);
  for (double& v : s.features.data) v = std::normal_distribution<double>(0.0, 1.0)(rng);
  s.target = detail::random_matrix(3, 3, rng);
  s.gamma = Matrix(3, 3, 1.0);
  ConvLayer layer{FeatureMap(1, 3, 3, 0.1), 1, 0};
  std::istringstream conv_in(kConvScript);
  const auto conv_events = to_conv_events(parse_conv_records(conv_in), {{"S", s}});
  ConvSessionConfig ccfg;
  ccfg.set_capacity = 3;
  const auto cres = run_conv_session(layer, ConvRlsState::init(RlsConfig{1.0, kDefaultConvDelta, 9, 1}),
                                     conv_events, ccfg);
  out.conv_trace = format_audit_log(cres.log);
  out.conv_precision_steps = cres.state.step();
  return out;
}

// Criterion 9: scripted session replays against hand-written traces.
inline CheckResult algorithm_replays() {
  return detail::timed(9, "algorithm fidelity replays", 2000.0, [] {
    const ReplayOutcome r = replay_scripts();
    std::string why;
    if (r.session_trace != kSessionExpectedTrace) why += " session trace differs;";
    if (r.conv_trace != kConvExpectedTrace) why += " conv trace differs;";
    if (!r.restore_matches_backup) why += " restore did not reinstate the backup;";
    if (!r.precision_frozen_during_occasional) why += " occasional update moved P;";
    if (r.conv_precision_steps != 5) why += " conv P advanced " + std::to_string(r.conv_precision_steps) + " times;";
    return CheckResult{0, {}, why.empty(), why.empty() ? "MLP and conv audit logs match expected traces" : why};
  });
}

// Criteria 1-9 in order.
inline std::vector<CheckResult> run_all(std::size_t threads = 0) {
  return {recursive_batch_equivalence(), sherman_morrison_consistency(), gain_identity(),
          virtual_input_bound(),         mlp_gradient_checks(),          conv_lowering(),
          stationary_point_normal_equations(), retention_experiment(threads), algorithm_replays()};
}

inline std::string format_result(const CheckResult& r, bool with_timing) {
  std::string line = std::string(r.passed ? "PASS" : "FAIL") + "  [" + std::to_string(r.criterion) + "] " + r.name +
                     ": " + r.detail;
  if (with_timing) {
    char buf[64];
    std::snprintf(buf, sizeof buf, " (%.0f ms, budget %.0f ms)", r.elapsed_ms, r.budget_ms);
    line += buf;
  }
  return line;
}

}  // namespace rlsol::verify
