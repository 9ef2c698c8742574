#include <gtest/gtest.h>

#include "test_support.hpp"

namespace rlsol {
namespace {

using testing::random_block;
using testing::random_matrix;
using testing::rel_frobenius;

RlsConfig config(std::size_t p, std::size_t q, double beta = 1.0, double delta = 1.0) {
  return RlsConfig{beta, delta, p, q};
}

TEST(SlidingWindow, KeepsNewestBlocksInOrder) {
  for (std::size_t cap = 1; cap <= 5; ++cap) {
    SlidingWindow win(cap);
    for (std::size_t i = 0; i <= cap; ++i) {
      auto evicted = win.push({Matrix(1, 1, static_cast<double>(i)), Matrix(1, 1), {}});
      EXPECT_EQ(evicted.has_value(), i == cap);
      if (evicted) {
        EXPECT_EQ(evicted->x(0, 0), 0.0);
      }
    }
    ASSERT_EQ(win.size(), cap);
    for (std::size_t i = 0; i < cap; ++i) EXPECT_EQ(win.blocks()[i].x(0, 0), static_cast<double>(i + 1));
  }
  EXPECT_THROW(SlidingWindow(0), ConfigError);
}

TEST(GdConfig, Validation) {
  EXPECT_THROW((GdConfig{0.0, 5, 0.0}.validate()), ConfigError);
  EXPECT_THROW((GdConfig{0.1, 0, 0.0}.validate()), ConfigError);
  EXPECT_THROW((GdConfig{0.1, 5, -1.0}.validate()), ConfigError);
  EXPECT_DOUBLE_EQ(kShortStreamLearningRate, 3e-2);
  EXPECT_DOUBLE_EQ(kLongStreamLearningRate, 3e-3);
}

TEST(BgdUpdate, OneStepHandValue) {
  SlidingWindow win(1);
  win.push({Matrix{{1, 0}}, Matrix{{1}}, {}});
  const Matrix w = bgd_update(Matrix(1, 2), win, {0.1, 1, 0.0}, config(2, 1));
  EXPECT_DOUBLE_EQ(w(0, 0), 0.1);
  EXPECT_DOUBLE_EQ(w(0, 1), 0.0);
}

TEST(BgdUpdate, StationaryAtBatchSolution) {
  std::mt19937_64 rng(20);
  const RlsConfig cfg = config(4, 2, 0.9, 0.5);
  SlidingWindow win(3);
  for (int i = 0; i < 3; ++i) win.push(random_block(4, 4, 2, rng));
  const Matrix w = batch_solve(win.blocks(), cfg);
  const Matrix next = bgd_update(w, win, {0.01, 1, 0.0}, cfg);
  EXPECT_LE(max_abs((next - w).span()), 1e-10);
}

TEST(BgdUpdate, ConvergesToBatchSolution) {
  std::mt19937_64 rng(21);
  const RlsConfig cfg = config(5, 1);
  SlidingWindow win(3);
  for (int i = 0; i < 3; ++i) win.push(random_block(4, 5, 1, rng));
  const Matrix w = bgd_update(Matrix(1, 5), win, {0.01, 10000, 0.0}, cfg);
  EXPECT_LE(max_abs((w - batch_solve(win.blocks(), cfg)).span()), 1e-6);
}

TEST(BgdUpdate, CostNeverRisesBelowStabilityLimit) {
  std::mt19937_64 rng(22);
  const RlsConfig cfg = config(4, 2, 0.95, 0.1);
  SlidingWindow win(4);
  for (int i = 0; i < 4; ++i) win.push(random_block(3, 4, 2, rng));
  const CorrelationPair c = accumulate_correlation(win.blocks(), cfg);
  // Power iteration for the largest eigenvalue of Φ.
  Vector v(4, 1.0);
  double lambda = 0.0;
  for (int i = 0; i < 200; ++i) {
    v = matvec(c.phi_mat, v);
    lambda = norm(v);
    v *= 1.0 / lambda;
  }
  const GdConfig gd{0.9 / lambda, 1, 0.0};
  Matrix w = random_matrix(2, 4, rng);
  double last = lse_cost(w, win.blocks(), cfg);
  for (int it = 0; it < 100; ++it) {
    w = bgd_update(w, win, gd, cfg);
    const double cost = lse_cost(w, win.blocks(), cfg);
    EXPECT_LE(cost, last + 1e-12);
    last = cost;
  }
}

TEST(BgdUpdate, DivergenceRaises) {
  SlidingWindow win(1);
  win.push({Matrix{{10, 0}}, Matrix{{1}}, {}});
  EXPECT_THROW(bgd_update(Matrix(1, 2), win, {1.0, 10, 0.0}, config(2, 1)), DivergenceError);
}

TEST(BgdUpdate, EmptyWindowIsInputError) {
  EXPECT_THROW(bgd_update(Matrix(1, 2), SlidingWindow(2), {}, config(2, 1)), InputError);
}

TEST(MbsgdUpdate, FullBatchMatchesMeanGradientDescent) {
  std::mt19937_64 rng(23);
  SlidingWindow win(2);
  win.push(random_block(3, 4, 1, rng));
  win.push(random_block(3, 4, 1, rng));
  const GdConfig gd{0.05, 7, 0.0};
  const Matrix w0 = random_matrix(1, 4, rng);
  const Matrix sgd = mbsgd_update(w0, win, gd, 6, 99);

  // Full-batch GD on the mean squared-error gradient over the stacked window.
  SampleBlock all{Matrix(6, 4), Matrix(6, 1), {}};
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t r = 0; r < 3; ++r) {
      std::ranges::copy(win.blocks()[b].x.row(r), all.x.row(3 * b + r).begin());
      all.y(3 * b + r, 0) = win.blocks()[b].y(r, 0);
    }
  Matrix w = w0;
  for (int it = 0; it < 7; ++it) w -= gd.learning_rate * mean_block_gradient(w, all);
  EXPECT_LE(rel_frobenius(sgd, w), 1e-12);
}

TEST(MbsgdUpdate, PureShrinkageWithoutDataGradient) {
  const Matrix w0{{0.5, -2.0}};
  SlidingWindow win(1);
  const Matrix x{{1, 0}, {0, 1}, {1, 1}};
  win.push({x, matmul(x, transpose(w0)), {}});
  const Matrix w = mbsgd_update(w0, win, {0.1, 1, 0.5}, 2, 3);
  EXPECT_DOUBLE_EQ(w(0, 0), 0.5 * 0.95);
  EXPECT_DOUBLE_EQ(w(0, 1), -2.0 * 0.95);
}

TEST(MbsgdUpdate, DeterministicForFixedSeed) {
  std::mt19937_64 rng(24);
  SlidingWindow win(3);
  for (int i = 0; i < 3; ++i) win.push(random_block(4, 3, 2, rng));
  const Matrix w0 = random_matrix(2, 3, rng);
  const Matrix a = mbsgd_update(w0, win, {0.05, 9, 0.01}, 5, 1234);
  const Matrix b = mbsgd_update(w0, win, {0.05, 9, 0.01}, 5, 1234);
  const Matrix c = mbsgd_update(w0, win, {0.05, 9, 0.01}, 5, 1235);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_NE(a.values(), c.values());
}

TEST(MbsgdUpdate, OversizedBatchIsConfigError) {
  SlidingWindow win(1);
  win.push({Matrix(2, 2), Matrix(2, 1), {}});
  EXPECT_THROW(mbsgd_update(Matrix(1, 2), win, {}, 3, 0), ConfigError);
  EXPECT_THROW(mbsgd_update(Matrix(1, 2), win, {}, 0, 0), ConfigError);
}

TEST(PrecondGdIterate, Examples) {
  const Matrix w{{0.3, -0.7}};
  const Matrix g{{1, 2}};
  const Matrix plain = precond_gd_iterate(w, g, Matrix::identity(2), 0.1);
  EXPECT_EQ(plain.values(), (w - 0.1 * g).values());
  EXPECT_EQ(precond_gd_iterate(w, Matrix(1, 2), Matrix::identity(2), 0.1).values(), w.values());
  const Matrix hand = precond_gd_iterate(Matrix(1, 2), Matrix{{1, 1}}, Matrix{{2, 0}, {0, 1}}, 0.1);
  EXPECT_DOUBLE_EQ(hand(0, 0), -0.2);
  EXPECT_DOUBLE_EQ(hand(0, 1), -0.1);
  EXPECT_THROW(precond_gd_iterate(w, Matrix(2, 2), Matrix::identity(2), 0.1), DimensionError);
  EXPECT_THROW(precond_gd_iterate(w, g, Matrix::identity(3), 0.1), DimensionError);
}

TEST(PrecondUpdateStage, UnitStepReproducesRlsStep) {
  std::mt19937_64 rng(25);
  const RlsConfig cfg = config(5, 2, 0.95, 0.3);
  std::vector<SampleBlock> history;
  RlsState s = init_state(cfg);
  Matrix w(2, 5);
  for (int n = 0; n < 30; ++n) {
    const SampleBlock blk = random_block(1, 5, 2, rng);
    history.push_back(blk);
    const auto [wr, sr] = rls_step(s, w, blk.x.row_copy(0), blk.y.row_copy(0));
    const auto [wp, sp] = precond_update_stage(w, blk, s, {1.0, 1, 0.0});
    ASSERT_LE(rel_frobenius(wp, wr), 1e-12) << "n " << n;
    ASSERT_EQ(sp.p_mat.values(), sr.p_mat.values());
    w = wr;
    s = sr;
    ASSERT_LE(rel_frobenius(w, batch_solve(history, cfg)), 1e-8);
  }
}

TEST(PrecondUpdateStage, ZeroResidualOnlyDecays) {
  const Matrix w0{{1.0, 2.0}};
  const Matrix x{{1, 0}, {0, 1}};
  const SampleBlock blk{x, matmul(x, transpose(w0)), {}};
  const RlsState s = init_state(config(2, 1));
  const auto [w, next] = precond_update_stage(w0, blk, s, {0.1, 1, 0.0});
  EXPECT_EQ(w.values(), w0.values());
  EXPECT_EQ(next.step, 1u);

  const double lambda = 0.5, eta = 0.1;
  const auto [wd, nd] = precond_update_stage(w0, blk, s, {eta, 1, lambda});
  const Matrix expected = matmul(w0, Matrix::identity(2) - eta * lambda * nd.p_mat);
  EXPECT_LE(rel_frobenius(wd, expected), 1e-15);
}

TEST(PrecondUpdateStage, FixedPointOfVirtualSampleIsStable) {
  std::mt19937_64 rng(26);
  const SampleBlock raw = random_block(4, 3, 1, rng);
  const auto [xm, ym] = block_virtual_input(raw);
  const Matrix w0 = random_matrix(1, 3, rng);
  // Shift targets so the virtual residual vanishes at w0.
  SampleBlock blk = raw;
  const double shift = matvec(w0, xm)[0] - ym[0];
  for (std::size_t j = 0; j < 4; ++j) blk.y(j, 0) += shift;
  const auto [w, s] =
      precond_update_stage(w0, blk, init_state(config(3, 1)), {0.5, 5, 0.0}, GradientSource::virtual_sample);
  EXPECT_LE(max_abs((w - w0).span()), 1e-12);
}

TEST(PrecondUpdateStage, AdvancesPrecisionOncePerBlock) {
  std::mt19937_64 rng(27);
  const SampleBlock blk = random_block(6, 3, 1, rng);
  const RlsState s = init_state(config(3, 1));
  const auto [w, next] = precond_update_stage(Matrix(1, 3), blk, s, {0.1, 9, 0.0});
  EXPECT_EQ(next.step, 1u);
  EXPECT_EQ(next.p_mat.values(), update_precision(s, block_virtual_input(blk).first).p_mat.values());
}

TEST(EmaCombine, Examples) {
  const Matrix a{{1, -3}}, b{{2, 5}};
  EXPECT_EQ(ema_combine(a, b, {1.0}).values(), b.values());
  EXPECT_EQ(ema_combine(a, b, {0.0}).values(), a.values());
  EXPECT_EQ(ema_combine(Matrix{{0}}, Matrix{{2}}, {0.5})(0, 0), 1.0);
  EXPECT_THROW(ema_combine(a, Matrix(2, 1), {0.5}), DimensionError);
  EXPECT_THROW(ema_combine(a, b, {1.5}), ConfigError);
}

TEST(EmaCombine, StaysBetweenEndpoints) {
  std::mt19937_64 rng(28);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix a = random_matrix(3, 3, rng), b = random_matrix(3, 3, rng);
    const Matrix m = ema_combine(a, b, {u(rng)});
    for (std::size_t i = 0; i < m.size(); ++i) {
      EXPECT_GE(m.span()[i], std::min(a.span()[i], b.span()[i]));
      EXPECT_LE(m.span()[i], std::max(a.span()[i], b.span()[i]));
    }
  }
}

TEST(EmaCombine, NamedPresets) {
  EXPECT_EQ(EmaConfig::slow().alpha, 0.01);
  EXPECT_EQ(EmaConfig::moderate().alpha, 0.5);
  EXPECT_EQ(EmaConfig::fast().alpha, 0.99);
}

}  // namespace
}  // namespace rlsol
