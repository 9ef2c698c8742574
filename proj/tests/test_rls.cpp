#include <gtest/gtest.h>

#include <limits>

#include "test_support.hpp"

namespace rlsol {
namespace {

using testing::random_block;
using testing::random_matrix;
using testing::random_vector;
using testing::rel_frobenius;

RlsConfig config(std::size_t p, std::size_t q, double beta = 1.0, double delta = 1.0) {
  return RlsConfig{beta, delta, p, q};
}

TEST(InitState, PrecisionIsScaledIdentity) {
  EXPECT_EQ(init_state(config(2, 1, 1.0, 0.5)).p_mat.values(), (Matrix{{2, 0}, {0, 2}}).values());
  EXPECT_EQ(init_state(config(1, 1)).p_mat.values(), (Matrix{{1}}).values());
  const RlsState s = init_state(config(3, 1, 1.0, 5e-4));
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(s.p_mat(i, j), i == j ? 2000.0 : 0.0);
  EXPECT_EQ(s.step, 0u);
}

TEST(InitState, RejectsBadConfig) {
  EXPECT_THROW(init_state(config(2, 1, 1.0, 0.0)), ConfigError);
  EXPECT_THROW(init_state(config(2, 1, 1.0, -1.0)), ConfigError);
  EXPECT_THROW(init_state(config(2, 1, 0.0, 1.0)), ConfigError);
  EXPECT_THROW(init_state(config(2, 1, 1.5, 1.0)), ConfigError);
  EXPECT_THROW(init_state(config(0, 1)), ConfigError);
}

TEST(BatchSolve, SingleBlockHandValue) {
  const std::vector<SampleBlock> blocks = {{Matrix{{1, 0}}, Matrix{{1}}, {}}};
  const Matrix w = batch_solve(blocks, config(2, 1));
  EXPECT_DOUBLE_EQ(w(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(w(0, 1), 0.0);
}

TEST(BatchSolve, ZeroTargetsGiveZeroWeights) {
  std::mt19937_64 rng(7);
  std::vector<SampleBlock> blocks;
  for (int i = 0; i < 5; ++i) blocks.push_back({random_matrix(3, 4, rng), Matrix(3, 2), {}});
  const Matrix w = batch_solve(blocks, config(4, 2, 0.9, 0.1));
  for (double v : w.span()) EXPECT_EQ(v, 0.0);
}

TEST(BatchSolve, MinimizesWindowedCost) {
  std::mt19937_64 rng(8);
  const RlsConfig cfg = config(4, 2, 0.95, 0.1);
  std::vector<SampleBlock> blocks;
  for (int i = 0; i < 50; ++i) blocks.push_back(random_block(1, 4, 2, rng));
  const Matrix w = batch_solve(blocks, cfg);
  const double best = lse_cost(w, blocks, cfg);
  for (int d = 0; d < 100; ++d) {
    const Matrix perturbed = w + 1e-3 * random_matrix(2, 4, rng);
    EXPECT_GT(lse_cost(perturbed, blocks, cfg), best);
  }
}

TEST(BatchSolve, UnitBetaIsRidgeRegression) {
  std::mt19937_64 rng(9);
  const double delta = 0.3;
  std::vector<SampleBlock> blocks;
  for (int i = 0; i < 12; ++i) blocks.push_back(random_block(1, 5, 2, rng));
  Matrix x(12, 5), y(12, 2);
  for (std::size_t i = 0; i < 12; ++i) {
    std::ranges::copy(blocks[i].x.row(0), x.row(i).begin());
    std::ranges::copy(blocks[i].y.row(0), y.row(i).begin());
  }
  const Matrix xt = transpose(x);
  const Matrix ridge = transpose(spd_solve(matmul(xt, x) + delta * Matrix::identity(5), matmul(xt, y)));
  EXPECT_LE(rel_frobenius(batch_solve(blocks, config(5, 2, 1.0, delta)), ridge), 1e-12);
}

TEST(BatchSolve, RejectsMismatchedBlock) {
  const std::vector<SampleBlock> blocks = {{Matrix(1, 3), Matrix(1, 1), {}}};
  EXPECT_THROW(batch_solve(blocks, config(2, 1)), DimensionError);
  EXPECT_THROW(batch_solve(std::vector<SampleBlock>{}, config(2, 1)), InputError);
}

TEST(UpdatePrecision, HandValue) {
  const RlsState next = update_precision(init_state(config(2, 1)), Vector{1, 0});
  EXPECT_DOUBLE_EQ(next.p_mat(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(next.p_mat(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(next.p_mat(0, 1), 0.0);
  EXPECT_EQ(next.step, 1u);
}

TEST(UpdatePrecision, ZeroInputLeavesPrecision) {
  std::mt19937_64 rng(10);
  RlsState s = init_state(config(3, 1));
  for (int i = 0; i < 5; ++i) s = update_precision(s, random_vector(3, rng));
  const RlsState next = update_precision(s, Vector(3));
  EXPECT_EQ(next.p_mat.values(), s.p_mat.values());
}

TEST(UpdatePrecision, TracksShadowInverse) {
  std::mt19937_64 rng(11);
  for (double beta : {0.9, 0.99, 1.0}) {
    RlsState s = init_state(config(6, 1, beta, 0.5));
    Matrix phi = 0.5 * Matrix::identity(6);
    for (int n = 0; n < 300; ++n) {
      const Vector x = random_vector(6, rng);
      s = update_precision(s, x);
      phi = beta * phi + outer(x, x);
      ASSERT_LE(frobenius_norm(matmul(s.p_mat, phi) - Matrix::identity(6)), 1e-8) << "beta " << beta << " n " << n;
    }
  }
}

TEST(UpdatePrecision, StaysSymmetricOverLongRuns) {
  std::mt19937_64 rng(12);
  RlsState s = init_state(config(8, 1, 0.999, 1.0));
  for (int n = 0; n < 10000; ++n) s = update_precision(s, random_vector(8, rng));
  EXPECT_LE(asymmetry(s.p_mat), 1e-8);
  EXPECT_EQ(s.step, 10000u);
}

TEST(UpdatePrecision, NonFiniteInputIsInputError) {
  const RlsState s = init_state(config(2, 1));
  EXPECT_THROW(update_precision(s, Vector{std::numeric_limits<double>::quiet_NaN(), 0}), InputError);
  EXPECT_THROW(update_precision(s, Vector{1, 2, 3}), DimensionError);
}

TEST(UpdatePrecision, LostDefinitenessCarriesStep) {
  RlsState s = init_state(config(2, 1));
  s.step = 41;
  s.p_mat = Matrix{{-1, 0}, {0, 1}};
  try {
    update_precision(s, Vector{0, 1});
    FAIL() << "expected DegeneracyError";
  } catch (const DegeneracyError& e) {
    EXPECT_EQ(e.step(), 42u);
  }
}

TEST(GainVector, HandValueAndZeroInput) {
  const RlsState s = init_state(config(2, 1));
  const Vector k = gain_vector(s, Vector{1, 0});
  EXPECT_DOUBLE_EQ(k[0], 0.5);
  EXPECT_DOUBLE_EQ(k[1], 0.0);
  const Vector z = gain_vector(s, Vector(2));
  EXPECT_EQ(z[0], 0.0);
  EXPECT_EQ(z[1], 0.0);
}

TEST(GainVector, EqualsUpdatedPrecisionTimesInput) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t p = 1 + trial % 7;
    RlsState s = init_state(config(p, 1, trial % 2 ? 0.95 : 1.0, 0.5));
    for (int i = 0; i < 3; ++i) s = update_precision(s, random_vector(p, rng));
    const Vector x = random_vector(p, rng);
    const Vector k = gain_vector(s, x);
    const Vector expected = vecmat(x, update_precision(s, x).p_mat);
    for (std::size_t a = 0; a < p; ++a) EXPECT_NEAR(k[a], expected[a], 1e-10 * std::max(1.0, std::abs(expected[a])));
  }
}

TEST(RlsStep, HandValue) {
  const auto [w, s] = rls_step(init_state(config(2, 1)), Matrix(1, 2), Vector{1, 0}, Vector{1});
  EXPECT_DOUBLE_EQ(w(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(w(0, 1), 0.0);
  EXPECT_EQ(s.step, 1u);
}

TEST(RlsStep, ZeroResidualKeepsWeights) {
  const Matrix w0{{0.5, -1.0}};
  const RlsState s0 = init_state(config(2, 1));
  const Vector x{2, 1};
  const auto [w, s] = rls_step(s0, w0, x, matvec(w0, x));
  EXPECT_EQ(w.values(), w0.values());
  EXPECT_NE(s.p_mat.values(), s0.p_mat.values());
}

TEST(RlsStep, RejectsMismatchedShapes) {
  const RlsState s = init_state(config(2, 1));
  EXPECT_THROW(rls_step(s, Matrix(2, 2), Vector{1, 0}, Vector{1}), DimensionError);
  EXPECT_THROW(rls_step(s, Matrix(1, 2), Vector{1, 0}, Vector{1, 2}), DimensionError);
}

// Every prefix of the stream must match the batch solution of that prefix.
TEST(RlsStep, ReproducesBatchSolutionAtEveryStep) {
  std::mt19937_64 rng(14);
  for (double beta : {0.9, 1.0})
    for (double delta : {1e-3, 1.0})
      for (std::size_t q : {1u, 3u}) {
        const RlsConfig cfg = config(10, q, beta, delta);
        std::vector<SampleBlock> blocks;
        RlsState s = init_state(cfg);
        Matrix w(q, 10);
        for (int n = 0; n < 200; ++n) {
          blocks.push_back(random_block(1, 10, q, rng));
          std::tie(w, s) = rls_step(s, w, blocks.back().x.row_copy(0), blocks.back().y.row_copy(0));
          ASSERT_LE(rel_frobenius(w, batch_solve(blocks, cfg)), 1e-8)
              << "beta " << beta << " delta " << delta << " n " << n;
        }
      }
}

TEST(BlockVirtualInput, ArithmeticMean) {
  const auto [xm, ym] = block_virtual_input({Matrix{{1, 0}, {0, 1}}, Matrix{{1}, {0}}, {}});
  EXPECT_EQ(xm, (Vector{0.5, 0.5}));
  EXPECT_EQ(ym, (Vector{0.5}));
}

TEST(BlockVirtualInput, SingletonAndWeights) {
  const auto [xm, ym] = block_virtual_input({Matrix{{3, -1}}, Matrix{{2}}, {}});
  EXPECT_EQ(xm, (Vector{3, -1}));
  EXPECT_EQ(ym, (Vector{2}));
  const auto [xw, yw] = block_virtual_input({Matrix{{1}, {1}}, Matrix{{1}, {1}}, {4.0, 0.0}});
  EXPECT_DOUBLE_EQ(xw[0], 1.0);
  EXPECT_DOUBLE_EQ(yw[0], 1.0);
  EXPECT_THROW(block_virtual_input({Matrix(0, 2), Matrix(0, 1), {}}), InputError);
  EXPECT_THROW(block_virtual_input({Matrix(1, 2), Matrix(1, 1), {-1.0}}), InputError);
}

TEST(BlockVirtualInput, ResidualBound) {
  std::mt19937_64 rng(15);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t b = 2 + trial % 9;
    SampleBlock blk = random_block(b, 4, 2, rng);
    if (trial % 2) {
      blk.weights.resize(b);
      for (double& w : blk.weights) w = u(rng);
    }
    const Matrix w = random_matrix(2, 4, rng);
    const auto [xm, ym] = block_virtual_input(blk);
    const Vector r = ym - matvec(w, xm);
    auto [xs, ys] = blk.scaled();
    const Matrix full = ys - matmul(xs, transpose(w));
    const double rhs = frobenius_norm(full) * frobenius_norm(full) / static_cast<double>(b);
    EXPECT_LE(dot(r, r), rhs + 1e-12);
  }
}

TEST(RlsBlockStep, SingletonMatchesRlsStep) {
  std::mt19937_64 rng(16);
  const RlsState s = init_state(config(3, 2, 0.97, 0.2));
  const Matrix w0 = random_matrix(2, 3, rng);
  const SampleBlock blk = random_block(1, 3, 2, rng);
  const auto [wb, sb] = rls_block_step(s, w0, blk);
  const auto [ws, ss] = rls_step(s, w0, blk.x.row_copy(0), blk.y.row_copy(0));
  EXPECT_EQ(wb.values(), ws.values());
  EXPECT_EQ(sb.p_mat.values(), ss.p_mat.values());
}

TEST(RlsBlockStep, IdenticalRowsMatchRlsStep) {
  const Vector x{0.25, -1.0, 2.0}, y{1.5};
  SampleBlock blk{Matrix(4, 3), Matrix(4, 1), {}};
  for (std::size_t j = 0; j < 4; ++j) {
    std::ranges::copy(x, blk.x.row(j).begin());
    blk.y(j, 0) = y[0];
  }
  const RlsState s = init_state(config(3, 1));
  const Matrix w0{{0.1, 0.2, 0.3}};
  const auto [wb, sb] = rls_block_step(s, w0, blk);
  const auto [ws, ss] = rls_step(s, w0, x, y);
  EXPECT_LE(rel_frobenius(wb, ws), 1e-15);
  EXPECT_LE(rel_frobenius(sb.p_mat, ss.p_mat), 1e-15);
}

TEST(ConditionEstimate, GrowsWithAnisotropicData) {
  RlsState s = init_state(config(2, 1));
  EXPECT_DOUBLE_EQ(condition_estimate(s), 1.0);
  for (int i = 0; i < 20; ++i) s = update_precision(s, Vector{3.0, 0.0});
  EXPECT_GT(condition_estimate(s), 100.0);
}

}  // namespace
}  // namespace rlsol
