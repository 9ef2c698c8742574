#include <gtest/gtest.h>

#include "test_support.hpp"

namespace rlsol {
namespace {

using testing::random_matrix;

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const Matrix a{{1.5, -2.0}, {0.25, 4.0}};
  EXPECT_EQ(matmul(Matrix::identity(2), a).values(), a.values());
}

TEST(Matmul, HandArithmetic) {
  const Matrix out = matmul(Matrix{{1, 2}, {3, 4}}, Matrix{{0}, {1}});
  ASSERT_EQ(out.rows(), 2u);
  ASSERT_EQ(out.cols(), 1u);
  EXPECT_EQ(out(0, 0), 2.0);
  EXPECT_EQ(out(1, 0), 4.0);
}

TEST(Matmul, MatchesTripleLoop) {
  std::mt19937_64 rng(1);
  const Matrix a = random_matrix(5, 7, rng), b = random_matrix(7, 3, rng);
  const Matrix c = matmul(a, b);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < 7; ++k) s += a(i, k) * b(k, j);
      EXPECT_NEAR(c(i, j), s, 1e-14);
    }
}

TEST(Matmul, MismatchNamesBothShapes) {
  try {
    matmul(Matrix(2, 3), Matrix(2, 3));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
}

TEST(Matmul, Associative) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix a(4, 6), b(6, 3), c(3, 5);
    for (Matrix* m : {&a, &b, &c})
      for (double& v : m->span()) v = u(rng);
    const Matrix l = matmul(matmul(a, b), c), r = matmul(a, matmul(b, c));
    for (std::size_t i = 0; i < l.size(); ++i)
      EXPECT_NEAR(l.span()[i], r.span()[i], 1e-9 * std::max(1.0, std::abs(r.span()[i])));
  }
}

TEST(Transpose, Involution) {
  std::mt19937_64 rng(3);
  const Matrix a = random_matrix(4, 9, rng);
  const Matrix t = transpose(a);
  EXPECT_EQ(t.rows(), 9u);
  EXPECT_EQ(transpose(t).values(), a.values());
}

TEST(SpdSolve, ScaledIdentity) {
  const Matrix x = spd_solve(2.0 * Matrix::identity(3), Matrix::identity(3));
  EXPECT_LE(max_abs((x - 0.5 * Matrix::identity(3)).span()), 1e-15);
}

TEST(SpdSolve, Diagonal) {
  const Matrix x = spd_solve(Matrix{{1, 0}, {0, 4}}, Matrix{{1}, {8}});
  EXPECT_DOUBLE_EQ(x(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(x(1, 0), 2.0);
}

TEST(SpdSolve, SmallResidual) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = testing::random_spd(6, rng);
    const Matrix b = random_matrix(6, 2, rng);
    const Matrix x = spd_solve(a, b);
    EXPECT_LE(frobenius_norm(matmul(a, x) - b), 1e-10 * (1.0 + frobenius_norm(b)));
  }
}

TEST(SpdSolve, ReportsFailingPivot) {
  const Matrix a{{4, 0, 0}, {0, 1, 0}, {0, 0, -1}};
  try {
    spd_solve(a, Matrix(3, 1, 1.0));
    FAIL() << "expected FactorizationError";
  } catch (const FactorizationError& e) {
    EXPECT_EQ(e.pivot(), 2u);
  }
}

TEST(SpdSolve, RejectsShapeMismatch) {
  EXPECT_THROW(spd_solve(Matrix::identity(3), Matrix(2, 1)), DimensionError);
  EXPECT_THROW(spd_solve(Matrix(2, 3), Matrix(2, 1)), DimensionError);
}

TEST(FrobeniusNorm, Examples) {
  EXPECT_EQ(frobenius_norm(Matrix(3, 3)), 0.0);
  EXPECT_EQ(frobenius_norm(Matrix{{3, 4}}), 5.0);
}

TEST(FrobeniusNorm, MatchesElementwiseSum) {
  std::mt19937_64 rng(5);
  const Matrix a = random_matrix(4, 4, rng);
  double s = 0.0;
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) s += a(i, j) * a(i, j);
  EXPECT_NEAR(frobenius_norm(a), std::sqrt(s), 1e-14);
}

TEST(Matrix, RejectsBadConstruction) {
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), DimensionError);
  EXPECT_THROW((Matrix{{1, 2}, {3}}), DimensionError);
  EXPECT_THROW(Matrix(2, 2) + Matrix(2, 3), DimensionError);
  EXPECT_THROW(Vector(2) + Vector(3), DimensionError);
}

TEST(Matrix, SymmetrizeAveragesOffDiagonal) {
  Matrix a{{1, 2}, {4, 3}};
  EXPECT_EQ(asymmetry(a), 2.0);
  symmetrize(a);
  EXPECT_EQ(a(0, 1), 3.0);
  EXPECT_EQ(a(1, 0), 3.0);
  EXPECT_EQ(asymmetry(a), 0.0);
}

}  // namespace
}  // namespace rlsol
