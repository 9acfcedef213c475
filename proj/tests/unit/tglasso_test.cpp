#include <gtest/gtest.h>

#include "oracles.hpp"
#include "themes/synthgen.hpp"
#include "themes/tglasso.hpp"

using namespace themes;

namespace {

tglasso::AdmmSettings tight() {
  tglasso::AdmmSettings s;
  s.max_iters = 20000;
  s.abs_tol = 1e-10;
  s.rel_tol = 1e-10;
  return s;
}

Matrix sample_covariance(int dim, int samples, Rng& rng) {
  Matrix x(samples, dim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return tglasso::empirical_stats(x).covariance;
}

}  // namespace

TEST(Tglasso, IdentityCovarianceWithoutPenalty) {
  tglasso::GlassoProblem p{Matrix::Identity(2, 2), 10.0, 0.0, 1, 2};
  const auto sol = tglasso::solve(p);
  EXPECT_LT((sol.theta - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_TRUE(sol.converged);
}

TEST(Tglasso, MatchesProximalGradientOracle) {
  Rng rng(21);
  for (int rep = 0; rep < 10; ++rep) {
    const int m = 2 + rep % 2;
    const Matrix s = sample_covariance(m, 8, rng);
    tglasso::GlassoProblem p{s, 8.0, 0.1, 1, m};
    const auto sol = tglasso::solve(p, tight());
    const Matrix ref = oracle::glasso_proximal_gradient(s, 0.1);
    EXPECT_LT((sol.theta - ref).cwiseAbs().maxCoeff(), 1e-4) << "rep " << rep;
    EXPECT_NEAR(sol.objective, oracle::glasso_objective(ref, s, 0.1), 1e-6);
  }
}

TEST(Tglasso, LargePenaltyZeroesOffDiagonal) {
  Rng rng(5);
  const Matrix s = sample_covariance(3, 20, rng);
  tglasso::GlassoProblem p{s, 20.0, 1e3, 1, 3};
  const auto sol = tglasso::solve(p, tight());
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j) EXPECT_LT(std::abs(sol.theta(i, j)), 1e-6);
}

TEST(Tglasso, ToeplitzStructureIsExact) {
  Rng rng(8);
  for (int rep = 0; rep < 5; ++rep) {
    const Matrix s = sample_covariance(6, 40, rng);
    tglasso::GlassoProblem p{s, 40.0, 0.05, 2, 3};
    const auto sol = tglasso::solve(p);
    EXPECT_TRUE(tglasso::is_block_toeplitz(sol.theta, 3, 2));
    EXPECT_EQ(sol.theta, sol.theta.transpose());
    EXPECT_EQ(Eigen::LLT<Matrix>(sol.theta).info(), Eigen::Success);
  }
}

TEST(Tglasso, RecoversToeplitzTruthWithManySamples) {
  const Matrix theta = synthgen::make_block_toeplitz_precision(2, 2, 0.5, 4);
  const Matrix cov = theta.inverse();
  tglasso::GlassoProblem p{cov, 1e6, 0.0, 2, 2};
  const auto sol = tglasso::solve(p, tight());
  EXPECT_LT((sol.theta - theta).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(Tglasso, ProjectionAndBlocks) {
  Rng rng(2);
  Matrix a(6, 6);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.normal();
  a = a + a.transpose().eval();
  const Matrix proj = tglasso::project_block_toeplitz(a, 2, 3);
  EXPECT_TRUE(tglasso::is_block_toeplitz(proj, 2, 3));
  EXPECT_EQ(tglasso::project_block_toeplitz(proj, 2, 3), proj);
  std::vector<Matrix> blocks;
  for (int l = 0; l < 3; ++l) blocks.push_back(tglasso::lag_block(proj, 2, l));
  EXPECT_EQ(tglasso::assemble_block_toeplitz(blocks), proj);
  EXPECT_FALSE(tglasso::is_block_toeplitz(a, 2, 3));
}

TEST(Tglasso, SingularCovarianceGetsRidge) {
  const Matrix s = Matrix::Ones(2, 2);
  tglasso::GlassoProblem p{s, 2.0, 0.01, 1, 2};
  const auto sol = tglasso::solve(p);
  EXPECT_GT(sol.ridge, 0.0);
  EXPECT_TRUE(sol.theta.allFinite());
}

TEST(Tglasso, InvalidProblemsRejected) {
  Matrix s = Matrix::Identity(2, 2);
  s(0, 1) = 0.3;
  EXPECT_THROW(tglasso::solve({s, 5.0, 0.1, 1, 2}), ArgumentError);
  EXPECT_THROW(tglasso::solve({Matrix::Identity(3, 3), 5.0, 0.1, 2, 2}), ArgumentError);
}

TEST(Tglasso, EmpiricalStatsHandCases) {
  const Matrix one = (Matrix(1, 3) << 1, 2, 3).finished();
  const auto s1 = tglasso::empirical_stats(one);
  EXPECT_EQ(s1.mean, (Vector(3) << 1, 2, 3).finished());
  EXPECT_EQ(s1.covariance, Matrix::Zero(3, 3));

  const Matrix two = (Matrix(2, 2) << 0, 0, 2, 2).finished();
  const auto s2 = tglasso::empirical_stats(two);
  EXPECT_EQ(s2.mean, (Vector(2) << 1, 1).finished());
  EXPECT_EQ(s2.covariance, Matrix::Ones(2, 2));
  EXPECT_DOUBLE_EQ(s2.count, 2.0);

  Rng rng(3);
  Matrix x(9, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  const std::vector<double> w(9, 0.25);
  const auto a = tglasso::empirical_stats(x);
  const auto b = tglasso::empirical_stats(x, std::span<const double>(w));
  EXPECT_LT((a.mean - b.mean).cwiseAbs().maxCoeff(), 1e-14);
  EXPECT_LT((a.covariance - b.covariance).cwiseAbs().maxCoeff(), 1e-14);

  const std::vector<double> zero(9, 0.0);
  EXPECT_THROW(tglasso::empirical_stats(x, std::span<const double>(zero)), ArgumentError);
}
