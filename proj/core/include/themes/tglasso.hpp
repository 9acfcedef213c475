#pragma once

#include <optional>
#include <span>
#include <vector>

#include "themes/errors.hpp"
#include "themes/trajdata.hpp"

namespace themes::tglasso {

struct GlassoProblem {
  Matrix empirical_covariance;  // (m*window) x (m*window), symmetric
  double sample_count = 1.0;
  double lambda = 0.0;  // applies to off-diagonal entries only
  int window = 1;
  int m = 1;
};

struct AdmmSettings {
  double penalty_rho = 1.0;
  int max_iters = 1000;
  double abs_tol = 1e-6;
  double rel_tol = 1e-5;
};

struct Solution {
  Matrix theta;      // symmetric, positive definite, exactly block-Toeplitz
  double objective;  // -log det + tr(S theta) + lambda * |theta|_{1,off}
  AdmmResiduals residuals;
  bool converged = false;
  // Residual norms stayed within 10x tolerance without growing over the
  // last iterations; diagnostic only.
  bool residuals_settled = true;
  double ridge = 0.0;  // diagonal loading applied to a singular covariance
};

Solution solve(const GlassoProblem& problem, const AdmmSettings& settings = {});

// -log det(theta) + tr(S theta) + lambda * sum of |off-diagonal entries|.
double objective(const Matrix& theta, const Matrix& covariance, double lambda);

// Averages tied entries so every (i, j) block depends only on i - j; blocks
// above the diagonal are transposes of those below.
Matrix project_block_toeplitz(const Matrix& a, int m, int window);

// Lag-l block A^(l): the (l, 0) block of a block-Toeplitz matrix.
Matrix lag_block(const Matrix& theta, int m, int lag);

// Assembles a symmetric block-Toeplitz matrix from lag blocks A^(0..w-1).
Matrix assemble_block_toeplitz(std::span<const Matrix> blocks);

bool is_block_toeplitz(const Matrix& theta, int m, int window);

struct EmpiricalStats {
  Vector mean;
  Matrix covariance;  // biased, normalized by the weight sum
  double count = 0.0; // sum of weights
};

EmpiricalStats empirical_stats(std::span<const StackedWindow> windows,
                               std::optional<std::span<const double>> weights = std::nullopt);

// Rows of `rows` are samples.
EmpiricalStats empirical_stats(const Matrix& rows, std::optional<std::span<const double>> weights = std::nullopt);

}  // namespace themes::tglasso
