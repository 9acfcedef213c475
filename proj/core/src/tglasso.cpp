#include "themes/tglasso.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace themes::tglasso {

namespace {

double soft_threshold(double v, double k) {
  if (v > k) return v - k;
  if (v < -k) return v + k;
  return 0.0;
}

// Projection of the l1-penalized proximal step onto the block-Toeplitz
// subspace: every tied group shares one value, the group mean, soft-thresholded
// unless the group lies on the main diagonal.
Matrix toeplitz_prox(const Matrix& v, int m, int window, double threshold) {
  const auto n = v.rows();
  Matrix z = Matrix::Zero(n, n);
  for (int lag = 0; lag < window; ++lag) {
    for (int p = 0; p < m; ++p) {
      for (int q = 0; q < m; ++q) {
        if (lag == 0 && q > p) continue;  // A^(0) is symmetric; (p,q) and (q,p) tie
        double sum = 0.0;
        int count = 0;
        for (int b = 0; b + lag < window; ++b) {
          const int r = (b + lag) * m + p;
          const int c = b * m + q;
          sum += v(r, c) + v(c, r);
          count += 2;
        }
        double value = sum / count;
        const bool on_diagonal = lag == 0 && p == q;
        if (!on_diagonal) value = soft_threshold(value, threshold);
        for (int b = 0; b + lag < window; ++b) {
          const int r = (b + lag) * m + p;
          const int c = b * m + q;
          z(r, c) = value;
          z(c, r) = value;
        }
      }
    }
  }
  return z;
}

bool is_symmetric(const Matrix& a) {
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale;
}

}  // namespace

double objective(const Matrix& theta, const Matrix& covariance, double lambda) {
  Eigen::LLT<Matrix> llt(theta);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const double log_det = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double off = theta.cwiseAbs().sum() - theta.diagonal().cwiseAbs().sum();
  return -log_det + (covariance.cwiseProduct(theta)).sum() + lambda * off;
}

Matrix project_block_toeplitz(const Matrix& a, int m, int window) { return toeplitz_prox(a, m, window, 0.0); }

Matrix lag_block(const Matrix& theta, int m, int lag) { return theta.block(lag * m, 0, m, m); }

Matrix assemble_block_toeplitz(std::span<const Matrix> blocks) {
  const int w = static_cast<int>(blocks.size());
  if (w == 0) throw ArgumentError("no blocks");
  const auto m = blocks.front().rows();
  Matrix out(m * w, m * w);
  for (int i = 0; i < w; ++i) {
    for (int j = 0; j < w; ++j) {
      if (i >= j)
        out.block(i * m, j * m, m, m) = blocks[static_cast<std::size_t>(i - j)];
      else
        out.block(i * m, j * m, m, m) = blocks[static_cast<std::size_t>(j - i)].transpose();
    }
  }
  return out;
}

bool is_block_toeplitz(const Matrix& theta, int m, int window) {
  for (int i = 0; i < window; ++i)
    for (int j = 0; j < window; ++j) {
      const Matrix expected = i >= j ? lag_block(theta, m, i - j) : Matrix(lag_block(theta, m, j - i).transpose());
      if (theta.block(i * m, j * m, m, m) != expected) return false;
    }
  return theta == theta.transpose();
}

Solution solve(const GlassoProblem& problem, const AdmmSettings& settings) {
  const auto n = problem.empirical_covariance.rows();
  if (n != problem.empirical_covariance.cols() || n != problem.m * problem.window)
    throw ArgumentError("covariance dimension does not match m * window");
  if (!is_symmetric(problem.empirical_covariance)) throw ArgumentError("covariance is not symmetric");
  if (problem.lambda < 0.0) throw ArgumentError("lambda must be non-negative");
  if (problem.sample_count < 1.0) throw ArgumentError("sample count must be >= 1");
  if (!(settings.penalty_rho > 0.0) || settings.max_iters < 1 || !(settings.abs_tol > 0.0) ||
      !(settings.rel_tol > 0.0))
    throw ArgumentError("invalid ADMM settings");

  Matrix s = 0.5 * (problem.empirical_covariance + problem.empirical_covariance.transpose());
  double ridge = 0.0;
  {
    Eigen::SelfAdjointEigenSolver<Matrix> es(s, Eigen::EigenvaluesOnly);
    const double trace = s.trace();
    const double min_eig = es.eigenvalues().minCoeff();
    if (min_eig <= 1e-12 * std::max(trace, 1e-300)) {
      ridge = trace > 0.0 ? 1e-6 * trace / static_cast<double>(n) : 1e-6;
      s.diagonal().array() += ridge;
    }
  }

  const double rho = settings.penalty_rho;
  const int m = problem.m;
  const int w = problem.window;
  const double lambda = problem.lambda;
  Matrix z = Matrix::Identity(n, n);
  Matrix u = Matrix::Zero(n, n);
  Matrix theta = z;
  Solution sol;
  sol.ridge = ridge;
  std::deque<double> recent;

  const double dim = static_cast<double>(n);
  for (int it = 1; it <= settings.max_iters; ++it) {
    // theta-update: minimize -log det + tr(S theta) + rho/2 |theta - z + u|^2
    Matrix a = rho * (z - u) - s;
    a = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(a);
    Vector ev = es.eigenvalues();
    for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = (ev(i) + std::sqrt(ev(i) * ev(i) + 4.0 * rho)) / (2.0 * rho);
    theta = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();

    const Matrix z_prev = z;
    z = toeplitz_prox(theta + u, m, w, lambda / rho);
    u += theta - z;

    const double r_norm = (theta - z).norm();
    const double s_norm = rho * (z - z_prev).norm();
    const double eps_pri = dim * settings.abs_tol + settings.rel_tol * std::max(theta.norm(), z.norm());
    const double eps_dual = dim * settings.abs_tol + settings.rel_tol * rho * u.norm();
    sol.residuals = {r_norm, s_norm, it};

    recent.push_back(r_norm + s_norm);
    if (recent.size() > 10) recent.pop_front();

    if (r_norm <= eps_pri && s_norm <= eps_dual) {
      Eigen::LLT<Matrix> llt(z);
      if (llt.info() == Eigen::Success) {
        sol.converged = true;
        break;
      }
    }
  }

  const double tol = 10.0 * (dim * settings.abs_tol);
  for (std::size_t i = 1; i < recent.size(); ++i)
    if (recent[i] > recent[i - 1] + tol) sol.residuals_settled = false;

  // z is exactly symmetric and block-Toeplitz by construction; fall back to
  // the projected theta iterate if z has not become positive definite.
  Eigen::LLT<Matrix> llt(z);
  if (llt.info() != Eigen::Success) {
    z = project_block_toeplitz(theta, m, w);
    Eigen::LLT<Matrix> llt2(z);
    if (llt2.info() != Eigen::Success)
      throw ConvergenceError("ADMM did not reach a positive definite iterate", sol.residuals);
  }
  sol.theta = std::move(z);
  sol.objective = objective(sol.theta, s, lambda);
  return sol;
}

EmpiricalStats empirical_stats(const Matrix& rows, std::optional<std::span<const double>> weights) {
  const auto n = rows.rows();
  const auto d = rows.cols();
  if (n == 0) throw ArgumentError("no windows");
  Vector w = Vector::Ones(n);
  if (weights) {
    if (static_cast<Eigen::Index>(weights->size()) != n) throw ArgumentError("weights misaligned with windows");
    for (Eigen::Index i = 0; i < n; ++i) {
      const double wi = (*weights)[static_cast<std::size_t>(i)];
      if (!(wi >= 0.0) || !std::isfinite(wi)) throw ArgumentError("weights must be finite and non-negative");
      w(i) = wi;
    }
  }
  const double total = w.sum();
  if (!(total > 0.0)) throw ArgumentError("total weight is zero");
  EmpiricalStats st;
  st.count = total;
  st.mean = (rows.transpose() * w) / total;
  const Matrix centered = rows.rowwise() - st.mean.transpose();
  st.covariance = (centered.transpose() * w.asDiagonal() * centered) / total;
  st.covariance = 0.5 * (st.covariance + st.covariance.transpose());
  (void)d;
  return st;
}

EmpiricalStats empirical_stats(std::span<const StackedWindow> windows, std::optional<std::span<const double>> weights) {
  if (windows.empty()) throw ArgumentError("no windows");
  const auto d = windows.front().vector.size();
  Matrix rows(static_cast<Eigen::Index>(windows.size()), d);
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].vector.size() != d) throw ArgumentError("window dimensions differ");
    rows.row(static_cast<Eigen::Index>(i)) = windows[i].vector.transpose();
  }
  return empirical_stats(rows, weights);
}

}  // namespace themes::tglasso
