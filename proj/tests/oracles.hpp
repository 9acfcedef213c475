#pragma once

// Independent reference implementations used by unit and acceptance tests.

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "themes/random.hpp"

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix random_spd(int n, themes::Rng& rng, double diag_boost = 0.5) {
  Matrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = rng.normal();
  return a * a.transpose() / n + diag_boost * Matrix::Identity(n, n);
}

inline double glasso_objective(const Matrix& theta, const Matrix& s, double lambda) {
  Eigen::LLT<Matrix> llt(theta);
  if (llt.info() != Eigen::Success) return std::numeric_limits<double>::infinity();
  const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  double off = 0.0;
  for (int i = 0; i < theta.rows(); ++i)
    for (int j = 0; j < theta.cols(); ++j)
      if (i != j) off += std::abs(theta(i, j));
  return -log_det + (s.cwiseProduct(theta)).sum() + lambda * off;
}

// Proximal gradient with backtracking on
// -log det T + tr(S T) + lambda * sum_{i != j} |T_ij|, started from diag(S)^-1.
inline Matrix glasso_proximal_gradient(const Matrix& s, double lambda, int iters = 20000, double tol = 1e-12) {
  const auto n = s.rows();
  Matrix theta = s.diagonal().cwiseInverse().asDiagonal();
  double f = glasso_objective(theta, s, lambda);
  double step = 1.0;
  auto prox = [&](const Matrix& a, double t) {
    Matrix out = a;
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        if (i != j) {
          const double v = a(i, j);
          out(i, j) = std::copysign(std::max(std::abs(v) - t * lambda, 0.0), v);
        }
    return out;
  };
  for (int it = 0; it < iters; ++it) {
    const Matrix grad = s - theta.inverse();
    const double smooth = f - lambda * (theta.cwiseAbs().sum() - theta.diagonal().cwiseAbs().sum());
    Matrix next;
    double fn = 0.0;
    for (step = std::min(1.0, step * 2.0);; step *= 0.5) {
      next = prox(theta - step * grad, step);
      next = 0.5 * (next + next.transpose());
      fn = glasso_objective(next, s, lambda);
      if (!std::isfinite(fn)) continue;
      const Matrix d = next - theta;
      const double smooth_next = fn - lambda * (next.cwiseAbs().sum() - next.diagonal().cwiseAbs().sum());
      if (smooth_next <= smooth + (grad.cwiseProduct(d)).sum() + d.squaredNorm() / (2.0 * step) + 1e-15) break;
      if (step < 1e-12) break;
    }
    const double change = (next - theta).cwiseAbs().maxCoeff();
    theta = next;
    f = fn;
    if (change < tol) break;
  }
  return theta;
}

// Exhaustive minimum over all K^T label sequences; ties resolved toward the
// lexicographically smallest sequence is NOT assumed, only the cost is returned.
inline double brute_force_path_cost(const Matrix& emission, const std::vector<double>& switch_costs,
                                    std::vector<int>* best_path = nullptr) {
  const int T = static_cast<int>(emission.rows());
  const int K = static_cast<int>(emission.cols());
  std::vector<int> path(static_cast<std::size_t>(T), 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    double c = 0.0;
    for (int t = 0; t < T; ++t) {
      c += emission(t, path[static_cast<std::size_t>(t)]);
      if (t > 0 && path[static_cast<std::size_t>(t)] != path[static_cast<std::size_t>(t - 1)]) c += switch_costs[static_cast<std::size_t>(t)];
    }
    if (c < best) {
      best = c;
      if (best_path) *best_path = path;
    }
    int pos = T - 1;
    while (pos >= 0 && ++path[static_cast<std::size_t>(pos)] == K) path[static_cast<std::size_t>(pos--)] = 0;
    if (pos < 0) break;
  }
  return best;
}

inline double path_cost(const Matrix& emission, const std::vector<double>& switch_costs, const std::vector<int>& path) {
  double c = 0.0;
  for (std::size_t t = 0; t < path.size(); ++t) {
    c += emission(static_cast<Eigen::Index>(t), path[t]);
    if (t > 0 && path[t] != path[t - 1]) c += switch_costs[t];
  }
  return c;
}

inline Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x, double h = 1e-6) {
  Vector g(x.size());
  Vector xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    xp(i) = x(i) + h;
    const double up = f(xp);
    xp(i) = x(i) - h;
    const double down = f(xp);
    xp(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max({a.norm(), b.norm(), 1e-12});
}

// Stationary variance of x <- x - (s/2) p x + sigma * xi, i.e. an AR(1) with
// coefficient 1 - s p / 2.
inline double langevin_stationary_variance(double precision, double step, double noise) {
  const double a = 1.0 - 0.5 * step * precision;
  return noise * noise / (1.0 - a * a);
}

}  // namespace oracle
