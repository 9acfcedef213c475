#include "themes/rmtticc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "themes/errors.hpp"
#include "themes/parallel.hpp"
#include "themes/random.hpp"

namespace themes::rmtticc {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

std::vector<Matrix> all_windows(const Dataset& data, int window) {
  std::vector<Matrix> out;
  out.reserve(data.size());
  for (const auto& tr : data.trajectories) out.push_back(stack_window_matrix(tr, window));
  return out;
}

Matrix stack_rows(const std::vector<Matrix>& windows) {
  Eigen::Index total = 0;
  for (const auto& w : windows) total += w.rows();
  Matrix out(total, windows.front().cols());
  Eigen::Index r = 0;
  for (const auto& w : windows) {
    out.middleRows(r, w.rows()) = w;
    r += w.rows();
  }
  return out;
}

ClusterModel m_step(const Matrix& rows, const FitSettings& s, int m) {
  const auto st = tglasso::empirical_stats(rows);
  // Objective-level scaling: n/2 * (tr(S theta) - log det theta) + lambda |theta|_1.
  tglasso::GlassoProblem prob{st.covariance, st.count, 2.0 * s.lambda / st.count, s.window, m};
  auto sol = tglasso::solve(prob, s.admm);
  return ClusterModel::make(st.mean, std::move(sol.theta));
}

// k-means++ seeding followed by Lloyd iterations; returns flat labels.
std::vector<int> kmeans_init(const Matrix& rows, int k, int iters, std::uint64_t seed) {
  const auto n = rows.rows();
  Rng rng(derive_seed(seed, {0x6b6du}));
  Matrix centers(k, rows.cols());
  centers.row(0) = rows.row(static_cast<Eigen::Index>(rng.index(static_cast<std::size_t>(n))));
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    for (Eigen::Index i = 0; i < n; ++i)
      d2[static_cast<std::size_t>(i)] =
          std::min(d2[static_cast<std::size_t>(i)], (rows.row(i) - centers.row(c - 1)).squaredNorm());
    double total = 0.0;
    for (double v : d2) total += v;
    const auto pick = total > 0.0 ? rng.categorical(d2) : rng.index(static_cast<std::size_t>(n));
    centers.row(c) = rows.row(static_cast<Eigen::Index>(pick));
  }
  std::vector<int> labels(static_cast<std::size_t>(n), 0);
  for (int it = 0; it <= iters; ++it) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (rows.row(i) - centers.row(c)).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      changed = changed || labels[static_cast<std::size_t>(i)] != best;
      labels[static_cast<std::size_t>(i)] = best;
    }
    if (it > 0 && !changed) break;
    Matrix sums = Matrix::Zero(k, rows.cols());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      sums.row(labels[static_cast<std::size_t>(i)]) += rows.row(i);
      ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(i)])];
    }
    for (int c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0) centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
  }
  return labels;
}

}  // namespace

ClusterModel ClusterModel::make(Vector mean, Matrix precision) {
  if (mean.size() != precision.rows() || precision.rows() != precision.cols())
    throw ArgumentError("cluster mean and precision dimensions differ");
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) throw NumericalError("cluster precision is not positive definite");
  ClusterModel c;
  c.mean = std::move(mean);
  c.precision = std::move(precision);
  c.chol_lower = llt.matrixL();
  c.log_det = 2.0 * c.chol_lower.diagonal().array().log().sum();
  if (!std::isfinite(c.log_det)) throw NumericalError("cluster precision log-determinant is not finite");
  return c;
}

double emission_negloglik(const Vector& window, const ClusterModel& model) {
  if (window.size() != model.dim()) throw ArgumentError("window dimension does not match cluster model");
  const Vector d = window - model.mean;
  const double quad = (model.chol_lower.transpose() * d).squaredNorm();
  return 0.5 * quad - 0.5 * model.log_det + 0.5 * static_cast<double>(model.dim()) * kLog2Pi;
}

Matrix emission_costs(const Matrix& windows, std::span<const ClusterModel> models) {
  Matrix out(windows.rows(), static_cast<Eigen::Index>(models.size()));
  for (std::size_t k = 0; k < models.size(); ++k) {
    const auto& c = models[k];
    if (windows.cols() != c.dim()) throw ArgumentError("window dimension does not match cluster model");
    const Matrix centered = windows.rowwise() - c.mean.transpose();
    const Vector quad = (centered * c.chol_lower).rowwise().squaredNorm();
    out.col(static_cast<Eigen::Index>(k)) =
        (0.5 * quad.array() + (-0.5 * c.log_det + 0.5 * static_cast<double>(c.dim()) * kLog2Pi)).matrix();
  }
  return out;
}

double BivariateGaussian::density(double x, double y) const {
  const Eigen::Vector2d d(x - mean(0), y - mean(1));
  const double det = cov.determinant();
  const double q = d.dot(cov.ldlt().solve(d));
  return std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(det));
}

double BivariateGaussian::mode_density() const { return 1.0 / (2.0 * std::numbers::pi * std::sqrt(cov.determinant())); }

bool BivariateGaussian::positive_definite() const {
  return cov(0, 0) > 0.0 && cov.determinant() > 0.0 && std::abs(cov(0, 1) - cov(1, 0)) <= 1e-12 * cov.norm();
}

BivariateGaussian BivariateGaussian::fit(std::span<const Eigen::Vector2d> points, double ridge) {
  BivariateGaussian g;
  if (points.empty()) {
    g.cov = Eigen::Matrix2d::Identity();
    return g;
  }
  g.mean.setZero();
  for (const auto& p : points) g.mean += p;
  g.mean /= static_cast<double>(points.size());
  g.cov.setZero();
  for (const auto& p : points) g.cov += (p - g.mean) * (p - g.mean).transpose();
  g.cov /= static_cast<double>(points.size());
  g.cov(0, 0) += ridge;
  g.cov(1, 1) += ridge;
  return g;
}

double log_gap(double gap) { return std::log(std::numbers::e + gap); }

double switch_penalty(double reward_delta, double gap, const PenaltyInputs& p) {
  if (!(gap > 0.0)) throw ArgumentError("time gap must be positive");
  if (!p.phi.positive_definite()) throw ConfigurationError("regulator density covariance is not positive definite");
  if (!(p.floor_ratio > 0.0) || !(p.floor_ratio <= p.cap_ratio))
    throw ConfigurationError("density floor must be positive and not above the cap");
  if (p.beta == 0.0) return 0.0;
  const double mode = p.phi.mode_density();
  const double d = std::clamp(p.phi.density(reward_delta, log_gap(gap)), p.floor_ratio * mode, p.cap_ratio * mode);
  return p.scale == DensityScale::kModeNormalized ? p.beta * (mode / d) : p.beta / d;
}

std::vector<int> viterbi_assign(const Matrix& emission, std::span<const double> switch_costs) {
  const auto T = emission.rows();
  const auto K = emission.cols();
  if (T == 0) throw ArgumentError("empty window sequence");
  if (K < 1) throw ArgumentError("need at least one cluster");
  if (static_cast<Eigen::Index>(switch_costs.size()) != T) throw ArgumentError("switch costs misaligned with windows");

  std::vector<double> prev(static_cast<std::size_t>(K)), cur(static_cast<std::size_t>(K));
  std::vector<int> back(static_cast<std::size_t>(T * K), 0);
  for (Eigen::Index k = 0; k < K; ++k) prev[static_cast<std::size_t>(k)] = emission(0, k);

  for (Eigen::Index t = 1; t < T; ++t) {
    // Best and second-best predecessors (ties -> smaller index).
    int b1 = 0, b2 = -1;
    for (int k = 1; k < K; ++k) {
      const double v = prev[static_cast<std::size_t>(k)];
      if (v < prev[static_cast<std::size_t>(b1)]) {
        b2 = b1;
        b1 = k;
      } else if (b2 < 0 || v < prev[static_cast<std::size_t>(b2)]) {
        b2 = k;
      }
    }
    const double pen = switch_costs[static_cast<std::size_t>(t)];
    for (int k = 0; k < K; ++k) {
      const double stay = prev[static_cast<std::size_t>(k)];
      double best = stay;
      int arg = k;
      const int j = (b1 != k) ? b1 : b2;
      if (j >= 0) {
        const double sw = prev[static_cast<std::size_t>(j)] + pen;
        if (sw < stay) {
          best = sw;
          arg = j;
        }
      }
      cur[static_cast<std::size_t>(k)] = best + emission(t, k);
      back[static_cast<std::size_t>(t * K + k)] = arg;
    }
    std::swap(prev, cur);
  }

  std::vector<int> labels(static_cast<std::size_t>(T));
  int k = 0;
  for (int j = 1; j < K; ++j)
    if (prev[static_cast<std::size_t>(j)] < prev[static_cast<std::size_t>(k)]) k = j;
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    labels[static_cast<std::size_t>(t)] = k;
    if (t > 0) k = back[static_cast<std::size_t>(t * K + k)];
  }
  return labels;
}

std::vector<double> switch_costs(const Trajectory& traj, std::span<const double> rewards, const PenaltyInputs& p) {
  const auto T = traj.length();
  if (!rewards.empty() && rewards.size() != T) throw ArgumentError("rewards misaligned with trajectory");
  std::vector<double> out(T, 0.0);
  for (std::size_t t = 1; t < T; ++t) {
    const double dr = rewards.empty() ? 0.0 : std::abs(rewards[t] - rewards[t - 1]);
    out[t] = switch_penalty(dr, traj.gap(t), p);
  }
  return out;
}

std::vector<double> switch_costs_action_free(const Trajectory& traj, const PenaltyInputs& p) {
  const auto T = traj.length();
  std::vector<double> out(T, 0.0);
  for (std::size_t t = 1; t < T; ++t) out[t] = switch_penalty(p.phi.mean(0), traj.gap(t), p);
  return out;
}

Segmentation Segmentation::from_labels(std::vector<std::vector<int>> labels) {
  Segmentation s;
  for (std::size_t n = 0; n < labels.size(); ++n) {
    const auto& l = labels[n];
    std::size_t start = 0;
    for (std::size_t t = 1; t <= l.size(); ++t) {
      if (t == l.size() || l[t] != l[start]) {
        s.sub_trajectories.push_back({n, start, t, l[start]});
        start = t;
      }
    }
  }
  s.labels = std::move(labels);
  return s;
}

std::vector<int> Segmentation::flat_labels() const {
  std::vector<int> out;
  for (const auto& l : labels) out.insert(out.end(), l.begin(), l.end());
  return out;
}

double objective(const std::vector<Matrix>& windows, const std::vector<std::vector<double>>& costs,
                 const std::vector<std::vector<int>>& labels, std::span<const ClusterModel> models, double lambda) {
  double total = 0.0;
  for (std::size_t n = 0; n < windows.size(); ++n) {
    const Matrix e = emission_costs(windows[n], models);
    for (std::size_t t = 0; t < labels[n].size(); ++t) {
      total += e(static_cast<Eigen::Index>(t), labels[n][t]);
      if (t > 0 && labels[n][t] != labels[n][t - 1]) total += costs[n][t];
    }
  }
  for (const auto& c : models)
    total += lambda * (c.precision.cwiseAbs().sum() - c.precision.diagonal().cwiseAbs().sum());
  return total;
}

int degrees_of_freedom(const ClusterModel& model, int m, int window) {
  int df = static_cast<int>(model.mean.size());
  for (int lag = 0; lag < window; ++lag) {
    const Matrix b = tglasso::lag_block(model.precision, m, lag);
    for (int p = 0; p < m; ++p)
      for (int q = (lag == 0 ? p : 0); q < m; ++q)
        if (b(p, q) != 0.0) ++df;
  }
  return df;
}

namespace {

FitResult fit_once(const Dataset& data, const std::vector<std::vector<double>>& rewards, const PenaltyInputs& penalty,
                   const FitSettings& s, const std::optional<std::vector<ClusterModel>>& init) {
  if (s.clusters < 1) throw ArgumentError("cluster count must be >= 1");
  if (s.window < 1) throw ArgumentError("window size must be >= 1");
  validate(data);
  const int K = s.clusters;
  const int m = static_cast<int>(data.dim());
  const auto windows = all_windows(data, s.window);
  const auto N = windows.size();
  const Matrix pooled = stack_rows(windows);
  if (pooled.rows() < K) throw ArgumentError("more clusters than windows");
  if (!rewards.empty() && rewards.size() != N) throw ArgumentError("rewards misaligned with dataset");

  std::vector<std::vector<double>> costs(N);
  for (std::size_t n = 0; n < N; ++n)
    costs[n] = switch_costs(data.trajectories[n], rewards.empty() ? std::span<const double>{} : std::span<const double>(rewards[n]),
                            penalty);

  const ClusterModel global = m_step(pooled, s, m);

  auto fit_clusters = [&](const std::vector<std::vector<int>>& labels, std::vector<ClusterModel>& models) {
    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(K));
    std::vector<Eigen::Index> offsets(N, 0);
    for (std::size_t n = 1; n < N; ++n) offsets[n] = offsets[n - 1] + windows[n - 1].rows();
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t t = 0; t < labels[n].size(); ++t)
        members[static_cast<std::size_t>(labels[n][t])].push_back(offsets[n] + static_cast<Eigen::Index>(t));
    parallel_for(static_cast<std::size_t>(K), [&](std::size_t k) {
      if (members[k].empty()) return;  // keep the previous model
      Matrix rows(static_cast<Eigen::Index>(members[k].size()), pooled.cols());
      for (std::size_t i = 0; i < members[k].size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = pooled.row(members[k][i]);
      models[k] = m_step(rows, s, m);
    });
  };

  auto e_step = [&](const std::vector<ClusterModel>& models) {
    std::vector<std::vector<int>> labels(N);
    parallel_for(N, [&](std::size_t n) { labels[n] = viterbi_assign(emission_costs(windows[n], models), costs[n]); });
    return labels;
  };

  std::vector<ClusterModel> models;
  if (init) {
    if (static_cast<int>(init->size()) != K) throw ArgumentError("initial models do not match cluster count");
    models = *init;
    for (const auto& c : models)
      if (c.dim() != pooled.cols()) throw ArgumentError("initial model dimension mismatch");
  } else {
    const auto flat = kmeans_init(pooled, K, s.kmeans_iters, s.seed);
    std::vector<std::vector<int>> labels(N);
    std::size_t r = 0;
    for (std::size_t n = 0; n < N; ++n)
      for (Eigen::Index t = 0; t < windows[n].rows(); ++t) labels[n].push_back(flat[r++]);
    models.assign(static_cast<std::size_t>(K), global);
    fit_clusters(labels, models);
  }

  FitResult res;
  std::vector<std::vector<int>> labels;
  double prev_obj = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= s.max_iters; ++it) {
    auto next = e_step(models);

    bool reseeded = false;
    for (int attempt = 0; attempt < s.max_reseeds; ++attempt) {
      std::vector<std::size_t> counts(static_cast<std::size_t>(K), 0);
      for (const auto& l : next)
        for (int k : l) ++counts[static_cast<std::size_t>(k)];
      std::vector<int> empty;
      for (int k = 0; k < K; ++k)
        if (counts[static_cast<std::size_t>(k)] == 0) empty.push_back(k);
      if (empty.empty()) break;
      // Worst-fitting windows under their current assignment become new seeds.
      std::vector<std::pair<double, Eigen::Index>> fits;
      Eigen::Index off = 0;
      for (std::size_t n = 0; n < N; ++n) {
        const Matrix e = emission_costs(windows[n], models);
        for (std::size_t t = 0; t < next[n].size(); ++t)
          fits.emplace_back(e(static_cast<Eigen::Index>(t), next[n][t]), off + static_cast<Eigen::Index>(t));
        off += windows[n].rows();
      }
      std::sort(fits.begin(), fits.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
      });
      for (std::size_t i = 0; i < empty.size() && i < fits.size(); ++i)
        models[static_cast<std::size_t>(empty[i])] = ClusterModel::make(pooled.row(fits[i].second).transpose(), global.precision);
      reseeded = true;
      next = e_step(models);
    }

    const double obj = objective(windows, costs, next, models, s.lambda);
    res.objective_trace.push_back(obj);
    res.reseeded.push_back(reseeded);
    res.iterations = it;
    const bool same = next == labels;
    labels = std::move(next);
    if (same) {
      res.converged = true;
      break;
    }
    fit_clusters(labels, models);
    if (std::abs(prev_obj - obj) <= s.rel_tol * std::abs(obj)) {
      res.converged = true;
      break;
    }
    prev_obj = obj;
  }

  double ll = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    const Matrix e = emission_costs(windows[n], models);
    for (std::size_t t = 0; t < labels[n].size(); ++t) ll -= e(static_cast<Eigen::Index>(t), labels[n][t]);
  }
  res.log_likelihood = ll;
  res.models = std::move(models);
  res.segmentation = Segmentation::from_labels(std::move(labels));
  return res;
}

}  // namespace

FitResult fit(const Dataset& data, const std::vector<std::vector<double>>& rewards, const PenaltyInputs& penalty,
              const FitSettings& s, const std::optional<std::vector<ClusterModel>>& init) {
  if (s.restarts < 1) throw ArgumentError("restarts must be >= 1");
  if (init) return fit_once(data, rewards, penalty, s, init);
  FitResult best = fit_once(data, rewards, penalty, s, std::nullopt);
  for (int r = 1; r < s.restarts; ++r) {
    FitSettings sr = s;
    sr.seed = derive_seed(s.seed, {static_cast<std::uint64_t>(r)});
    auto cand = fit_once(data, rewards, penalty, sr, std::nullopt);
    if (cand.objective_trace.back() < best.objective_trace.back()) best = std::move(cand);
  }
  return best;
}

double bic_score(const FitResult& fit, int m, int window, std::size_t total_windows) {
  std::vector<bool> used(fit.models.size(), false);
  for (const auto& l : fit.segmentation.labels)
    for (int k : l) used[static_cast<std::size_t>(k)] = true;
  double df = 0.0;
  for (std::size_t k = 0; k < fit.models.size(); ++k)
    if (used[k]) df += degrees_of_freedom(fit.models[k], m, window);
  return -2.0 * fit.log_likelihood + df * std::log(static_cast<double>(total_windows));
}

BicResult bic_select(const Dataset& data, std::span<const int> candidates,
                     const std::vector<std::vector<double>>& rewards, const PenaltyInputs& penalty,
                     const FitSettings& settings) {
  if (candidates.empty()) throw ArgumentError("no cluster-count candidates");
  BicResult out;
  out.candidates.assign(candidates.begin(), candidates.end());
  const auto total = data.total_steps();
  double best = std::numeric_limits<double>::infinity();
  for (int k : candidates) {
    try {
      FitSettings s = settings;
      s.clusters = k;
      const auto f = fit(data, rewards, penalty, s);
      const double score = bic_score(f, static_cast<int>(data.dim()), s.window, total);
      out.scores.emplace_back(score);
      if (score < best) {
        best = score;
        out.best_clusters = k;
      }
    } catch (const std::exception& e) {
      out.scores.emplace_back(std::nullopt);
      out.warnings.push_back("K=" + std::to_string(k) + ": " + e.what());
    }
  }
  if (out.best_clusters == 0) throw ComputeError("every cluster-count candidate failed to fit");
  return out;
}

}  // namespace themes::rmtticc
