#include "themes/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include "themes/errors.hpp"
#include "themes/parallel.hpp"
#include "themes/random.hpp"
#include "themes/tglasso.hpp"

namespace themes::synthgen {

namespace {

// Conditional Gaussian for the newest state given up to window-1 predecessors.
struct Conditional {
  Matrix gain;      // m x (c*m)
  Matrix chol;      // m x m lower factor of the conditional covariance
};

struct RegimeSampler {
  Vector mean;                       // m-dim
  std::vector<Conditional> by_context;  // index = number of conditioning states
};

RegimeSampler make_sampler(const Vector& mean, const Matrix& precision, int m, int window) {
  const Matrix cov = precision.inverse();
  RegimeSampler s;
  s.mean = mean;
  for (int c = 0; c < window; ++c) {
    // The last (c+1) blocks of the window.
    const int off = (window - 1 - c) * m;
    const Matrix sub = cov.block(off, off, (c + 1) * m, (c + 1) * m);
    const Matrix s00 = sub.topLeftCorner(c * m, c * m);
    const Matrix s10 = sub.bottomLeftCorner(m, c * m);
    const Matrix s11 = sub.bottomRightCorner(m, m);
    Conditional cond;
    if (c == 0) {
      cond.gain = Matrix(m, 0);
      cond.chol = Eigen::LLT<Matrix>(s11).matrixL();
    } else {
      cond.gain = s00.ldlt().solve(s10.transpose()).transpose();
      Matrix ccov = s11 - cond.gain * s10.transpose();
      ccov = 0.5 * (ccov + ccov.transpose());
      cond.chol = Eigen::LLT<Matrix>(ccov).matrixL();
    }
    s.by_context.push_back(std::move(cond));
  }
  return s;
}

const std::vector<double> kDefaultRates = {1.0, 0.5, 2.0, 0.25, 4.0};

}  // namespace

void GeneratorConfig::validate() const {
  if (regimes < 1 || policies < 1 || m < 1 || action_count < 2 || window < 1 || trajectories < 1 ||
      mean_trajectory_length < 1 || mean_segment_length < 1)
    throw ConfigurationError("generator counts must be positive (action_count >= 2)");
  if (policies > regimes) throw ConfigurationError("policies must not exceed regimes");
  if (!timestamp_rates.empty()) {
    if (static_cast<int>(timestamp_rates.size()) != regimes)
      throw ConfigurationError("timestamp_rates needs one entry per regime");
    for (double r : timestamp_rates)
      if (!(r > 0.0)) throw ConfigurationError("timestamp rates must be positive");
  }
  if (!(sparsity > 0.0 && sparsity < 1.0)) throw ConfigurationError("sparsity must lie in (0, 1)");
}

Vector PolicyParams::probabilities(const Vector& x) const {
  Vector logits = weights * x + bias;
  logits.array() -= logits.maxCoeff();
  Vector p = logits.array().exp();
  return p / p.sum();
}

std::vector<int> GroundTruth::policy_labels() const {
  std::vector<int> out;
  for (const auto& segs : segments)
    for (const auto& s : segs) out.push_back(s.policy);
  return out;
}

Vector GroundTruth::window_mean(int k) const {
  const auto& mu = means[static_cast<std::size_t>(k)];
  const auto window = precisions[static_cast<std::size_t>(k)].rows() / mu.size();
  return mu.replicate(window, 1);
}

Matrix make_block_toeplitz_precision(int m, int window, double sparsity, std::uint64_t seed) {
  if (m < 1 || window < 1) throw ArgumentError("m and window must be >= 1");
  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng(derive_seed(seed, {0x70e9u, static_cast<std::uint64_t>(attempt)}));
    std::vector<Matrix> blocks(static_cast<std::size_t>(window), Matrix::Zero(m, m));
    for (int lag = 0; lag < window; ++lag) {
      auto& b = blocks[static_cast<std::size_t>(lag)];
      for (int p = 0; p < m; ++p) {
        for (int q = p; q < m; ++q) {
          if (lag == 0 && p == q) continue;
          if (!rng.bernoulli(sparsity)) continue;
          const double v = (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(0.3, 1.0);
          b(p, q) = v;
          b(q, p) = v;
        }
      }
    }
    // Row p of a full block row sees A^(0) once and each lag block at most twice.
    for (int p = 0; p < m; ++p) {
      double off = blocks[0].row(p).cwiseAbs().sum();
      for (int lag = 1; lag < window; ++lag) off += 2.0 * blocks[static_cast<std::size_t>(lag)].row(p).cwiseAbs().sum();
      blocks[0](p, p) = 1.1 * off + 0.1;
    }
    Matrix theta = tglasso::assemble_block_toeplitz(blocks);
    Eigen::LLT<Matrix> llt(theta);
    if (llt.info() == Eigen::Success) return theta;
  }
  throw ConstructionError("failed to construct a positive definite precision after 100 attempts");
}

GeneratorConfig default_preset(std::uint64_t seed) {
  GeneratorConfig c;
  c.seed = seed;
  return c;
}

std::pair<Dataset, GroundTruth> generate(const GeneratorConfig& config) {
  config.validate();
  const int K = config.regimes;
  const int G = config.policies;
  const int m = config.m;
  const int w = config.window;
  const int A = config.action_count;

  GroundTruth truth;
  Rng rng(derive_seed(config.seed, {0x9e11u}));

  for (int k = 0; k < K; ++k) {
    Matrix theta = make_block_toeplitz_precision(m, w, config.sparsity, derive_seed(config.seed, {1, static_cast<std::uint64_t>(k)}));
    // Unit average marginal variance; scaling keeps the Toeplitz structure.
    const Matrix cov = theta.inverse();
    theta *= cov.diagonal().mean();
    truth.precisions.push_back(theta);
    Vector mu(m);
    for (int j = 0; j < m; ++j) mu(j) = config.mean_separation * rng.normal();
    truth.means.push_back(mu);
    truth.regime_to_policy.push_back(k % G);
  }

  // Per action, the policies' logit directions form a randomly rotated
  // regular simplex (antipodal for two policies) when G <= m, so that
  // policies disagree as much as their count allows.
  for (int g = 0; g < G; ++g) {
    PolicyParams p;
    p.weights = Matrix::Zero(A, m);
    p.bias = Vector::Zero(A);
    truth.policies.push_back(std::move(p));
  }
  for (int a = 1; a < A; ++a) {
    Matrix dirs(m, G);
    for (int g = 0; g < G; ++g)
      for (int j = 0; j < m; ++j) dirs(j, g) = rng.normal();
    if (G > 1 && G <= m) {
      const Matrix q = dirs.householderQr().householderQ() * Matrix::Identity(m, G);
      dirs = q.colwise() - q.rowwise().mean();
    }
    for (int g = 0; g < G; ++g)
      truth.policies[static_cast<std::size_t>(g)].weights.row(a) = (config.policy_scale / dirs.col(g).norm()) * dirs.col(g).transpose();
  }

  truth.regime_transitions = Matrix::Zero(K, K);
  for (int k = 0; k < K; ++k) {
    if (K == 1) {
      truth.regime_transitions(0, 0) = 1.0;
      break;
    }
    const auto row = rng.dirichlet(static_cast<std::size_t>(K - 1), 2.0);
    for (int j = 0, c = 0; j < K; ++j)
      if (j != k) truth.regime_transitions(k, j) = row[static_cast<std::size_t>(c++)];
  }

  std::vector<RegimeSampler> samplers;
  for (int k = 0; k < K; ++k)
    samplers.push_back(make_sampler(truth.means[static_cast<std::size_t>(k)], truth.precisions[static_cast<std::size_t>(k)], m, w));

  std::vector<double> rates = config.timestamp_rates;
  if (rates.empty())
    for (int k = 0; k < K; ++k) rates.push_back(kDefaultRates[static_cast<std::size_t>(k) % kDefaultRates.size()]);

  const auto N = static_cast<std::size_t>(config.trajectories);
  Dataset data;
  data.action_count = A;
  for (int j = 0; j < m; ++j) data.feature_names.push_back("x" + std::to_string(j));
  data.trajectories.resize(N);
  truth.regime_labels.resize(N);
  truth.segments.resize(N);

  parallel_for(N, [&](std::size_t n) {
    Rng r(derive_seed(config.seed, {2, n}));
    const double mean_len = config.mean_trajectory_length;
    const auto T = static_cast<std::size_t>(
        std::max(2.0, std::round(r.uniform(0.75 * mean_len, 1.25 * mean_len + 1.0))));
    const double min_seg = std::max(2.0, config.mean_segment_length / 3.0);

    std::vector<int> labels(T);
    std::vector<Segment> segs;
    int k = static_cast<int>(r.index(static_cast<std::size_t>(K)));
    for (std::size_t t = 0; t < T;) {
      const double draw = min_seg + r.exponential(1.0 / std::max(1.0, config.mean_segment_length - min_seg));
      const auto len = std::max<std::size_t>(1, static_cast<std::size_t>(std::round(draw)));
      const auto end = std::min(T, t + len);
      segs.push_back({t, end, k, truth.regime_to_policy[static_cast<std::size_t>(k)]});
      for (auto i = t; i < end; ++i) labels[i] = k;
      t = end;
      if (K > 1) {
        std::vector<double> row(static_cast<std::size_t>(K));
        for (int j = 0; j < K; ++j) row[static_cast<std::size_t>(j)] = truth.regime_transitions(k, j);
        k = static_cast<int>(r.categorical(row));
      }
    }

    Trajectory tr;
    char name[32];
    std::snprintf(name, sizeof name, "traj%04zu", n);
    tr.id = name;
    tr.states.resize(static_cast<Eigen::Index>(T), m);
    tr.actions.resize(T);
    tr.timestamps.resize(T);
    double clock = r.uniform(0.0, 1.0);
    for (std::size_t t = 0; t < T; ++t) {
      const int kt = labels[t];
      const auto& smp = samplers[static_cast<std::size_t>(kt)];
      const int ctx = static_cast<int>(std::min<std::size_t>(t, static_cast<std::size_t>(w - 1)));
      const auto& cond = smp.by_context[static_cast<std::size_t>(ctx)];
      Vector x = smp.mean;
      if (ctx > 0) {
        Vector prev(ctx * m);
        for (int c = 0; c < ctx; ++c)
          prev.segment(c * m, m) = tr.states.row(static_cast<Eigen::Index>(t) - ctx + c).transpose() - smp.mean;
        x += cond.gain * prev;
      }
      Vector z(m);
      for (int j = 0; j < m; ++j) z(j) = r.normal();
      x += cond.chol * z;
      tr.states.row(static_cast<Eigen::Index>(t)) = x.transpose();

      if (t > 0) clock += std::max(1e-6, r.exponential(rates[static_cast<std::size_t>(kt)]));
      tr.timestamps[t] = clock;

      const auto& pol = truth.policies[static_cast<std::size_t>(truth.regime_to_policy[static_cast<std::size_t>(kt)])];
      const Vector p = pol.probabilities(x);
      std::vector<double> pv(p.data(), p.data() + p.size());
      tr.actions[t] = static_cast<int>(r.categorical(pv));
    }
    data.trajectories[n] = std::move(tr);
    truth.regime_labels[n] = std::move(labels);
    truth.segments[n] = std::move(segs);
  });

  return {std::move(data), std::move(truth)};
}

}  // namespace themes::synthgen
