#include "themes/hireward.hpp"

#include <cmath>

#include "themes/errors.hpp"

namespace themes::hireward {

std::vector<Episode> build_episodes(const rmtticc::Segmentation& seg, const Matrix& responsibilities,
                                    std::size_t trajectories) {
  if (static_cast<std::size_t>(responsibilities.rows()) != seg.sub_trajectories.size())
    throw ConsistencyError("segmentation has " + std::to_string(seg.sub_trajectories.size()) +
                           " sub-trajectories but the mixture has " + std::to_string(responsibilities.rows()) +
                           " responsibility rows");
  std::vector<Episode> out(trajectories);
  for (std::size_t u = 0; u < seg.sub_trajectories.size(); ++u) {
    const auto& s = seg.sub_trajectories[u];
    if (s.trajectory >= trajectories) throw ConsistencyError("sub-trajectory refers to an unknown trajectory");
    Eigen::Index g = 0;
    for (Eigen::Index j = 1; j < responsibilities.cols(); ++j)
      if (responsibilities(static_cast<Eigen::Index>(u), j) > responsibilities(static_cast<Eigen::Index>(u), g)) g = j;
    out[s.trajectory].push_back({s.cluster, static_cast<int>(g)});
  }
  return out;
}

HighLevelMdp HighLevelMdp::from_episodes(std::vector<Episode> episodes, int states, int actions) {
  if (states < 1 || actions < 1) throw ArgumentError("high-level MDP needs K, G >= 1");
  HighLevelMdp mdp;
  mdp.states = states;
  mdp.actions = actions;
  std::vector<Vector> counts(static_cast<std::size_t>(states * actions), Vector::Ones(states));
  bool any = false;
  for (const auto& ep : episodes) {
    for (std::size_t i = 0; i < ep.size(); ++i) {
      const auto& st = ep[i];
      if (st.state < 0 || st.state >= states || st.action < 0 || st.action >= actions)
        throw ConsistencyError("high-level pair out of range");
      any = true;
      if (i + 1 < ep.size()) counts[static_cast<std::size_t>(st.state * actions + st.action)](ep[i + 1].state) += 1.0;
    }
  }
  if (!any) throw ArgumentError("no high-level episodes");
  for (auto& c : counts) c /= c.sum();
  mdp.transitions = std::move(counts);
  mdp.episodes = std::move(episodes);
  return mdp;
}

RewardRegulator RewardRegulator::ones(int states, int actions, double temperature, double discount) {
  return {Matrix::Ones(states, actions), temperature, discount};
}

namespace {

Vector soft_values(const Matrix& q, double temp) {
  Vector v(q.rows());
  for (Eigen::Index k = 0; k < q.rows(); ++k) {
    const double mx = q.row(k).maxCoeff();
    v(k) = mx + temp * std::log(((q.row(k).array() - mx) / temp).exp().sum());
  }
  return v;
}

Matrix boltzmann(const Matrix& q, double temp) {
  Matrix p(q.rows(), q.cols());
  for (Eigen::Index k = 0; k < q.rows(); ++k) {
    const double mx = q.row(k).maxCoeff();
    p.row(k) = ((q.row(k).array() - mx) / temp).exp();
    p.row(k) /= p.row(k).sum();
  }
  return p;
}

void check_settings(const HighLevelMdp& mdp, const Matrix& rewards, const MlirlSettings& s) {
  if (rewards.rows() != mdp.states || rewards.cols() != mdp.actions) throw ArgumentError("reward table shape mismatch");
  if (!(s.temperature > 0.0)) throw ConfigurationError("temperature must be positive");
  if (!(s.discount >= 0.0 && s.discount < 1.0)) throw ConfigurationError("discount must lie in [0, 1)");
  if (s.sweeps < 0) throw ConfigurationError("sweeps must be non-negative");
}

// Q^(s+1) = R + gamma * T V(Q^(s)), starting from Q^(0) = R.
std::vector<Matrix> sweep_history(const HighLevelMdp& mdp, const Matrix& r, const MlirlSettings& s) {
  std::vector<Matrix> qs{r};
  for (int i = 0; i < s.sweeps; ++i) {
    const Vector v = soft_values(qs.back(), s.temperature);
    Matrix q(mdp.states, mdp.actions);
    for (int k = 0; k < mdp.states; ++k)
      for (int g = 0; g < mdp.actions; ++g) q(k, g) = r(k, g) + s.discount * mdp.next(k, g).dot(v);
    const double change = (q - qs.back()).cwiseAbs().maxCoeff();
    qs.push_back(std::move(q));
    if (change < s.vi_tol) break;
  }
  return qs;
}

}  // namespace

SoftQ soft_q(const HighLevelMdp& mdp, const Matrix& rewards, const MlirlSettings& settings) {
  check_settings(mdp, rewards, settings);
  auto qs = sweep_history(mdp, rewards, settings);
  SoftQ out;
  out.sweeps = static_cast<int>(qs.size()) - 1;
  out.q = std::move(qs.back());
  out.policy = boltzmann(out.q, settings.temperature);
  return out;
}

LikelihoodGradient log_likelihood_gradient(const HighLevelMdp& mdp, const Matrix& r, const MlirlSettings& s) {
  check_settings(mdp, r, s);
  const auto qs = sweep_history(mdp, r, s);
  const Matrix& q = qs.back();
  const Matrix pi = boltzmann(q, s.temperature);

  Matrix counts = Matrix::Zero(mdp.states, mdp.actions);
  LikelihoodGradient out;
  for (const auto& ep : mdp.episodes)
    for (const auto& st : ep) {
      counts(st.state, st.action) += 1.0;
      out.log_likelihood += std::log(pi(st.state, st.action));
    }

  // dL/dQ = (counts - n_k * pi) / temp
  Matrix dq(mdp.states, mdp.actions);
  for (int k = 0; k < mdp.states; ++k) dq.row(k) = (counts.row(k) - counts.row(k).sum() * pi.row(k)) / s.temperature;

  Matrix grad = Matrix::Zero(mdp.states, mdp.actions);
  for (std::size_t i = qs.size() - 1; i > 0; --i) {
    grad += dq;  // dQ^(i)/dR = I
    // dV^(i-1)(k') = gamma * sum_{k,g} dq(k,g) T[k,g,k']; dQ^(i-1)(k',g) = dV(k') * pi^(i-1)(g|k')
    Vector dv = Vector::Zero(mdp.states);
    for (int k = 0; k < mdp.states; ++k)
      for (int g = 0; g < mdp.actions; ++g) dv += s.discount * dq(k, g) * mdp.next(k, g);
    const Matrix p_prev = boltzmann(qs[i - 1], s.temperature);
    dq = p_prev.array().colwise() * dv.array();
  }
  grad += dq;  // Q^(0) = R
  out.gradient = std::move(grad);
  return out;
}

MlirlResult mlirl_fit(const HighLevelMdp& mdp, const MlirlSettings& s, const std::optional<Matrix>& init) {
  if (mdp.episodes.empty()) throw ArgumentError("no high-level episodes");
  MlirlResult res;
  res.regulator = RewardRegulator::ones(mdp.states, mdp.actions, s.temperature, s.discount);
  if (init) res.regulator.table = *init;
  for (int step = 0; step < s.steps; ++step) {
    const auto lg = log_likelihood_gradient(mdp, res.regulator.table, s);
    if (!std::isfinite(lg.log_likelihood) || !lg.gradient.allFinite())
      throw ComputeError("non-finite reward-regulator gradient at step " + std::to_string(step));
    res.log_likelihood_trace.push_back(lg.log_likelihood);
    res.regulator.table += s.learning_rate * lg.gradient;
  }
  res.log_likelihood_trace.push_back(log_likelihood_gradient(mdp, res.regulator.table, s).log_likelihood);
  return res;
}

std::vector<std::vector<double>> per_timestep_rewards(const Dataset& data, const rmtticc::Segmentation& seg,
                                                      const std::vector<edm::PolicyNet>& policies,
                                                      const RewardRegulator& regulator) {
  if (seg.labels.size() != data.size()) throw ConsistencyError("segmentation does not match dataset");
  const auto G = static_cast<Eigen::Index>(policies.size());
  if (G == 0 || regulator.table.cols() != G) throw ConsistencyError("policy count does not match reward regulator");
  std::vector<std::vector<double>> out(data.size());
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto& tr = data.trajectories[n];
    if (seg.labels[n].size() != tr.length()) throw ConsistencyError("segmentation does not match trajectory length");
    std::vector<Matrix> probs;
    for (const auto& p : policies) probs.push_back(p.probs(tr.states));
    out[n].resize(tr.length());
    for (std::size_t t = 0; t < tr.length(); ++t) {
      const int k = seg.labels[n][t];
      if (k < 0 || k >= regulator.table.rows()) throw ConsistencyError("cluster label outside the reward regulator");
      double r = 0.0;
      for (Eigen::Index g = 0; g < G; ++g)
        r += probs[static_cast<std::size_t>(g)](static_cast<Eigen::Index>(t), tr.actions[t]) * regulator.table(k, g);
      out[n][t] = r / static_cast<double>(G);
    }
  }
  return out;
}

}  // namespace themes::hireward
