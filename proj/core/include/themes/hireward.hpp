#pragma once

#include <optional>
#include <vector>

#include "themes/emedm.hpp"
#include "themes/rmtticc.hpp"

namespace themes::hireward {

struct HighLevelStep {
  int state = 0;   // sub-trajectory cluster k
  int action = 0;  // policy component g
  friend bool operator==(const HighLevelStep&, const HighLevelStep&) = default;
};

using Episode = std::vector<HighLevelStep>;

// One (k, g) pair per sub-trajectory, g = argmax responsibility (ties to the
// smaller index), grouped per trajectory in time order.
std::vector<Episode> build_episodes(const rmtticc::Segmentation& seg, const Matrix& responsibilities,
                                    std::size_t trajectories);

struct HighLevelMdp {
  int states = 1;
  int actions = 1;
  // transitions[k * actions + g] is the distribution over next states.
  std::vector<Vector> transitions;
  std::vector<Episode> episodes;

  // Empirical transition counts with add-one smoothing.
  static HighLevelMdp from_episodes(std::vector<Episode> episodes, int states, int actions);
  [[nodiscard]] const Vector& next(int k, int g) const {
    return transitions[static_cast<std::size_t>(k * actions + g)];
  }
};

struct RewardRegulator {
  Matrix table;  // K x G
  double temperature = 1.0;
  double discount = 0.95;

  static RewardRegulator ones(int states, int actions, double temperature = 1.0, double discount = 0.95);
};

struct MlirlSettings {
  int steps = 100;
  double learning_rate = 0.05;
  double discount = 0.95;
  double temperature = 1.0;
  int sweeps = 50;          // value-iteration sweeps differentiated through
  double vi_tol = 1e-8;     // sweeps stop early once Q moves less than this (sup-norm)
};

struct SoftQ {
  Matrix q;       // K x G
  Matrix policy;  // K x G Boltzmann policy, rows sum to 1
  int sweeps = 0;
};

// Soft value iteration from Q = R (V = 0).
SoftQ soft_q(const HighLevelMdp& mdp, const Matrix& rewards, const MlirlSettings& settings);

struct LikelihoodGradient {
  double log_likelihood = 0.0;
  Matrix gradient;  // K x G
};

// Log-likelihood of the episodes' actions under the Boltzmann policy and its
// exact gradient through the performed value-iteration sweeps.
LikelihoodGradient log_likelihood_gradient(const HighLevelMdp& mdp, const Matrix& rewards,
                                           const MlirlSettings& settings);

struct MlirlResult {
  RewardRegulator regulator;
  std::vector<double> log_likelihood_trace;
};

MlirlResult mlirl_fit(const HighLevelMdp& mdp, const MlirlSettings& settings,
                      const std::optional<Matrix>& init = std::nullopt);

// r_t = (1/G) sum_g pi_g(a_t | x_t) * R(k_t, g).
std::vector<std::vector<double>> per_timestep_rewards(const Dataset& data, const rmtticc::Segmentation& seg,
                                                      const std::vector<edm::PolicyNet>& policies,
                                                      const RewardRegulator& regulator);

}  // namespace themes::hireward
