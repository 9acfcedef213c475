#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "themes/trajdata.hpp"

namespace themes::synthgen {

struct GeneratorConfig {
  int regimes = 4;             // K_true
  int policies = 2;            // G_true, <= regimes
  int m = 6;
  int action_count = 2;
  int window = 2;              // omega_true
  int trajectories = 60;       // N
  int mean_trajectory_length = 120;
  int mean_segment_length = 30;
  std::vector<double> timestamp_rates;  // per regime, events per hour; empty = built-in cycle
  double sparsity = 0.5;       // probability an off-diagonal precision entry is non-zero
  double mean_separation = 0.6;  // regime means ~ N(0, mean_separation^2 I), in marginal-std units
  double policy_scale = 3.0;   // norm of each policy's logit-difference direction
  std::uint64_t seed = 1;

  void validate() const;
};

struct Segment {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  int regime = 0;
  int policy = 0;
};

struct PolicyParams {
  Matrix weights;  // action_count x m
  Vector bias;     // action_count

  [[nodiscard]] Vector probabilities(const Vector& x) const;
};

struct GroundTruth {
  std::vector<std::vector<int>> regime_labels;  // per trajectory, per timestep
  std::vector<std::vector<Segment>> segments;   // per trajectory
  std::vector<int> regime_to_policy;            // surjective map k -> g
  std::vector<Vector> means;                    // per regime, m-dim
  std::vector<Matrix> precisions;               // per regime, (m*window)^2 block-Toeplitz
  std::vector<PolicyParams> policies;
  Matrix regime_transitions;                    // K x K, zero diagonal

  // Flattened policy label per sub-trajectory (segment), trajectory-major.
  [[nodiscard]] std::vector<int> policy_labels() const;
  // Window mean for regime k: the m-dim mean repeated `window` times.
  [[nodiscard]] Vector window_mean(int k) const;
};

std::pair<Dataset, GroundTruth> generate(const GeneratorConfig& config);

// Desk-scale default preset; `seed` overrides the config seed.
GeneratorConfig default_preset(std::uint64_t seed = 1);

// Symmetric, diagonally dominant block-Toeplitz precision whose lag blocks
// A^(0..window-1) are symmetric. Off-diagonal entries are non-zero with
// probability `sparsity`.
Matrix make_block_toeplitz_precision(int m, int window, double sparsity, std::uint64_t seed);

}  // namespace themes::synthgen
