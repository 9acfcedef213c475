#pragma once

#include <concepts>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "themes/errors.hpp"
#include "themes/random.hpp"
#include "themes/trajdata.hpp"

namespace themes::edm {

// Softmax policy over a one-hidden-layer tanh network f: R^m -> R^A. The
// network also defines a state energy E(x) = -logsumexp f(x). Inputs are
// standardized with a fixed (non-trained) shift and scale.
struct PolicyNet {
  Matrix w1;  // H x m
  Vector b1;  // H
  Matrix w2;  // A x H
  Vector b2;  // A
  Vector input_shift;
  Vector input_scale;

  static PolicyNet initialize(int m, int hidden, int actions, std::uint64_t seed);

  [[nodiscard]] int input_dim() const noexcept { return static_cast<int>(w1.cols()); }
  [[nodiscard]] int hidden() const noexcept { return static_cast<int>(w1.rows()); }
  [[nodiscard]] int actions() const noexcept { return static_cast<int>(w2.rows()); }

  // All batch functions take one sample per row.
  [[nodiscard]] Matrix logits(const Matrix& x) const;
  [[nodiscard]] Matrix log_probs(const Matrix& x) const;
  [[nodiscard]] Matrix probs(const Matrix& x) const;
  [[nodiscard]] Vector energy(const Matrix& x) const;
  [[nodiscard]] Matrix energy_gradient(const Matrix& x) const;  // dE/dx, one row per sample

  [[nodiscard]] std::size_t parameter_count() const noexcept;
  [[nodiscard]] Vector parameters() const;
  void set_parameters(const Vector& flat);

  friend bool operator==(const PolicyNet& a, const PolicyNet& b) {
    return a.w1 == b.w1 && a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2 && a.input_shift == b.input_shift &&
           a.input_scale == b.input_scale;
  }
};

// Row-wise logsumexp.
Vector logsumexp_rows(const Matrix& a);

// Weighted demonstrations: one (state, action, weight) per row.
struct WeightedDemos {
  Matrix states;
  std::vector<int> actions;
  std::vector<double> weights;

  [[nodiscard]] std::size_t size() const noexcept { return actions.size(); }
  void validate(int action_count) const;
};

struct EdmConfig {
  int hidden = 64;
  double alpha = 0.5;  // occupancy-loss weight
  int sgld_steps = 20;
  double sgld_step_size = 1e-2;
  double sgld_noise_scale = 1e-2;
  int replay_buffer_size = 1000;
  double reinit_prob = 0.05;
  double learning_rate = 5e-3;
  int epochs = 30;
  int batch_size = 128;
  int negative_batch_size = 32;
  double gamma = 0.99;  // discount of the occupancy measure; the sample-based loss does not use it
  std::uint64_t seed = 1;

  void validate() const;
};

// Weighted mean of -log pi(a | x).
double bc_loss(const Matrix& states, std::span<const int> actions, std::span<const double> weights, const PolicyNet& net);

// Mean energy on demonstration states minus mean energy on negative samples.
double occupancy_loss(const Matrix& demo_states, const Matrix& negative_states, const PolicyNet& net,
                      std::optional<std::span<const double>> demo_weights = std::nullopt);

struct LossGradient {
  double bc = 0.0;
  double occupancy = 0.0;
  double total = 0.0;
  Vector gradient;  // d total / d parameters, in PolicyNet::parameters() order
};

// bc_loss + alpha * occupancy_loss and its gradient; negatives are treated
// as constants.
LossGradient composite_loss(const PolicyNet& net, const Matrix& states, std::span<const int> actions,
                            std::span<const double> weights, const Matrix& negatives, double alpha);

template <typename M>
concept EnergyModel = requires(const M& model, const Matrix& x) {
  { model.energy_gradient(x) } -> std::convertible_to<Matrix>;
};

// E(x) = 1/2 (x - c)^T P (x - c).
struct QuadraticEnergy {
  Matrix precision;
  Vector center;

  [[nodiscard]] Matrix energy_gradient(const Matrix& x) const {
    return (x.rowwise() - center.transpose()) * precision;
  }
};

// Langevin updates x <- x - (step/2) dE/dx + noise * xi, xi ~ N(0, I).
template <EnergyModel M>
Matrix sgld_sample(const M& model, Matrix states, int steps, double step_size, double noise_scale, std::uint64_t seed) {
  if (steps < 1) throw ArgumentError("SGLD needs at least one step");
  Rng rng(seed);
  for (int s = 0; s < steps; ++s) {
    const Matrix grad = model.energy_gradient(states);
    states -= (0.5 * step_size) * grad;
    if (noise_scale != 0.0)
      for (Eigen::Index i = 0; i < states.size(); ++i) states.data()[i] += noise_scale * rng.normal();
    if (!states.allFinite()) throw SamplerError("non-finite SGLD state", s);
  }
  return states;
}

struct TrainResult {
  PolicyNet net;
  std::vector<double> loss_trace;  // mean composite loss per epoch
  std::vector<double> bc_trace;    // mean behavior-cloning loss per epoch
};

// Mini-batch Adam on bc_loss + alpha * occupancy_loss. Negatives come from a
// persistent replay buffer of demonstration states refreshed by SGLD. When
// `init` is given, training continues from it (input standardization kept).
TrainResult train(const WeightedDemos& demos, int action_count, const EdmConfig& config,
                  const std::optional<PolicyNet>& init = std::nullopt);

}  // namespace themes::edm
