#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "themes/tglasso.hpp"
#include "themes/trajdata.hpp"

namespace themes::rmtticc {

// Gaussian over stacked windows, parameterized by its block-Toeplitz precision.
struct ClusterModel {
  Vector mean;
  Matrix precision;
  double log_det = 0.0;
  Matrix chol_lower;  // precision = L * L^T

  static ClusterModel make(Vector mean, Matrix precision);
  [[nodiscard]] Eigen::Index dim() const noexcept { return mean.size(); }
};

// -log N(w | mean, precision^-1), normalized over the full stacked dimension.
double emission_negloglik(const Vector& window, const ClusterModel& model);

// Emission costs of every row of `windows` (T x d) under each model: T x K.
Matrix emission_costs(const Matrix& windows, std::span<const ClusterModel> models);

// Bivariate normal over (reward change, log(e + time gap)).
struct BivariateGaussian {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov = Eigen::Matrix2d::Identity();

  [[nodiscard]] double density(double x, double y) const;
  [[nodiscard]] double mode_density() const;
  [[nodiscard]] bool positive_definite() const;

  // Sample mean and covariance with `ridge` added to the diagonal.
  static BivariateGaussian fit(std::span<const Eigen::Vector2d> points, double ridge = 1e-6);
};

enum class DensityScale {
  kModeNormalized,  // penalty = beta * d* / clamp(density); equals beta at the mode
  kRaw,             // penalty = beta / clamp(density)
};

struct PenaltyInputs {
  double beta = 4.0;
  BivariateGaussian phi;
  double floor_ratio = 1e-4;  // density floor = floor_ratio * mode density
  double cap_ratio = 1.0;     // density cap = cap_ratio * mode density
  DensityScale scale = DensityScale::kModeNormalized;
};

double log_gap(double gap);

// Cost of a label change at a step with reward change `reward_delta` and
// time gap `gap` (> 0).
double switch_penalty(double reward_delta, double gap, const PenaltyInputs& p);

// Minimum-cost label path for emission costs (T x K) and per-step switch
// costs (entry 0 unused). Ties: continue the previous label, then the
// smaller cluster index.
std::vector<int> viterbi_assign(const Matrix& emission, std::span<const double> switch_costs);

// Per-step switch costs for one trajectory; rewards may be empty (reward
// change taken as 0) or hold one reward per timestep.
std::vector<double> switch_costs(const Trajectory& traj, std::span<const double> rewards, const PenaltyInputs& p);

// Switch costs with the reward channel pinned to the density's reward mean;
// used where demonstrated actions must not influence segmentation.
std::vector<double> switch_costs_action_free(const Trajectory& traj, const PenaltyInputs& p);

struct SubTrajectory {
  std::size_t trajectory = 0;
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // exclusive
  int cluster = 0;

  [[nodiscard]] std::size_t length() const noexcept { return end - start; }
  friend bool operator==(const SubTrajectory&, const SubTrajectory&) = default;
};

struct Segmentation {
  std::vector<std::vector<int>> labels;
  std::vector<SubTrajectory> sub_trajectories;

  // Maximal constant-label runs, trajectory-major.
  static Segmentation from_labels(std::vector<std::vector<int>> labels);
  [[nodiscard]] std::vector<int> flat_labels() const;
  friend bool operator==(const Segmentation&, const Segmentation&) = default;
};

struct FitSettings {
  int clusters = 4;
  int window = 2;
  double lambda = 1e-5;
  tglasso::AdmmSettings admm;
  int max_iters = 100;
  double rel_tol = 1e-5;
  int kmeans_iters = 20;
  int max_reseeds = 3;
  int restarts = 1;  // independent initializations when no init is given; lowest final objective wins
  std::uint64_t seed = 1;
};

struct FitResult {
  std::vector<ClusterModel> models;
  Segmentation segmentation;
  std::vector<double> objective_trace;  // recorded after every E-step
  std::vector<bool> reseeded;           // per trace entry: an empty cluster was re-seeded
  int iterations = 0;
  bool converged = false;
  double log_likelihood = 0.0;          // sum over windows of log N(window | its cluster)
};

// Per-trajectory rewards (one per timestep) drive the reward-change channel;
// pass an empty vector for unit rewards.
FitResult fit(const Dataset& data, const std::vector<std::vector<double>>& rewards, const PenaltyInputs& penalty,
              const FitSettings& settings, const std::optional<std::vector<ClusterModel>>& init = std::nullopt);

// Objective: emissions + switch penalties + lambda * sum of off-diagonal |precision|.
double objective(const std::vector<Matrix>& windows, const std::vector<std::vector<double>>& switch_costs,
                 const std::vector<std::vector<int>>& labels, std::span<const ClusterModel> models, double lambda);

// Free parameters: non-zeros among unique precision entries plus the means.
int degrees_of_freedom(const ClusterModel& model, int m, int window);

struct BicResult {
  int best_clusters = 0;
  std::vector<int> candidates;
  std::vector<std::optional<double>> scores;  // absent where the fit failed
  std::vector<std::string> warnings;
};

BicResult bic_select(const Dataset& data, std::span<const int> candidates,
                     const std::vector<std::vector<double>>& rewards, const PenaltyInputs& penalty,
                     const FitSettings& settings);

double bic_score(const FitResult& fit, int m, int window, std::size_t total_windows);

}  // namespace themes::rmtticc
