#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "themes/edm.hpp"
#include "themes/emedm.hpp"
#include "themes/hireward.hpp"
#include "themes/rmtticc.hpp"

namespace themes {

struct ThemesConfig {
  int clusters = 4;                                  // K; 0 selects K by BIC over cluster_candidates
  std::vector<int> cluster_candidates{2, 3, 4, 5, 6, 7};
  int window = 2;
  double lambda = 1e-5;
  double beta = 4.0;
  rmtticc::DensityScale density_scale = rmtticc::DensityScale::kModeNormalized;
  int components = 2;                                // G; 0 selects G up to max_components
  int max_components = 4;
  int outer_iters = 10;
  bool skip_regulator = false;                       // one segmentation pass with unit rewards, then EM-EDM

  tglasso::AdmmSettings admm;
  int ticc_max_iters = 100;
  double ticc_rel_tol = 1e-5;
  int kmeans_iters = 20;
  int ticc_restarts = 1;

  int em_max_iters = 50;
  double em_rel_tol = 1e-4;
  int em_refine_epochs = 5;
  bool em_hard = false;

  edm::EdmConfig edm;  // seed is derived, see edm_seed()
  hireward::MlirlSettings mlirl;
  std::uint64_t seed = 1;

  void validate() const;
};

// How test-time mixture weights are formed.
enum class Weighting {
  kCausalPosterior,  // prior at a sub-trajectory's start, then the posterior over its earlier pairs
  kClusterPolicy,    // policy index equals the sub-trajectory's cluster
};

struct IterationDiagnostics {
  double ticc_objective = 0.0;
  int ticc_iterations = 0;
  double mixture_log_likelihood = 0.0;
  int em_iterations = 0;
  double regulator_log_likelihood = 0.0;  // 0 when the regulator was not fit
  std::size_t label_changes = 0;          // vs the previous iteration; all steps on the first
  std::size_t assignment_changes = 0;     // sub-trajectories whose argmax component changed
};

struct ThemesModel {
  int window = 2;
  int m = 0;
  int action_count = 2;
  std::vector<rmtticc::ClusterModel> clusters;
  rmtticc::PenaltyInputs penalty;
  rmtticc::Segmentation segmentation;  // of the training data
  std::vector<std::string> trajectory_ids;
  emedm::PolicyMixture mixture;
  hireward::RewardRegulator regulator;
  Weighting weighting = Weighting::kCausalPosterior;
  std::vector<IterationDiagnostics> diagnostics;
  std::vector<std::optional<double>> bic_scores;  // per candidate when K was selected
  std::vector<int> bic_candidates;

  [[nodiscard]] int cluster_count() const noexcept { return static_cast<int>(clusters.size()); }
  [[nodiscard]] int component_count() const noexcept { return mixture.components; }
};

// Seed handed to policy training; edm.seed in the config is replaced by it.
std::uint64_t edm_seed(const ThemesConfig& config);

ThemesModel fit(const Dataset& train, const ThemesConfig& config);

struct Prediction {
  std::vector<Matrix> probabilities;    // per trajectory, T x A
  std::vector<std::vector<int>> labels; // test-time segmentation
};

// Segmentation reads states and timestamps only; actions enter solely through
// the causal mixture weights.
Prediction predict_actions(const ThemesModel& model, const Dataset& test);

enum class Ablation { kEdm, kEmEdm, kMtTiccEdm, kThemes0, kThemes };

Ablation parse_ablation(const std::string& name);
std::string ablation_name(Ablation a);
std::vector<Ablation> all_ablations();

ThemesConfig ablation_config(Ablation a, const ThemesConfig& base);
ThemesModel run_ablation(Ablation a, const Dataset& train, const ThemesConfig& base);

}  // namespace themes
