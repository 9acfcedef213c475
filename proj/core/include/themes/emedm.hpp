#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "themes/edm.hpp"
#include "themes/rmtticc.hpp"

namespace themes::emedm {

// State-action pairs grouped into units (sub-trajectories or whole
// trajectories). Rows of a unit are contiguous: [unit_offsets[u], unit_offsets[u+1]).
struct MixtureData {
  Matrix states;
  std::vector<int> actions;
  std::vector<std::size_t> unit_offsets;

  [[nodiscard]] std::size_t units() const noexcept { return unit_offsets.empty() ? 0 : unit_offsets.size() - 1; }
  [[nodiscard]] std::size_t unit_length(std::size_t u) const { return unit_offsets[u + 1] - unit_offsets[u]; }

  static MixtureData from_segmentation(const Dataset& data, const rmtticc::Segmentation& seg);
  static MixtureData from_trajectories(const Dataset& data);
};

struct PolicyMixture {
  int components = 0;
  Vector priors;                         // G-simplex
  std::vector<edm::PolicyNet> policies;  // one per component
  Matrix responsibilities;               // units x G, row-stochastic
};

// Per unit and component: sum over the unit's pairs of log pi_g(a | x).
Matrix unit_log_likelihoods(const MixtureData& data, const std::vector<edm::PolicyNet>& policies);

// Posterior over components per unit, computed in log space.
Matrix responsibilities(const MixtureData& data, const PolicyMixture& mixture);

// Sum over units of log sum_g exp(log-likelihood + log prior).
double observed_log_likelihood(const MixtureData& data, const PolicyMixture& mixture);

struct EmSettings {
  int max_iters = 50;
  double rel_tol = 1e-4;
  int refine_epochs = 5;  // epochs per M-step once a component has been trained
  bool hard = false;      // classification EM: responsibilities rounded to one-hot
  int max_reseeds = 2;
  std::uint64_t seed = 1;
  std::optional<Matrix> initial_responsibilities;
  std::optional<std::vector<edm::PolicyNet>> initial_policies;  // warm start
  std::optional<std::vector<std::uint64_t>> component_seeds;
};

struct FitResult {
  PolicyMixture mixture;
  std::vector<double> log_likelihood_trace;  // observed-data log-likelihood after each M-step
  std::vector<bool> reseeded;                // per trace entry: a collapsed component was re-seeded before it
  int iterations = 0;
  bool collapsed = false;  // some prior below 1 / (10 * units) at the end
};

// Default per-component seed stream: component g starts at edm.seed + g.
std::uint64_t component_seed(const edm::EdmConfig& config, const EmSettings& settings, int g);
// Seed of component g's training run at EM iteration `iter`; iteration 0 uses the component seed itself.
std::uint64_t training_seed(std::uint64_t component_seed, int iter);

FitResult fit(const MixtureData& data, int components, int action_count, const edm::EdmConfig& edm_config,
              const EmSettings& settings);

// Component weights fixed to the given one-hot assignment; one M-step.
PolicyMixture fit_fixed_assignment(const MixtureData& data, const std::vector<int>& assignment, int components,
                                   int action_count, const edm::EdmConfig& edm_config);

struct SelectResult {
  int components = 1;
  std::vector<double> log_likelihoods;  // best observed log-likelihood per tried G (1-based order)
};

SelectResult select_components(const MixtureData& data, int max_components, int action_count,
                               const edm::EdmConfig& edm_config, const EmSettings& settings);

}  // namespace themes::emedm
