#include "themes/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "themes/errors.hpp"
#include "themes/parallel.hpp"
#include "themes/random.hpp"

namespace themes {

void ThemesConfig::validate() const {
  if (clusters < 0) throw ConfigurationError("clusters must be >= 0");
  if (clusters == 0) {
    if (cluster_candidates.empty()) throw ConfigurationError("cluster selection needs candidates");
    for (int k : cluster_candidates)
      if (k < 1) throw ConfigurationError("cluster candidates must be >= 1");
  }
  if (window < 1) throw ConfigurationError("window must be >= 1");
  if (!(lambda >= 0.0)) throw ConfigurationError("lambda must be >= 0");
  if (!(beta >= 0.0)) throw ConfigurationError("beta must be >= 0");
  if (components < 0) throw ConfigurationError("components must be >= 0");
  if (components == 0 && max_components < 1) throw ConfigurationError("max_components must be >= 1");
  if (outer_iters < 1) throw ConfigurationError("outer_iters must be >= 1");
  if (!(admm.penalty_rho > 0.0) || admm.max_iters < 1) throw ConfigurationError("invalid ADMM settings");
  if (ticc_max_iters < 1 || em_max_iters < 1 || ticc_restarts < 1) throw ConfigurationError("iteration caps must be >= 1");
  if (em_refine_epochs < 1) throw ConfigurationError("em_refine_epochs must be >= 1");
  if (mlirl.steps < 0 || mlirl.sweeps < 1 || !(mlirl.temperature > 0.0) || !(mlirl.discount >= 0.0 && mlirl.discount < 1.0))
    throw ConfigurationError("invalid regulator settings");
  try {
    edm.validate();
  } catch (const ArgumentError& e) {
    throw ConfigurationError(e.what());
  }
}

namespace {

rmtticc::BivariateGaussian fit_phi(const Dataset& data, const std::vector<std::vector<double>>& rewards) {
  std::vector<Eigen::Vector2d> points;
  for (std::size_t n = 0; n < data.size(); ++n) {
    const auto& tr = data.trajectories[n];
    for (std::size_t t = 1; t < tr.length(); ++t) {
      const double dr = rewards.empty() ? 0.0 : std::abs(rewards[n][t] - rewards[n][t - 1]);
      points.emplace_back(dr, rmtticc::log_gap(tr.gap(t)));
    }
  }
  if (points.size() < 2) return {};
  return rmtticc::BivariateGaussian::fit(points);
}

std::vector<int> argmax_rows(const Matrix& r) {
  std::vector<int> out(static_cast<std::size_t>(r.rows()));
  for (Eigen::Index u = 0; u < r.rows(); ++u) {
    Eigen::Index best = 0;
    r.row(u).maxCoeff(&best);
    out[static_cast<std::size_t>(u)] = static_cast<int>(best);
  }
  return out;
}

std::size_t count_changes(const std::vector<std::vector<int>>& a, const std::vector<std::vector<int>>& b) {
  std::size_t c = 0;
  for (std::size_t n = 0; n < b.size(); ++n)
    for (std::size_t t = 0; t < b[n].size(); ++t)
      if (n >= a.size() || t >= a[n].size() || a[n][t] != b[n][t]) ++c;
  return c;
}

template <typename F>
auto annotated(int iteration, F&& body) {
  const std::string where = "outer iteration " + std::to_string(iteration);
  try {
    return body();
  } catch (const InputError&) {
    std::throw_with_nested(InputError(where));
  } catch (const ComputeError&) {
    std::throw_with_nested(ComputeError(where));
  }
}

rmtticc::FitSettings ticc_settings(const ThemesConfig& c, int clusters) {
  rmtticc::FitSettings s;
  s.clusters = clusters;
  s.window = c.window;
  s.lambda = c.lambda;
  s.admm = c.admm;
  s.max_iters = c.ticc_max_iters;
  s.rel_tol = c.ticc_rel_tol;
  s.kmeans_iters = c.kmeans_iters;
  s.restarts = c.ticc_restarts;
  s.seed = derive_seed(c.seed, {1});
  return s;
}

emedm::EmSettings em_settings(const ThemesConfig& c) {
  emedm::EmSettings s;
  s.max_iters = c.em_max_iters;
  s.rel_tol = c.em_rel_tol;
  s.refine_epochs = c.em_refine_epochs;
  s.hard = c.em_hard;
  s.seed = derive_seed(c.seed, {3});
  return s;
}

ThemesModel fit_impl(const Dataset& train, const ThemesConfig& user_config, bool fixed_assignment) {
  user_config.validate();
  ThemesConfig config = user_config;
  config.edm.seed = edm_seed(user_config);
  validate(train);
  if (train.size() == 0) throw ArgumentError("training set is empty");

  ThemesModel model;
  model.window = config.window;
  model.m = static_cast<int>(train.dim());
  model.action_count = train.action_count;
  for (const auto& tr : train.trajectories) model.trajectory_ids.push_back(tr.id);

  std::vector<std::vector<double>> rewards;  // empty: unit rewards
  model.penalty.beta = config.beta;
  model.penalty.scale = config.density_scale;
  model.penalty.phi = fit_phi(train, rewards);

  int K = config.clusters;
  if (K == 0) {
    const auto bic = rmtticc::bic_select(train, config.cluster_candidates, rewards, model.penalty,
                                         ticc_settings(config, config.cluster_candidates.front()));
    K = bic.best_clusters;
    model.bic_candidates = bic.candidates;
    model.bic_scores = bic.scores;
  }
  const auto ticc = ticc_settings(config, K);
  auto em = em_settings(config);
  int G = fixed_assignment ? K : config.components;

  std::vector<std::vector<int>> prev_labels;
  std::vector<int> prev_assignment;
  for (int it = 0; it < config.outer_iters; ++it) {
    const bool stop = annotated(it, [&] {
      IterationDiagnostics diag;
      auto seg = rmtticc::fit(train, rewards, model.penalty, ticc,
                              model.clusters.empty() ? std::nullopt : std::optional(model.clusters));
      diag.ticc_objective = seg.objective_trace.empty() ? 0.0 : seg.objective_trace.back();
      diag.ticc_iterations = seg.iterations;
      diag.label_changes = count_changes(prev_labels, seg.segmentation.labels);
      model.clusters = std::move(seg.models);
      if (it > 0 && diag.label_changes == 0) {
        // Same sub-trajectories as last time: the mixture stage would only
        // continue from its own result, so assignments are unchanged too.
        model.diagnostics.push_back(diag);
        return true;
      }
      const auto data = emedm::MixtureData::from_segmentation(train, seg.segmentation);

      if (fixed_assignment) {
        std::vector<int> assign;
        for (const auto& sub : seg.segmentation.sub_trajectories) assign.push_back(sub.cluster);
        model.mixture = emedm::fit_fixed_assignment(data, assign, K, train.action_count, config.edm);
        diag.mixture_log_likelihood = emedm::observed_log_likelihood(data, model.mixture);
      } else {
        if (G == 0) {
          G = emedm::select_components(data, config.max_components, train.action_count, config.edm, em).components;
        }
        if (!model.mixture.policies.empty()) em.initial_policies = model.mixture.policies;
        auto mix = emedm::fit(data, G, train.action_count, config.edm, em);
        diag.mixture_log_likelihood = mix.log_likelihood_trace.back();
        diag.em_iterations = mix.iterations;
        model.mixture = std::move(mix.mixture);
      }

      const auto assignment = argmax_rows(model.mixture.responsibilities);
      if (assignment.size() == prev_assignment.size()) {
        for (std::size_t u = 0; u < assignment.size(); ++u)
          if (assignment[u] != prev_assignment[u]) ++diag.assignment_changes;
      } else {
        diag.assignment_changes = assignment.size();
      }
      model.segmentation = std::move(seg.segmentation);
      prev_labels = model.segmentation.labels;
      prev_assignment = assignment;
      if (config.skip_regulator) {
        model.diagnostics.push_back(diag);
        return true;
      }

      const auto episodes = hireward::build_episodes(model.segmentation, model.mixture.responsibilities, train.size());
      const auto mdp = hireward::HighLevelMdp::from_episodes(episodes, K, model.mixture.components);
      const auto init = model.regulator.table.size() > 0 ? std::optional(model.regulator.table) : std::nullopt;
      auto reg = hireward::mlirl_fit(mdp, config.mlirl, init);
      diag.regulator_log_likelihood = reg.log_likelihood_trace.empty() ? 0.0 : reg.log_likelihood_trace.back();
      model.regulator = std::move(reg.regulator);
      rewards = hireward::per_timestep_rewards(train, model.segmentation, model.mixture.policies, model.regulator);
      model.penalty.phi = fit_phi(train, rewards);
      model.diagnostics.push_back(diag);
      return false;
    });
    if (stop) break;
  }
  if (model.regulator.table.size() == 0)
    model.regulator = hireward::RewardRegulator::ones(K, model.mixture.components, config.mlirl.temperature,
                                                      config.mlirl.discount);
  model.weighting = fixed_assignment ? Weighting::kClusterPolicy : Weighting::kCausalPosterior;
  return model;
}

}  // namespace

std::uint64_t edm_seed(const ThemesConfig& config) { return derive_seed(config.seed, {2}); }

ThemesModel fit(const Dataset& train, const ThemesConfig& config) { return fit_impl(train, config, false); }

Prediction predict_actions(const ThemesModel& model, const Dataset& test) {
  validate(test);
  if (test.size() > 0 && test.dim() != model.m)
    throw ArgumentError("test states have dimension " + std::to_string(test.dim()) + ", model expects " +
                        std::to_string(model.m));
  for (const auto& tr : test.trajectories)
    for (int a : tr.actions)
      if (a >= model.action_count) throw ArgumentError("test action outside the model's action set");
  const int G = model.mixture.components;
  if (G < 1 || model.clusters.empty()) throw ArgumentError("model is not fitted");

  const Vector log_prior = model.mixture.priors.array().log();
  Prediction out;
  out.probabilities.resize(test.size());
  out.labels.resize(test.size());
  parallel_for(test.size(), [&](std::size_t n) {
    const auto& tr = test.trajectories[n];
    const Matrix windows = stack_window_matrix(tr, model.window);
    const auto costs = rmtticc::switch_costs_action_free(tr, model.penalty);
    auto labels = rmtticc::viterbi_assign(rmtticc::emission_costs(windows, model.clusters), costs);

    std::vector<Matrix> logp(static_cast<std::size_t>(G));
    for (int g = 0; g < G; ++g) logp[static_cast<std::size_t>(g)] = model.mixture.policies[static_cast<std::size_t>(g)].log_probs(tr.states);

    const auto T = static_cast<Eigen::Index>(tr.length());
    Matrix probs = Matrix::Zero(T, model.action_count);
    Vector logw = log_prior;
    for (Eigen::Index t = 0; t < T; ++t) {
      const int k = labels[static_cast<std::size_t>(t)];
      if (model.weighting == Weighting::kClusterPolicy) {
        probs.row(t) = logp[static_cast<std::size_t>(std::min(k, G - 1))].row(t).array().exp();
        continue;
      }
      if (t == 0 || labels[static_cast<std::size_t>(t - 1)] != k) logw = log_prior;
      const double mx = logw.maxCoeff();
      const Vector w = (logw.array() - mx).exp();
      const double z = w.sum();
      for (int g = 0; g < G; ++g)
        probs.row(t) += (w(g) / z) * logp[static_cast<std::size_t>(g)].row(t).array().exp().matrix();
      for (int g = 0; g < G; ++g) logw(g) += logp[static_cast<std::size_t>(g)](t, tr.actions[static_cast<std::size_t>(t)]);
    }
    out.probabilities[n] = std::move(probs);
    out.labels[n] = std::move(labels);
  });
  return out;
}

Ablation parse_ablation(const std::string& name) {
  for (auto a : all_ablations())
    if (ablation_name(a) == name) return a;
  throw ArgumentError("unknown ablation '" + name + "' (expected EDM, EM-EDM, MT-TICC&EDM, THEMES_0 or THEMES)");
}

std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::kEdm: return "EDM";
    case Ablation::kEmEdm: return "EM-EDM";
    case Ablation::kMtTiccEdm: return "MT-TICC&EDM";
    case Ablation::kThemes0: return "THEMES_0";
    case Ablation::kThemes: return "THEMES";
  }
  return "THEMES";
}

std::vector<Ablation> all_ablations() {
  return {Ablation::kEdm, Ablation::kEmEdm, Ablation::kMtTiccEdm, Ablation::kThemes0, Ablation::kThemes};
}

ThemesConfig ablation_config(Ablation a, const ThemesConfig& base) {
  ThemesConfig c = base;
  switch (a) {
    case Ablation::kEdm:
      c.clusters = 1;
      c.components = 1;
      c.skip_regulator = true;
      break;
    case Ablation::kEmEdm:
      c.clusters = 1;
      c.skip_regulator = true;
      break;
    case Ablation::kMtTiccEdm:
    case Ablation::kThemes0:
      c.skip_regulator = true;
      break;
    case Ablation::kThemes:
      break;
  }
  return c;
}

ThemesModel run_ablation(Ablation a, const Dataset& train, const ThemesConfig& base) {
  return fit_impl(train, ablation_config(a, base), a == Ablation::kMtTiccEdm);
}

}  // namespace themes
