#include "themes/emedm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "themes/errors.hpp"
#include "themes/parallel.hpp"
#include "themes/random.hpp"

namespace themes::emedm {

namespace {

double weighted_log_likelihood(const MixtureData& data, const std::vector<double>& w, const edm::PolicyNet& net) {
  const Matrix lp = net.log_probs(data.states);
  double s = 0.0;
  for (std::size_t i = 0; i < data.actions.size(); ++i) s += w[i] * lp(static_cast<Eigen::Index>(i), data.actions[i]);
  return s;
}

std::vector<double> row_weights(const MixtureData& data, const Matrix& resp, int g) {
  std::vector<double> w(data.actions.size());
  for (std::size_t u = 0; u < data.units(); ++u)
    for (auto i = data.unit_offsets[u]; i < data.unit_offsets[u + 1]; ++i) w[i] = resp(static_cast<Eigen::Index>(u), g);
  return w;
}

Matrix one_hot_rows(const Matrix& r) {
  Matrix out = Matrix::Zero(r.rows(), r.cols());
  for (Eigen::Index u = 0; u < r.rows(); ++u) {
    Eigen::Index g = 0;
    for (Eigen::Index j = 1; j < r.cols(); ++j)
      if (r(u, j) > r(u, g)) g = j;
    out(u, g) = 1.0;
  }
  return out;
}

Matrix posterior(const Matrix& loglik, const Vector& priors, double* observed) {
  Matrix r = loglik;
  double total = 0.0;
  for (Eigen::Index u = 0; u < r.rows(); ++u) {
    for (Eigen::Index g = 0; g < r.cols(); ++g)
      r(u, g) += priors(g) > 0.0 ? std::log(priors(g)) : -std::numeric_limits<double>::infinity();
    const double mx = r.row(u).maxCoeff();
    if (!std::isfinite(mx)) throw NumericalError("responsibility row has no finite entry");
    const double lse = mx + std::log((r.row(u).array() - mx).exp().sum());
    r.row(u) = (r.row(u).array() - lse).exp();
    total += lse;
  }
  if (observed) *observed = total;
  return r;
}

}  // namespace

MixtureData MixtureData::from_segmentation(const Dataset& data, const rmtticc::Segmentation& seg) {
  MixtureData out;
  std::size_t rows = 0;
  for (const auto& s : seg.sub_trajectories) {
    if (s.trajectory >= data.size() || s.end > data.trajectories[s.trajectory].length() || s.start >= s.end)
      throw ConsistencyError("segmentation does not match dataset");
    rows += s.length();
  }
  out.states.resize(static_cast<Eigen::Index>(rows), data.dim());
  out.unit_offsets.push_back(0);
  std::size_t r = 0;
  for (const auto& s : seg.sub_trajectories) {
    const auto& tr = data.trajectories[s.trajectory];
    for (auto t = s.start; t < s.end; ++t) {
      out.states.row(static_cast<Eigen::Index>(r++)) = tr.states.row(static_cast<Eigen::Index>(t));
      out.actions.push_back(tr.actions[t]);
    }
    out.unit_offsets.push_back(r);
  }
  return out;
}

MixtureData MixtureData::from_trajectories(const Dataset& data) {
  std::vector<std::vector<int>> labels;
  for (const auto& tr : data.trajectories) labels.emplace_back(tr.length(), 0);
  return from_segmentation(data, rmtticc::Segmentation::from_labels(std::move(labels)));
}

Matrix unit_log_likelihoods(const MixtureData& data, const std::vector<edm::PolicyNet>& policies) {
  const auto G = static_cast<Eigen::Index>(policies.size());
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(data.units()), G);
  std::vector<Matrix> lps(policies.size());
  parallel_for(policies.size(), [&](std::size_t g) { lps[g] = policies[g].log_probs(data.states); });
  for (std::size_t u = 0; u < data.units(); ++u)
    for (auto i = data.unit_offsets[u]; i < data.unit_offsets[u + 1]; ++i)
      for (Eigen::Index g = 0; g < G; ++g)
        out(static_cast<Eigen::Index>(u), g) += lps[static_cast<std::size_t>(g)](static_cast<Eigen::Index>(i), data.actions[i]);
  return out;
}

Matrix responsibilities(const MixtureData& data, const PolicyMixture& mixture) {
  if (mixture.components < 1) throw ArgumentError("mixture needs at least one component");
  if (data.units() == 0) throw ArgumentError("no sub-trajectories");
  return posterior(unit_log_likelihoods(data, mixture.policies), mixture.priors, nullptr);
}

double observed_log_likelihood(const MixtureData& data, const PolicyMixture& mixture) {
  double ll = 0.0;
  posterior(unit_log_likelihoods(data, mixture.policies), mixture.priors, &ll);
  return ll;
}

std::uint64_t component_seed(const edm::EdmConfig& config, const EmSettings& settings, int g) {
  if (settings.component_seeds) return settings.component_seeds->at(static_cast<std::size_t>(g));
  return config.seed + static_cast<std::uint64_t>(g);
}

std::uint64_t training_seed(std::uint64_t cseed, int iter) {
  return iter == 0 ? cseed : derive_seed(cseed, {static_cast<std::uint64_t>(iter)});
}

FitResult fit(const MixtureData& data, int G, int action_count, const edm::EdmConfig& edm_config,
              const EmSettings& settings) {
  const auto U = data.units();
  if (G < 1) throw ArgumentError("component count must be >= 1");
  if (static_cast<std::size_t>(G) > U) throw ArgumentError("more components than sub-trajectories");
  if (settings.component_seeds && settings.component_seeds->size() != static_cast<std::size_t>(G))
    throw ArgumentError("component seeds do not match component count");
  edm_config.validate();

  const auto Ui = static_cast<Eigen::Index>(U);
  const double collapse_floor = 1.0 / (10.0 * static_cast<double>(U));
  FitResult res;
  PolicyMixture& mix = res.mixture;
  mix.components = G;

  std::vector<bool> trained(static_cast<std::size_t>(G), false);
  Matrix resp;
  if (settings.initial_responsibilities) {
    resp = *settings.initial_responsibilities;
    if (resp.rows() != Ui || resp.cols() != G) throw ArgumentError("initial responsibilities have the wrong shape");
  } else if (settings.initial_policies && static_cast<int>(settings.initial_policies->size()) == G) {
    resp = posterior(unit_log_likelihoods(data, *settings.initial_policies), Vector::Constant(G, 1.0 / G), nullptr);
  } else {
    Rng rng(derive_seed(settings.seed, {0xd1e1u}));
    resp.resize(Ui, G);
    for (Eigen::Index u = 0; u < Ui; ++u) {
      const auto row = rng.dirichlet(static_cast<std::size_t>(G));
      for (int g = 0; g < G; ++g) resp(u, g) = row[static_cast<std::size_t>(g)];
    }
  }
  if (settings.initial_policies) {
    if (static_cast<int>(settings.initial_policies->size()) != G) throw ArgumentError("initial policies do not match G");
    mix.policies = *settings.initial_policies;
    trained.assign(static_cast<std::size_t>(G), true);
  } else {
    mix.policies.resize(static_cast<std::size_t>(G));
  }
  if (settings.hard) resp = one_hot_rows(resp);

  double prev_ll = -std::numeric_limits<double>::infinity();
  bool pending_reseed = false;
  int reseeds = 0;
  for (int it = 0; it < settings.max_iters; ++it) {
    // M-step: priors in closed form, policies by responsibility-weighted EDM.
    mix.priors = resp.colwise().sum().transpose() / static_cast<double>(U);
    parallel_for(static_cast<std::size_t>(G), [&](std::size_t gi) {
      const int g = static_cast<int>(gi);
      const auto w = row_weights(data, resp, g);
      double wsum = 0.0;
      for (double v : w) wsum += v;
      if (!(wsum > 0.0)) return;
      edm::WeightedDemos demos{data.states, data.actions, w};
      edm::EdmConfig cfg = edm_config;
      cfg.seed = training_seed(component_seed(edm_config, settings, g), it);
      if (!trained[gi]) {
        mix.policies[gi] = edm::train(demos, action_count, cfg).net;
        trained[gi] = true;
        return;
      }
      cfg.epochs = settings.refine_epochs;
      auto candidate = edm::train(demos, action_count, cfg, mix.policies[gi]).net;
      // Generalized EM: keep the update only if the expected complete-data
      // log-likelihood of this component does not drop.
      if (weighted_log_likelihood(data, w, candidate) >= weighted_log_likelihood(data, w, mix.policies[gi]))
        mix.policies[gi] = std::move(candidate);
    });
    for (int g = 0; g < G; ++g)
      if (!trained[static_cast<std::size_t>(g)])
        throw NumericalError("component " + std::to_string(g) + " received no weight");

    // E-step
    double ll = 0.0;
    Matrix next = posterior(unit_log_likelihoods(data, mix.policies), mix.priors, &ll);
    res.log_likelihood_trace.push_back(ll);
    res.reseeded.push_back(pending_reseed);
    pending_reseed = false;
    res.iterations = it + 1;
    mix.responsibilities = next;

    if (G == 1) break;
    const bool done = std::abs(ll - prev_ll) <= settings.rel_tol * std::abs(ll);
    prev_ll = ll;
    if (done) break;

    resp = settings.hard ? one_hot_rows(next) : next;
    const Vector nu = resp.colwise().sum().transpose() / static_cast<double>(U);
    if (reseeds < settings.max_reseeds) {
      for (int g = 0; g < G; ++g) {
        if (nu(g) >= collapse_floor) continue;
        // Re-seed from the least confidently assigned unit.
        Eigen::Index worst = 0;
        double worst_conf = std::numeric_limits<double>::infinity();
        for (Eigen::Index u = 0; u < Ui; ++u) {
          const double c = resp.row(u).maxCoeff();
          if (c < worst_conf) {
            worst_conf = c;
            worst = u;
          }
        }
        resp.row(worst).setZero();
        resp(worst, g) = 1.0;
        trained[static_cast<std::size_t>(g)] = false;
        pending_reseed = true;
      }
      if (pending_reseed) ++reseeds;
    }
  }

  for (Eigen::Index g = 0; g < mix.priors.size(); ++g)
    if (mix.priors(g) < collapse_floor) res.collapsed = true;
  return res;
}

PolicyMixture fit_fixed_assignment(const MixtureData& data, const std::vector<int>& assignment, int G,
                                   int action_count, const edm::EdmConfig& edm_config) {
  if (assignment.size() != data.units()) throw ArgumentError("assignment does not match units");
  Matrix resp = Matrix::Zero(static_cast<Eigen::Index>(data.units()), G);
  for (std::size_t u = 0; u < assignment.size(); ++u) {
    if (assignment[u] < 0 || assignment[u] >= G) throw ArgumentError("assignment out of range");
    resp(static_cast<Eigen::Index>(u), assignment[u]) = 1.0;
  }
  PolicyMixture mix;
  mix.components = G;
  mix.priors = resp.colwise().sum().transpose() / static_cast<double>(data.units());
  mix.policies.resize(static_cast<std::size_t>(G));
  parallel_for(static_cast<std::size_t>(G), [&](std::size_t g) {
    const auto w = row_weights(data, resp, static_cast<int>(g));
    edm::EdmConfig cfg = edm_config;
    cfg.seed = edm_config.seed + g;
    double wsum = 0.0;
    for (double v : w) wsum += v;
    if (wsum > 0.0) {
      mix.policies[g] = edm::train({data.states, data.actions, w}, action_count, cfg).net;
    } else {
      // A cluster with no pairs keeps an untrained policy.
      mix.policies[g] = edm::PolicyNet::initialize(static_cast<int>(data.states.cols()), cfg.hidden, action_count, cfg.seed);
    }
  });
  mix.responsibilities = resp;
  return mix;
}

SelectResult select_components(const MixtureData& data, int max_components, int action_count,
                               const edm::EdmConfig& edm_config, const EmSettings& settings) {
  SelectResult out;
  const double floor = 1.0 / (10.0 * static_cast<double>(data.units()));
  double prev = 0.0;
  for (int G = 1; G <= std::max(1, max_components); ++G) {
    if (static_cast<std::size_t>(G) > data.units()) break;
    const auto f = fit(data, G, action_count, edm_config, settings);
    const double ll = f.log_likelihood_trace.back();
    out.log_likelihoods.push_back(ll);
    if (G == 1) {
      prev = ll;
      out.components = 1;
      continue;
    }
    const bool empty = (f.mixture.priors.array() < floor).any();
    if (empty || ll - prev < 0.01 * std::abs(prev)) break;
    out.components = G;
    prev = ll;
  }
  return out;
}

}  // namespace themes::emedm
