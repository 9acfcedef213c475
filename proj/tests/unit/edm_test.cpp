#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "themes/edm.hpp"

using namespace themes;
using edm::PolicyNet;

namespace {

Matrix gaussian_rows(int n, int m, Rng& rng) {
  Matrix x(n, m);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

edm::WeightedDemos separable_demos(int n, std::uint64_t seed) {
  Rng rng(seed);
  edm::WeightedDemos d;
  d.states = gaussian_rows(n, 2, rng);
  for (int i = 0; i < n; ++i) {
    d.actions.push_back(d.states(i, 0) + 0.5 * d.states(i, 1) > 0.0 ? 1 : 0);
    d.weights.push_back(1.0);
  }
  return d;
}

edm::EdmConfig quick_config() {
  edm::EdmConfig c;
  c.hidden = 8;
  c.epochs = 20;
  c.batch_size = 32;
  c.replay_buffer_size = 64;
  c.negative_batch_size = 8;
  c.sgld_steps = 5;
  return c;
}

}  // namespace

TEST(PolicyNet, ProbabilitiesAndEnergyIdentities) {
  const auto net = PolicyNet::initialize(3, 5, 4, 2);
  Rng rng(1);
  const Matrix x = gaussian_rows(10, 3, rng);
  const Matrix logits = net.logits(x);
  const Matrix lp = net.log_probs(x);
  const Matrix p = net.probs(x);
  const Vector e = net.energy(x);
  for (int i = 0; i < 10; ++i) {
    EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-12);
    const double lse = std::log(logits.row(i).array().exp().sum());
    EXPECT_NEAR(e(i), -lse, 1e-12);
    for (int a = 0; a < 4; ++a) EXPECT_NEAR(lp(i, a), logits(i, a) - lse, 1e-12);
  }
}

TEST(PolicyNet, ParameterRoundTrip) {
  auto net = PolicyNet::initialize(3, 4, 2, 7);
  const Vector flat = net.parameters();
  EXPECT_EQ(static_cast<std::size_t>(flat.size()), net.parameter_count());
  auto other = PolicyNet::initialize(3, 4, 2, 8);
  other.input_shift = net.input_shift;
  other.input_scale = net.input_scale;
  other.set_parameters(flat);
  EXPECT_EQ(other, net);
}

TEST(PolicyNet, EnergyGradientMatchesFiniteDifferences) {
  auto net = PolicyNet::initialize(3, 4, 2, 3);
  net.input_shift = Vector::Constant(3, 0.2);
  net.input_scale = Vector::Constant(3, 1.5);
  Rng rng(2);
  const Matrix x = gaussian_rows(1, 3, rng);
  const Vector analytic = net.energy_gradient(x).row(0).transpose();
  const Vector numeric = oracle::central_difference(
      [&](const Vector& v) { return net.energy(v.transpose())(0); }, x.row(0).transpose(), 1e-5);
  EXPECT_LT(oracle::relative_error(analytic, numeric), 1e-6);
}

TEST(BcLoss, UniformLogitsGiveLogTwo) {
  auto net = PolicyNet::initialize(2, 3, 2, 1);
  net.w2.setZero();
  net.b2.setZero();
  Rng rng(1);
  const Matrix x = gaussian_rows(6, 2, rng);
  const std::vector<int> a{0, 1, 0, 1, 1, 0};
  const std::vector<double> w(6, 1.0);
  EXPECT_NEAR(edm::bc_loss(x, a, w, net), std::numbers::ln2, 1e-12);
  EXPECT_NEAR(edm::bc_loss(x, a, w, net), 0.6931, 1e-4);
}

TEST(BcLoss, ConfidentCorrectLogitsApproachZero) {
  auto net = PolicyNet::initialize(1, 1, 2, 1);
  net.w1.setZero();
  net.b1.setZero();
  net.w2.setZero();
  net.b2 << 0.0, 50.0;
  const Matrix x = Matrix::Zero(3, 1);
  const std::vector<int> a{1, 1, 1};
  const std::vector<double> w(3, 1.0);
  EXPECT_LT(edm::bc_loss(x, a, w, net), 1e-20);
}

TEST(BcLoss, HalvingWeightsLeavesLossUnchanged) {
  const auto net = PolicyNet::initialize(2, 4, 3, 5);
  Rng rng(3);
  const Matrix x = gaussian_rows(7, 2, rng);
  const std::vector<int> a{0, 1, 2, 2, 1, 0, 1};
  std::vector<double> w{1, 2, 0.5, 3, 1, 1, 0.25};
  const double base = edm::bc_loss(x, a, w, net);
  for (auto& v : w) v *= 0.5;
  EXPECT_EQ(edm::bc_loss(x, a, w, net), base);
  EXPECT_THROW(edm::bc_loss(x, a, std::vector<double>(7, 0.0), net), ArgumentError);
}

TEST(OccupancyLoss, IdenticalBatchesAndConstantEnergy) {
  auto net = PolicyNet::initialize(3, 4, 2, 9);
  Rng rng(4);
  const Matrix x = gaussian_rows(5, 3, rng);
  EXPECT_EQ(edm::occupancy_loss(x, x, net), 0.0);
  net.w2.setZero();
  net.b2.setConstant(0.3);
  EXPECT_NEAR(edm::occupancy_loss(x, gaussian_rows(8, 3, rng), net), 0.0, 1e-15);
}

TEST(CompositeLoss, GradientMatchesFiniteDifferences) {
  auto net = PolicyNet::initialize(3, 4, 2, 11);
  net.input_shift = (Vector(3) << 0.1, -0.2, 0.3).finished();
  net.input_scale = (Vector(3) << 1.0, 2.0, 0.5).finished();
  Rng rng(5);
  const Matrix x = gaussian_rows(6, 3, rng);
  const Matrix neg = gaussian_rows(4, 3, rng);
  const std::vector<int> a{0, 1, 1, 0, 1, 0};
  const std::vector<double> w{1.0, 0.5, 2.0, 1.0, 0.3, 0.7};
  for (double alpha : {0.0, 0.5, 2.0}) {
    const auto lg = edm::composite_loss(net, x, a, w, neg, alpha);
    auto probe = net;
    const Vector numeric = oracle::central_difference(
        [&](const Vector& p) {
          probe.set_parameters(p);
          return edm::composite_loss(probe, x, a, w, neg, alpha).total;
        },
        net.parameters(), 1e-5);
    EXPECT_LT(oracle::relative_error(lg.gradient, numeric), 1e-4) << "alpha " << alpha;
    EXPECT_NEAR(lg.total, lg.bc + alpha * lg.occupancy, 1e-14);
  }
}

TEST(Sgld, QuadraticStationaryVariance) {
  edm::QuadraticEnergy e{Matrix::Identity(1, 1), Vector::Zero(1)};
  const double step = 0.1, noise = 0.2;
  const Matrix x = edm::sgld_sample(e, Matrix::Zero(20000, 1), 200, step, noise, 3);
  const double var = x.squaredNorm() / static_cast<double>(x.rows());
  const double expected = oracle::langevin_stationary_variance(1.0, step, noise);
  EXPECT_NEAR(var / expected, 1.0, 0.05);
}

TEST(Sgld, NoiselessContraction) {
  edm::QuadraticEnergy e{Matrix::Identity(2, 2), Vector::Zero(2)};
  Matrix x = (Matrix(1, 2) << 3.0, -4.0).finished();
  double prev = x.norm();
  for (int s = 0; s < 20; ++s) {
    x = edm::sgld_sample(e, x, 1, 1.5, 0.0, 1);
    EXPECT_LT(x.norm(), prev);
    prev = x.norm();
  }
}

TEST(Sgld, SeedDeterminesChain) {
  const auto net = PolicyNet::initialize(2, 4, 2, 1);
  Rng rng(7);
  const Matrix x0 = gaussian_rows(5, 2, rng);
  const Matrix a = edm::sgld_sample(net, x0, 10, 0.01, 0.01, 42);
  EXPECT_EQ(a, edm::sgld_sample(net, x0, 10, 0.01, 0.01, 42));
  EXPECT_NE(a, edm::sgld_sample(net, x0, 10, 0.01, 0.01, 43));
  EXPECT_THROW(edm::sgld_sample(net, x0, 0, 0.01, 0.01, 42), ArgumentError);
}

TEST(Sgld, DivergenceReportsStep) {
  edm::QuadraticEnergy e{Matrix::Identity(1, 1) * -1e200, Vector::Zero(1)};
  try {
    edm::sgld_sample(e, Matrix::Ones(1, 1), 10, 1.0, 0.0, 1);
    FAIL();
  } catch (const SamplerError& err) {
    EXPECT_GE(err.step(), 0);
  }
}

TEST(Train, BehaviorCloningReducesLoss) {
  const auto demos = separable_demos(200, 1);
  auto cfg = quick_config();
  cfg.alpha = 0.0;
  const auto init = PolicyNet::initialize(2, cfg.hidden, 2, cfg.seed);
  const auto res = edm::train(demos, 2, cfg);
  auto start = init;
  start.input_shift = res.net.input_shift;
  start.input_scale = res.net.input_scale;
  EXPECT_LT(edm::bc_loss(demos.states, demos.actions, demos.weights, res.net),
            edm::bc_loss(demos.states, demos.actions, demos.weights, start));
}

TEST(Train, SeparableDemosReachHighAccuracy) {
  const auto demos = separable_demos(300, 2);
  auto cfg = quick_config();
  cfg.epochs = 60;
  const auto res = edm::train(demos, 2, cfg);
  const Matrix p = res.net.probs(demos.states);
  int correct = 0;
  for (int i = 0; i < p.rows(); ++i) correct += (p(i, 1) > 0.5 ? 1 : 0) == demos.actions[static_cast<std::size_t>(i)];
  EXPECT_GE(correct / 300.0, 0.95);
}

TEST(Train, DeterministicAndWeightScaleInvariant) {
  auto demos = separable_demos(100, 3);
  const auto cfg = quick_config();
  const auto a = edm::train(demos, 2, cfg);
  const auto b = edm::train(demos, 2, cfg);
  EXPECT_EQ(a.net, b.net);
  EXPECT_EQ(a.loss_trace, b.loss_trace);
  for (auto& w : demos.weights) w *= 0.5;
  const auto c = edm::train(demos, 2, cfg);
  EXPECT_EQ(a.loss_trace, c.loss_trace);
}

TEST(Train, SamplerSettingsIrrelevantWithoutOccupancy) {
  const auto demos = separable_demos(80, 4);
  auto cfg = quick_config();
  cfg.alpha = 0.0;
  const auto a = edm::train(demos, 2, cfg);
  cfg.sgld_steps = 50;
  cfg.sgld_step_size = 0.3;
  cfg.replay_buffer_size = 7;
  cfg.reinit_prob = 0.9;
  const auto b = edm::train(demos, 2, cfg);
  EXPECT_EQ(a.net, b.net);
}

TEST(Train, InvalidInputsRejected) {
  auto demos = separable_demos(10, 5);
  auto cfg = quick_config();
  cfg.learning_rate = -1.0;
  EXPECT_THROW(edm::train(demos, 2, cfg), ConfigurationError);
  demos.actions[0] = 5;
  EXPECT_THROW(edm::train(demos, 2, quick_config()), InputError);
}
