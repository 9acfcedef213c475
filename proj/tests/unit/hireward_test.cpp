#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_util.hpp"
#include "themes/hireward.hpp"

using namespace themes;
using hireward::HighLevelStep;

namespace {

hireward::HighLevelMdp diagonal_mdp() {
  std::vector<hireward::Episode> eps;
  for (int n = 0; n < 6; ++n) eps.push_back({{0, 0}, {1, 1}, {0, 0}, {1, 1}});
  return hireward::HighLevelMdp::from_episodes(std::move(eps), 2, 2);
}

}  // namespace

TEST(Episodes, RunLengthEncoding) {
  const auto seg = rmtticc::Segmentation::from_labels({{0, 0, 1, 1, 0}, {1, 1}});
  Matrix resp(4, 2);
  resp << 0.2, 0.8, 0.9, 0.1, 0.3, 0.7, 0.5, 0.5;
  const auto eps = hireward::build_episodes(seg, resp, 2);
  ASSERT_EQ(eps.size(), 2u);
  EXPECT_EQ(eps[0], (hireward::Episode{{0, 1}, {1, 0}, {0, 1}}));
  // Ties go to the smaller component.
  EXPECT_EQ(eps[1], (hireward::Episode{{1, 0}}));
  EXPECT_THROW(hireward::build_episodes(seg, resp.topRows(3), 2), ConsistencyError);
}

TEST(Mdp, AddOneTransitions) {
  const auto mdp = hireward::HighLevelMdp::from_episodes({{{0, 1}, {1, 0}, {0, 1}}, {{0, 1}, {1, 1}}}, 2, 2);
  // (0,1) -> 1 twice; (1,0) -> 0 once; (0,0) and (1,1) unseen.
  EXPECT_NEAR(mdp.next(0, 1)(1), 3.0 / 4.0, 1e-15);
  EXPECT_NEAR(mdp.next(1, 0)(0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(mdp.next(0, 0)(0), 0.5, 1e-15);
  for (int k = 0; k < 2; ++k)
    for (int g = 0; g < 2; ++g) EXPECT_NEAR(mdp.next(k, g).sum(), 1.0, 1e-15);
}

TEST(SoftQ, BoltzmannRowsAndShiftInvariance) {
  const auto mdp = diagonal_mdp();
  hireward::MlirlSettings s;
  const Matrix r = (Matrix(2, 2) << 0.3, -0.2, 1.0, 0.4).finished();
  const auto a = hireward::soft_q(mdp, r, s);
  for (int k = 0; k < 2; ++k) EXPECT_NEAR(a.policy.row(k).sum(), 1.0, 1e-12);
  const auto b = hireward::soft_q(mdp, (r.array() + 2.5).matrix(), s);
  EXPECT_LT((a.policy - b.policy).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Mlirl, GradientMatchesFiniteDifferences) {
  const auto mdp = hireward::HighLevelMdp::from_episodes({{{0, 1}, {1, 0}, {0, 0}}, {{1, 1}, {0, 1}}}, 2, 2);
  hireward::MlirlSettings s;
  s.sweeps = 5;
  s.vi_tol = 0.0;
  const Matrix r = (Matrix(2, 2) << 0.1, 0.7, -0.4, 0.2).finished();
  const auto lg = hireward::log_likelihood_gradient(mdp, r, s);
  const Vector numeric = oracle::central_difference(
      [&](const Vector& v) {
        return hireward::log_likelihood_gradient(mdp, v.reshaped(2, 2), s).log_likelihood;
      },
      r.reshaped(), 1e-6);
  EXPECT_LT(oracle::relative_error(lg.gradient.reshaped(), numeric), 1e-4);
}

TEST(Mlirl, TrivialMdpHasNoChoice) {
  const auto mdp = hireward::HighLevelMdp::from_episodes({{{0, 0}, {0, 0}}}, 1, 1);
  hireward::MlirlSettings s;
  const auto res = hireward::mlirl_fit(mdp, s);
  EXPECT_NEAR(hireward::soft_q(mdp, res.regulator.table, s).policy(0, 0), 1.0, 1e-15);
  for (double ll : res.log_likelihood_trace) EXPECT_NEAR(ll, 0.0, 1e-12);
}

TEST(Mlirl, RecoversDiagonalPreference) {
  const auto mdp = diagonal_mdp();
  hireward::MlirlSettings s;
  s.learning_rate = 1e-2;
  s.steps = 200;
  const auto res = hireward::mlirl_fit(mdp, s);
  for (int k = 0; k < 2; ++k) {
    Eigen::Index g;
    res.regulator.table.row(k).maxCoeff(&g);
    EXPECT_EQ(g, k);
  }
  const auto& tr = res.log_likelihood_trace;
  for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_GE(tr[i], tr[i - 1] - 1e-8);
}

TEST(Rewards, UnitRegulatorSinglePolicy) {
  const auto data = testutil::random_dataset(2, 4, 2, 2, 1);
  const auto seg = rmtticc::Segmentation::from_labels({{0, 0, 0, 0}, {0, 0, 0, 0}});
  const auto net = testutil::constant_policy(2, 0.7);
  const auto r = hireward::per_timestep_rewards(data, seg, {net}, hireward::RewardRegulator::ones(1, 1));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t t = 0; t < 4; ++t)
      EXPECT_NEAR(r[n][t], data.trajectories[n].actions[t] == 1 ? 0.7 : 0.3, 1e-12);
}

TEST(Rewards, HandInstanceAndLinearity) {
  Trajectory tr;
  tr.id = "h";
  tr.states = Matrix::Zero(3, 1);
  tr.actions = {1, 0, 1};
  tr.timestamps = {0, 1, 2};
  const Dataset data{{tr}, {"x0"}, 2};
  const auto seg = rmtticc::Segmentation::from_labels({{0, 1, 1}});
  const std::vector<edm::PolicyNet> pols{testutil::constant_policy(1, 0.8), testutil::constant_policy(1, 0.4)};
  auto reg = hireward::RewardRegulator::ones(2, 2);
  reg.table << 1.0, 2.0, -1.0, 3.0;
  const auto r = hireward::per_timestep_rewards(data, seg, pols, reg);
  // t=0: k=0, a=1: (0.8*1 + 0.4*2)/2; t=1: k=1, a=0: (0.2*-1 + 0.6*3)/2; t=2: k=1, a=1: (0.8*-1 + 0.4*3)/2.
  EXPECT_NEAR(r[0][0], 0.8, 1e-12);
  EXPECT_NEAR(r[0][1], 0.8, 1e-12);
  EXPECT_NEAR(r[0][2], 0.2, 1e-12);

  auto scaled = reg;
  scaled.table *= 3.0;
  const auto r3 = hireward::per_timestep_rewards(data, seg, pols, scaled);
  for (std::size_t t = 0; t < 3; ++t) EXPECT_NEAR(r3[0][t], 3.0 * r[0][t], 1e-12);

  auto bad = reg;
  bad.table = Matrix::Ones(1, 2);
  EXPECT_THROW(hireward::per_timestep_rewards(data, seg, pols, bad), ConsistencyError);
}
