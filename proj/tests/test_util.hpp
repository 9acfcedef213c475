#pragma once

#include <filesystem>
#include <string>

#include "themes/edm.hpp"
#include "themes/random.hpp"
#include "themes/trajdata.hpp"

namespace testutil {

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::path(THEMES_TEST_TMP) / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline themes::Trajectory random_trajectory(const std::string& id, std::size_t T, int m, int actions,
                                            themes::Rng& rng) {
  themes::Trajectory tr;
  tr.id = id;
  tr.states = themes::Matrix(static_cast<Eigen::Index>(T), m);
  for (Eigen::Index i = 0; i < tr.states.size(); ++i) tr.states.data()[i] = rng.normal();
  double clock = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    tr.actions.push_back(static_cast<int>(rng.index(static_cast<std::size_t>(actions))));
    clock += 0.1 + rng.exponential(1.0);
    tr.timestamps.push_back(clock);
  }
  return tr;
}

inline themes::Dataset random_dataset(std::size_t n, std::size_t T, int m, int actions, std::uint64_t seed) {
  themes::Rng rng(seed);
  themes::Dataset d;
  d.action_count = actions;
  for (int j = 0; j < m; ++j) d.feature_names.push_back("x" + std::to_string(j));
  for (std::size_t i = 0; i < n; ++i) d.trajectories.push_back(random_trajectory("t" + std::to_string(i), T, m, actions, rng));
  return d;
}

// Two-action policy that ignores the state: P(a = 1) = p1.
inline themes::edm::PolicyNet constant_policy(int m, double p1, int hidden = 2) {
  auto net = themes::edm::PolicyNet::initialize(m, hidden, 2, 1);
  net.w1.setZero();
  net.b1.setZero();
  net.w2.setZero();
  net.b2 << 0.0, std::log(p1 / (1.0 - p1));
  net.input_shift = themes::Vector::Zero(m);
  net.input_scale = themes::Vector::Ones(m);
  return net;
}

}  // namespace testutil
