#include <benchmark/benchmark.h>

#include "themes/edm.hpp"
#include "themes/rmtticc.hpp"
#include "themes/synthgen.hpp"
#include "themes/tglasso.hpp"

using namespace themes;

static void BM_Viterbi(benchmark::State& state) {
  const auto T = state.range(0);
  const auto K = state.range(1);
  Rng rng(1);
  Matrix e(T, K);
  for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = rng.uniform(0.0, 5.0);
  std::vector<double> sw(static_cast<std::size_t>(T), 2.0);
  for (auto _ : state) benchmark::DoNotOptimize(rmtticc::viterbi_assign(e, sw));
  state.SetItemsProcessed(state.iterations() * T);
}
BENCHMARK(BM_Viterbi)->Args({120, 4})->Args({120, 11})->Args({1000, 4});

static void BM_ToeplitzGlasso(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int w = 2;
  const Matrix theta = synthgen::make_block_toeplitz_precision(m, w, 0.5, 3);
  const Matrix cov = theta.inverse();
  Rng rng(2);
  const Eigen::LLT<Matrix> llt(cov);
  Matrix x(500, m * w);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  x = x * Matrix(llt.matrixU());
  const auto st = tglasso::empirical_stats(x);
  for (auto _ : state) benchmark::DoNotOptimize(tglasso::solve({st.covariance, st.count, 1e-3, w, m}));
}
BENCHMARK(BM_ToeplitzGlasso)->Arg(6)->Arg(12)->Unit(benchmark::kMillisecond);

static void BM_EdmEpoch(benchmark::State& state) {
  auto cfg = synthgen::default_preset(1);
  const auto data = synthgen::generate(cfg).first;
  edm::WeightedDemos demos;
  demos.states = Matrix(static_cast<Eigen::Index>(data.total_steps()), data.dim());
  Eigen::Index r = 0;
  for (const auto& tr : data.trajectories) {
    demos.states.middleRows(r, tr.states.rows()) = tr.states;
    r += tr.states.rows();
    demos.actions.insert(demos.actions.end(), tr.actions.begin(), tr.actions.end());
  }
  demos.weights.assign(demos.actions.size(), 1.0);
  edm::EdmConfig ec;
  ec.epochs = 1;
  ec.alpha = static_cast<double>(state.range(0)) / 2.0;
  for (auto _ : state) benchmark::DoNotOptimize(edm::train(demos, data.action_count, ec));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(demos.actions.size()));
}
// Argument 0 is behavior cloning only; 1 adds the occupancy loss (alpha 0.5).
BENCHMARK(BM_EdmEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
