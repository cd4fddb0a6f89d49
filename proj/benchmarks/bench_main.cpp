#include <random>

#include <benchmark/benchmark.h>

#include "adml/dgp.hpp"
#include "adml/hal_basis.hpp"
#include "adml/lasso.hpp"
#include "adml/simulation.hpp"

namespace {

using namespace adml;

void BM_BasisExpansion(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto knots = static_cast<std::size_t>(state.range(1));
  const auto data = sim::sample_dgp(sim::DgpSpec{}, n, 1);
  const auto spec = basis::build_additive_basis(data.W, knots, basis::Block::covariate_only, true, true);
  for (auto _ : state) {
    auto design = basis::expand(spec, data.W);
    benchmark::DoNotOptimize(design.values.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * spec.column_count()));
}
BENCHMARK(BM_BasisExpansion)->Args({1000, 10})->Args({1000, 50})->Args({2000, 76});

void BM_LassoPath(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto knots = static_cast<std::size_t>(state.range(1));
  const auto data = sim::sample_dgp(sim::DgpSpec{}, n, 2);
  const auto spec = basis::build_additive_basis(data.W, knots, basis::Block::covariate_only, false, true);
  const Eigen::MatrixXd X = basis::expand(spec, data.W).values;
  const lasso::GramProblem problem(lasso::Moments::compute(X, data.Y), true);
  const Eigen::VectorXd pw = Eigen::VectorXd::Ones(X.cols());
  const auto grid = lasso::log_grid(problem.lambda_max(pw));
  for (auto _ : state) {
    auto path = lasso::solve_path(problem, grid, pw, {});
    benchmark::DoNotOptimize(path.sweeps);
  }
}
BENCHMARK(BM_LassoPath)->Args({1000, 10})->Args({1000, 50})->Args({2000, 76})->Unit(benchmark::kMillisecond);

void BM_Replication(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const sim::DgpSpec spec;
  const std::vector<estimators::Estimator> all{
      estimators::Estimator::plug_in_admle, estimators::Estimator::partially_linear_admle,
      estimators::Estimator::semiparametric_intercept, estimators::Estimator::aipw};
  const sim::SimulationConfig config;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    auto record = sim::run_replication(spec, n, all, ++seed, config);
    benchmark::DoNotOptimize(record.treated_fraction);
  }
}
BENCHMARK(BM_Replication)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
