#include "asyncheat/analysis.hpp"
#include "asyncheat/grid.hpp"
#include "asyncheat/modes.hpp"
#include "asyncheat/sim.hpp"

#include <benchmark/benchmark.h>

using namespace asyncheat;

namespace {

modes::AugmentedSpec spec(int num_pes, int q) {
  return modes::AugmentedSpec(grid::GridSpec(num_pes, 1, 0.1, 0.01, 0.5), q);
}

modes::SwitchingDistribution uniform(const modes::AugmentedSpec& aspec) {
  return modes::SwitchingDistribution::uniform(modes::dependency_edges(aspec.grid()).size(),
                                               aspec.buffer_len());
}

Eigen::MatrixXd worst_deflated(const modes::AugmentedSpec& aspec) {
  const auto w = modes::build_mode_matrix(aspec, modes::most_delayed_pattern(aspec)).w;
  return modes::deflate(w, modes::build_projector(aspec));
}

sim::RunConfig run_config(int num_pes, int q, int steps) {
  const auto aspec = spec(num_pes, q);
  const grid::BoundaryConditions bc{1.0, 0.0};
  return sim::RunConfig{aspec,
                        uniform(aspec),
                        grid::with_boundary(grid::cos2_initial_condition(aspec.grid()), bc),
                        bc,
                        steps,
                        1,
                        {0.01, 1.0},
                        {}};
}

}  // namespace

static void BM_AsyncStep(benchmark::State& state) {
  const auto aspec = spec(static_cast<int>(state.range(0)), 3);
  const sim::AsyncStencil stencil(aspec);
  const sim::DelaySampler sampler(uniform(aspec));
  auto s = sim::init_state(grid::cos2_initial_condition(aspec.grid()), 3);
  sim::Rng rng(1);
  modes::DelayPattern pattern;
  for (auto _ : state) {
    sampler.sample(rng, pattern);
    stencil.step(s, pattern);
    benchmark::DoNotOptimize(s.newest().data());
  }
  state.SetItemsProcessed(state.iterations() * aspec.grid_size());
}
BENCHMARK(BM_AsyncStep)->Arg(100)->Arg(1000)->Arg(10000);

static void BM_Ensemble(benchmark::State& state) {
  const auto cfg = run_config(100, 3, 1000);
  sim::EnsembleOptions opts;
  opts.num_runs = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sim::run_ensemble(cfg, opts).mean_error_norm);
  state.SetItemsProcessed(state.iterations() * state.range(0) * 1000);
}
BENCHMARK(BM_Ensemble)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);

static void BM_Lyapunov(benchmark::State& state) {
  const auto w = worst_deflated(spec(static_cast<int>(state.range(0)), 2));
  const auto method = static_cast<analysis::LyapunovMethod>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(analysis::solve_discrete_lyapunov(w, method).p);
}
BENCHMARK(BM_Lyapunov)
    ->Args({10, static_cast<int>(analysis::LyapunovMethod::kronecker)})
    ->Args({10, static_cast<int>(analysis::LyapunovMethod::schur)})
    ->Args({40, static_cast<int>(analysis::LyapunovMethod::schur)})
    ->Args({40, static_cast<int>(analysis::LyapunovMethod::series)})
    ->Args({100, static_cast<int>(analysis::LyapunovMethod::schur)})
    ->Unit(benchmark::kMillisecond);

static void BM_ExpectedMatrix(benchmark::State& state) {
  const auto aspec = spec(static_cast<int>(state.range(0)), 3);
  const auto dist = uniform(aspec);
  for (auto _ : state) benchmark::DoNotOptimize(modes::expected_matrix(aspec, dist));
}
BENCHMARK(BM_ExpectedMatrix)->Arg(10)->Arg(100)->Unit(benchmark::kMicrosecond);

static void BM_ExpectedMatrixEnumerated(benchmark::State& state) {
  const auto aspec = spec(static_cast<int>(state.range(0)), 2);
  const auto dist = uniform(aspec);
  for (auto _ : state) benchmark::DoNotOptimize(modes::expected_matrix_enumerated(aspec, dist));
}
BENCHMARK(BM_ExpectedMatrixEnumerated)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_TailConstants(benchmark::State& state) {
  const auto w = worst_deflated(spec(static_cast<int>(state.range(0)), 3));
  for (auto _ : state) benchmark::DoNotOptimize(analysis::tail_constants(w).k0);
}
BENCHMARK(BM_TailConstants)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
