// Serial reference versus OpenMP for the two parallel kernels: the Monte-Carlo
// path loop and the Picard stage evaluation.

#include "cbve/simulator.hpp"

#include <benchmark/benchmark.h>

#include <cmath>

namespace
{

using namespace cbve;

SpecialForm bench_form(std::size_t cells)
{
    SpecialForm sf = SpecialForm::zero(1.0, cells);
    sf.gamma[0][0] = StieltjesMeasure(1.0, {{0, 0.5, -0.4}, {0.5, 1, 0.3}}, {{0.5, -0.2}});
    sf.gamma[0][1] = StieltjesMeasure(1.0, {{0, 1, 0.5}}, {}, Monotonicity::nondecreasing);
    sf.gamma[1][0] = StieltjesMeasure(1.0, {{0, 1, 0.2}}, {}, Monotonicity::nondecreasing);
    sf.gamma[1][1] = StieltjesMeasure(1.0, {{0, 1, -0.6}}, {});
    sf.mu[0] = JumpMeasure(1.0, {{0, 1, DiscreteSpatialMeasure({{1, 0, 0.8}, {0.3, 0.6, 0.5}})}},
                           {{0.5, DiscreteSpatialMeasure({{0.5, 0.5, 0.4}})}});
    sf.mu[1] = JumpMeasure(1.0, {{0, 1, DiscreteSpatialMeasure({{0, 1.2, 0.7}})}}, {});
    sf.grid = aligned_grid(sf.grid, sf);
    return sf;
}

void paths(benchmark::State& state, bool parallel)
{
    const PathSimulator sim(bench_form(100), 1.0);
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state)
    {
        auto values = sample_paths(
            sim, {1, 1}, n, SeedSpec{1}, [](const Pair& x) { return std::exp(-x[0] - x[1]); }, parallel);
        benchmark::DoNotOptimize(values.data());
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

void picard(benchmark::State& state, bool parallel)
{
    const auto sf = bench_form(static_cast<std::size_t>(state.range(0)));
    SolverOptions opts;
    opts.parallel = parallel;
    for (auto _ : state)
    {
        auto sol = solve_special_picard(sf, 1.0, {1, 1}, opts);
        benchmark::DoNotOptimize(sol.v.data());
    }
}

void BM_PathsSerial(benchmark::State& s) { paths(s, false); }
void BM_PathsParallel(benchmark::State& s) { paths(s, true); }
void BM_PicardSerial(benchmark::State& s) { picard(s, false); }
void BM_PicardParallel(benchmark::State& s) { picard(s, true); }

} // namespace

BENCHMARK(BM_PathsSerial)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PathsParallel)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PicardSerial)->Arg(20000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PicardParallel)->Arg(20000)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
