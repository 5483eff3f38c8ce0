#include <benchmark/benchmark.h>

#include "quantfolio/hierarchical.hpp"
#include "quantfolio/mean_risk.hpp"
#include "quantfolio/model_selection.hpp"
#include "quantfolio/moments.hpp"
#include "quantfolio/priors.hpp"
#include "test_support.hpp"

namespace qf = quantfolio;

namespace {

void BM_MinVariance(benchmark::State& state) {
    const auto n = state.range(0);
    qf::ProblemSpec spec;
    spec.prior = qf::empirical_prior(qf::testing::synthetic_returns(500, n, 1));
    for (auto _ : state) benchmark::DoNotOptimize(qf::optimize(spec));
}
BENCHMARK(BM_MinVariance)->Arg(10)->Arg(50)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_MinCvar(benchmark::State& state) {
    const auto t = state.range(0);
    qf::ProblemSpec spec;
    spec.prior = qf::empirical_prior(qf::testing::synthetic_returns(t, 20, 2));
    spec.risk_measure = qf::RiskMeasure::cvar(0.95);
    for (auto _ : state) benchmark::DoNotOptimize(qf::optimize(spec));
}
BENCHMARK(BM_MinCvar)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Frontier(benchmark::State& state) {
    qf::ProblemSpec spec;
    spec.prior = qf::empirical_prior(qf::testing::synthetic_returns(500, 20, 3));
    const int threads = static_cast<int>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(qf::efficient_frontier(spec, 100, threads));
}
BENCHMARK(BM_Frontier)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_LedoitWolf(benchmark::State& state) {
    const auto r = qf::testing::synthetic_returns(1000, state.range(0), 4);
    for (auto _ : state) benchmark::DoNotOptimize(qf::ledoit_wolf(r));
}
BENCHMARK(BM_LedoitWolf)->Arg(20)->Arg(100)->Unit(benchmark::kMicrosecond);

void BM_Hrp(benchmark::State& state) {
    const auto prior = qf::empirical_prior(qf::testing::synthetic_returns(500, state.range(0), 5));
    for (auto _ : state) benchmark::DoNotOptimize(qf::hrp(prior));
}
BENCHMARK(BM_Hrp)->Arg(20)->Arg(100)->Unit(benchmark::kMicrosecond);

void BM_CpcvHrp(benchmark::State& state) {
    const auto r = qf::testing::synthetic_returns(500, 20, 6);
    const auto plan = qf::cpcv(500, {6, 2, 2, 0.01});
    for (auto _ : state) benchmark::DoNotOptimize(qf::cross_val_predict(qf::HrpAllocator{}, r, plan));
}
BENCHMARK(BM_CpcvHrp)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
