#include <benchmark/benchmark.h>

#include "pims/partition.hpp"
#include "pims/workload.hpp"

namespace {

pims::Workload make_workload(std::size_t m) {
    pims::WorkloadSpec spec;
    spec.m = m;
    spec.n = m * 20;
    spec.seed = 7;
    return pims::generate(spec);
}

void run_strategy(benchmark::State& state, pims::Strategy s) {
    const auto w = make_workload(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto a = pims::assign(s, w.txns, w.spec.n, 10, 1);
        benchmark::DoNotOptimize(a);
    }
    state.SetComplexityN(state.range(0));
}

void BM_BFA(benchmark::State& state) { run_strategy(state, pims::Strategy::BFA); }
void BM_BA(benchmark::State& state) { run_strategy(state, pims::Strategy::BA); }
void BM_RA(benchmark::State& state) { run_strategy(state, pims::Strategy::RA); }

void BM_Generate(benchmark::State& state) {
    for (auto _ : state) {
        auto w = make_workload(static_cast<std::size_t>(state.range(0)));
        benchmark::DoNotOptimize(w);
    }
    state.SetComplexityN(state.range(0));
}

}  // namespace

BENCHMARK(BM_BFA)->RangeMultiplier(2)->Range(500, 8000)->Complexity()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BA)->RangeMultiplier(2)->Range(500, 8000)->Complexity()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RA)->RangeMultiplier(2)->Range(500, 8000)->Complexity()->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Generate)->RangeMultiplier(2)->Range(500, 8000)->Complexity()->Unit(benchmark::kMillisecond);
