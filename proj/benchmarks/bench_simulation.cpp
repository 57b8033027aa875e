#include <benchmark/benchmark.h>

#include "pims/experiment.hpp"
#include "pims/workload.hpp"

namespace {

// Full run to quiescence; range(0) is m, range(1) is pi in percent.
void BM_Run(benchmark::State& state, pims::SimStrategy strategy) {
    pims::WorkloadSpec spec;
    spec.m = static_cast<std::size_t>(state.range(0));
    spec.n = spec.m * 20;
    spec.pi = static_cast<double>(state.range(1)) / 100.0;
    spec.seed = 3;
    const auto w = pims::generate(spec);
    pims::SimConfig cfg;
    cfg.strategy = strategy;
    cfg.lambda = 0.1;
    cfg.seed = 3;
    std::size_t events = 0;
    for (auto _ : state) {
        auto r = pims::run(w, cfg);
        events += r.trace.size();
        benchmark::DoNotOptimize(r);
    }
    state.counters["events/s"] = benchmark::Counter(static_cast<double>(events), benchmark::Counter::kIsRate);
}

void BM_RunBFA(benchmark::State& state) { BM_Run(state, pims::SimStrategy::BFA); }
void BM_RunOneIB(benchmark::State& state) { BM_Run(state, pims::SimStrategy::OneIB); }
void BM_RunITDB(benchmark::State& state) { BM_Run(state, pims::SimStrategy::ITDB); }

}  // namespace

BENCHMARK(BM_RunBFA)->Args({1000, 0})->Args({1000, 5})->Args({5000, 5})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RunOneIB)->Args({1000, 5})->Args({5000, 5})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RunITDB)->Args({1000, 5})->Args({5000, 5})->Unit(benchmark::kMillisecond);
