// Serial reference kernels vs the OpenMP implementations.

#include <benchmark/benchmark.h>

#include <algorithm>
#include <thread>

#include "neurolds/discrepancy.hpp"
#include "neurolds/parallel.hpp"
#include "neurolds/seqcore.hpp"

using namespace neurolds;

namespace {

const KernelSpec kSym{KernelFamily::sym, {}};
const PrefixWeights kUniform{WeightScheme::uniform, {}};

PointBuffer points(std::size_t n, std::size_t dim) {
    SequenceSpec s;
    s.kind = SequenceKind::sobol;
    s.dim = dim;
    s.burn_in = 128;
    return generate(s, n);
}

int max_threads() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

void BM_AllPrefixReference(benchmark::State& state) {
    const auto pts = points(state.range(0), 4);
    for (auto _ : state) benchmark::DoNotOptimize(reference::discrepancy_squared_all_prefixes(kSym, pts));
}

void BM_AllPrefix(benchmark::State& state) {
    const auto pts = points(state.range(0), 4);
    set_thread_count(static_cast<int>(state.range(1)));
    for (auto _ : state) benchmark::DoNotOptimize(discrepancy_squared_all_prefixes(kSym, pts));
    set_thread_count(1);
}

void BM_PrefixLossReference(benchmark::State& state) {
    const auto pts = points(state.range(0), 4);
    for (auto _ : state) benchmark::DoNotOptimize(reference::prefix_loss(kSym, kUniform, pts));
}

void BM_PrefixLoss(benchmark::State& state) {
    const auto pts = points(state.range(0), 4);
    set_thread_count(static_cast<int>(state.range(1)));
    for (auto _ : state) benchmark::DoNotOptimize(prefix_loss(kSym, kUniform, pts));
    set_thread_count(1);
}

void BM_PrefixGradReference(benchmark::State& state) {
    const auto pts = points(state.range(0), 4);
    for (auto _ : state) benchmark::DoNotOptimize(reference::prefix_loss_grad(kSym, kUniform, pts));
}

void BM_PrefixGrad(benchmark::State& state) {
    const auto pts = points(state.range(0), 4);
    set_thread_count(static_cast<int>(state.range(1)));
    for (auto _ : state) benchmark::DoNotOptimize(prefix_loss_grad(kSym, kUniform, pts));
    set_thread_count(1);
}

void threaded_args(benchmark::internal::Benchmark* b) {
    for (long n : {256, 1024, 4096}) {
        b->Args({n, 1});
        if (max_threads() > 1) b->Args({n, max_threads()});
    }
}

}  // namespace

BENCHMARK(BM_AllPrefixReference)->Arg(256)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AllPrefix)->Apply(threaded_args)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_PrefixLossReference)->Arg(256)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PrefixLoss)->Apply(threaded_args)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_PrefixGradReference)->Arg(256)->Arg(1024)->Arg(4096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PrefixGrad)->Apply(threaded_args)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
