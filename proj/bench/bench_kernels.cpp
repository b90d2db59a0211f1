// Serial reference vs OpenMP paths of the data-parallel kernels. Each
// benchmark takes the execution mode as its argument: 0 = serial,
// 1 = parallel.

#include <vector>

#include <benchmark/benchmark.h>

#include "starseg/decode.hpp"
#include "starseg/encode.hpp"
#include "starseg/metrics.hpp"
#include "support/synth.hpp"

namespace {

using namespace starseg;

constexpr int kRays = 32;
constexpr int kClasses = 6;

Exec mode(const benchmark::State& state) { return state.range(0) == 0 ? Exec::Serial : Exec::Parallel; }

void label_args(benchmark::internal::Benchmark* b) {
    b->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond)->UseRealTime();
}

const LabelImage& sample_label() {
    static const LabelImage label = synth::make_label(7);
    return label;
}

const std::vector<LabelImage>& sample_dataset() {
    static const std::vector<LabelImage> labels = [] {
        std::vector<LabelImage> out;
        for (std::uint64_t s = 0; s < 16; ++s) out.push_back(synth::make_label(100 + s));
        return out;
    }();
    return labels;
}

void BM_EdtProb(benchmark::State& state) {
    const auto& label = sample_label();
    for (auto _ : state) benchmark::DoNotOptimize(edt_prob(label.instance_map, mode(state)));
}
BENCHMARK(BM_EdtProb)->Apply(label_args);

void BM_EncodeTargets(benchmark::State& state) {
    const auto& label = sample_label();
    const RayConfig rays(kRays);
    for (auto _ : state) {
        benchmark::DoNotOptimize(encode_targets(label, rays, kClasses, ProbMode::Edt, mode(state)));
    }
}
BENCHMARK(BM_EncodeTargets)->Apply(label_args);

void BM_Nms(benchmark::State& state) {
    const RayConfig rays(kRays);
    Rng rng(11);
    const auto cands = synth::random_candidates(rng, 800, kRays, 128.0, 16.0);
    DecodeConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(nms(cands, cfg, rays, mode(state)));
}
BENCHMARK(BM_Nms)->Apply(label_args);

void BM_Decode(benchmark::State& state) {
    const RayConfig rays(kRays);
    auto pred = encode_targets(sample_label(), rays, kClasses);
    synth::break_ties(pred, 3);
    DecodeConfig cfg;
    for (auto _ : state) benchmark::DoNotOptimize(decode(pred, cfg, rays, mode(state)));
}
BENCHMARK(BM_Decode)->Apply(label_args);

void BM_Evaluate(benchmark::State& state) {
    const auto& labels = sample_dataset();
    for (auto _ : state) benchmark::DoNotOptimize(evaluate(labels, labels, kClasses, mode(state)));
}
BENCHMARK(BM_Evaluate)->Apply(label_args);

}  // namespace

BENCHMARK_MAIN();
