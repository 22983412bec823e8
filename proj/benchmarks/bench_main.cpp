#include <benchmark/benchmark.h>

#include <random>

#include "uedsr/event_core.hpp"
#include "uedsr/metrics.hpp"
#include "uedsr/network.hpp"
#include "uedsr/sensor_sim.hpp"

using namespace uedsr;

namespace {

EventStream random_events(int n, int width, int height) {
    std::mt19937_64 rng(1);
    std::vector<Event> events(n);
    for (int i = 0; i < n; ++i) {
        events[i].t = static_cast<Microseconds>(i) * 10;
        events[i].x = std::uniform_int_distribution<int>(0, width - 1)(rng);
        events[i].y = std::uniform_int_distribution<int>(0, height - 1)(rng);
        events[i].p = std::bernoulli_distribution(0.5)(rng) ? 1 : -1;
    }
    return EventStream(width, height, 0, static_cast<Microseconds>(n) * 10, std::move(events));
}

void BM_VoxelGrid(benchmark::State& state) {
    const EventStream s = random_events(static_cast<int>(state.range(0)), 64, 64);
    for (auto _ : state) benchmark::DoNotOptimize(encode_voxel_grid(s, kDefaultBins));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_VoxelGrid)->Arg(1'000)->Arg(100'000);

void BM_Representation(benchmark::State& state) {
    const EventStream s = random_events(50'000, 16, 16);
    for (auto _ : state) benchmark::DoNotOptimize(build_representation(s, s.duration() / 2, 0.2));
}
BENCHMARK(BM_Representation);

void BM_GenerateScene(benchmark::State& state) {
    SceneSpec spec;
    spec.width = static_cast<int>(state.range(0));
    spec.height = spec.width;
    SimulatorConfig sim;
    for (auto _ : state) {
        benchmark::DoNotOptimize(generate_scene(spec, sim));
        ++sim.seed;
    }
}
BENCHMARK(BM_GenerateScene)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_Forward(benchmark::State& state) {
    NetworkConfig cfg;
    cfg.base_channels = static_cast<int>(state.range(0));
    const auto model = ModelState<float>::initialized(cfg, 1);
    const Image blurry(64, 64, 0.5);
    const EventStream events = random_events(5'000, 16, 16);
    for (auto _ : state) benchmark::DoNotOptimize(forward(blurry, events, events.duration() / 2, model));
}
BENCHMARK(BM_Forward)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_Ssim(benchmark::State& state) {
    std::mt19937_64 rng(2);
    const int n = static_cast<int>(state.range(0));
    Image a(n, n), b(n, n);
    for (double& v : a.pixels()) v = std::uniform_real_distribution<double>(0, 1)(rng);
    for (double& v : b.pixels()) v = std::uniform_real_distribution<double>(0, 1)(rng);
    for (auto _ : state) benchmark::DoNotOptimize(ssim(a, b));
}
BENCHMARK(BM_Ssim)->Arg(64)->Arg(256);

}  // namespace
