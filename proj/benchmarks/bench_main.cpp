#include <benchmark/benchmark.h>

#include "ccid/neural.hpp"
#include "ccid/protocol_sim.hpp"
#include "ccid/rng.hpp"

namespace {

using namespace ccid;

std::vector<double> random_sequence(std::size_t steps, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(steps * features::kNumFeatures);
  for (auto& v : x) v = rng.uniform(-1.0, 1.0);
  return x;
}

nn::ModelConfig bench_config(std::size_t hidden, std::size_t layers) {
  nn::ModelConfig c;
  c.hidden_size = hidden;
  c.num_layers = layers;
  return c;
}

void BM_Forward(benchmark::State& state) {
  const auto cfg = bench_config(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const auto params = nn::init_params(cfg, 1);
  const auto x = random_sequence(60, 2);
  for (auto _ : state) benchmark::DoNotOptimize(nn::forward(x, 60, params, false, 0).logits);
}
BENCHMARK(BM_Forward)->Args({64, 1})->Args({128, 2})->Args({512, 3})->Unit(benchmark::kMillisecond);

void BM_LossAndGradsBatch8(benchmark::State& state) {
  const auto cfg = bench_config(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  const auto params = nn::init_params(cfg, 1);
  std::vector<std::vector<double>> xs;
  std::vector<nn::Example> batch;
  for (int i = 0; i < 8; ++i) xs.push_back(random_sequence(60, 10 + i));
  for (int i = 0; i < 8; ++i) batch.push_back({xs[i], 60, i % 4});
  for (auto _ : state) benchmark::DoNotOptimize(nn::loss_and_grads(batch, params, true, 3).loss);
}
BENCHMARK(BM_LossAndGradsBatch8)->Args({64, 1})->Args({128, 2})->Unit(benchmark::kMillisecond);

void BM_SimulateFlow(benchmark::State& state) {
  const auto label = label_from_index(static_cast<int>(state.range(0)));
  LinkConfig link;
  link.seed = 5;
  for (auto _ : state) benchmark::DoNotOptimize(sim::simulate_flow(label, link, 500'000'000).records.size());
}
BENCHMARK(BM_SimulateFlow)->DenseRange(0, 3)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
