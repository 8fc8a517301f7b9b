// Kernel timings on the hidden shapes of the full architecture.
// Args are (n_in, n_out) with sparsity fixed at 88.50% unless noted.

#include <benchmark/benchmark.h>

#include <random>

#include "setnet/network.hpp"
#include "setnet/set_evolution.hpp"
#include "setnet/sparse_weights.hpp"

using namespace setnet;

namespace {

constexpr std::size_t kBatch = 100;

DenseBatch random_batch(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  DenseBatch b(rows, cols);
  for (auto& v : b.values) v = n(rng);
  return b;
}

SparseWeights layer(benchmark::State& state, double sparsity = 0.885) {
  std::mt19937_64 rng(1);
  return init_sparse_layer(SparsityLevel(sparsity), static_cast<std::size_t>(state.range(0)),
                           static_cast<std::size_t>(state.range(1)), rng);
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({3072, 4000})->Args({4000, 1000})->Args({1000, 4000})->Unit(benchmark::kMillisecond);
}

void BM_SparseForward(benchmark::State& state) {
  const auto w = layer(state);
  const auto x = random_batch(kBatch, w.n_in(), 2);
  for (auto _ : state) benchmark::DoNotOptimize(sparse_forward(w, x));
  state.counters["nnz"] = static_cast<double>(w.nnz());
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * w.nnz() * kBatch));
}
BENCHMARK(BM_SparseForward)->Apply(shapes);

void BM_DenseForward(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto w = init_dense_layer(static_cast<std::size_t>(state.range(0)),
                                  static_cast<std::size_t>(state.range(1)), rng);
  const auto x = random_batch(kBatch, w.n_in, 2);
  for (auto _ : state) benchmark::DoNotOptimize(dense_forward(w, x));
}
BENCHMARK(BM_DenseForward)->Apply(shapes);

void BM_SparseBackward(benchmark::State& state) {
  const auto w = layer(state);
  const auto x = random_batch(kBatch, w.n_in(), 2);
  const auto g = random_batch(kBatch, w.n_out(), 3);
  for (auto _ : state) benchmark::DoNotOptimize(sparse_backward(w, x, g));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * w.nnz() * kBatch));
}
BENCHMARK(BM_SparseBackward)->Apply(shapes);

void BM_Evolve(benchmark::State& state) {
  const auto w = layer(state);
  std::mt19937_64 rng(4);
  const EvolutionConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(evolve(w, cfg, rng));
  state.counters["nnz"] = static_cast<double>(w.nnz());
}
BENCHMARK(BM_Evolve)->Apply(shapes);

void BM_InitSparseLayer(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const auto n_in = static_cast<std::size_t>(state.range(0));
  const auto n_out = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(init_sparse_layer(SparsityLevel(0.885), n_in, n_out, rng));
}
BENCHMARK(BM_InitSparseLayer)->Apply(shapes);

// Low sparsity exercises the complement path of the sampler.
void BM_InitSparseLayerDenseish(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const auto n_in = static_cast<std::size_t>(state.range(0));
  const auto n_out = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(init_sparse_layer(SparsityLevel(0.4), n_in, n_out, rng));
}
BENCHMARK(BM_InitSparseLayerDenseish)->Args({4000, 1000})->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  NetworkConfig cfg;
  cfg.sparsity = 0.885;
  std::mt19937_64 rng(6);
  const Network net(cfg, rng);
  const auto x = random_batch(kBatch, cfg.input_dim(), 7);
  DenseBatch y(kBatch, cfg.class_count());
  for (std::size_t r = 0; r < kBatch; ++r) y.at(r, r % cfg.class_count()) = 1.0;
  std::mt19937_64 drop(8);
  for (auto _ : state) {
    const auto f = forward(net, x, true, &drop);
    benchmark::DoNotOptimize(loss_and_backward(net, f.trace, f.probs, y));
  }
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
