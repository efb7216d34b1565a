// Serial reference versus OpenMP kernels.

#include <benchmark/benchmark.h>


#include "cinet/dataset.hpp"
#include "cinet/incremental.hpp"
#include "cinet/rnn.hpp"

using namespace cinet;

namespace {

dataset::PairConfig pair_config() {
  dataset::PairConfig cfg;
  cfg.k_max = 4;
  cfg.corpora_per_k = 2;
  cfg.seeds_per_positive = 2;
  cfg.vocab_size = 50;
  cfg.num_scenes = 20;
  cfg.gibbs_iterations = 50;
  cfg.seed = 1;
  return cfg;
}

const dataset::PairSet& pairs() {
  static const dataset::PairSet set = dataset::build_pairs(pair_config());
  return set;
}

std::vector<const dataset::TrainingPair*> batch() {
  std::vector<const dataset::TrainingPair*> out;
  for (const auto& p : pairs().pairs) out.push_back(&p);
  return out;
}

rnn::RnnModel lstm() {
  rnn::RnnConfig cfg;
  cfg.layers = 2;
  cfg.input_dim = pairs().vocab_size;
  cfg.seed = 3;
  return rnn::RnnModel::initialize(cfg);
}

void BM_GradientsSerial(benchmark::State& state) {
  const auto model = lstm();
  const auto b = batch();
  for (auto _ : state) benchmark::DoNotOptimize(rnn::gradients_serial(model, b));
}

void BM_GradientsParallel(benchmark::State& state) {
  const auto model = lstm();
  const auto b = batch();
  for (auto _ : state) benchmark::DoNotOptimize(rnn::gradients(model, b));
}

void BM_EvaluateSerial(benchmark::State& state) {
  const auto model = lstm();
  const auto b = batch();
  for (auto _ : state) benchmark::DoNotOptimize(rnn::evaluate_serial(model, b));
}

void BM_EvaluateParallel(benchmark::State& state) {
  const auto model = lstm();
  const auto b = batch();
  for (auto _ : state) benchmark::DoNotOptimize(rnn::evaluate(model, b));
}

void BM_BuildPairsSerial(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(dataset::build_pairs_serial(pair_config()));
}

void BM_BuildPairsParallel(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(dataset::build_pairs(pair_config()));
}

incremental::SweepConfig sweep_config() {
  incremental::SweepConfig cfg;
  cfg.k0_values = {1, 2, 3, 4, 5};
  cfg.fits_per_k0 = 3;
  cfg.gibbs_iterations = 50;
  cfg.seed = 4;
  return cfg;
}

lda::Corpus sweep_corpus() {
  lda::SampleConfig sc;
  sc.k = 4;
  sc.num_scenes = 20;
  sc.vocab_size = 50;
  sc.scene_len = lda::SceneLength::fixed(20);
  sc.seed = 5;
  return lda::sample_corpus(sc).first;
}

void BM_SweepSerial(benchmark::State& state) {
  const auto corpus = sweep_corpus();
  const auto model = lstm();
  for (auto _ : state) {
    benchmark::DoNotOptimize(incremental::sweep_increment_serial(corpus, model, sweep_config()));
  }
}

void BM_SweepParallel(benchmark::State& state) {
  const auto corpus = sweep_corpus();
  const auto model = lstm();
  for (auto _ : state) {
    benchmark::DoNotOptimize(incremental::sweep_increment(corpus, model, sweep_config()));
  }
}

}  // namespace

BENCHMARK(BM_GradientsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradientsParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvaluateParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildPairsSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildPairsParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SweepSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SweepParallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
