#include <benchmark/benchmark.h>

#include "xids/preprocess.hpp"
#include "xids/synth.hpp"
#include "xids/train.hpp"

namespace {

using namespace xids;

Dataset synthetic_train(std::size_t rows) {
  auto config = GenConfig::defaults();
  config.n_samples = rows;
  const auto table = clean(generate(config));
  return to_dataset(apply_preprocess(table, fit_preprocess(table)));
}

void BM_TrainGbt(benchmark::State& state) {
  const auto data = synthetic_train(static_cast<std::size_t>(state.range(0)));
  auto params = TrainParams::defaults_for(ModelKind::kGradientBoosted);
  params.n_boost_rounds = 10;
  for (auto _ : state) benchmark::DoNotOptimize(train_gbt(data, params));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainGbt)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);

void BM_TrainForest(benchmark::State& state) {
  const auto data = synthetic_train(static_cast<std::size_t>(state.range(0)));
  auto params = TrainParams::defaults_for(ModelKind::kRandomForest);
  params.n_trees = 10;
  for (auto _ : state) benchmark::DoNotOptimize(train_random_forest(data, params));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainForest)->Arg(2000)->Arg(8000)->Unit(benchmark::kMillisecond);

}  // namespace
