// Copyright 2026 The wearembed Authors.
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <numeric>

#include "wearembed/adam.hpp"
#include "wearembed/datapipe.hpp"
#include "wearembed/model.hpp"
#include "wearembed/trainer.hpp"

namespace wearembed {
namespace {

const std::vector<UserArchive>& synthetic() {
  static const std::vector<UserArchive> data = generate_synthetic(SynthSpec{});
  return data;
}

Model initialised_model() {
  Model model;
  Rng rng(7);
  model.initialize(rng);
  return model;
}

void BM_EmbedDay(benchmark::State& state) {
  const Model model = initialised_model();
  const DayLongSeries& day = synthetic().front().days.front();
  for (auto _ : state) benchmark::DoNotOptimize(model.embed_day(day));
}
BENCHMARK(BM_EmbedDay)->Unit(benchmark::kMillisecond);

void BM_Aggregate(benchmark::State& state) {
  const Model model = initialised_model();
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<std::vector<double>> embeddings;
  std::vector<Date> dates;
  for (const auto& day : synthetic().front().days) {
    if (embeddings.size() == n) break;
    embeddings.push_back(model.embed_day(day));
    dates.push_back(day.date);
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(aggregate_embeddings(embeddings, dates, model.aggregator()));
  }
}
BENCHMARK(BM_Aggregate)->Arg(6)->Arg(30);

// One optimizer step; the argument is the batch size.
void BM_TrainStep(benchmark::State& state) {
  Model model = initialised_model();
  const auto& archives = synthetic();
  TrainConfig config;
  config.batch_size = static_cast<std::size_t>(state.range(0));
  AdamState adam = AdamState::for_parameters(model.parameters());
  std::vector<std::size_t> users(archives.size());
  std::iota(users.begin(), users.end(), 0);
  const std::vector<std::size_t> anchors(users.begin(), users.begin() + config.batch_size);
  Rng rng(11);
  for (auto _ : state) {
    benchmark::DoNotOptimize(train_step(model, adam, archives, anchors, users, config, rng));
  }
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace wearembed
