#include <benchmark/benchmark.h>

#include "fewshot/episode_sampler.hpp"
#include "fewshot/meta_trainer.hpp"
#include "fewshot/metric_classifier.hpp"
#include "fewshot/random.hpp"
#include "fewshot/synthetic.hpp"

namespace fs = fewshot;

namespace {

fs::DatasetManifest bench_manifest(std::size_t dim) {
  fs::SyntheticSpec spec;
  spec.classes = 64;
  spec.samples_per_class = 100;
  spec.dim = dim;
  spec.seed = 1;
  return fs::generate_gaussian_clusters(spec);
}

fs::ProjectionHead random_head(std::size_t dim) {
  fs::Rng rng(2);
  fs::ProjectionHead head(dim, dim, false);
  for (double& w : head.weights()) w = rng.normal();
  return head;
}

void BM_Classify(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const std::size_t n_way = 20;
  fs::Rng rng(3);
  std::vector<double> flat(n_way * dim), query(dim);
  for (double& v : flat) v = rng.normal();
  for (double& v : query) v = rng.normal();
  const fs::PrototypeSet set(dim, flat);
  for (auto _ : state) benchmark::DoNotOptimize(fs::classify(query, set, {0.07}));
}
BENCHMARK(BM_Classify)->Arg(64)->Arg(512)->Arg(2048);

void BM_SampleFslEpisode(benchmark::State& state) {
  const auto manifest = bench_manifest(16);
  const fs::FslSampler sampler(fs::view(manifest));
  std::uint64_t index = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(sampler.sample({20, 5, fs::QueryCount::per_class(15), index++, 7}));
  }
}
BENCHMARK(BM_SampleFslEpisode);

void BM_Prototypes(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto manifest = bench_manifest(dim);
  const auto episode =
      fs::sample_fsl_episode(fs::view(manifest), {20, 5, fs::QueryCount::per_class(15), 0, 7});
  const auto head = random_head(dim);
  for (auto _ : state) benchmark::DoNotOptimize(fs::compute_prototypes(episode, head));
}
BENCHMARK(BM_Prototypes)->Arg(64)->Arg(512);

void BM_LossGradient(benchmark::State& state) {
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto manifest = bench_manifest(dim);
  const auto episode =
      fs::sample_fsl_episode(fs::view(manifest), {20, 5, fs::QueryCount::per_class(15), 0, 7});
  const auto head = random_head(dim);
  for (auto _ : state) benchmark::DoNotOptimize(fs::loss_gradient(episode, head, 0.07));
}
BENCHMARK(BM_LossGradient)->Arg(64)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
