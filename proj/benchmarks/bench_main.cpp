#include <benchmark/benchmark.h>

#include "patchtriage/classifier.hpp"
#include "patchtriage/patches.hpp"
#include "patchtriage/phantom.hpp"
#include "patchtriage/preprocess.hpp"
#include "patchtriage/random.hpp"
#include "patchtriage/saliency.hpp"
#include "patchtriage/segmenter.hpp"
#include "patchtriage/stats.hpp"

using namespace patchtriage;

namespace {

RasterImage noise_image(int size, std::uint64_t seed) {
  Rng rng(seed);
  RasterImage img(size, size);
  for (float& v : img.pixels()) v = static_cast<float>(rng.uniform(0.0, 255.0));
  return img;
}

void BM_ClassifierForward(benchmark::State& state) {
  const int p = static_cast<int>(state.range(0));
  ClassifierSpec spec{.input_height = p, .input_width = p};
  const ModelParams params = init_classifier_params<float>(spec, 1);
  const RasterImage patch = noise_image(p, 2);
  for (auto _ : state) benchmark::DoNotOptimize(classifier_forward(patch, params, spec).logits);
}
BENCHMARK(BM_ClassifierForward)->Arg(112)->Arg(224)->Arg(448);

void BM_ClassifierBackward(benchmark::State& state) {
  ClassifierSpec spec;
  const ModelParams params = init_classifier_params<float>(spec, 1);
  const auto fwd = classifier_forward(noise_image(224, 3), params, spec);
  for (auto _ : state) benchmark::DoNotOptimize(classifier_backward(fwd, 1, params, spec).loss);
}
BENCHMARK(BM_ClassifierBackward);

void BM_HistEqualize(benchmark::State& state) {
  const RasterImage img = noise_image(static_cast<int>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(hist_equalize(img, 256).pixels().data());
}
BENCHMARK(BM_HistEqualize)->Arg(256)->Arg(1024);

void BM_PreprocessPipeline(benchmark::State& state) {
  const Phantom ph = gen_phantom(default_phantom_spec(PhantomClass::viral_covid, 1024, 5));
  const PreprocessConfig cfg{.target_size = 1024};
  for (auto _ : state) benchmark::DoNotOptimize(preprocess_pipeline(ph.image, cfg).pixels().data());
}
BENCHMARK(BM_PreprocessPipeline)->Unit(benchmark::kMillisecond);

void BM_ProbGradCam(benchmark::State& state) {
  const int K = static_cast<int>(state.range(0));
  const Phantom ph = gen_phantom(default_phantom_spec(PhantomClass::normal, 1024, 6));
  Rng rng(7);
  std::vector<SaliencyMap> maps;
  PatchProbs probs{4, {}};
  std::vector<PatchPlacement> placements;
  for (const auto& c : sample_centers(ph.mask, K, 8)) {
    placements.push_back(place_patch(c, 224, 224, 1024, 1024));
    SaliencyMap m(224, 224);
    for (float& v : m.values()) v = static_cast<float>(rng.uniform());
    maps.push_back(std::move(m));
    probs.rows.push_back({0.1, 0.2, 0.3, 0.4});
  }
  const CoverageMap cov = coverage(placements, 1024, 1024);
  for (auto _ : state) benchmark::DoNotOptimize(prob_grad_cam(maps, probs, placements, cov, 3).values().data());
}
BENCHMARK(BM_ProbGradCam)->Arg(10)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_Segment(benchmark::State& state) {
  const ModelParams params = init_segmenter_params<float>(1);
  const RasterImage img = noise_image(256, 9);
  for (auto _ : state) benchmark::DoNotOptimize(segment(img, params).grid().values().data());
}
BENCHMARK(BM_Segment)->Unit(benchmark::kMillisecond);

void BM_RankSumExact(benchmark::State& state) {
  Rng rng(10);
  std::vector<double> x(8), y(8);
  for (auto& v : x) v = rng.normal();
  for (auto& v : y) v = rng.normal(0.5, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(wilcoxon_rank_sum(x, y).p_value);
}
BENCHMARK(BM_RankSumExact);

}  // namespace

BENCHMARK_MAIN();
