// OpenMP kernels against their serial references at the finest cascade stage
// of a 128x160 scene. With one core the two should be about equal.

#include <benchmark/benchmark.h>

#include "clmvs/planesweep.hpp"
#include "clmvs/reference.hpp"
#include "clmvs/scene.hpp"

using namespace clmvs;

namespace {

struct Fixture {
  Scene scene;
  FeatureMap ref_feat;
  std::vector<FeatureMap> src_feats;
  HypothesisSet hyps;
  FeatureVolume ref_vol;
  std::vector<FeatureVolume> src_vols;

  Fixture() {
    SceneSpec spec;
    spec.height = 128;
    spec.width = 160;
    scene = gen_scene(spec);
    const CascadeConfig cfg;
    const Camera& cam = scene.views[0].camera;
    ref_feat = extract_features(scene.views[0].image, 3, cfg);
    for (std::size_t i = 1; i < scene.views.size(); ++i)
      src_feats.push_back(extract_features(scene.views[i].image, 3, cfg));
    const ScalarField& gt = *scene.views[0].gt_depth;
    hyps = build_hypotheses(cam, 3, &gt, cfg.counts[2], stage_intervals(cam, cfg)[2], spec.height,
                            spec.width);
    ref_vol = reference_feature_volume(ref_feat, hyps.count);
    for (std::size_t i = 0; i < src_feats.size(); ++i)
      src_vols.push_back(
          build_feature_volume(src_feats[i], hyps, cam, scene.views[i + 1].camera));
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

void BM_Warp(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(
        warp_to_reference(f.scene.views[1], *f.scene.views[0].gt_depth, f.scene.views[0].camera));
}
void BM_WarpSerial(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(serial::warp_to_reference(f.scene.views[1], *f.scene.views[0].gt_depth,
                                                       f.scene.views[0].camera));
}

void BM_FeatureVolume(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(build_feature_volume(f.src_feats[0], f.hyps,
                                                  f.scene.views[0].camera,
                                                  f.scene.views[1].camera));
}
void BM_FeatureVolumeSerial(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(serial::build_feature_volume(f.src_feats[0], f.hyps,
                                                          f.scene.views[0].camera,
                                                          f.scene.views[1].camera));
}

void BM_Correlation(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(groupwise_correlation(f.ref_vol, f.src_vols, 2));
}
void BM_CorrelationSerial(benchmark::State& state) {
  const Fixture& f = fixture();
  for (auto _ : state)
    benchmark::DoNotOptimize(serial::groupwise_correlation(f.ref_vol, f.src_vols, 2));
}

}  // namespace

BENCHMARK(BM_Warp);
BENCHMARK(BM_WarpSerial);
BENCHMARK(BM_FeatureVolume);
BENCHMARK(BM_FeatureVolumeSerial);
BENCHMARK(BM_Correlation);
BENCHMARK(BM_CorrelationSerial);

BENCHMARK_MAIN();
