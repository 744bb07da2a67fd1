#include "clmvs/experiments.hpp"

#include <algorithm>
#include <cmath>

namespace clmvs {

double median(std::vector<double> v) {
  require(!v.empty(), "median of an empty set");
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

SweepTrial planesweep_trial(std::uint64_t seed, const CascadeConfig& cascade) {
  SceneSpec spec;
  spec.seed = seed;
  const Scene scene = gen_scene(spec);
  const Sample reg = select_regular_views(scene.views, 0, scene.pairs.at(0), 5);
  const auto stages = cascade_infer(reg.reference, reg.sources, cascade);
  const ScalarField& gt = *scene.views[0].gt_depth;
  const BinaryMask valid(gt.height(), gt.width(), 1);
  const double t[] = {2.0};
  return {depth_metrics(stages.back().depth, gt, valid, t)[0], count(valid)};
}

namespace {

BranchTrial summarize(const ScalarField& depth, const ScalarField& gt, const BinaryMask& affected) {
  std::vector<double> e;
  for (std::size_t i = 0; i < gt.size(); ++i)
    if (affected[i]) e.push_back(std::abs(depth[i] - gt[i]));
  require(!e.empty(), "trial: no affected pixels");
  return {median(e), e.size()};
}

}  // namespace

BranchTrial icc_trial(std::uint64_t seed, double lambda2, const OptConfig& base) {
  SceneSpec spec;
  spec.seed = seed;
  const Scene scene = gen_scene(spec);
  const Sample reg = select_regular_views(scene.views, 0, scene.pairs.at(0), 5);
  const Sample ic = make_image_contrastive(reg, 0.1, 1000 + seed);
  const Sample sc = make_scene_contrastive(scene.views, 0, 5, 2000 + seed);
  const ScalarField& gt = *scene.views[0].gt_depth;

  BinaryMask affected(gt.height(), gt.width(), 0);
  for (std::size_t s = 0; s < ic.sources.size(); ++s) {
    const RelativeWarp w(reg.reference.camera, ic.sources[s].camera);
    for (int r = 0; r < gt.height(); ++r)
      for (int c = 0; c < gt.width(); ++c) {
        const Projection p = w.project(c, r, gt.at(r, c));
        if (!p.valid) continue;
        const long cc = std::lround(p.pixel.x()), rr = std::lround(p.pixel.y());
        if (cc < 0 || rr < 0 || cc >= gt.width() || rr >= gt.height()) continue;
        if (ic.occlusion[s].at(rr, cc)) affected.at(r, c) = 1;
      }
  }
  OptConfig cfg = base;
  cfg.lambda2 = lambda2;
  const OptState st = optimize_joint({&reg, &ic, &sc}, cfg);
  return summarize(st.depth_image, gt, affected);
}

BranchTrial scc_trial(std::uint64_t seed, double lambda3, const OptConfig& base) {
  SceneSpec spec;
  spec.seed = seed;
  spec.n_views = 9;
  const int num_views = 5;
  // The scene-contrastive draw depends only on the view ids, so pick the
  // corrupted view from it before rendering the corruption.
  const Sample probe =
      make_scene_contrastive(gen_scene(spec).views, 0, num_views, 2000 + seed);
  spec.corrupted_view = probe.source_ids[seed % probe.source_ids.size()];
  const Scene scene = gen_scene(spec);
  const Sample reg = select_regular_views(scene.views, 0, scene.pairs.at(0), num_views);
  const Sample ic = make_image_contrastive(reg, 0.1, 1000 + seed);
  const Sample sc = make_scene_contrastive(scene.views, 0, num_views, 2000 + seed);
  const BinaryMask affected = corruption_in_reference(scene, 0, spec.corrupted_view);

  OptConfig cfg = base;
  cfg.weights.scc = lambda3;
  const OptState st = optimize_joint({&reg, &ic, &sc}, cfg);
  return summarize(st.depth_scene, *scene.views[0].gt_depth, affected);
}

double norm_trial(std::uint64_t seed, double theta, double outlier_fraction,
                  const OptConfig& base) {
  SceneSpec spec;
  spec.seed = seed;
  spec.outlier_fraction = outlier_fraction;
  const Scene scene = gen_scene(spec);
  const Sample reg = select_regular_views(scene.views, 0, scene.pairs.at(0), 5);
  const ScalarField& gt = *scene.views[0].gt_depth;
  OptConfig cfg = base;
  cfg.norm.theta = theta;
  const auto stages = cascade_infer(reg.reference, reg.sources, cfg.cascade);
  const ScalarField& pm = stages.back().prob_map;

  std::vector<std::size_t> idx(gt.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return pm[a] > pm[b]; });
  idx.resize(idx.size() * 8 / 10);

  const ScalarField d = optimize_single(reg, stages.back().depth, cfg);
  std::size_t hit = 0;
  for (std::size_t i : idx) hit += std::abs(d[i] - gt[i]) <= 2.0;
  return static_cast<double>(hit) / static_cast<double>(idx.size());
}

DepthEstimate estimate_for_fusion(const Scene& scene, int view_id, int num_views,
                                  const OptConfig& opt, bool optimize) {
  const Sample s = select_regular_views(scene.views, view_id, scene.pairs.at(view_id), num_views);
  const auto stages = cascade_infer(s.reference, s.sources, opt.cascade);
  const CameraView& v = find_view(scene.views, view_id);
  if (!optimize) return {view_id, v.camera, v.image, stages.back().depth, stages.back().prob_map};
  ScalarField d = optimize_single(s, stages.back().depth, opt);
  Confidence conf = confidence_around(s.reference, s.sources, d, opt.cascade);
  return {view_id, v.camera, v.image, std::move(d), std::move(conf.prob_map)};
}

FusionTrial fusion_trial(std::uint64_t seed, const OptConfig& opt, const FusionConfig& fusion) {
  SceneSpec spec;
  spec.seed = seed;
  spec.geometry = SceneGeometry::kCube;
  const Scene scene = gen_scene(spec);
  std::vector<DepthEstimate> est;
  for (const CameraView& v : scene.views) est.push_back(estimate_for_fusion(scene, v.id, 5, opt));
  const FilterResult fr = geometric_consistency_filter(est, fusion);

  FusionTrial out;
  out.cloud = fuse_point_cloud(est, fr.survive, fusion);
  require(!out.cloud.points.empty(), "fusion_trial: empty cloud");
  out.interval = stage_intervals(scene.views[0].camera, opt.cascade)[2];
  std::size_t good = 0;
  for (const CloudPoint& p : out.cloud.points) {
    good += scene.surface_distance({p.xyz[0], p.xyz[1], p.xyz[2]}) <= out.interval;
    const auto vi = static_cast<std::size_t>(p.view);
    const DepthEstimate& e = est[vi];
    const bool photometric = e.prob.at(p.row, p.col) > fusion.conf_threshold;
    const bool geometric = fr.consistent_views[vi].at(p.row, p.col) >= fusion.n_min;
    out.provenance_ok = out.provenance_ok && photometric && geometric;
  }
  out.within_interval = static_cast<double>(good) / static_cast<double>(out.cloud.points.size());
  return out;
}

}  // namespace clmvs
