#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "clmvs/fusion.hpp"
#include "clmvs/planesweep.hpp"
#include "clmvs/scene.hpp"
#include "doctest.h"

using namespace clmvs;

namespace {

std::vector<DepthEstimate> gt_estimates(const Scene& scene, double prob = 1.0) {
  std::vector<DepthEstimate> out;
  for (const CameraView& v : scene.views)
    out.push_back({v.id, v.camera, v.image, *v.gt_depth,
                   ScalarField(v.image.height(), v.image.width(), prob)});
  return out;
}

Scene make_scene(SceneGeometry g, std::uint64_t seed = 0) {
  SceneSpec spec;
  spec.geometry = g;
  spec.seed = seed;
  return gen_scene(spec);
}

PointCloud grid_cloud(int n, double spacing, Eigen::Vector3f offset = Eigen::Vector3f::Zero()) {
  PointCloud c;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      CloudPoint p;
      p.xyz = {static_cast<float>(i * spacing) + offset.x(), static_cast<float>(j * spacing) + offset.y(),
               500.0f + offset.z()};
      c.points.push_back(p);
    }
  return c;
}

}  // namespace

TEST_CASE("single-view pinhole back-projection") {
  DepthEstimate v;
  v.camera.depth_min = 1;
  v.camera.depth_max = 100;
  v.image = Image(4, 5, 3, 0.5);
  v.depth = ScalarField(4, 5, 0.0);
  v.prob = ScalarField(4, 5, 1.0);
  v.depth.at(2, 3) = 7.5;
  BinaryMask m(4, 5, 0);
  m.at(2, 3) = 1;
  const std::vector<DepthEstimate> views{v};
  const std::vector<BinaryMask> masks{m};
  const PointCloud c = fuse_point_cloud(views, masks, {});
  REQUIRE(c.points.size() == 1);
  CHECK(c.points[0].xyz[0] == doctest::Approx(3 * 7.5));
  CHECK(c.points[0].xyz[1] == doctest::Approx(2 * 7.5));
  CHECK(c.points[0].xyz[2] == doctest::Approx(7.5));
  CHECK(c.points[0].rgb[0] == 128);
  CHECK(c.points[0].row == 2);
  CHECK(c.points[0].col == 3);
  CHECK_FALSE(c.empty_input);
}

TEST_CASE("GT depths survive wherever enough views see the surface") {
  const Scene scene = make_scene(SceneGeometry::kTexturedPlane, 2);
  const auto views = gt_estimates(scene);
  const FusionConfig cfg;
  const FilterResult f = geometric_consistency_filter(views, cfg);
  for (std::size_t i = 0; i < views.size(); ++i) {
    const DepthEstimate& v = views[i];
    std::size_t visible = 0, kept = 0;
    for (int r = 0; r < v.depth.height(); ++r)
      for (int c = 0; c < v.depth.width(); ++c) {
        // Visibility from the renderer's geometry: the plane has no
        // self-occlusion, so a view sees the point iff it lands in frame.
        const Eigen::Vector3d X = v.camera.backproject({c, r}, v.depth.at(r, c));
        int seen = 0;
        for (std::size_t j = 0; j < views.size(); ++j) {
          if (j == i) continue;
          double z = 0;
          const Eigen::Vector2d p = views[j].camera.project(X, &z);
          seen += z > 0 && p.x() >= 0.5 && p.y() >= 0.5 && p.x() <= v.depth.width() - 1.5 &&
                  p.y() <= v.depth.height() - 1.5;
        }
        if (seen < cfg.n_min) continue;
        ++visible;
        kept += f.survive[i].at(r, c);
      }
    REQUIRE(visible > 1000);
    CHECK(static_cast<double>(kept) / visible >= 0.99);
  }
}

TEST_CASE("a view corrupted by +50 mm fails the cross-view check") {
  // Plane only: on the cube a shifted point can land on a side face or the
  // backdrop, which is a genuine match.
  const Scene scene = make_scene(SceneGeometry::kTexturedPlane, 3);
  auto views = gt_estimates(scene);
  for (double& d : views[2].depth.data()) d += 50.0;
  const FilterResult f = geometric_consistency_filter(views, {});
  CHECK(count(f.survive[2]) == 0);
  CHECK(count(f.photometric[2]) == f.photometric[2].size());
  CHECK(count(f.survive[0]) > 0);
}

TEST_CASE("P_m below the threshold empties everything") {
  const Scene scene = make_scene(SceneGeometry::kTexturedPlane, 4);
  const auto views = gt_estimates(scene, 0.5);
  const FilterResult f = geometric_consistency_filter(views, {});
  for (const BinaryMask& m : f.survive) CHECK(count(m) == 0);
  const PointCloud c = fuse_point_cloud(views, f.survive, {});
  CHECK(c.points.empty());
  CHECK(c.empty_input);
}

TEST_CASE("fusing GT depths of the cube lands on the surface") {
  const Scene scene = make_scene(SceneGeometry::kCube, 5);
  const auto views = gt_estimates(scene);
  const FusionConfig cfg;
  const FilterResult f = geometric_consistency_filter(views, cfg);
  const PointCloud c = fuse_point_cloud(views, f.survive, cfg);
  REQUIRE(c.points.size() > 1000);
  const double tol = stage_intervals(scene.views[0].camera, {})[2];
  std::size_t ok = 0;
  for (const CloudPoint& p : c.points) {
    ok += scene.surface_distance({p.xyz[0], p.xyz[1], p.xyz[2]}) <= tol;
    // Provenance: the seed pixel passed both gates.
    const auto vi = static_cast<std::size_t>(p.view);
    CHECK(f.photometric[vi].at(p.row, p.col) == 1);
    CHECK(f.consistent_views[vi].at(p.row, p.col) >= cfg.n_min);
  }
  CHECK(static_cast<double>(ok) / c.points.size() >= 0.95);
}

TEST_CASE("two views of one surface are not double counted") {
  const Scene scene = make_scene(SceneGeometry::kTexturedPlane, 6);
  const auto all = gt_estimates(scene);
  const std::vector<DepthEstimate> views{all[0], all[1]};
  FusionConfig cfg;
  cfg.n_min = 1;
  const FilterResult f = geometric_consistency_filter(views, cfg);
  const PointCloud c = fuse_point_cloud(views, f.survive, cfg);
  const std::size_t single = count(f.survive[0]);
  REQUIRE(single > 1000);
  CHECK(static_cast<double>(c.points.size()) <= 1.2 * single);
}

TEST_CASE("stricter thresholds keep a subset") {
  const Scene scene = make_scene(SceneGeometry::kSphere, 7);
  auto views = gt_estimates(scene);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> noise(0.0, 3.0);
  std::uniform_real_distribution<double> u(0.9, 1.0);
  for (auto& v : views) {
    for (double& d : v.depth.data()) d += noise(rng);
    for (double& p : v.prob.data()) p = u(rng);
  }
  const FusionConfig loose{0.92, 1.5, 0.01, 2};
  const FusionConfig strict{0.96, 0.7, 0.004, 3};
  const FilterResult a = geometric_consistency_filter(views, loose);
  const FilterResult b = geometric_consistency_filter(views, strict);
  for (std::size_t i = 0; i < views.size(); ++i) {
    CHECK(count(b.survive[i]) < count(a.survive[i]));
    for (std::size_t p = 0; p < a.survive[i].size(); ++p) CHECK(b.survive[i][p] <= a.survive[i][p]);
  }
}

TEST_CASE("filter needs two views and valid settings") {
  const Scene scene = make_scene(SceneGeometry::kTexturedPlane);
  const auto views = gt_estimates(scene);
  CHECK_THROWS_AS(geometric_consistency_filter(std::span(views).first(1), {}), Error);
  FusionConfig bad;
  bad.tau_d = 1.5;
  CHECK_THROWS_AS(geometric_consistency_filter(views, bad), Error);
}

TEST_CASE("depth metrics") {
  const ScalarField gt(10, 10, 600.0);
  const BinaryMask all(10, 10, 1);
  CHECK(depth_metrics(gt, gt, all) == std::vector<double>{1.0, 1.0, 1.0});
  ScalarField off = gt;
  for (double& d : off.data()) d += 3.0;
  CHECK(depth_metrics(off, gt, all) == std::vector<double>{0.0, 1.0, 1.0});
  CHECK_THROWS_AS(depth_metrics(gt, gt, BinaryMask(10, 10, 0)), Error);
}

TEST_CASE("depth metrics of uniform errors") {
  const int n = 200;
  ScalarField gt(n, n, 600.0), d(n, n);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (double& v : d.data()) v = 600.0 + (rng() % 2 ? 1 : -1) * u(rng);
  const auto f = depth_metrics(d, gt, BinaryMask(n, n, 1));
  const double N = n * n;
  const double expect[3] = {0.2, 0.4, 0.8};
  for (int k = 0; k < 3; ++k) CHECK(std::abs(f[k] - expect[k]) <= 4 * std::sqrt(expect[k] * (1 - expect[k]) / N));
  std::vector<double> taus;
  for (double t = 0; t <= 12; t += 0.5) taus.push_back(t);
  const auto curve = depth_metrics(d, gt, BinaryMask(n, n, 1), taus);
  for (std::size_t k = 1; k < curve.size(); ++k) CHECK(curve[k] >= curve[k - 1]);
}

TEST_CASE("cloud metrics") {
  const PointCloud gt = grid_cloud(20, 5.0);
  const CloudMetrics same = cloud_metrics(gt, gt);
  CHECK(same.accuracy == 0.0);
  CHECK(same.completeness == 0.0);
  CHECK(same.overall == 0.0);

  const PointCloud moved = grid_cloud(20, 5.0, {0.6f, 0.0f, 0.8f});
  const CloudMetrics m = cloud_metrics(moved, gt);
  CHECK(m.accuracy == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(m.completeness == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(m.overall == doctest::Approx(1.0).epsilon(1e-5));

  PointCloud half;
  for (const CloudPoint& p : gt.points)
    if (p.xyz[0] < 50.0f) half.points.push_back(p);
  const CloudMetrics h = cloud_metrics(half, gt);
  CHECK(h.completeness > h.accuracy);
  const CloudMetrics swapped = cloud_metrics(gt, half);
  CHECK(swapped.accuracy == h.completeness);
  CHECK(swapped.completeness == h.accuracy);

  // Distances beyond the cap are clamped.
  const PointCloud far = grid_cloud(3, 5.0, {0.0f, 0.0f, 100.0f});
  CHECK(cloud_metrics(far, gt, 20.0).accuracy == doctest::Approx(20.0));
  CHECK_THROWS_AS(cloud_metrics(PointCloud{}, gt), Error);
}
