#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include <Eigen/Geometry>
#include <unistd.h>

#include "clmvs/config.hpp"
#include "clmvs/io.hpp"
#include "clmvs/scene.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace clmvs;
namespace fs = std::filesystem;

namespace {

Camera random_camera(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Camera cam;
  const Eigen::Vector3d axis = Eigen::Vector3d(u(rng), u(rng), u(rng)).normalized();
  cam.pose.setIdentity();
  cam.pose.topLeftCorner<3, 3>() = Eigen::AngleAxisd(u(rng) * 3.0, axis).toRotationMatrix();
  cam.pose.topRightCorner<3, 1>() = Eigen::Vector3d(u(rng), u(rng), u(rng)) * 300.0;
  cam.K << 361.54 + u(rng), 0, 82.9 + u(rng), 0, 360.6 + u(rng), 66.3 + u(rng), 0, 0, 1;
  cam.depth_min = 425.0 + u(rng);
  cam.depth_max = 935.0 + u(rng);
  return cam;
}

fs::path scratch(const char* name) {
  const fs::path p = fs::temp_directory_path() / ("clmvs_wb_" + std::to_string(::getpid())) / name;
  fs::create_directories(p.parent_path());
  return p;
}

template <class A, class B>
bool same(const A& a, const B& b) {
  return std::ranges::equal(a.data(), b.data());
}

std::string le_float(float f) {
  char b[4];
  std::memcpy(b, &f, 4);
  return {b, 4};
}

}  // namespace

TEST_CASE("cam files round trip every scalar") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Camera cam = random_camera(s);
    const fs::path p = scratch("cam.txt");
    write_cam(p, cam);
    const Camera back = read_cam(p);
    CHECK(back.pose == cam.pose);
    CHECK(back.K == cam.K);
    CHECK(back.depth_min == cam.depth_min);
    CHECK(back.depth_max == cam.depth_max);
  }
}

TEST_CASE("DTU-style cam file") {
  const std::string text =
      "extrinsic\n"
      "1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n\n"
      "intrinsic\n"
      "361.54125 0.0 82.900625\n0.0 360.3975 66.383875\n0.0 0.0 1.0\n\n"
      "425 2.5\n";
  const Camera cam = parse_cam(text);
  CHECK(cam.pose == Eigen::Matrix4d::Identity());
  CHECK(cam.K(0, 0) == 361.54125);
  CHECK(cam.K(1, 2) == 66.383875);
  CHECK(cam.depth_min == 425.0);
  CHECK(cam.depth_max == doctest::Approx(425.0 + 2.5 * 191));

  const std::string four = text.substr(0, text.rfind("425")) + "425 2.5 192 902.5\n";
  CHECK(parse_cam(four).depth_max == 902.5);
}

TEST_CASE("malformed cam files") {
  const std::string good = format_cam(random_camera(1));
  std::string short_row = good;
  short_row.replace(short_row.find('\n', 10), 0, " 5");
  CHECK_THROWS_AS(parse_cam(short_row), Error);
  CHECK_THROWS_AS(parse_cam("intrinsic\n1 0 0\n"), Error);
  Camera skew = random_camera(2);
  skew.pose(0, 0) += 1e-3;
  CHECK_THROWS_AS(parse_cam(format_cam(skew)), Error);
  skew.pose = random_camera(2).pose;
  skew.pose(0, 0) += 1e-6;
  CHECK_NOTHROW(parse_cam(format_cam(skew)));
}

TEST_CASE("PFM round trip is bit-exact") {
  ScalarField f = test::random_field(7, 11, 425.0, 935.0, 3);
  for (double& v : f.data()) v = static_cast<float>(v);
  const fs::path p = scratch("d.pfm");
  write_pfm(p, f);
  CHECK(same(read_pfm(p), f));

  Image img = test::random_image(5, 6, 3, 4);
  for (double& v : img.data()) v = static_cast<float>(v);
  CHECK(same(decode_pfm_image(encode_pfm(img)), img));
}

TEST_CASE("PFM golden bytes") {
  ScalarField f(2, 2);
  f.at(0, 0) = 1.0;
  f.at(0, 1) = 2.0;
  f.at(1, 0) = 3.5;
  f.at(1, 1) = -4.25;
  // Bottom row first.
  const std::string golden = std::string("Pf\n2 2\n-1.0\n") + le_float(3.5f) + le_float(-4.25f) +
                             le_float(1.0f) + le_float(2.0f);
  CHECK(encode_pfm(f) == golden);
  CHECK(golden.substr(golden.size() - 4) == std::string("\x00\x00\x00\x40", 4));
  CHECK(same(decode_pfm_field(golden), f));
}

TEST_CASE("PFM big-endian and bad inputs") {
  const std::string be = std::string("Pf\n1 1\n1.0\n") + std::string("\x40\x20\x00\x00", 4);
  CHECK(decode_pfm_field(be).at(0, 0) == 2.5);
  CHECK_THROWS_AS(decode_pfm_field("P6\n1 1\n-1.0\n0000"), Error);
  CHECK_THROWS_AS(decode_pfm_field(encode_pfm(Image(2, 2, 3, 0.5))), Error);
  CHECK_THROWS_AS(decode_pfm_image(encode_pfm(ScalarField(2, 2, 0.5))), Error);
  CHECK_THROWS_AS(decode_pfm_field("Pf\n2 2\n-1.0\n0000"), Error);
}

TEST_CASE("pair files round trip") {
  const Scene scene = gen_scene(SceneSpec{});
  const fs::path p = scratch("pair.txt");
  write_pairs(p, scene.pairs);
  CHECK(read_pairs(p) == scene.pairs);
  CHECK_THROWS_AS(parse_pairs("2\n0\n1 1 0.5\n"), Error);
}

TEST_CASE("PLY layout") {
  PointCloud one;
  CloudPoint pt;
  pt.xyz = {1.5f, -2.0f, 600.25f};
  pt.rgb = {10, 200, 255};
  one.points.push_back(pt);
  const std::string bytes = encode_ply(one);
  const std::string end = "end_header\n";
  const std::size_t header = bytes.find(end) + end.size();
  CHECK(bytes.size() - header == 15);
  CHECK(bytes.find("element vertex 1\n") != std::string::npos);
  CHECK(bytes.find("format binary_little_endian 1.0") != std::string::npos);
  CHECK(bytes.substr(header, 4) == le_float(1.5f));
  CHECK(static_cast<unsigned char>(bytes.back()) == 255);

  const PointCloud back = decode_ply(bytes);
  REQUIRE(back.points.size() == 1);
  CHECK(back.points[0].xyz == pt.xyz);
  CHECK(back.points[0].rgb == pt.rgb);

  const std::string empty = encode_ply(PointCloud{});
  CHECK(empty.find("element vertex 0\n") != std::string::npos);
  CHECK(empty.substr(empty.size() - end.size()) == end);
  CHECK(decode_ply(empty).points.empty());

  const fs::path p = scratch("c.ply");
  write_ply(p, one);
  CHECK(read_file(p) == bytes);
}

TEST_CASE("config defaults") {
  const RunConfig c = parse_config("{}");
  CHECK(c.num_views == 5);
  CHECK(c.cascade.counts == std::array<int, 3>{48, 32, 8});
  CHECK(c.cascade.gamma == 0.95);
  CHECK(c.weights.pc == 0.8);
  CHECK(c.weights.scc == 0.01);
  CHECK(c.weights.ssim == 0.2);
  CHECK(c.weights.smooth == 0.0067);
  CHECK(c.norm.theta == 0.5);
  CHECK(c.alpha_max == 0.1);
  CHECK(c.scene.depth_min == 425.0);
  CHECK(c.scene.depth_max == 935.0);

  const RunConfig back = parse_config(dump_config(c));
  CHECK(dump_config(back) == dump_config(c));
  const RunConfig changed = parse_config(R"({"loss": {"theta": 1.0}, "fusion": {"n_min": 2}})");
  CHECK(changed.norm.theta == 1.0);
  CHECK(changed.fusion.n_min == 2);
  CHECK(changed.weights.pc == 0.8);
}

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK_THROWS_AS(parse_config(R"({"lossy": {}})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"loss": {"lambda9": 1}})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"loss": {"lambda1": -1}})"), Error);
  CHECK_THROWS_AS(parse_config(R"({"loss": {"theta": "half"}})"), Error);
  CHECK_THROWS_AS(parse_config("{"), Error);
}

TEST_CASE("scenes are deterministic") {
  SceneSpec spec;
  spec.geometry = SceneGeometry::kPlaneWithOccluder;
  spec.specular_strength = 0.4;
  spec.outlier_fraction = 0.1;
  spec.seed = 9;
  const Scene a = gen_scene(spec), b = gen_scene(spec);
  for (std::size_t v = 0; v < a.views.size(); ++v) {
    CHECK(encode_pfm(a.views[v].image) == encode_pfm(b.views[v].image));
    CHECK(same(*a.views[v].gt_depth, *b.views[v].gt_depth));
    CHECK(format_cam(a.views[v].camera) == format_cam(b.views[v].camera));
  }
  CHECK(a.pairs == b.pairs);
  spec.seed = 10;
  CHECK_FALSE(same(gen_scene(spec).views[1].image, a.views[1].image));
}

TEST_CASE("uniform plane: flat images and analytic depth") {
  SceneSpec spec;
  spec.texture = SceneTexture::kUniform;
  spec.seed = 2;
  const Scene scene = gen_scene(spec);
  // Plane through (0,0,650) with normal (0.15,-0.1,-1).
  const Eigen::Vector3d n(0.15, -0.1, -1.0), P0(0, 0, spec.target_distance);
  for (const CameraView& v : scene.views) {
    const auto [lo, hi] = std::minmax_element(v.image.data().begin(), v.image.data().end());
    CHECK(*hi - *lo < 0.05);
    const Eigen::Vector3d C = v.camera.center();
    for (int r = 0; r < spec.height; r += 7)
      for (int c = 0; c < spec.width; c += 9) {
        const Eigen::Vector3d X1 = v.camera.backproject({c, r}, 1.0);
        const double d = n.dot(P0 - C) / n.dot(X1 - C);
        CHECK(v.gt_depth->at(r, c) == doctest::Approx(d).epsilon(1e-9));
      }
  }
}

TEST_CASE("without a specular term the same surface shades the same in every view") {
  SceneSpec spec;
  spec.texture = SceneTexture::kUniform;
  const Scene matte = gen_scene(spec);
  spec.specular_strength = 0.6;
  const Scene shiny = gen_scene(spec);
  auto spread = [&](const Scene& s) {
    double lo = 1.0, hi = 0.0;
    for (const CameraView& v : s.views) {
      const double m = v.image.at(spec.height / 2, spec.width / 2, 0);
      lo = std::min(lo, m);
      hi = std::max(hi, m);
    }
    return hi - lo;
  };
  CHECK(spread(matte) < 1e-9);
  CHECK(spread(shiny) > 1e-3);
}

TEST_CASE("degenerate placement is an error") {
  SceneSpec spec;
  spec.ring_radius = 0.0;
  CHECK_THROWS_WITH_AS(gen_scene(spec), doctest::Contains("degenerate camera placement"), Error);
  spec = SceneSpec{};
  spec.n_views = 1;
  CHECK_THROWS_AS(gen_scene(spec), Error);
  spec = SceneSpec{};
  spec.target_distance = 1000.0;
  CHECK_THROWS_AS(gen_scene(spec), Error);
}
