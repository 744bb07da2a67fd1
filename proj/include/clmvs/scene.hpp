#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "clmvs/geometry.hpp"
#include "clmvs/sampling.hpp"

namespace clmvs {

enum class SceneGeometry { kTexturedPlane, kCube, kSphere, kPlaneWithOccluder };
enum class SceneTexture { kChecker, kNoise, kUniform };

const char* to_string(SceneGeometry g);
const char* to_string(SceneTexture t);
SceneGeometry parse_geometry(const std::string& s);
SceneTexture parse_texture(const std::string& s);

/// Synthetic scene description. View 0 sits at the origin; the others lie on
/// a ring around it, all looking at (0, 0, target_distance).
struct SceneSpec {
  SceneGeometry geometry = SceneGeometry::kTexturedPlane;
  SceneTexture texture = SceneTexture::kChecker;
  double checker_period = 96.0;  // mm
  int noise_octaves = 3;
  double noise_cell = 48.0;  // mm, coarsest octave
  double specular_strength = 0.0;
  int n_views = 5;
  int height = 64;
  int width = 80;
  double ring_radius = 250.0;
  double jitter = 10.0;
  double target_distance = 650.0;
  double depth_min = 425.0;
  double depth_max = 935.0;
  std::uint64_t seed = 0;

  /// View that additionally sees a transient occluder and a strong highlight
  /// (-1 for none).
  int corrupted_view = -1;
  double corruption_specular = 0.8;
  /// Fraction of pixels per view replaced by uniform noise.
  double outlier_fraction = 0.0;
  /// Skip the outlier replacement on view 0.
  bool clean_reference = true;

  void validate() const;
};

struct Scene {
  SceneSpec spec;
  std::vector<CameraView> views;
  PairScores pairs;
  /// Per view: pixels changed by the corrupted-view effects or outlier noise.
  std::vector<BinaryMask> corruption;

  /// Unsigned distance (mm) from a world point to the nearest scene surface.
  double surface_distance(const Eigen::Vector3d& p) const;
};

/// Ray-traced render with Lambertian plus optional Phong shading (3x3
/// supersampling), analytic GT depth from the centre ray and visibility-
/// checked overlap fractions as pair scores. Deterministic given the seed.
Scene gen_scene(const SceneSpec& spec);

/// Reference pixels whose GT surface point lands on a corrupted pixel of
/// view `view_id` (nearest-pixel lookup).
BinaryMask corruption_in_reference(const Scene& scene, int reference_id, int view_id);

}  // namespace clmvs
