#pragma once

#include <array>
#include <optional>

#include <Eigen/Core>

#include "clmvs/grid.hpp"

namespace clmvs {

/// Points at or behind this camera-space depth (mm) are not projectable.
inline constexpr double kMinProjectDepth = 1e-3;

/// Pinhole camera. `pose` maps world to camera coordinates (MVSNet cam-file
/// convention). Pixel centres sit at integer coordinates, (col, row).
struct Camera {
  Eigen::Matrix3d K = Eigen::Matrix3d::Identity();
  Eigen::Matrix4d pose = Eigen::Matrix4d::Identity();
  double depth_min = 1.0;
  double depth_max = 2.0;

  /// Throws unless K is upper triangular with positive focals, the rotation
  /// is orthonormal within `rot_tol`, and 0 < depth_min < depth_max.
  void validate(double rot_tol = 1e-6) const;

  Eigen::Matrix3d rotation() const { return pose.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return pose.topRightCorner<3, 1>(); }
  Eigen::Vector3d center() const { return -rotation().transpose() * translation(); }

  /// World point seen at pixel `px` with camera-space depth `depth`.
  Eigen::Vector3d backproject(const Eigen::Vector2d& px, double depth) const;
  /// Pixel coordinate and camera-space depth of a world point.
  Eigen::Vector2d project(const Eigen::Vector3d& world, double* z = nullptr) const;

  /// Camera for an image resized with corner-aligned sampling.
  Camera rescaled(int from_height, int from_width, int to_height, int to_width) const;
};

struct CameraView {
  int id = 0;
  Image image;
  Camera camera;
  std::optional<ScalarField> gt_depth;
};

struct Projection {
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double z = 0.0;
  bool valid = false;
};

/// Reference-to-source pixel transfer at a given reference depth:
/// x = d * M * [p;1] + t with M = K_src R_rel K_ref^-1, t = K_src t_rel.
class RelativeWarp {
 public:
  RelativeWarp(const Camera& ref, const Camera& src);

  Projection project(double col, double row, double depth) const {
    if (identity_) return {Eigen::Vector2d(col, row), depth, depth > kMinProjectDepth};
    const Eigen::Vector3d ray = M_ * Eigen::Vector3d(col, row, 1.0);
    const Eigen::Vector3d x = depth * ray + t_;
    Projection out;
    out.z = x.z();
    out.valid = x.z() > kMinProjectDepth;
    if (out.valid) out.pixel = x.head<2>() / x.z();
    return out;
  }

  /// d(pixel)/d(depth) in pixels per mm; throws when the point is not valid.
  Eigen::Vector2d depth_jacobian(double col, double row, double depth) const;

  bool is_identity(double tol = 1e-12) const;

 private:
  Eigen::Matrix3d M_;
  Eigen::Vector3d t_;
  bool identity_ = false;
};

Projection project_with_depth(const Eigen::Vector2d& p, double depth, const Camera& ref,
                              const Camera& src);

Eigen::Vector2d warp_depth_jacobian(const Eigen::Vector2d& p, double depth, const Camera& ref,
                                    const Camera& src);

/// Bilinear lookup. Outside [0,W-1] x [0,H-1] the value is zero and
/// in_bounds is false. d_col / d_row are the within-cell spatial derivatives.
struct BilinearSample {
  std::array<double, 3> value{};
  std::array<double, 3> d_col{};
  std::array<double, 3> d_row{};
  bool in_bounds = false;
};

BilinearSample bilinear_sample(const Image& img, const Eigen::Vector2d& p);

struct WarpResult {
  Image warped;
  BinaryMask valid;
};

/// Inverse-warps `src` into the reference view using the reference depth.
WarpResult warp_to_reference(const CameraView& src, const ScalarField& depth,
                             const Camera& ref_cam);

/// Warp plus the per-channel derivative of the warped image w.r.t. the
/// reference depth and the continuous source coordinates of every pixel.
struct WarpWithDerivative {
  Image warped;
  BinaryMask valid;
  Image d_depth;
  ScalarField src_col;
  ScalarField src_row;
};

WarpWithDerivative warp_with_depth_derivative(const CameraView& src, const ScalarField& depth,
                                              const Camera& ref_cam);

/// Distance (pixels) from the continuous coordinate to the nearest
/// bilinear-cell boundary along either axis.
double cell_boundary_distance(double col, double row);

}  // namespace clmvs
