#include "clmvs/geometry.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>

namespace clmvs {

void Camera::validate(double rot_tol) const {
  require(K(1, 0) == 0.0 && K(2, 0) == 0.0 && K(2, 1) == 0.0,
          "Camera: intrinsic matrix must be upper triangular");
  require(K(0, 0) > 0.0 && K(1, 1) > 0.0, "Camera: focal lengths must be positive");
  require(K(2, 2) == 1.0, "Camera: K(2,2) must be 1");
  const Eigen::Matrix3d R = rotation();
  require((R.transpose() * R - Eigen::Matrix3d::Identity()).norm() < rot_tol,
          "Camera: rotation is not orthonormal");
  require(pose(3, 0) == 0.0 && pose(3, 1) == 0.0 && pose(3, 2) == 0.0 && pose(3, 3) == 1.0,
          "Camera: pose bottom row must be [0 0 0 1]");
  require(depth_min > 0.0 && depth_min < depth_max, "Camera: need 0 < depth_min < depth_max");
}

Eigen::Vector3d Camera::backproject(const Eigen::Vector2d& px, double depth) const {
  const Eigen::Vector3d cam = depth * (K.inverse() * Eigen::Vector3d(px.x(), px.y(), 1.0));
  return rotation().transpose() * (cam - translation());
}

Eigen::Vector2d Camera::project(const Eigen::Vector3d& world, double* z) const {
  const Eigen::Vector3d x = K * (rotation() * world + translation());
  if (z) *z = x.z();
  return x.head<2>() / x.z();
}

Camera Camera::rescaled(int from_height, int from_width, int to_height, int to_width) const {
  const double sx = from_width > 1 ? static_cast<double>(to_width - 1) / (from_width - 1) : 1.0;
  const double sy = from_height > 1 ? static_cast<double>(to_height - 1) / (from_height - 1) : 1.0;
  Camera out = *this;
  out.K.row(0) *= sx;
  out.K.row(1) *= sy;
  return out;
}

RelativeWarp::RelativeWarp(const Camera& ref, const Camera& src) {
  // Same camera: keep the transfer exact instead of K * K^-1 round-off.
  if (ref.K == src.K && ref.pose == src.pose) {
    M_.setIdentity();
    t_.setZero();
    identity_ = true;
    return;
  }
  const Eigen::Matrix4d rel = src.pose * ref.pose.inverse();
  M_ = src.K * rel.topLeftCorner<3, 3>() * ref.K.inverse();
  t_ = src.K * rel.topRightCorner<3, 1>();
}

Eigen::Vector2d RelativeWarp::depth_jacobian(double col, double row, double depth) const {
  const Eigen::Vector3d a = M_ * Eigen::Vector3d(col, row, 1.0);
  const Eigen::Vector3d x = depth * a + t_;
  require(x.z() > kMinProjectDepth, "warp_depth_jacobian: point behind source camera");
  const double z2 = x.z() * x.z();
  return {(a.x() * x.z() - x.x() * a.z()) / z2, (a.y() * x.z() - x.y() * a.z()) / z2};
}

bool RelativeWarp::is_identity(double tol) const {
  return (M_ - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < tol &&
         t_.cwiseAbs().maxCoeff() < tol;
}

Projection project_with_depth(const Eigen::Vector2d& p, double depth, const Camera& ref,
                              const Camera& src) {
  require(depth > 0.0, "project_with_depth: depth must be positive");
  return RelativeWarp(ref, src).project(p.x(), p.y(), depth);
}

Eigen::Vector2d warp_depth_jacobian(const Eigen::Vector2d& p, double depth, const Camera& ref,
                                    const Camera& src) {
  return RelativeWarp(ref, src).depth_jacobian(p.x(), p.y(), depth);
}

BilinearSample bilinear_sample(const Image& img, const Eigen::Vector2d& p) {
  BilinearSample s;
  const int h = img.height(), w = img.width(), nc = img.channels();
  const double u = p.x(), v = p.y();
  if (!(u >= 0.0 && u <= w - 1 && v >= 0.0 && v <= h - 1)) return s;
  s.in_bounds = true;
  const int c0 = std::min(static_cast<int>(u), std::max(w - 2, 0));
  const int r0 = std::min(static_cast<int>(v), std::max(h - 2, 0));
  const int c1 = std::min(c0 + 1, w - 1);
  const int r1 = std::min(r0 + 1, h - 1);
  const double fx = w > 1 ? u - c0 : 0.0;
  const double fy = h > 1 ? v - r0 : 0.0;
  for (int k = 0; k < nc; ++k) {
    const double i00 = img.at(r0, c0, k), i01 = img.at(r0, c1, k);
    const double i10 = img.at(r1, c0, k), i11 = img.at(r1, c1, k);
    s.value[k] = (1 - fy) * ((1 - fx) * i00 + fx * i01) + fy * ((1 - fx) * i10 + fx * i11);
    s.d_col[k] = w > 1 ? (1 - fy) * (i01 - i00) + fy * (i11 - i10) : 0.0;
    s.d_row[k] = h > 1 ? (1 - fx) * (i10 - i00) + fx * (i11 - i01) : 0.0;
  }
  return s;
}

WarpResult warp_to_reference(const CameraView& src, const ScalarField& depth,
                             const Camera& ref_cam) {
  const int h = depth.height(), w = depth.width(), nc = src.image.channels();
  const RelativeWarp warp(ref_cam, src.camera);
  WarpResult out{Image(h, w, nc), BinaryMask(h, w, 0)};
#pragma omp parallel for
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double d = depth.at(r, c);
      if (!(d > 0.0)) continue;
      const Projection pr = warp.project(c, r, d);
      if (!pr.valid) continue;
      const BilinearSample s = bilinear_sample(src.image, pr.pixel);
      if (!s.in_bounds) continue;
      out.valid.at(r, c) = 1;
      for (int k = 0; k < nc; ++k) out.warped.at(r, c, k) = s.value[k];
    }
  }
  return out;
}

WarpWithDerivative warp_with_depth_derivative(const CameraView& src, const ScalarField& depth,
                                              const Camera& ref_cam) {
  const int h = depth.height(), w = depth.width(), nc = src.image.channels();
  const RelativeWarp warp(ref_cam, src.camera);
  WarpWithDerivative out{Image(h, w, nc), BinaryMask(h, w, 0), Image(h, w, nc),
                         ScalarField(h, w, -1.0), ScalarField(h, w, -1.0)};
#pragma omp parallel for
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double d = depth.at(r, c);
      if (!(d > 0.0)) continue;
      const Projection pr = warp.project(c, r, d);
      if (!pr.valid) continue;
      out.src_col.at(r, c) = pr.pixel.x();
      out.src_row.at(r, c) = pr.pixel.y();
      const BilinearSample s = bilinear_sample(src.image, pr.pixel);
      if (!s.in_bounds) continue;
      const Eigen::Vector2d j = warp.depth_jacobian(c, r, d);
      out.valid.at(r, c) = 1;
      for (int k = 0; k < nc; ++k) {
        out.warped.at(r, c, k) = s.value[k];
        out.d_depth.at(r, c, k) = s.d_col[k] * j.x() + s.d_row[k] * j.y();
      }
    }
  }
  return out;
}

double cell_boundary_distance(double col, double row) {
  const double dc = std::abs(col - std::round(col));
  const double dr = std::abs(row - std::round(row));
  return std::min(dc, dr);
}

}  // namespace clmvs
