#include "clmvs/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace clmvs {

void FusionConfig::validate() const {
  require(conf_threshold > 0.0 && conf_threshold < 1.0, "FusionConfig: gamma_f must be in (0,1)");
  require(tau_px > 0.0, "FusionConfig: tau_px must be positive");
  require(tau_d > 0.0 && tau_d < 1.0, "FusionConfig: tau_d must be in (0,1)");
  require(n_min >= 1, "FusionConfig: n_min must be >= 1");
}

namespace {

// Bilinear depth lookup; fails if any of the four taps is non-positive.
bool sample_depth(const ScalarField& d, const Eigen::Vector2d& p, double& out) {
  const int W = d.width(), H = d.height();
  if (!(p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= W - 1 && p.y() <= H - 1)) return false;
  const int c0 = std::min(static_cast<int>(p.x()), W - 2);
  const int r0 = std::min(static_cast<int>(p.y()), H - 2);
  const double a = p.x() - c0, b = p.y() - r0;
  const double v00 = d.at(r0, c0), v01 = d.at(r0, c0 + 1), v10 = d.at(r0 + 1, c0),
               v11 = d.at(r0 + 1, c0 + 1);
  if (v00 <= 0.0 || v01 <= 0.0 || v10 <= 0.0 || v11 <= 0.0) return false;
  out = (1 - b) * ((1 - a) * v00 + a * v01) + b * ((1 - a) * v10 + a * v11);
  return true;
}

// Round trip i -> j -> i of pixel (col,row) at depth d.
bool round_trip_ok(const DepthEstimate& vi, const DepthEstimate& vj, int col, int row, double d,
                   const FusionConfig& cfg) {
  const Eigen::Vector3d X = vi.camera.backproject({col, row}, d);
  double zj = 0.0;
  const Eigen::Vector2d pj = vj.camera.project(X, &zj);
  if (zj <= kMinProjectDepth) return false;
  double dj = 0.0;
  if (!sample_depth(vj.depth, pj, dj)) return false;
  const Eigen::Vector3d Xj = vj.camera.backproject(pj, dj);
  double zi = 0.0;
  const Eigen::Vector2d pi = vi.camera.project(Xj, &zi);
  if (zi <= kMinProjectDepth) return false;
  const double reproj = (pi - Eigen::Vector2d(col, row)).norm();
  const double rel = std::abs(zi - d) / d;
  return reproj < cfg.tau_px && rel < cfg.tau_d;
}

}  // namespace

FilterResult geometric_consistency_filter(std::span<const DepthEstimate> views,
                                          const FusionConfig& cfg) {
  cfg.validate();
  require(views.size() >= 2, "geometric_consistency_filter: need at least 2 views");
  for (const DepthEstimate& v : views) {
    require(v.depth.size() > 0 && v.prob.same_shape(v.depth),
            "geometric_consistency_filter: every view needs depth and P_m of equal shape");
  }
  FilterResult res;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const DepthEstimate& vi = views[i];
    const int H = vi.depth.height(), W = vi.depth.width();
    BinaryMask photo(H, W, 0), survive(H, W, 0);
    Field<int> count(H, W, 0);
#pragma omp parallel for
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        const double d = vi.depth.at(r, c);
        if (!(vi.prob.at(r, c) > cfg.conf_threshold) || !(d > 0.0)) continue;
        photo.at(r, c) = 1;
        int n = 0;
        for (std::size_t j = 0; j < views.size(); ++j)
          if (j != i && round_trip_ok(vi, views[j], c, r, d, cfg)) ++n;
        count.at(r, c) = n;
        survive.at(r, c) = n >= cfg.n_min ? 1 : 0;
      }
    }
    res.survive.push_back(std::move(survive));
    res.photometric.push_back(std::move(photo));
    res.consistent_views.push_back(std::move(count));
  }
  return res;
}

PointCloud fuse_point_cloud(std::span<const DepthEstimate> views,
                            std::span<const BinaryMask> masks, const FusionConfig& cfg) {
  cfg.validate();
  require(views.size() == masks.size(), "fuse_point_cloud: one mask per view required");
  std::vector<BinaryMask> consumed;
  for (std::size_t i = 0; i < views.size(); ++i) {
    require(masks[i].same_shape(views[i].depth), "fuse_point_cloud: mask shape mismatch");
    consumed.emplace_back(masks[i].height(), masks[i].width(), 0);
  }

  PointCloud cloud;
  for (std::size_t i = 0; i < views.size(); ++i) {
    const DepthEstimate& vi = views[i];
    const int H = vi.depth.height(), W = vi.depth.width();
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        if (!masks[i].at(r, c) || consumed[i].at(r, c)) continue;
        consumed[i].at(r, c) = 1;
        const double d = vi.depth.at(r, c);
        Eigen::Vector3d sum = vi.camera.backproject({c, r}, d);
        int n = 1;
        for (std::size_t j = 0; j < views.size(); ++j) {
          if (j == i) continue;
          const DepthEstimate& vj = views[j];
          double zj = 0.0;
          const Eigen::Vector2d pj = vj.camera.project(vi.camera.backproject({c, r}, d), &zj);
          if (zj <= kMinProjectDepth) continue;
          const long cj = std::lround(pj.x()), rj = std::lround(pj.y());
          if (cj < 0 || rj < 0 || cj >= vj.depth.width() || rj >= vj.depth.height()) continue;
          if (!masks[j].at(rj, cj) || consumed[j].at(rj, cj)) continue;
          // The partner must see the same surface, not an occluder in front of it.
          if (std::abs(vj.depth.at(rj, cj) - zj) >= cfg.tau_d * zj) continue;
          if (!round_trip_ok(vj, vi, cj, rj, vj.depth.at(rj, cj), cfg)) continue;
          sum += vj.camera.backproject({cj, rj}, vj.depth.at(rj, cj));
          ++n;
          consumed[j].at(rj, cj) = 1;
        }
        const Eigen::Vector3d X = sum / n;
        CloudPoint p;
        for (int k = 0; k < 3; ++k) p.xyz[k] = static_cast<float>(X[k]);
        for (int k = 0; k < 3; ++k) {
          const double v = vi.image.at(r, c, vi.image.channels() == 3 ? k : 0);
          p.rgb[k] = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
        }
        p.view = vi.id;
        p.row = r;
        p.col = c;
        cloud.points.push_back(p);
      }
    }
  }
  bool any = false;
  for (const BinaryMask& m : masks) any = any || count(m) > 0;
  cloud.empty_input = !any;
  return cloud;
}

std::vector<double> depth_metrics(const ScalarField& depth, const ScalarField& gt,
                                  const BinaryMask& valid, std::span<const double> thresholds_mm) {
  require(depth.same_shape(gt) && valid.same_shape(depth), "depth_metrics: shape mismatch");
  const std::size_t n = count(valid);
  require(n > 0, "depth_metrics: empty valid mask");
  std::vector<double> out;
  for (double tau : thresholds_mm) {
    std::size_t hit = 0;
    for (std::size_t i = 0; i < depth.size(); ++i)
      if (valid[i] && std::abs(depth[i] - gt[i]) <= tau) ++hit;
    out.push_back(static_cast<double>(hit) / static_cast<double>(n));
  }
  return out;
}

namespace {

struct CellKey {
  long x, y, z;
  bool operator==(const CellKey&) const = default;
};
struct CellHash {
  std::size_t operator()(const CellKey& k) const {
    std::size_t h = static_cast<std::size_t>(k.x) * 73856093u;
    h ^= static_cast<std::size_t>(k.y) * 19349663u;
    h ^= static_cast<std::size_t>(k.z) * 83492791u;
    return h;
  }
};

class HashGrid {
 public:
  HashGrid(const PointCloud& cloud, double cell) : cloud_(cloud), cell_(cell) {
    for (std::size_t i = 0; i < cloud.points.size(); ++i)
      cells_[key(cloud.points[i].xyz)].push_back(i);
  }

  double nearest(const std::array<float, 3>& q, double cap) const {
    const CellKey k = key(q);
    double best = cap * cap;
    for (long dx = -1; dx <= 1; ++dx)
      for (long dy = -1; dy <= 1; ++dy)
        for (long dz = -1; dz <= 1; ++dz) {
          const auto it = cells_.find({k.x + dx, k.y + dy, k.z + dz});
          if (it == cells_.end()) continue;
          for (std::size_t i : it->second) {
            const auto& p = cloud_.points[i].xyz;
            const double ex = double(p[0]) - q[0], ey = double(p[1]) - q[1],
                         ez = double(p[2]) - q[2];
            best = std::min(best, ex * ex + ey * ey + ez * ez);
          }
        }
    return std::sqrt(best);
  }

 private:
  CellKey key(const std::array<float, 3>& p) const {
    return {static_cast<long>(std::floor(p[0] / cell_)), static_cast<long>(std::floor(p[1] / cell_)),
            static_cast<long>(std::floor(p[2] / cell_))};
  }

  const PointCloud& cloud_;
  double cell_;
  std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> cells_;
};

double mean_distance(const PointCloud& from, const HashGrid& to, double cap) {
  std::vector<double> dist(from.points.size());
#pragma omp parallel for
  for (long i = 0; i < static_cast<long>(from.points.size()); ++i)
    dist[i] = to.nearest(from.points[i].xyz, cap);
  double sum = 0.0;
  for (double d : dist) sum += d;
  return sum / static_cast<double>(dist.size());
}

}  // namespace

CloudMetrics cloud_metrics(const PointCloud& pred, const PointCloud& gt, double cap) {
  require(!pred.points.empty() && !gt.points.empty(), "cloud_metrics: empty cloud");
  require(cap > 0.0, "cloud_metrics: cap must be positive");
  const HashGrid gt_grid(gt, cap), pred_grid(pred, cap);
  CloudMetrics m;
  m.accuracy = mean_distance(pred, gt_grid, cap);
  m.completeness = mean_distance(gt, pred_grid, cap);
  m.overall = 0.5 * (m.accuracy + m.completeness);
  return m;
}

}  // namespace clmvs
