#include "clmvs/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

namespace clmvs {

const char* to_string(SceneGeometry g) {
  switch (g) {
    case SceneGeometry::kTexturedPlane: return "textured_plane";
    case SceneGeometry::kCube: return "cube";
    case SceneGeometry::kSphere: return "sphere";
    case SceneGeometry::kPlaneWithOccluder: return "plane_with_occluder";
  }
  return "unknown";
}

const char* to_string(SceneTexture t) {
  switch (t) {
    case SceneTexture::kChecker: return "checker";
    case SceneTexture::kNoise: return "noise";
    case SceneTexture::kUniform: return "uniform";
  }
  return "unknown";
}

SceneGeometry parse_geometry(const std::string& s) {
  for (auto g : {SceneGeometry::kTexturedPlane, SceneGeometry::kCube, SceneGeometry::kSphere,
                 SceneGeometry::kPlaneWithOccluder})
    if (s == to_string(g)) return g;
  throw Error("unknown scene geometry '" + s + "'");
}

SceneTexture parse_texture(const std::string& s) {
  for (auto t : {SceneTexture::kChecker, SceneTexture::kNoise, SceneTexture::kUniform})
    if (s == to_string(t)) return t;
  throw Error("unknown scene texture '" + s + "'");
}

void SceneSpec::validate() const {
  require(n_views >= 2, "SceneSpec: n_views must be >= 2");
  require(height >= 4 && width >= 4, "SceneSpec: image too small");
  require(depth_min > 0.0 && depth_max > depth_min, "SceneSpec: depth range must be positive");
  require(specular_strength >= 0.0 && specular_strength <= 1.0,
          "SceneSpec: specular_strength must be in [0,1]");
  require(checker_period > 0.0 && noise_cell > 0.0 && noise_octaves >= 1,
          "SceneSpec: texture parameters must be positive");
  require(ring_radius > 0.0,
          "degenerate camera placement: ring_radius must be positive (views would coincide)");
  require(jitter >= 0.0 && jitter < ring_radius, "SceneSpec: jitter must be in [0, ring_radius)");
  require(target_distance > depth_min && target_distance < depth_max,
          "SceneSpec: target must lie inside the depth range");
  require(outlier_fraction >= 0.0 && outlier_fraction <= 1.0,
          "SceneSpec: outlier_fraction must be in [0,1]");
  require(corrupted_view >= -1 && corrupted_view < n_views,
          "SceneSpec: corrupted_view out of range");
}

namespace {

using Eigen::Matrix3d;
using Eigen::Vector3d;

enum class Shape { kPlane, kSphere, kBox };

struct Object {
  Shape shape = Shape::kPlane;
  Vector3d a = Vector3d::Zero();  // plane normal, sphere or box centre
  double d = 0.0;                 // plane offset (n.x + d = 0) or sphere radius
  Matrix3d axes = Matrix3d::Identity();  // box: rows are the local axes
  Vector3d half = Vector3d::Zero();
  Vector3d tint = Vector3d::Ones();
  Vector3d tex_offset = Vector3d::Zero();
  bool uniform_texture = false;
};

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  Vector3d n = Vector3d::Zero();
  int object = -1;
};

bool intersect(const Object& ob, const Vector3d& o, const Vector3d& dir, double& t, Vector3d& n) {
  constexpr double kEps = 1e-6;
  switch (ob.shape) {
    case Shape::kPlane: {
      const double den = ob.a.dot(dir);
      if (std::abs(den) < 1e-12) return false;
      t = -(ob.a.dot(o) + ob.d) / den;
      n = ob.a;
      return t > kEps;
    }
    case Shape::kSphere: {
      const Vector3d oc = o - ob.a;
      const double b = oc.dot(dir);
      const double c = oc.squaredNorm() - ob.d * ob.d;
      const double disc = b * b - c;
      if (disc < 0.0) return false;
      const double s = std::sqrt(disc);
      t = -b - s;
      if (t <= kEps) t = -b + s;
      if (t <= kEps) return false;
      n = (o + t * dir - ob.a).normalized();
      return true;
    }
    case Shape::kBox: {
      const Vector3d lo = ob.axes * (o - ob.a);
      const Vector3d ld = ob.axes * dir;
      double tmin = -std::numeric_limits<double>::infinity();
      double tmax = std::numeric_limits<double>::infinity();
      int axis = -1;
      for (int k = 0; k < 3; ++k) {
        if (std::abs(ld[k]) < 1e-12) {
          if (std::abs(lo[k]) > ob.half[k]) return false;
          continue;
        }
        double t0 = (-ob.half[k] - lo[k]) / ld[k];
        double t1 = (ob.half[k] - lo[k]) / ld[k];
        if (t0 > t1) std::swap(t0, t1);
        if (t0 > tmin) {
          tmin = t0;
          axis = k;
        }
        tmax = std::min(tmax, t1);
      }
      if (tmin > tmax || tmin <= kEps || axis < 0) return false;
      t = tmin;
      n = ob.axes.row(axis).transpose();
      return true;
    }
  }
  return false;
}

Hit trace(const std::vector<Object>& objects, const Vector3d& o, const Vector3d& dir) {
  Hit best;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    double t;
    Vector3d n;
    if (intersect(objects[i], o, dir, t, n) && t < best.t) {
      best.t = t;
      best.n = n;
      best.object = static_cast<int>(i);
    }
  }
  if (best.object >= 0 && best.n.dot(dir) > 0.0) best.n = -best.n;
  return best;
}

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double lattice(std::int64_t x, std::int64_t y, std::int64_t z, std::uint64_t salt) {
  std::uint64_t h = splitmix(salt);
  h = splitmix(h ^ static_cast<std::uint64_t>(x));
  h = splitmix(h ^ static_cast<std::uint64_t>(y));
  h = splitmix(h ^ static_cast<std::uint64_t>(z));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double value_noise(const Vector3d& p, std::uint64_t salt) {
  const double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
  const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy),
             iz = static_cast<std::int64_t>(fz);
  auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  const double u = smooth(p.x() - fx), v = smooth(p.y() - fy), w = smooth(p.z() - fz);
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double wt = (dx ? u : 1 - u) * (dy ? v : 1 - v) * (dz ? w : 1 - w);
        acc += wt * lattice(ix + dx, iy + dy, iz + dz, salt);
      }
  return acc;
}

double texture_value(const SceneSpec& spec, const Object& ob, const Vector3d& world,
                     const Vector3d& n) {
  if (ob.uniform_texture || spec.texture == SceneTexture::kUniform) return 0.5;
  const Vector3d p = world + ob.tex_offset;
  if (spec.texture == SceneTexture::kChecker) {
    int k = 0;
    n.cwiseAbs().maxCoeff(&k);
    const double u = p[(k + 1) % 3], v = p[(k + 2) % 3];
    const double w = 2.0 * std::numbers::pi / spec.checker_period;
    return 0.5 + 0.35 * std::sin(w * u) * std::sin(w * v);
  }
  double acc = 0.0, amp = 1.0, norm = 0.0, cell = spec.noise_cell;
  for (int o = 0; o < spec.noise_octaves; ++o) {
    acc += amp * (value_noise(p / cell, spec.seed * 131 + o) - 0.5);
    norm += amp;
    amp *= 0.5;
    cell *= 0.5;
  }
  return std::clamp(0.5 + 1.4 * acc / norm, 0.05, 0.95);
}

Object plane_through(const Vector3d& point, const Vector3d& normal) {
  Object ob;
  ob.shape = Shape::kPlane;
  ob.a = normal.normalized();
  ob.d = -ob.a.dot(point);
  return ob;
}

Object sphere(const Vector3d& c, double r) {
  Object ob;
  ob.shape = Shape::kSphere;
  ob.a = c;
  ob.d = r;
  return ob;
}

std::vector<Object> build_objects(const SceneSpec& spec) {
  const double z0 = spec.target_distance;
  const double backdrop = z0 + 90.0;
  std::vector<Object> objs;
  switch (spec.geometry) {
    case SceneGeometry::kTexturedPlane: {
      objs.push_back(plane_through({0, 0, z0}, {0.15, -0.1, -1.0}));
      objs.back().tint = {1.0, 0.95, 0.9};
      break;
    }
    case SceneGeometry::kCube: {
      Object box;
      box.shape = Shape::kBox;
      box.a = {0, 0, z0 - 20.0};
      box.half = Vector3d::Constant(70.0);
      const Matrix3d rot = (Eigen::AngleAxisd(35.0 * std::numbers::pi / 180.0, Vector3d::UnitY()) *
                            Eigen::AngleAxisd(25.0 * std::numbers::pi / 180.0, Vector3d::UnitX()))
                               .toRotationMatrix();
      box.axes = rot.transpose();
      box.tint = {0.95, 0.85, 0.75};
      box.tex_offset = {17.0, 5.0, 11.0};
      objs.push_back(box);
      objs.push_back(plane_through({0, 0, backdrop}, {0.0, 0.0, -1.0}));
      objs.back().tint = {0.8, 0.9, 1.0};
      break;
    }
    case SceneGeometry::kSphere: {
      objs.push_back(sphere({0, 0, z0 - 20.0}, 100.0));
      objs.back().tint = {1.0, 0.9, 0.8};
      objs.push_back(plane_through({0, 0, backdrop}, {0.0, 0.0, -1.0}));
      objs.back().tint = {0.8, 0.9, 1.0};
      break;
    }
    case SceneGeometry::kPlaneWithOccluder: {
      objs.push_back(plane_through({0, 0, z0 + 50.0}, {0.1, -0.05, -1.0}));
      objs.back().tint = {1.0, 0.95, 0.9};
      objs.push_back(sphere({-20.0, 15.0, z0 - 90.0}, 45.0));
      objs.back().tint = {0.7, 0.9, 0.7};
      objs.back().tex_offset = {9.0, 23.0, 3.0};
      break;
    }
  }
  return objs;
}

Camera look_at(const Vector3d& c, const Vector3d& target, const SceneSpec& spec) {
  const Vector3d f = (target - c).normalized();
  const Vector3d up(0, 1, 0);
  require(std::abs(f.dot(up)) < 0.99, "degenerate camera placement: view direction along up");
  const Vector3d x = up.cross(f).normalized();
  const Vector3d y = f.cross(x);
  Camera cam;
  Matrix3d R;
  R.row(0) = x.transpose();
  R.row(1) = y.transpose();
  R.row(2) = f.transpose();
  cam.pose.setIdentity();
  cam.pose.topLeftCorner<3, 3>() = R;
  cam.pose.topRightCorner<3, 1>() = -R * c;
  const double focal = 2.0 * spec.width;
  cam.K << focal, 0, (spec.width - 1) / 2.0, 0, focal, (spec.height - 1) / 2.0, 0, 0, 1;
  cam.depth_min = spec.depth_min;
  cam.depth_max = spec.depth_max;
  return cam;
}

struct Light {
  Vector3d dir;  // toward the light
  double ks = 0.0;
  double exponent = 20.0;
};

Vector3d shade(const SceneSpec& spec, const std::vector<Object>& objs, const Hit& hit,
               const Vector3d& origin, const Vector3d& dir, const std::vector<Light>& lights) {
  const Object& ob = objs[hit.object];
  const Vector3d p = origin + hit.t * dir;
  const double albedo = texture_value(spec, ob, p, hit.n);
  const Vector3d view = -dir;
  const double diffuse = std::max(0.0, hit.n.dot(lights.front().dir));
  Vector3d c = albedo * ob.tint * (0.3 + 0.7 * diffuse);
  for (const Light& l : lights) {
    if (l.ks <= 0.0) continue;
    const Vector3d r = 2.0 * hit.n.dot(l.dir) * hit.n - l.dir;
    c += Vector3d::Constant(l.ks * std::pow(std::max(0.0, r.dot(view)), l.exponent));
  }
  return c.cwiseMax(0.0).cwiseMin(1.0);
}

double ray_depth(const Camera& cam, const Vector3d& origin, const Vector3d& dir, double t) {
  return (cam.pose.topLeftCorner<3, 3>() * (origin + t * dir) + cam.translation()).z();
}

}  // namespace

double Scene::surface_distance(const Eigen::Vector3d& p) const {
  double best = std::numeric_limits<double>::infinity();
  for (const Object& ob : build_objects(spec)) {
    double d = 0.0;
    switch (ob.shape) {
      case Shape::kPlane: d = std::abs(ob.a.dot(p) + ob.d); break;
      case Shape::kSphere: d = std::abs((p - ob.a).norm() - ob.d); break;
      case Shape::kBox: {
        const Vector3d q = (ob.axes * (p - ob.a)).cwiseAbs() - ob.half;
        d = std::abs(q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0));
        break;
      }
    }
    best = std::min(best, d);
  }
  return best;
}

Scene gen_scene(const SceneSpec& spec) {
  spec.validate();
  Scene scene;
  scene.spec = spec;
  const std::vector<Object> objs = build_objects(spec);
  const Vector3d target(0, 0, spec.target_distance);

  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::vector<Camera> cams;
  cams.push_back(look_at(Vector3d::Zero(), target, spec));
  const int ring = spec.n_views - 1;
  for (int k = 0; k < ring; ++k) {
    const double phi = 2.0 * std::numbers::pi * k / ring + 0.1 * unit(rng);
    Vector3d c(spec.ring_radius * std::cos(phi), spec.ring_radius * std::sin(phi), 0.0);
    c += spec.jitter * Vector3d(unit(rng), unit(rng), unit(rng));
    cams.push_back(look_at(c, target, spec));
  }

  const Light key{Vector3d(-0.4, -0.6, -1.0).normalized(), spec.specular_strength, 20.0};
  const int H = spec.height, W = spec.width;
  for (int v = 0; v < spec.n_views; ++v) {
    const Camera& cam = cams[v];
    const Matrix3d Rt = cam.rotation().transpose();
    const Matrix3d Kinv = cam.K.inverse();
    const Vector3d origin = cam.center();
    auto ray_dir = [&](double col, double row) {
      return (Rt * (Kinv * Vector3d(col, row, 1.0))).normalized();
    };

    std::vector<Light> lights{key};
    std::vector<Object> vobjs = objs;
    const bool corrupted = v == spec.corrupted_view;
    if (corrupted) {
      // Highlight aimed at the image centre plus an occluder only this view sees.
      const Vector3d cdir = ray_dir((W - 1) / 2.0, (H - 1) / 2.0);
      const Hit ch = trace(objs, origin, cdir);
      require(ch.object >= 0, "degenerate camera placement: centre ray misses the scene");
      const Vector3d to_cam = -cdir;
      lights.push_back(
          {(2.0 * ch.n.dot(to_cam) * ch.n - to_cam).normalized(), spec.corruption_specular, 400.0});
      const Vector3d xaxis = cam.rotation().row(0).transpose();
      const Vector3d yaxis = cam.rotation().row(1).transpose();
      Object occ = sphere(origin + 0.72 * ch.t * cdir + 0.08 * ch.t * (0.8 * xaxis - 0.5 * yaxis),
                          0.065 * ch.t);
      occ.tint = {0.9, 0.3, 0.25};
      occ.uniform_texture = true;
      vobjs.push_back(occ);
    }

    CameraView view;
    view.id = v;
    view.camera = cam;
    view.image = Image(H, W, 3);
    ScalarField gt(H, W);
    BinaryMask changed(H, W, 0);
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        const Vector3d cdir = ray_dir(c, r);
        const Hit centre = trace(objs, origin, cdir);
        require(centre.object >= 0, "degenerate camera placement: ray misses every surface");
        gt.at(r, c) = ray_depth(cam, origin, cdir, centre.t);
        Vector3d acc = Vector3d::Zero();
        Vector3d base = Vector3d::Zero();
        for (int sy = -1; sy <= 1; ++sy) {
          for (int sx = -1; sx <= 1; ++sx) {
            const Vector3d d = ray_dir(c + sx / 3.0, r + sy / 3.0);
            const Hit h = trace(vobjs, origin, d);
            require(h.object >= 0, "degenerate camera placement: ray misses every surface");
            acc += shade(spec, vobjs, h, origin, d, lights);
            if (corrupted) {
              const Hit hb = trace(objs, origin, d);
              base += shade(spec, objs, hb, origin, d, {key});
            }
          }
        }
        acc /= 9.0;
        for (int k = 0; k < 3; ++k) view.image.at(r, c, k) = acc[k];
        if (corrupted && (acc - base / 9.0).cwiseAbs().maxCoeff() > 0.05) changed.at(r, c) = 1;
      }
    }
    for (std::size_t i = 0; i < gt.size(); ++i)
      require(gt[i] > spec.depth_min && gt[i] < spec.depth_max,
              "gen_scene: view " + std::to_string(v) + " sees depth " + std::to_string(gt[i]) +
                  " outside the camera range");

    if (spec.outlier_fraction > 0.0 && !(v == 0 && spec.clean_reference)) {
      std::mt19937_64 orng(splitmix(spec.seed ^ (0x51ed27ULL * (v + 1))));
      std::uniform_real_distribution<double> u01(0.0, 1.0);
      for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
          const bool hit = u01(orng) < spec.outlier_fraction;
          double vals[3] = {u01(orng), u01(orng), u01(orng)};
          if (!hit) continue;
          for (int k = 0; k < 3; ++k) view.image.at(r, c, k) = vals[k];
          changed.at(r, c) = 1;
        }
    }
    view.gt_depth = std::move(gt);
    scene.views.push_back(std::move(view));
    scene.corruption.push_back(std::move(changed));
  }

  // Pair scores: fraction of view i's pixels visible in view j.
  for (int i = 0; i < spec.n_views; ++i) {
    ScoredViews scored;
    const CameraView& vi = scene.views[i];
    for (int j = 0; j < spec.n_views; ++j) {
      if (j == i) continue;
      const CameraView& vj = scene.views[j];
      const RelativeWarp warp(vi.camera, vj.camera);
      std::size_t seen = 0;
      for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c) {
          const Projection pr = warp.project(c, r, vi.gt_depth->at(r, c));
          if (!pr.valid) continue;
          const long cc = std::lround(pr.pixel.x()), rr = std::lround(pr.pixel.y());
          if (cc < 0 || rr < 0 || cc >= W || rr >= H) continue;
          if (std::abs(vj.gt_depth->at(rr, cc) - pr.z) <= 0.01 * pr.z) ++seen;
        }
      scored.emplace_back(j, static_cast<double>(seen) / (static_cast<double>(H) * W));
    }
    scene.pairs[i] = std::move(scored);
  }
  return scene;
}

BinaryMask corruption_in_reference(const Scene& scene, int reference_id, int view_id) {
  const CameraView& ref = find_view(scene.views, reference_id);
  const CameraView& src = find_view(scene.views, view_id);
  const BinaryMask& bad = scene.corruption.at(static_cast<std::size_t>(view_id));
  const int H = ref.image.height(), W = ref.image.width();
  BinaryMask out(H, W, 0);
  const RelativeWarp warp(ref.camera, src.camera);
  for (int r = 0; r < H; ++r)
    for (int c = 0; c < W; ++c) {
      const Projection pr = warp.project(c, r, ref.gt_depth->at(r, c));
      if (!pr.valid) continue;
      const long cc = std::lround(pr.pixel.x()), rr = std::lround(pr.pixel.y());
      if (cc < 0 || rr < 0 || cc >= src.image.width() || rr >= src.image.height()) continue;
      if (std::abs(src.gt_depth->at(rr, cc) - pr.z) > 0.01 * pr.z) continue;
      if (bad.at(rr, cc)) out.at(r, c) = 1;
    }
  return out;
}

}  // namespace clmvs
