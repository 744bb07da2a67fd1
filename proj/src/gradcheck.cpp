#include "clmvs/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "clmvs/scene.hpp"

namespace clmvs {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), 1e-10});
}

namespace {

std::string norm_name(double theta) {
  if (theta == 0.5) return "photometric_l0.5";
  if (theta == 1.0) return "photometric_l1";
  if (theta == 2.0) return "photometric_l2";
  return "photometric_theta" + std::to_string(theta);
}

// Pixels whose warp sits on a cell boundary or whose residuals are at an |x|
// kink, where the one-sided analytic derivative legitimately differs from
// central differences.
BinaryMask warp_exclusions(const BranchLoss& at, const Image& ref, const AuditConfig& cfg,
                           bool photometric) {
  const int H = ref.height(), W = ref.width(), nc = ref.channels();
  BinaryMask ex(H, W, 0);
  for (const WarpWithDerivative& wp : at.warps) {
    for (int r = 0; r < H; ++r) {
      for (int c = 0; c < W; ++c) {
        const double col = wp.src_col.at(r, c), row = wp.src_row.at(r, c);
        if (col != -1.0 && cell_boundary_distance(col, row) < cfg.boundary_px) ex.at(r, c) = 1;
        if (!photometric || !wp.valid.at(r, c)) continue;
        auto diff = [&](int rr, int cc, int k) { return wp.warped.at(rr, cc, k) - ref.at(rr, cc, k); };
        for (int k = 0; k < nc; ++k) {
          if (std::abs(diff(r, c, k)) < cfg.kink) ex.at(r, c) = 1;
          const int nb[4][2] = {{r, c + 1}, {r, c - 1}, {r + 1, c}, {r - 1, c}};
          for (const auto& q : nb) {
            if (q[0] < 0 || q[1] < 0 || q[0] >= H || q[1] >= W || !wp.valid.at(q[0], q[1]))
              continue;
            if (std::abs(diff(r, c, k) - diff(q[0], q[1], k)) < cfg.kink) ex.at(r, c) = 1;
          }
        }
      }
    }
  }
  return ex;
}

void tally(TermAudit& t, const GradField& analytic, const GradField& numeric,
           const BinaryMask& valid, const BinaryMask& excluded, double tol) {
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    if (!valid[i]) continue;
    if (excluded[i]) {
      ++t.excluded;
      continue;
    }
    ++t.checked;
    const double e = relative_error(analytic[i], numeric[i]);
    t.max_rel_error = std::max(t.max_rel_error, e);
    if (e < tol) ++t.passed;
  }
}

BinaryMask any_valid(const BranchLoss& at, int H, int W) {
  BinaryMask m(H, W, 0);
  for (const auto& wp : at.warps)
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = m[i] || wp.valid[i];
  return m;
}

}  // namespace

std::vector<TermAudit> audit_gradients(const AuditConfig& cfg) {
  require(cfg.configurations >= 1 && cfg.h > 0.0, "audit_gradients: bad configuration");
  std::vector<TermAudit> terms;
  for (double th : cfg.thetas) terms.push_back({norm_name(th)});
  const std::size_t i_ssim = terms.size();
  terms.push_back({"ssim"});
  terms.push_back({"smoothness"});
  terms.push_back({"icc"});
  terms.push_back({"scc"});

  const SceneGeometry geoms[] = {SceneGeometry::kTexturedPlane, SceneGeometry::kCube,
                                 SceneGeometry::kSphere, SceneGeometry::kPlaneWithOccluder};
  for (int k = 0; k < cfg.configurations; ++k) {
    const std::uint64_t seed = cfg.seed * 1000003ULL + static_cast<std::uint64_t>(k);
    SceneSpec spec;
    spec.height = cfg.height;
    spec.width = cfg.width;
    spec.n_views = 4;
    spec.geometry = geoms[k % 4];
    spec.texture = (k / 4) % 2 ? SceneTexture::kChecker : SceneTexture::kNoise;
    spec.specular_strength = (k % 3 == 0) ? 0.3 : 0.0;
    spec.seed = seed;
    const Scene scene = gen_scene(spec);
    const Sample reg = select_regular_views(scene.views, 0, scene.pairs.at(0), 3);
    const Sample sc = make_scene_contrastive(scene.views, 0, 3, seed + 1);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jit(-cfg.perturb_mm, cfg.perturb_mm);
    std::bernoulli_distribution coin(0.5);
    const ScalarField& gt = *scene.views[0].gt_depth;
    const Camera& cam = reg.reference.camera;
    auto perturbed = [&]() {
      ScalarField d = gt;
      for (double& v : d.data()) v = std::clamp(v + jit(rng), cam.depth_min, cam.depth_max);
      return d;
    };
    const ScalarField depth = perturbed();
    const ScalarField d_icc = perturbed();
    const ScalarField d_scc = perturbed();
    BinaryMask conf(gt.height(), gt.width(), 0);
    for (auto& m : conf.data()) m = coin(rng) ? 1 : 0;
    const BinaryMask none(gt.height(), gt.width(), 0);
    const BinaryMask all(gt.height(), gt.width(), 1);

    auto only = [](double pc, double ssim, double smooth) {
      BranchObjective o;
      o.w_pc = pc;
      o.w_ssim = ssim;
      o.w_smooth = smooth;
      return o;
    };

    for (std::size_t t = 0; t < cfg.thetas.size(); ++t) {
      BranchObjective o = only(1.0, 0.0, 0.0);
      o.norm.theta = cfg.thetas[t];
      const BranchLoss a = loss_grad_wrt_depth(reg, depth, o);
      const GradField f = finite_diff_grad(reg, depth, o, cfg.h);
      tally(terms[t], a.grad, f, any_valid(a, gt.height(), gt.width()),
            warp_exclusions(a, reg.reference.image, cfg, true), cfg.tolerance);
    }
    {
      const BranchObjective o = only(0.0, 1.0, 0.0);
      const BranchLoss a = loss_grad_wrt_depth(reg, depth, o);
      const GradField f = finite_diff_grad(reg, depth, o, cfg.h);
      tally(terms[i_ssim], a.grad, f, any_valid(a, gt.height(), gt.width()),
            warp_exclusions(a, reg.reference.image, cfg, false), cfg.tolerance);
    }
    {
      const BranchObjective o = only(0.0, 0.0, 1.0);
      const BranchLoss a = loss_grad_wrt_depth(reg, depth, o);
      const GradField f = finite_diff_grad(reg, depth, o, cfg.h);
      BinaryMask ex(gt.height(), gt.width(), 0);
      for (int r = 0; r < gt.height(); ++r)
        for (int c = 0; c < gt.width(); ++c) {
          const int nb[4][2] = {{r, c + 1}, {r, c - 1}, {r + 1, c}, {r - 1, c}};
          for (const auto& q : nb)
            if (q[0] >= 0 && q[1] >= 0 && q[0] < gt.height() && q[1] < gt.width() &&
                std::abs(depth.at(r, c) - depth.at(q[0], q[1])) < cfg.kink)
              ex.at(r, c) = 1;
        }
      tally(terms[i_ssim + 1], a.grad, f, all, ex, cfg.tolerance);
    }
    const std::pair<const ScalarField*, const Sample*> cons[2] = {{&d_icc, &reg}, {&d_scc, &sc}};
    for (int b = 0; b < 2; ++b) {
      BranchObjective o = only(0.0, 0.0, 0.0);
      o.consistency.push_back({cons[b].first, &conf, 1.0});
      const BranchLoss a = loss_grad_wrt_depth(*cons[b].second, depth, o);
      const GradField f = finite_diff_grad(*cons[b].second, depth, o, cfg.h);
      BinaryMask ex(gt.height(), gt.width(), 0);
      for (std::size_t i = 0; i < ex.size(); ++i)
        ex[i] = std::abs(depth[i] - (*cons[b].first)[i]) < 10.0 * cfg.h ? 1 : 0;
      tally(terms[i_ssim + 2 + b], a.grad, f, conf, ex, cfg.tolerance);
    }
  }
  return terms;
}

}  // namespace clmvs
