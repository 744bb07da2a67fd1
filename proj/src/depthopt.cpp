#include "clmvs/depthopt.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace clmvs {

namespace {

bool has_ssim_support(const BinaryMask& m) {
  for (int r = 1; r + 1 < m.height(); ++r)
    for (int c = 1; c + 1 < m.width(); ++c)
      if (m.at(r, c)) return true;
  return false;
}

// dL/dD(p) = sum over sources and channels of dL/dI * dI/dD.
void chain_to_depth(BranchLoss& out, const std::vector<Image>& d_warped) {
  const int h = out.grad.height(), w = out.grad.width();
#pragma omp parallel for
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double g = 0.0;
      for (std::size_t i = 0; i < out.warps.size(); ++i) {
        if (!out.warps[i].valid.at(r, c)) continue;
        for (int k = 0; k < d_warped[i].channels(); ++k)
          g += d_warped[i].at(r, c, k) * out.warps[i].d_depth.at(r, c, k);
      }
      out.grad.at(r, c) = g;
    }
  }
}

BranchLoss evaluate(const Sample& sample, const ScalarField& depth, const BranchObjective& obj,
                    bool want_grad = true) {
  const Image& ref = sample.reference.image;
  require(depth.same_shape(ref), "loss_grad_wrt_depth: depth shape mismatch");
  const int h = ref.height(), w = ref.width(), nc = ref.channels();

  BranchLoss out;
  out.grad = GradField(h, w);

  if (obj.w_pc > 0.0 || obj.w_ssim > 0.0) {
    out.warps.reserve(sample.sources.size());
    for (const CameraView& src : sample.sources) {
      if (want_grad) {
        out.warps.push_back(warp_with_depth_derivative(src, depth, sample.reference.camera));
      } else {
        WarpResult wr = warp_to_reference(src, depth, sample.reference.camera);
        WarpWithDerivative wd;
        wd.warped = std::move(wr.warped);
        wd.valid = std::move(wr.valid);
        out.warps.push_back(std::move(wd));
      }
    }

    std::vector<Image> d_warped(out.warps.size(), Image(h, w, nc));
    if (obj.w_pc > 0.0) {
      std::vector<Image> warped;
      std::vector<BinaryMask> masks;
      for (const auto& wp : out.warps) {
        warped.push_back(wp.warped);
        masks.push_back(wp.valid);
      }
      const PhotometricResult pc =
          photometric_consistency(warped, masks, ref, obj.norm, want_grad);
      out.pc = pc.value;
      for (std::size_t i = 0; want_grad && i < out.warps.size(); ++i) {
        auto dst = d_warped[i].data();
        const auto src = pc.grad[i].data();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += obj.w_pc * src[j];
      }
    }
    if (obj.w_ssim > 0.0) {
      for (std::size_t i = 0; i < out.warps.size(); ++i) {
        if (!has_ssim_support(out.warps[i].valid)) continue;
        const SsimResult s = ssim_loss(out.warps[i].warped, ref, out.warps[i].valid, want_grad);
        out.ssim += s.value;
        if (!want_grad) continue;
        auto dst = d_warped[i].data();
        const auto src = s.grad.data();
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += obj.w_ssim * src[j];
      }
    }

    if (want_grad) chain_to_depth(out, d_warped);
  }

  if (obj.w_smooth > 0.0) {
    const SmoothnessResult s = smoothness_loss(depth, ref);
    out.smooth = s.value;
    for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += obj.w_smooth * s.grad[i];
  }

  double cons_weighted = 0.0;
  for (const ConsistencyTerm& t : obj.consistency) {
    if (t.weight == 0.0) continue;
    require(t.other && t.confidence, "loss_grad_wrt_depth: incomplete consistency term");
    const ConsistencyResult cr = branch_consistency(*t.other, depth, *t.confidence);
    out.consistency += cr.value;
    cons_weighted += t.weight * cr.value;
    for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += t.weight * cr.grad_branch[i];
  }

  out.total = obj.w_pc * out.pc + obj.w_ssim * out.ssim + obj.w_smooth * out.smooth +
              cons_weighted;
  return out;
}

}  // namespace

BranchLoss loss_grad_wrt_depth(const Sample& sample, const ScalarField& depth,
                               const BranchObjective& objective) {
  return evaluate(sample, depth, objective);
}

double branch_loss_value(const Sample& sample, const ScalarField& depth,
                         const BranchObjective& objective) {
  return evaluate(sample, depth, objective, false).total;
}

GradField finite_diff_grad(const DepthLossFn& loss, const ScalarField& depth, double h,
                           const BinaryMask* only) {
  require(h > 0.0, "finite_diff_grad: step must be positive");
  require(!only || only->same_shape(depth), "finite_diff_grad: mask shape mismatch");
  GradField grad(depth.height(), depth.width());
  const long n = static_cast<long>(depth.size());
#pragma omp parallel
  {
    ScalarField local = depth;
#pragma omp for schedule(dynamic, 16)
    for (long i = 0; i < n; ++i) {
      if (only && !(*only)[i]) continue;
      const double d = local[i];
      local[i] = d + h;
      const double lp = loss(local);
      local[i] = d - h;
      const double lm = loss(local);
      local[i] = d;
      grad[i] = (lp - lm) / (2.0 * h);
    }
  }
  return grad;
}

GradField finite_diff_grad(const Sample& sample, const ScalarField& depth,
                           const BranchObjective& objective, double h, const BinaryMask* only) {
  return finite_diff_grad(
      [&](const ScalarField& d) { return branch_loss_value(sample, d, objective); }, depth, h,
      only);
}

BranchOptimizer::BranchOptimizer(ScalarField depth, double step, int max_halvings,
                                 double depth_min, double depth_max)
    : depth_(std::move(depth)), step_(step), max_halvings_(max_halvings), lo_(depth_min),
      hi_(depth_max) {
  require(step > 0.0, "BranchOptimizer: step must be positive");
  require(max_halvings >= 0, "BranchOptimizer: max_halvings must be >= 0");
}

BranchOptimizer::StepResult BranchOptimizer::step(const Sample& sample,
                                                  const BranchObjective& objective) {
  const BranchLoss cur = evaluate(sample, depth_, objective);
  if (!std::isfinite(cur.total))
    throw Error("depth optimisation diverged: objective is " + std::to_string(cur.total) +
                " (pc=" + std::to_string(cur.pc) + ", ssim=" + std::to_string(cur.ssim) +
                ", smooth=" + std::to_string(cur.smooth) +
                ", consistency=" + std::to_string(cur.consistency) + ")");

  StepResult res{cur.total, cur.total, step_, false};
  double eta = step_;
  ScalarField trial(depth_.height(), depth_.width());
  for (int k = 0; k <= max_halvings_; ++k) {
    for (std::size_t i = 0; i < depth_.size(); ++i) {
      const double g = cur.grad[i];
      const double dir = (g > 0.0) - (g < 0.0);
      trial[i] = std::clamp(depth_[i] - eta * dir, lo_, hi_);
    }
    const double value = branch_loss_value(sample, trial, objective);
    if (std::isfinite(value) && value <= cur.total) {
      depth_ = trial;
      res.loss_after = value;
      res.accepted = true;
      break;
    }
    eta *= 0.5;
  }
  step_ = eta;
  res.step = step_;
  return res;
}

BranchObjective regular_objective(const OptConfig& cfg) {
  BranchObjective obj;
  obj.norm = cfg.norm;
  obj.w_pc = cfg.weights.pc;
  obj.w_ssim = cfg.weights.ssim;
  obj.w_smooth = cfg.weights.smooth;
  return obj;
}

namespace {

double initial_step(const Sample& s, const OptConfig& cfg) {
  if (cfg.initial_step > 0.0) return cfg.initial_step;
  return 0.5 * stage_intervals(s.reference.camera, cfg.cascade)[2];
}

ScalarField initial_depth(const Sample& s, const std::optional<ScalarField>& given,
                          const OptConfig& cfg) {
  if (given) {
    require(given->same_shape(s.reference.image), "optimize_joint: initial depth shape mismatch");
    return *given;
  }
  return cascade_infer(s.reference, s.sources, cfg.cascade).back().depth;
}

}  // namespace

OptState optimize_joint(const JointSamples& samples, const OptConfig& cfg,
                        const InitialDepths& init,
                        const std::function<void(const IterationRecord&)>& on_iteration) {
  require(samples.regular && samples.image_contrastive && samples.scene_contrastive,
          "optimize_joint: all three samples are required");
  const Sample& reg = *samples.regular;
  const Sample& ic = *samples.image_contrastive;
  const Sample& sc = *samples.scene_contrastive;
  require(ic.reference.id == reg.reference.id && sc.reference.id == reg.reference.id,
          "optimize_joint: samples must share the reference view");
  require(cfg.refresh_every >= 1, "optimize_joint: refresh_every must be >= 1");

  const Camera& cam = reg.reference.camera;
  const double step0 = initial_step(reg, cfg);
  BranchOptimizer opt_r(initial_depth(reg, init.regular, cfg), step0, cfg.max_halvings,
                        cam.depth_min, cam.depth_max);
  BranchOptimizer opt_i(initial_depth(ic, init.image, cfg), step0, cfg.max_halvings,
                        cam.depth_min, cam.depth_max);
  BranchOptimizer opt_s(initial_depth(sc, init.scene, cfg), step0, cfg.max_halvings,
                        cam.depth_min, cam.depth_max);

  OptState state;
  const BranchObjective base = regular_objective(cfg);
  const Schedule schedule{0, 0.0, cfg.lambda2};

  for (int it = 0; it < cfg.iterations; ++it) {
    if (it % cfg.refresh_every == 0)
      state.confidence = confidence_around(reg.reference, reg.sources, opt_r.depth(), cfg.cascade)
                             .mask;
    const ScalarField d_r = opt_r.depth();
    const ScalarField d_i = opt_i.depth();
    const ScalarField d_s = opt_s.depth();

    BranchObjective obj_r = base;
    if (!cfg.detach_regular) {
      obj_r.consistency.push_back({&d_i, &state.confidence, cfg.lambda2});
      obj_r.consistency.push_back({&d_s, &state.confidence, cfg.weights.scc});
    }
    BranchObjective contrastive = base;
    if (!cfg.contrastive_photometric)
      contrastive.w_pc = contrastive.w_ssim = contrastive.w_smooth = 0.0;
    BranchObjective obj_i = contrastive;
    obj_i.consistency.push_back({&d_r, &state.confidence, cfg.lambda2});
    BranchObjective obj_s = contrastive;
    obj_s.consistency.push_back({&d_r, &state.confidence, cfg.weights.scc});

    IterationRecord rec;
    rec.iteration = it;
    rec.branch[0] = opt_r.step(reg, obj_r);
    rec.branch[1] = opt_i.step(ic, obj_i);
    rec.branch[2] = opt_s.step(sc, obj_s);

    const BranchLoss reg_now = evaluate(reg, opt_r.depth(), base);
    LossParts parts;
    parts.pc = reg_now.pc;
    parts.ssim = reg_now.ssim;
    parts.smooth = reg_now.smooth;
    parts.icc = branch_consistency(opt_r.depth(), opt_i.depth(), state.confidence).value;
    parts.scc = branch_consistency(opt_r.depth(), opt_s.depth(), state.confidence).value;
    rec.report = overall_loss(parts, cfg.weights, schedule);
    rec.total = rec.report.total;
    rec.confident_fraction =
        static_cast<double>(count(state.confidence)) / state.confidence.size();
    if (!std::isfinite(rec.total))
      throw Error("depth optimisation diverged at iteration " + std::to_string(it));
    state.history.push_back(rec);
    if (on_iteration) on_iteration(rec);
    state.iteration = it + 1;
  }

  state.depth_regular = opt_r.depth();
  state.depth_image = opt_i.depth();
  state.depth_scene = opt_s.depth();
  state.steps = {opt_r.step_size(), opt_i.step_size(), opt_s.step_size()};
  return state;
}

ScalarField optimize_single(const Sample& sample, const ScalarField& init, const OptConfig& cfg) {
  const Camera& cam = sample.reference.camera;
  BranchOptimizer opt(init, initial_step(sample, cfg), cfg.max_halvings, cam.depth_min,
                      cam.depth_max);
  const BranchObjective obj = regular_objective(cfg);
  for (int it = 0; it < cfg.iterations; ++it) opt.step(sample, obj);
  return opt.depth();
}

std::string to_json_line(const IterationRecord& rec) {
  nlohmann::json j;
  j["iteration"] = rec.iteration;
  j["total"] = rec.total;
  j["components"] = rec.report.components;
  j["weights"] = rec.report.weights;
  const char* names[3] = {"regular", "image_contrastive", "scene_contrastive"};
  for (int b = 0; b < 3; ++b) {
    j["branches"][names[b]] = {{"loss_before", rec.branch[b].loss_before},
                               {"loss_after", rec.branch[b].loss_after},
                               {"step", rec.branch[b].step},
                               {"accepted", rec.branch[b].accepted}};
  }
  j["confident_fraction"] = rec.confident_fraction;
  return j.dump();
}

}  // namespace clmvs
