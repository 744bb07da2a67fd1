#include "clmvs/planesweep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "clmvs/imgcore.hpp"

namespace clmvs {

std::array<int, 2> stage_shape(int height, int width, int stage, const CascadeConfig& cfg) {
  require(stage >= 1 && stage <= 3, "stage_shape: stage must be 1..3");
  const int div = cfg.downscale[stage - 1];
  require(div >= 1, "stage_shape: downscale must be >= 1");
  return {(height - 1) / div + 1, (width - 1) / div + 1};
}

std::array<double, 3> stage_intervals(const Camera& cam, const CascadeConfig& cfg) {
  const double range = cam.depth_max - cam.depth_min;
  const double fine = range / cfg.fine_interval_divisions;
  return {cfg.coarse_interval_scale * range / (cfg.counts[0] - 1),
          cfg.stage2_interval_factor * fine, fine};
}

namespace {

/// Start of a `count`-wide window of `interval` spacing around `center`,
/// shifted to lie within [lo, hi]. Shrinks the spacing if the window
/// cannot fit at all.
std::pair<double, double> fit_window(double center, int count, double interval, double lo,
                                     double hi) {
  const double span = (count - 1) * interval;
  if (span >= hi - lo) return {lo, count > 1 ? (hi - lo) / (count - 1) : 0.0};
  double start = center - 0.5 * span;
  start = std::max(start, lo);
  start = std::min(start, hi - span);
  return {start, interval};
}

}  // namespace

HypothesisSet build_hypotheses(const Camera& cam, int stage, const ScalarField* prev_depth,
                               int count, double interval, int height, int width) {
  require(stage >= 1 && stage <= 3, "build_hypotheses: stage must be 1..3");
  require(count >= 1, "build_hypotheses: need at least one hypothesis");
  require(stage == 1 || prev_depth != nullptr,
          "build_hypotheses: stages after the first need the previous depth");
  const double lo = cam.depth_min, hi = cam.depth_max;
  HypothesisSet hs{stage, count, height, width,
                   std::vector<double>(static_cast<std::size_t>(count) * height * width)};

  if (prev_depth == nullptr) {
    const bool uniform = interval <= 0.0;
    const auto [start, step] =
        uniform ? std::pair<double, double>{lo, 0.0}
                : fit_window(0.5 * (lo + hi), count, interval, lo, hi);
    for (int d = 0; d < count; ++d) {
      const double v = uniform ? (count > 1 ? lo + (hi - lo) * d / (count - 1) : 0.5 * (lo + hi))
                               : start + d * step;
      std::fill_n(hs.values.begin() + static_cast<std::ptrdiff_t>(d) * height * width,
                  static_cast<std::size_t>(height) * width, v);
    }
    return hs;
  }

  const ScalarField center = (prev_depth->height() == height && prev_depth->width() == width)
                                 ? *prev_depth
                                 : resize_bilinear(*prev_depth, height, width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const double mid = std::clamp(center.at(r, c), lo, hi);
      const auto [start, step] = fit_window(mid, count, interval, lo, hi);
      for (int d = 0; d < count; ++d) hs.at(d, r, c) = start + d * step;
    }
  }
  return hs;
}

FeatureMap extract_features(const Image& img, int stage, const CascadeConfig& cfg) {
  const auto [h, w] = stage_shape(img.height(), img.width(), stage, cfg);
  const int div = cfg.downscale[stage - 1];
  ScalarField g = to_gray(img);
  if (div > 1) g = gaussian_blur(g, 0.5 * div);
  if (g.height() != h || g.width() != w) g = resize_bilinear(g, h, w);

  ScalarField gx(h, w), gy(h, w), mag(h, w), sq(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int cl = std::max(c - 1, 0), cr = std::min(c + 1, w - 1);
      const int ru = std::max(r - 1, 0), rd = std::min(r + 1, h - 1);
      gx.at(r, c) = cr > cl ? (g.at(r, cr) - g.at(r, cl)) / (cr - cl) : 0.0;
      gy.at(r, c) = rd > ru ? (g.at(rd, c) - g.at(ru, c)) / (rd - ru) : 0.0;
      mag.at(r, c) = std::hypot(gx.at(r, c), gy.at(r, c));
      sq.at(r, c) = g.at(r, c) * g.at(r, c);
    }
  }
  const ScalarField mean = box_mean3(g);
  const ScalarField mean_sq = box_mean3(sq);
  const ScalarField mean_mag = box_mean3(mag);

  FeatureMap f{kFeatureChannels, h, w,
               std::vector<double>(static_cast<std::size_t>(kFeatureChannels) * h * w)};
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double m = mean.at(r, c);
      const double var = std::max(mean_sq.at(r, c) - m * m, 0.0);
      f.at(0, r, c) = g.at(r, c) - m;
      f.at(1, r, c) = gx.at(r, c);
      f.at(2, r, c) = gy.at(r, c);
      f.at(3, r, c) = mag.at(r, c) - mean_mag.at(r, c);
      f.at(4, r, c) = g.at(r, c);
      f.at(5, r, c) = m;
      f.at(6, r, c) = std::sqrt(var);
      f.at(7, r, c) = mag.at(r, c);
    }
  }
  return f;
}

void normalize_feature_groups(FeatureMap& feat, int num_groups) {
  require(num_groups >= 1 && feat.channels % num_groups == 0,
          "normalize_feature_groups: channels must be divisible by groups");
  const int gs = feat.channels / num_groups;
  const double target = std::sqrt(static_cast<double>(gs));
  for (int g = 0; g < num_groups; ++g) {
    for (int r = 0; r < feat.height; ++r) {
      for (int c = 0; c < feat.width; ++c) {
        double n2 = 0;
        for (int k = g * gs; k < (g + 1) * gs; ++k) n2 += feat.at(k, r, c) * feat.at(k, r, c);
        const double n = std::sqrt(n2);
        const double s = n > 1e-6 ? target / n : 0.0;
        for (int k = g * gs; k < (g + 1) * gs; ++k) feat.at(k, r, c) *= s;
      }
    }
  }
}

FeatureVolume reference_feature_volume(const FeatureMap& ref_feat, int depths) {
  FeatureVolume v{ref_feat.channels, depths, ref_feat.height, ref_feat.width, -1, {}};
  v.data.resize(static_cast<std::size_t>(v.channels) * depths * v.height * v.width);
  const std::size_t plane = static_cast<std::size_t>(v.height) * v.width;
  for (int c = 0; c < v.channels; ++c)
    for (int d = 0; d < depths; ++d)
      std::copy_n(ref_feat.data.begin() + static_cast<std::ptrdiff_t>(c * plane), plane,
                  v.data.begin() + static_cast<std::ptrdiff_t>(v.index(c, d, 0, 0)));
  return v;
}

namespace {

void sample_features(const FeatureMap& f, double u, double v, double* out) {
  const int h = f.height, w = f.width;
  if (!(u >= 0.0 && u <= w - 1 && v >= 0.0 && v <= h - 1)) {
    std::fill_n(out, f.channels, 0.0);
    return;
  }
  const int c0 = std::min(static_cast<int>(u), std::max(w - 2, 0));
  const int r0 = std::min(static_cast<int>(v), std::max(h - 2, 0));
  const int c1 = std::min(c0 + 1, w - 1), r1 = std::min(r0 + 1, h - 1);
  const double fx = w > 1 ? u - c0 : 0.0, fy = h > 1 ? v - r0 : 0.0;
  for (int k = 0; k < f.channels; ++k) {
    out[k] = (1 - fy) * ((1 - fx) * f.at(k, r0, c0) + fx * f.at(k, r0, c1)) +
             fy * ((1 - fx) * f.at(k, r1, c0) + fx * f.at(k, r1, c1));
  }
}

}  // namespace

FeatureVolume build_feature_volume(const FeatureMap& src_feat, const HypothesisSet& hyps,
                                   const Camera& ref_cam, const Camera& src_cam) {
  const int nc = src_feat.channels, nd = hyps.count, h = hyps.height, w = hyps.width;
  FeatureVolume vol{nc, nd, h, w, -1,
                    std::vector<double>(static_cast<std::size_t>(nc) * nd * h * w, 0.0)};
  const RelativeWarp warp(ref_cam, src_cam);
#pragma omp parallel for collapse(2)
  for (int d = 0; d < nd; ++d) {
    for (int r = 0; r < h; ++r) {
      std::array<double, kFeatureChannels> buf{};
      std::vector<double> wide;
      double* out = buf.data();
      if (nc > kFeatureChannels) {
        wide.resize(nc);
        out = wide.data();
      }
      for (int c = 0; c < w; ++c) {
        const Projection p = warp.project(c, r, hyps.at(d, r, c));
        if (!p.valid) continue;
        sample_features(src_feat, p.pixel.x(), p.pixel.y(), out);
        for (int k = 0; k < nc; ++k) vol.at(k, d, r, c) = out[k];
      }
    }
  }
  return vol;
}

CostVolume groupwise_correlation(const FeatureVolume& ref_vol,
                                 std::span<const FeatureVolume> src_vols, int num_groups,
                                 bool strict_source_sum) {
  require(!src_vols.empty(), "groupwise_correlation: need at least one source volume");
  require(num_groups >= 1 && ref_vol.channels % num_groups == 0,
          "groupwise_correlation: N_C must be divisible by N_G");
  for (const auto& v : src_vols) {
    require(v.channels == ref_vol.channels && v.depths == ref_vol.depths &&
                v.height == ref_vol.height && v.width == ref_vol.width,
            "groupwise_correlation: volume shape mismatch");
  }
  const int gs = ref_vol.channels / num_groups;
  const int nd = ref_vol.depths, h = ref_vol.height, w = ref_vol.width;
  const std::size_t n_sources = src_vols.size();
  const std::size_t n_used = strict_source_sum ? n_sources - 1 : n_sources;
  const double scale = 1.0 / (static_cast<double>(n_sources) * gs);

  CostVolume cost{num_groups, nd, h, w,
                  std::vector<double>(static_cast<std::size_t>(num_groups) * nd * h * w, 0.0)};
#pragma omp parallel for collapse(3)
  for (int g = 0; g < num_groups; ++g) {
    for (int d = 0; d < nd; ++d) {
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
          double sum = 0.0;
          for (std::size_t i = 0; i < n_used; ++i) {
            for (int k = g * gs; k < (g + 1) * gs; ++k)
              sum += ref_vol.at(k, d, r, c) * src_vols[i].at(k, d, r, c);
          }
          cost.at(g, d, r, c) = scale * sum;
        }
      }
    }
  }
  return cost;
}

namespace {

/// In-place 3-tap mean along one axis of a [d][row][col] block; border
/// windows average only the taps that exist.
void box3_axis(std::vector<double>& v, int nd, int h, int w, int axis) {
  const std::vector<double> src = v;
  const int dims[3] = {nd, h, w};
  const std::size_t strides[3] = {static_cast<std::size_t>(h) * w, static_cast<std::size_t>(w), 1};
  const int n = dims[axis];
  const std::size_t stride = strides[axis];
#pragma omp parallel for collapse(2)
  for (int d = 0; d < nd; ++d) {
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const int pos[3] = {d, r, c};
        const std::size_t i = d * strides[0] + r * strides[1] + c;
        double s = src[i];
        int cnt = 1;
        if (pos[axis] > 0) s += src[i - stride], ++cnt;
        if (pos[axis] + 1 < n) s += src[i + stride], ++cnt;
        v[i] = s / cnt;
      }
    }
  }
}

}  // namespace

ProbVolume regularize_and_softmax(const CostVolume& cost, double temperature, int passes) {
  require(temperature > 0.0, "regularize_and_softmax: temperature must be positive");
  const int nd = cost.depths, h = cost.height, w = cost.width;
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  ProbVolume pv{nd, h, w, std::vector<double>(static_cast<std::size_t>(nd) * plane, 0.0)};
  for (int g = 0; g < cost.groups; ++g)
    for (std::size_t i = 0; i < pv.data.size(); ++i)
      pv.data[i] += cost.data[g * pv.data.size() + i] / cost.groups;

  for (int p = 0; p < passes; ++p)
    for (int axis = 0; axis < 3; ++axis) box3_axis(pv.data, nd, h, w, axis);

#pragma omp parallel for
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int d = 0; d < nd; ++d) mx = std::max(mx, pv.at(d, r, c));
      double z = 0.0;
      for (int d = 0; d < nd; ++d) {
        double& v = pv.at(d, r, c);
        v = std::exp((v - mx) / temperature);
        z += v;
      }
      for (int d = 0; d < nd; ++d) pv.at(d, r, c) /= z;
    }
  }
  return pv;
}

ScalarField regress_depth(const ProbVolume& prob, const HypothesisSet& hyps) {
  require(prob.depths == hyps.count && prob.height == hyps.height && prob.width == hyps.width,
          "regress_depth: shape mismatch");
  ScalarField depth(prob.height, prob.width);
  for (int r = 0; r < prob.height; ++r) {
    for (int c = 0; c < prob.width; ++c) {
      double s = 0.0;
      for (int d = 0; d < prob.depths; ++d) s += hyps.at(d, r, c) * prob.at(d, r, c);
      depth.at(r, c) = s;
    }
  }
  return depth;
}

Confidence probability_and_confidence(const ProbVolume& prob, const HypothesisSet& hyps,
                                      const ScalarField& depth, double gamma) {
  require(gamma > 0.0 && gamma < 1.0, "probability_and_confidence: gamma must be in (0,1)");
  require(prob.depths == hyps.count && prob.height == hyps.height && prob.width == hyps.width &&
              depth.height() == prob.height && depth.width() == prob.width,
          "probability_and_confidence: shape mismatch");
  const int nd = prob.depths;
  const int win = std::min(4, nd);
  Confidence out{ScalarField(prob.height, prob.width), BinaryMask(prob.height, prob.width, 0),
                 nd < 4};
  for (int r = 0; r < prob.height; ++r) {
    for (int c = 0; c < prob.width; ++c) {
      const double dv = depth.at(r, c);
      int below = 0;
      while (below + 1 < nd && hyps.at(below + 1, r, c) <= dv) ++below;
      const int start = std::clamp(below - 1, 0, nd - win);
      double s = 0.0;
      for (int d = start; d < start + win; ++d) s += prob.at(d, r, c);
      out.prob_map.at(r, c) = s;
      out.mask.at(r, c) = s > gamma ? 1 : 0;
    }
  }
  return out;
}

namespace {

StageOutput run_stage(const CameraView& ref, std::span<const CameraView> sources, int stage,
                      const ScalarField* prev_depth, const CascadeConfig& cfg,
                      const ScalarField* eval_depth) {
  const int H = ref.image.height(), W = ref.image.width();
  const auto [h, w] = stage_shape(H, W, stage, cfg);
  const auto intervals = stage_intervals(ref.camera, cfg);

  StageOutput out;
  out.stage = stage;
  out.camera = ref.camera.rescaled(H, W, h, w);
  const double interval = stage == 1 && cfg.coarse_interval_scale == 1.0 ? 0.0
                                                                         : intervals[stage - 1];
  out.hyps = build_hypotheses(out.camera, stage, prev_depth, cfg.counts[stage - 1], interval, h,
                              w);

  FeatureMap ref_feat = extract_features(ref.image, stage, cfg);
  normalize_feature_groups(ref_feat, cfg.num_groups);
  const FeatureVolume ref_vol = reference_feature_volume(ref_feat, out.hyps.count);

  std::vector<FeatureVolume> src_vols;
  src_vols.reserve(sources.size());
  for (const CameraView& s : sources) {
    FeatureMap f = extract_features(s.image, stage, cfg);
    normalize_feature_groups(f, cfg.num_groups);
    const Camera cam = s.camera.rescaled(s.image.height(), s.image.width(), h, w);
    src_vols.push_back(build_feature_volume(f, out.hyps, out.camera, cam));
    src_vols.back().view_id = s.id;
  }

  const CostVolume cost =
      groupwise_correlation(ref_vol, src_vols, cfg.num_groups, cfg.strict_source_sum);
  out.prob = regularize_and_softmax(cost, cfg.softmax_temperature, cfg.smoothing_passes);
  out.depth = regress_depth(out.prob, out.hyps);
  const Confidence conf =
      probability_and_confidence(out.prob, out.hyps, eval_depth ? *eval_depth : out.depth,
                                 cfg.gamma);
  out.prob_map = conf.prob_map;
  out.confidence = conf.mask;
  return out;
}

}  // namespace

std::vector<StageOutput> cascade_infer(const CameraView& ref, std::span<const CameraView> sources,
                                       const CascadeConfig& cfg) {
  require(!sources.empty(), "cascade_infer: need at least two views");
  std::vector<StageOutput> stages;
  stages.reserve(3);
  for (int s = 1; s <= 3; ++s) {
    const ScalarField* prev = stages.empty() ? nullptr : &stages.back().depth;
    stages.push_back(run_stage(ref, sources, s, prev, cfg, nullptr));
  }
  return stages;
}

Confidence confidence_around(const CameraView& ref, std::span<const CameraView> sources,
                             const ScalarField& depth, const CascadeConfig& cfg) {
  require(!sources.empty(), "confidence_around: need at least two views");
  require(depth.same_shape(ref.image), "confidence_around: depth shape mismatch");
  require(cfg.downscale[2] == 1, "confidence_around: final stage must run at full resolution");
  StageOutput st = run_stage(ref, sources, 3, &depth, cfg, &depth);
  return {std::move(st.prob_map), std::move(st.confidence), cfg.counts[2] < 4};
}

}  // namespace clmvs
