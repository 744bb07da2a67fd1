#include "clmvs/reference.hpp"

#include <algorithm>

namespace clmvs::serial {

WarpResult warp_to_reference(const CameraView& src, const ScalarField& depth,
                             const Camera& ref_cam) {
  const int h = depth.height(), w = depth.width(), nc = src.image.channels();
  const RelativeWarp warp(ref_cam, src.camera);
  WarpResult out{Image(h, w, nc), BinaryMask(h, w, 0)};
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

FeatureVolume build_feature_volume(const FeatureMap& src_feat, const HypothesisSet& hyps,
                                   const Camera& ref_cam, const Camera& src_cam) {
  const int nc = src_feat.channels, nd = hyps.count, h = hyps.height, w = hyps.width;
  FeatureVolume vol{nc, nd, h, w, -1,
                    std::vector<double>(static_cast<std::size_t>(nc) * nd * h * w, 0.0)};
  const RelativeWarp warp(ref_cam, src_cam);
  const int sh = src_feat.height, sw = src_feat.width;
  for (int d = 0; d < nd; ++d) {
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const Projection p = warp.project(c, r, hyps.at(d, r, c));
        if (!p.valid) continue;
        const double u = p.pixel.x(), v = p.pixel.y();
        if (!(u >= 0.0 && u <= sw - 1 && v >= 0.0 && v <= sh - 1)) continue;
        const int c0 = std::min(static_cast<int>(u), std::max(sw - 2, 0));
        const int r0 = std::min(static_cast<int>(v), std::max(sh - 2, 0));
        const int c1 = std::min(c0 + 1, sw - 1), r1 = std::min(r0 + 1, sh - 1);
        const double fx = sw > 1 ? u - c0 : 0.0, fy = sh > 1 ? v - r0 : 0.0;
        for (int k = 0; k < nc; ++k) {
          vol.at(k, d, r, c) =
              (1 - fy) * ((1 - fx) * src_feat.at(k, r0, c0) + fx * src_feat.at(k, r0, c1)) +
              fy * ((1 - fx) * src_feat.at(k, r1, c0) + fx * src_feat.at(k, r1, c1));
        }
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
  const std::size_t n_sources = src_vols.size();
  const std::size_t n_used = strict_source_sum ? n_sources - 1 : n_sources;
  const double scale = 1.0 / (static_cast<double>(n_sources) * gs);
  CostVolume cost{num_groups, ref_vol.depths, ref_vol.height, ref_vol.width,
                  std::vector<double>(static_cast<std::size_t>(num_groups) * ref_vol.depths *
                                          ref_vol.height * ref_vol.width,
                                      0.0)};
  for (int g = 0; g < num_groups; ++g) {
    for (int d = 0; d < ref_vol.depths; ++d) {
      for (int r = 0; r < ref_vol.height; ++r) {
        for (int c = 0; c < ref_vol.width; ++c) {
          double sum = 0.0;
          for (std::size_t i = 0; i < n_used; ++i)
            for (int k = g * gs; k < (g + 1) * gs; ++k)
              sum += ref_vol.at(k, d, r, c) * src_vols[i].at(k, d, r, c);
          cost.at(g, d, r, c) = scale * sum;
        }
      }
    }
  }
  return cost;
}

}  // namespace clmvs::serial
