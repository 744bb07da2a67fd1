#pragma once

#include <cstdint>
#include <vector>

#include "clmvs/depthopt.hpp"
#include "clmvs/fusion.hpp"
#include "clmvs/scene.hpp"

namespace clmvs {

/// Fixed-seed scenario runners shared by the acceptance binary and the CLI.
/// Each one is deterministic in its seed.

struct SweepTrial {
  double within_2mm = 0.0;
  std::size_t valid = 0;
};

/// Cascade inference of view 0 on a noise-free checker plane.
SweepTrial planesweep_trial(std::uint64_t seed, const CascadeConfig& cascade = {});

struct BranchTrial {
  /// Median |D - GT| over the affected reference pixels, mm.
  double median_error = 0.0;
  std::size_t affected = 0;
};

/// Joint optimisation with alpha = 0.1 occlusion on the image-contrastive
/// sources. Reports D_IC on reference pixels whose GT match is occluded in
/// at least one source.
BranchTrial icc_trial(std::uint64_t seed, double lambda2, const OptConfig& base = {});

/// Joint optimisation on a 9-view scene where one of the scene-contrastive
/// sources carries a transient occluder and a highlight. Reports D_SC on the
/// reference pixels that see the corrupted region.
BranchTrial scc_trial(std::uint64_t seed, double lambda3, const OptConfig& base = {});

/// Regular-branch optimisation on a checker plane whose views have
/// `outlier_fraction` of their pixels replaced by noise. Returns the fraction
/// of the 80% most confident pixels (by the cascade's P_m) within 2 mm.
double norm_trial(std::uint64_t seed, double theta, double outlier_fraction = 0.2,
                  const OptConfig& base = {});

/// Depth and P_m of one view as used for fusion: cascade inference on its
/// regular sample, then (when `optimize` is set) regular-branch refinement and
/// P_m re-measured around the refined depth.
DepthEstimate estimate_for_fusion(const Scene& scene, int view_id, int num_views,
                                  const OptConfig& opt, bool optimize = true);

struct FusionTrial {
  PointCloud cloud;
  double within_interval = 0.0;
  double interval = 0.0;
  /// Every fused point's seed pixel passed the P_m gate and the
  /// cross-view gate.
  bool provenance_ok = true;
};

FusionTrial fusion_trial(std::uint64_t seed, const OptConfig& opt = {},
                         const FusionConfig& fusion = {});

double median(std::vector<double> v);

}  // namespace clmvs
