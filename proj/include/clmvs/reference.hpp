#pragma once

// Single-threaded reference versions of the OpenMP kernels. They follow the
// same arithmetic order as the parallel kernels, so results must match
// bit-for-bit; tests and the benchmark compare the two.

#include <span>

#include "clmvs/geometry.hpp"
#include "clmvs/planesweep.hpp"

namespace clmvs::serial {

WarpResult warp_to_reference(const CameraView& src, const ScalarField& depth,
                             const Camera& ref_cam);

FeatureVolume build_feature_volume(const FeatureMap& src_feat, const HypothesisSet& hyps,
                                   const Camera& ref_cam, const Camera& src_cam);

CostVolume groupwise_correlation(const FeatureVolume& ref_vol,
                                 std::span<const FeatureVolume> src_vols, int num_groups,
                                 bool strict_source_sum = false);

}  // namespace clmvs::serial
