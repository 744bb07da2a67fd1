#pragma once

#include <span>
#include <vector>

#include "clmvs/geometry.hpp"
#include "clmvs/io.hpp"

namespace clmvs {

struct FusionConfig {
  double conf_threshold = 0.95;  // gamma_f on P_m
  double tau_px = 1.0;
  double tau_d = 0.01;
  int n_min = 3;

  void validate() const;
};

/// One view's depth estimate with its confidence map.
struct DepthEstimate {
  int id = 0;
  Camera camera;
  Image image;
  ScalarField depth;
  ScalarField prob;
};

struct FilterResult {
  std::vector<BinaryMask> survive;
  /// P_m > gamma_f.
  std::vector<BinaryMask> photometric;
  /// Number of other views passing the round-trip check, per pixel.
  std::vector<Field<int>> consistent_views;
};

/// Photometric gate P_m > gamma_f plus the forward-backward projection check
/// against every other view; a pixel survives with >= n_min agreeing views.
FilterResult geometric_consistency_filter(std::span<const DepthEstimate> views,
                                          const FusionConfig& cfg);

/// Greedy fusion in view order: each surviving, unconsumed pixel becomes one
/// point averaged with its consistent matches in the other views, which are
/// then consumed. Colour and provenance come from the seeding pixel.
PointCloud fuse_point_cloud(std::span<const DepthEstimate> views,
                            std::span<const BinaryMask> masks, const FusionConfig& cfg);

inline constexpr double kDefaultThresholdValues[] = {2.0, 4.0, 8.0};
inline constexpr std::span<const double> kDefaultThresholds{kDefaultThresholdValues};

/// Fraction of valid pixels with |D - D_gt| <= tau for each threshold.
std::vector<double> depth_metrics(const ScalarField& depth, const ScalarField& gt,
                                  const BinaryMask& valid,
                                  std::span<const double> thresholds_mm = kDefaultThresholds);

struct CloudMetrics {
  double accuracy = 0.0;
  double completeness = 0.0;
  double overall = 0.0;
};

/// Mean nearest-neighbour distances pred->gt (accuracy) and gt->pred
/// (completeness), each distance clamped to `cap` mm.
CloudMetrics cloud_metrics(const PointCloud& pred, const PointCloud& gt, double cap = 20.0);

}  // namespace clmvs
