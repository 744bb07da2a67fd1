#pragma once

#include <array>
#include <span>
#include <vector>

#include "clmvs/geometry.hpp"
#include "clmvs/grid.hpp"

namespace clmvs {

/// Per-pixel depth hypotheses, stored hypothesis-major: [d][row][col].
struct HypothesisSet {
  int stage = 1;
  int count = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  double at(int d, int row, int col) const {
    return values[(static_cast<std::size_t>(d) * height + row) * width + col];
  }
  double& at(int d, int row, int col) {
    return values[(static_cast<std::size_t>(d) * height + row) * width + col];
  }
};

/// N_C feature channels per pixel, channel-major: [c][row][col].
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  double at(int c, int row, int col) const {
    return data[(static_cast<std::size_t>(c) * height + row) * width + col];
  }
  double& at(int c, int row, int col) {
    return data[(static_cast<std::size_t>(c) * height + row) * width + col];
  }
};

/// Warped features per hypothesis: [c][d][row][col].
struct FeatureVolume {
  int channels = 0;
  int depths = 0;
  int height = 0;
  int width = 0;
  int view_id = -1;
  std::vector<double> data;

  std::size_t index(int c, int d, int row, int col) const {
    return ((static_cast<std::size_t>(c) * depths + d) * height + row) * width + col;
  }
  double at(int c, int d, int row, int col) const { return data[index(c, d, row, col)]; }
  double& at(int c, int d, int row, int col) { return data[index(c, d, row, col)]; }
};

/// Group-wise correlation cost: [g][d][row][col].
struct CostVolume {
  int groups = 0;
  int depths = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  std::size_t index(int g, int d, int row, int col) const {
    return ((static_cast<std::size_t>(g) * depths + d) * height + row) * width + col;
  }
  double at(int g, int d, int row, int col) const { return data[index(g, d, row, col)]; }
  double& at(int g, int d, int row, int col) { return data[index(g, d, row, col)]; }
};

/// Per-pixel distribution over hypotheses: [d][row][col].
struct ProbVolume {
  int depths = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  std::size_t index(int d, int row, int col) const {
    return (static_cast<std::size_t>(d) * height + row) * width + col;
  }
  double at(int d, int row, int col) const { return data[index(d, row, col)]; }
  double& at(int d, int row, int col) { return data[index(d, row, col)]; }
};

inline constexpr int kFeatureChannels = 8;

struct CascadeConfig {
  std::array<int, 3> counts{48, 32, 8};
  /// Stage s runs at (H-1)/downscale[s]+1 rows (corner-aligned).
  std::array<int, 3> downscale{4, 2, 1};
  /// Finest interval = depth range / fine_interval_divisions.
  int fine_interval_divisions = 191;
  /// Stage-2 interval as a multiple of the finest interval.
  double stage2_interval_factor = 4.0;
  /// Stage-1 interval multiplier; 1 spans exactly [depth_min, depth_max].
  double coarse_interval_scale = 1.0;
  int num_groups = 2;
  double softmax_temperature = 0.005;
  int smoothing_passes = 2;
  double gamma = 0.95;
  /// Sum sources i = 2..N-1 literally instead of all N-1 sources.
  bool strict_source_sum = false;
};

/// Output resolution of stage `stage` (1-based) for an H x W input.
std::array<int, 2> stage_shape(int height, int width, int stage, const CascadeConfig& cfg);

/// Hypothesis spacing of each stage in mm.
std::array<double, 3> stage_intervals(const Camera& cam, const CascadeConfig& cfg);

/// Stage 1 (no prev_depth): `count` hypotheses covering the camera range
/// (interval <= 0) or a window of the given interval centred mid-range.
/// Later stages: a window of `count` hypotheses at `interval` spacing centred
/// on the upsampled previous depth, shifted to stay inside the range.
HypothesisSet build_hypotheses(const Camera& cam, int stage, const ScalarField* prev_depth,
                               int count, double interval, int height, int width);

/// Fixed replacement for a learned feature pyramid. Channels, in two groups:
///   0 gray - local mean, 1 gx, 2 gy, 3 |grad| - local mean |grad|,
///   4 gray, 5 local mean, 6 local std, 7 |grad|
/// computed on a blurred copy resized to the stage resolution.
FeatureMap extract_features(const Image& img, int stage, const CascadeConfig& cfg = {});

/// Rescales each channel group per pixel to RMS 1 so that group-wise
/// correlations are cosines in [-1, 1]. Near-zero groups become zero.
void normalize_feature_groups(FeatureMap& feat, int num_groups);

FeatureVolume reference_feature_volume(const FeatureMap& ref_feat, int depths);

/// Samples source features at the projection of each (hypothesis, pixel).
/// Cameras must already be scaled to the feature resolution.
FeatureVolume build_feature_volume(const FeatureMap& src_feat, const HypothesisSet& hyps,
                                   const Camera& ref_cam, const Camera& src_cam);

/// C = 1 / ((N-1) N_C/N_G) * sum_i <V_1^g, V_i^g>.
CostVolume groupwise_correlation(const FeatureVolume& ref_vol,
                                 std::span<const FeatureVolume> src_vols, int num_groups,
                                 bool strict_source_sum = false);

/// Group average, separable 3-tap box smoothing along (d, row, col) repeated
/// `passes` times, then a softmax over d of score / temperature.
ProbVolume regularize_and_softmax(const CostVolume& cost, double temperature, int passes = 2);

ScalarField regress_depth(const ProbVolume& prob, const HypothesisSet& hyps);

struct Confidence {
  ScalarField prob_map;
  BinaryMask mask;
  /// True when fewer than four hypotheses were available.
  bool window_shrunk = false;
};

/// Probability mass in the 4-hypothesis window around `depth`, and the mask
/// prob_map > gamma.
Confidence probability_and_confidence(const ProbVolume& prob, const HypothesisSet& hyps,
                                      const ScalarField& depth, double gamma);

struct StageOutput {
  int stage = 1;
  Camera camera;
  HypothesisSet hyps;
  ProbVolume prob;
  ScalarField depth;
  ScalarField prob_map;
  BinaryMask confidence;
};

/// Coarse-to-fine inference over three stages; back() is the final result.
std::vector<StageOutput> cascade_infer(const CameraView& ref, std::span<const CameraView> sources,
                                       const CascadeConfig& cfg = {});

/// Final-stage sweep with hypotheses centred on `depth`. Returns P_m and M_c
/// evaluated at `depth` itself.
Confidence confidence_around(const CameraView& ref, std::span<const CameraView> sources,
                             const ScalarField& depth, const CascadeConfig& cfg = {});

}  // namespace clmvs
