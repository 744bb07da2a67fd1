#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "clmvs/geometry.hpp"

namespace clmvs {

enum class SampleKind { kRegular, kImageContrastive, kSceneContrastive };

const char* to_string(SampleKind kind);

/// One reference view plus N-1 source views.
struct Sample {
  CameraView reference;
  std::vector<CameraView> sources;
  SampleKind kind = SampleKind::kRegular;
  std::vector<int> source_ids;
  std::uint64_t seed = 0;
  /// Per-source occlusion masks (1 = zeroed), image-contrastive samples only.
  std::vector<BinaryMask> occlusion;
};

/// Candidate views of one reference with their selection scores.
using ScoredViews = std::vector<std::pair<int, double>>;
/// Reference view id -> scored candidates (the pair-file content).
using PairScores = std::map<int, ScoredViews>;

/// Top `count` candidates by score, ties broken by ascending view id.
std::vector<int> top_scored(const ScoredViews& candidates, int count);

/// Regular sample: the reference plus its N-1 highest-scoring views.
Sample select_regular_views(std::span<const CameraView> scene, int reference_id,
                            const ScoredViews& candidates, int num_views);

struct ColorFluctuation {
  bool enabled = true;
  double gamma_min = 0.8;
  double gamma_max = 1.25;
  double brightness = 0.1;
  double contrast_min = 0.8;
  double contrast_max = 1.2;
};

/// Image-level contrastive sample: every source gets a fresh Bernoulli(alpha)
/// pixel mask (occluded pixels zeroed in all channels) and a random color
/// fluctuation. The reference and all cameras are untouched.
Sample make_image_contrastive(const Sample& regular, double alpha, std::uint64_t seed,
                              const ColorFluctuation& fluctuation = {});

/// Scene-level contrastive sample: the same reference with N-1 views drawn
/// uniformly without replacement from the rest of the scene.
Sample make_scene_contrastive(std::span<const CameraView> scene, int reference_id, int num_views,
                              std::uint64_t seed);

struct Schedule {
  int epoch = 0;
  double alpha = 0.0;
  double lambda2 = 0.01;
};

/// alpha = 0.1 * epoch / (total_epochs - 1); lambda2 = 0.01 * 2^floor(epoch/2).
Schedule curriculum(int epoch, int total_epochs, double lambda2_init = 0.01,
                    double alpha_max = 0.1);

const CameraView& find_view(std::span<const CameraView> scene, int id);

}  // namespace clmvs
