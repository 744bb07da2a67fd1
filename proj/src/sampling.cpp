#include "clmvs/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace clmvs {

const char* to_string(SampleKind kind) {
  switch (kind) {
    case SampleKind::kRegular: return "regular";
    case SampleKind::kImageContrastive: return "image_contrastive";
    case SampleKind::kSceneContrastive: return "scene_contrastive";
  }
  return "unknown";
}

const CameraView& find_view(std::span<const CameraView> scene, int id) {
  for (const CameraView& v : scene)
    if (v.id == id) return v;
  throw Error("no view with id " + std::to_string(id));
}

std::vector<int> top_scored(const ScoredViews& candidates, int count) {
  require(count >= 0, "top_scored: negative count");
  require(static_cast<int>(candidates.size()) >= count,
          "select_regular_views: too few scored candidates");
  ScoredViews sorted = candidates;
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<int> ids;
  ids.reserve(count);
  for (int i = 0; i < count; ++i) ids.push_back(sorted[i].first);
  return ids;
}

Sample select_regular_views(std::span<const CameraView> scene, int reference_id,
                            const ScoredViews& candidates, int num_views) {
  require(num_views >= 2, "select_regular_views: need N >= 2");
  Sample s;
  s.kind = SampleKind::kRegular;
  s.reference = find_view(scene, reference_id);
  s.source_ids = top_scored(candidates, num_views - 1);
  for (int id : s.source_ids) {
    require(id != reference_id, "select_regular_views: reference listed as its own candidate");
    s.sources.push_back(find_view(scene, id));
  }
  return s;
}

namespace {

void fluctuate(Image& img, std::mt19937_64& rng, const ColorFluctuation& cf) {
  std::uniform_real_distribution<double> gamma(cf.gamma_min, cf.gamma_max);
  std::uniform_real_distribution<double> bright(-cf.brightness, cf.brightness);
  std::uniform_real_distribution<double> contrast(cf.contrast_min, cf.contrast_max);
  const double g = gamma(rng), b = bright(rng), k = contrast(rng);
  auto data = img.data();
  double mean = 0.0;
  for (double& v : data) {
    v = std::pow(std::clamp(v, 0.0, 1.0), g);
    mean += v;
  }
  mean /= static_cast<double>(data.size());
  for (double& v : data) v = std::clamp((v - mean) * k + mean + b, 0.0, 1.0);
}

}  // namespace

Sample make_image_contrastive(const Sample& regular, double alpha, std::uint64_t seed,
                              const ColorFluctuation& fluctuation) {
  require(alpha >= 0.0 && alpha <= 1.0, "make_image_contrastive: alpha must be in [0,1]");
  Sample s = regular;
  s.kind = SampleKind::kImageContrastive;
  s.seed = seed;
  s.occlusion.clear();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (CameraView& src : s.sources) {
    Image& img = src.image;
    BinaryMask occ(img.height(), img.width(), 0);
    for (auto& m : occ.data()) m = unit(rng) < alpha ? 1 : 0;
    if (fluctuation.enabled) fluctuate(img, rng, fluctuation);
    for (int r = 0; r < img.height(); ++r)
      for (int c = 0; c < img.width(); ++c)
        if (occ.at(r, c))
          for (int k = 0; k < img.channels(); ++k) img.at(r, c, k) = 0.0;
    s.occlusion.push_back(std::move(occ));
  }
  return s;
}

Sample make_scene_contrastive(std::span<const CameraView> scene, int reference_id, int num_views,
                              std::uint64_t seed) {
  require(num_views >= 2, "make_scene_contrastive: need N >= 2");
  std::vector<int> pool;
  for (const CameraView& v : scene)
    if (v.id != reference_id) pool.push_back(v.id);
  std::sort(pool.begin(), pool.end());
  require(static_cast<int>(pool.size()) >= num_views - 1,
          "make_scene_contrastive: scene has too few views");
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first N-1 entries are a uniform draw.
  for (int i = 0; i < num_views - 1; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  Sample s;
  s.kind = SampleKind::kSceneContrastive;
  s.seed = seed;
  s.reference = find_view(scene, reference_id);
  s.source_ids.assign(pool.begin(), pool.begin() + (num_views - 1));
  for (int id : s.source_ids) s.sources.push_back(find_view(scene, id));
  return s;
}

Schedule curriculum(int epoch, int total_epochs, double lambda2_init, double alpha_max) {
  require(total_epochs >= 1 && epoch >= 0 && epoch < total_epochs,
          "curriculum: need 0 <= epoch < total_epochs");
  Schedule s;
  s.epoch = epoch;
  s.alpha = total_epochs > 1 ? alpha_max * epoch / (total_epochs - 1) : 0.0;
  s.lambda2 = lambda2_init * std::ldexp(1.0, epoch / 2);
  return s;
}

}  // namespace clmvs
