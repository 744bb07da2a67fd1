#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "clmvs/depthopt.hpp"
#include "clmvs/fusion.hpp"
#include "clmvs/scene.hpp"

namespace clmvs {

/// Everything a CLI run needs. Defaults: N = 5, gamma = 0.95, lambda weights
/// 0.8/0.01/0.2/0.0067, 48/32/8 hypotheses.
struct RunConfig {
  int num_views = 5;
  CascadeConfig cascade;
  NormKind norm;
  LossWeights weights;
  double lambda2_init = 0.01;
  double alpha_max = 0.1;
  int epochs = 4;
  int epoch = 3;  // schedule entry used by a single optimize run
  int iterations = 50;
  int refresh_every = 10;
  bool detach_regular = true;
  bool contrastive_photometric = false;
  int max_halvings = 4;
  ColorFluctuation fluctuation;
  FusionConfig fusion;
  SceneSpec scene;
  std::uint64_t seed = 7;
  std::string out_dir = "out";

  void validate() const;
  OptConfig opt_config() const;
};

/// Missing keys keep their defaults; unknown keys are an error.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string dump_config(const RunConfig& cfg);

}  // namespace clmvs
