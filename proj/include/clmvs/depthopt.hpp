#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clmvs/losses.hpp"
#include "clmvs/planesweep.hpp"
#include "clmvs/sampling.hpp"

namespace clmvs {

/// dL/dD per pixel, in loss units per mm.
using GradField = ScalarField;

/// Masked L1 pull of the optimised depth toward another branch's depth.
struct ConsistencyTerm {
  const ScalarField* other = nullptr;
  const BinaryMask* confidence = nullptr;
  double weight = 0.0;
};

/// Objective of one depth field over one sample. A zero weight removes the
/// term (and its cost) entirely.
struct BranchObjective {
  NormKind norm;
  double w_pc = 0.8;
  double w_ssim = 0.2;
  double w_smooth = 0.0067;
  std::vector<ConsistencyTerm> consistency;
};

struct BranchLoss {
  double total = 0.0;
  double pc = 0.0;
  double ssim = 0.0;
  double smooth = 0.0;
  double consistency = 0.0;
  GradField grad;
  /// Per-source warp state used for the gradient (for diagnostics and
  /// finite-difference exclusion rules).
  std::vector<WarpWithDerivative> warps;
};

/// Objective value and its analytic gradient w.r.t. the reference depth:
/// dL/dD(p) = sum_i sum_c dL/dI_i,c(p) * (dI_i,c/du, dI_i,c/dv) . dp'/dd
/// for the warp-driven terms, plus the direct smoothness and consistency
/// gradients.
BranchLoss loss_grad_wrt_depth(const Sample& sample, const ScalarField& depth,
                               const BranchObjective& objective);

/// Objective value only (same arithmetic as loss_grad_wrt_depth).
double branch_loss_value(const Sample& sample, const ScalarField& depth,
                         const BranchObjective& objective);

using DepthLossFn = std::function<double(const ScalarField&)>;

/// Central differences (L(D + h e_p) - L(D - h e_p)) / 2h for every pixel,
/// or only where `only` is set.
GradField finite_diff_grad(const DepthLossFn& loss, const ScalarField& depth, double h,
                           const BinaryMask* only = nullptr);

GradField finite_diff_grad(const Sample& sample, const ScalarField& depth,
                           const BranchObjective& objective, double h,
                           const BinaryMask* only = nullptr);

struct OptConfig {
  NormKind norm;
  LossWeights weights;
  /// Weight of the image-level consistency term for this run.
  double lambda2 = 0.01;
  int iterations = 50;
  /// M_c is recomputed from the regular branch every this many iterations.
  int refresh_every = 10;
  /// Stop-gradient on D_R inside the consistency terms.
  bool detach_regular = true;
  /// Also put the photometric, SSIM and smoothness terms on the contrastive
  /// branches' own samples. Off: those branches see only the consistency
  /// term and photometric supervision stays on the regular branch.
  bool contrastive_photometric = false;
  /// Initial step in mm; <= 0 means half of the finest hypothesis interval.
  double initial_step = 0.0;
  int max_halvings = 4;
  CascadeConfig cascade;
};

/// Sign-normalised descent with a global step and halving line search on a
/// single depth field.
class BranchOptimizer {
 public:
  BranchOptimizer(ScalarField depth, double step, int max_halvings, double depth_min,
                  double depth_max);

  struct StepResult {
    double loss_before = 0.0;
    double loss_after = 0.0;
    double step = 0.0;
    bool accepted = false;
  };

  StepResult step(const Sample& sample, const BranchObjective& objective);

  const ScalarField& depth() const { return depth_; }
  double step_size() const { return step_; }

 private:
  ScalarField depth_;
  double step_;
  int max_halvings_;
  double lo_;
  double hi_;
};

struct IterationRecord {
  int iteration = 0;
  double total = 0.0;  // weighted objective over all branches
  LossReport report;
  std::array<BranchOptimizer::StepResult, 3> branch;  // regular, image, scene
  double confident_fraction = 0.0;
};

struct OptState {
  ScalarField depth_regular;
  ScalarField depth_image;
  ScalarField depth_scene;
  BinaryMask confidence;
  std::array<double, 3> steps{};
  int iteration = 0;
  std::vector<IterationRecord> history;
};

struct JointSamples {
  const Sample* regular = nullptr;
  const Sample* image_contrastive = nullptr;
  const Sample* scene_contrastive = nullptr;
};

struct InitialDepths {
  std::optional<ScalarField> regular;
  std::optional<ScalarField> image;
  std::optional<ScalarField> scene;
};

/// Three-branch depth optimisation: refresh M_c from the regular branch,
/// then one descent step per branch. The contrastive branches minimise the
/// masked consistency toward D_R (taken from the start of the iteration).
/// Throws with a diagnostic when the objective becomes non-finite.
OptState optimize_joint(const JointSamples& samples, const OptConfig& cfg,
                        const InitialDepths& init = {},
                        const std::function<void(const IterationRecord&)>& on_iteration = {});

/// Single-branch run with the same step logic and no consistency term.
ScalarField optimize_single(const Sample& sample, const ScalarField& init, const OptConfig& cfg);

BranchObjective regular_objective(const OptConfig& cfg);

/// JSON line for one iteration (stable field names).
std::string to_json_line(const IterationRecord& rec);

}  // namespace clmvs
