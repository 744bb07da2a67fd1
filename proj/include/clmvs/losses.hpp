#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clmvs/grid.hpp"
#include "clmvs/sampling.hpp"

namespace clmvs {

/// Which norm the photometric term uses: theta in {0.5, 1, 2}.
/// eps_grad floors every e_i (and the L2 norm) that appears in a gradient
/// denominator.
struct NormKind {
  double theta = 0.5;
  double eps_grad = 1e-4;

  void validate() const;
};

struct NormResult {
  double value = 0.0;
  std::vector<double> grad;
};

/// l1 = sum e_i;  l2 = (sum e_i^2)^(1/2);  l0.5 = (sum e_i^(1/2))^2,
/// together with d l / d e_i. All e_i must be >= 0.
NormResult norm_value_grad(std::span<const double> e, const NormKind& kind);

struct PhotometricResult {
  double value = 0.0;
  std::vector<double> per_source;
  /// dL/d(warped_i), same shape as the warped images.
  std::vector<Image> grad;
  /// Per-pixel channel-mean absolute residual, zero off-mask.
  std::vector<ScalarField> residual;
};

/// Sum over sources of (|| e_img ||_theta + || e_grad ||_theta) / ||M_i||_1,
/// where e_img are per-pixel channel-mean |warped - ref| on the mask and
/// e_grad the same for forward differences (x and y) on pixel pairs that
/// are both valid. Sources with empty masks contribute nothing; if every
/// mask is empty there is no signal and this throws.
/// With `with_grad` false only value and per_source are filled.
PhotometricResult photometric_consistency(std::span<const Image> warped,
                                          std::span<const BinaryMask> masks, const Image& ref,
                                          const NormKind& kind, bool with_grad = true);

struct SsimResult {
  double value = 0.0;
  Image grad;
};

inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean of (1 - SSIM) / 2 with 3x3 uniform windows over pixels whose window
/// lies inside the image and whose mask is set, averaged over channels.
SsimResult ssim_loss(const Image& warped, const Image& ref, const BinaryMask& mask,
                     bool with_grad = true);

struct SmoothnessResult {
  double value = 0.0;
  ScalarField grad;
};

/// Edge-aware smoothness on the mean-normalised depth d = D / mean(D):
/// mean of |dx d| exp(-|dx I|) + |dy d| exp(-|dy I|).
SmoothnessResult smoothness_loss(const ScalarField& depth, const Image& ref);

struct ConsistencyResult {
  double value = 0.0;
  ScalarField grad_branch;
  /// Zero unless `symmetric` was requested.
  ScalarField grad_regular;
  bool empty_mask = false;
};

/// || (D_R - D_B) * M_c ||_1 / || M_c ||_1. An empty mask yields 0 and sets
/// empty_mask rather than throwing.
ConsistencyResult branch_consistency(const ScalarField& regular, const ScalarField& branch,
                                     const BinaryMask& confidence, bool symmetric = false);

/// lambda1..lambda5 with lambda2 taken from the schedule at evaluation time.
struct LossWeights {
  double pc = 0.8;
  double scc = 0.01;
  double ssim = 0.2;
  double smooth = 0.0067;
};

struct LossParts {
  std::optional<double> pc;
  std::optional<double> icc;
  std::optional<double> scc;
  std::optional<double> ssim;
  std::optional<double> smooth;
};

struct LossReport {
  double total = 0.0;
  std::map<std::string, double> components;
  /// "lambda1".."lambda5" actually applied.
  std::map<std::string, double> weights;
  std::vector<ScalarField> residuals;
};

LossReport overall_loss(const LossParts& parts, const LossWeights& weights,
                        const Schedule& schedule);

}  // namespace clmvs
