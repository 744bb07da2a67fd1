#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clmvs/depthopt.hpp"

namespace clmvs {

struct AuditConfig {
  int height = 32;
  int width = 40;
  int configurations = 16;
  /// Central-difference step in mm.
  double h = 1e-3;
  /// Pixels whose warped coordinate is this close to a bilinear cell
  /// boundary (pixels) are excluded.
  double boundary_px = 1e-3;
  /// Pixels sitting this close to an |x| kink (intensity or mm) are excluded.
  double kink = 1e-4;
  /// Uniform depth perturbation around GT, mm.
  double perturb_mm = 6.0;
  double tolerance = 1e-3;
  std::vector<double> thetas{0.5, 1.0, 2.0};
  std::uint64_t seed = 11;
};

struct TermAudit {
  std::string term;  // photometric_l0.5, ssim, smoothness, icc, scc, ...
  std::size_t checked = 0;
  std::size_t excluded = 0;
  std::size_t passed = 0;
  double max_rel_error = 0.0;
  double pass_fraction() const {
    return checked ? static_cast<double>(passed) / static_cast<double>(checked) : 0.0;
  }
};

/// rel = |a - f| / max(|a|, |f|, 1e-10)
double relative_error(double analytic, double numeric);

/// Analytic vs central-difference gradients of every loss term on random
/// small synthetic configurations.
std::vector<TermAudit> audit_gradients(const AuditConfig& cfg);

}  // namespace clmvs
