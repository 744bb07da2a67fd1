#include "clmvs/losses.hpp"

#include <algorithm>
#include <cmath>

#include "clmvs/imgcore.hpp"

namespace clmvs {

namespace {

inline double sgn(double x) { return (x > 0.0) - (x < 0.0); }

}  // namespace

void NormKind::validate() const {
  require(theta == 0.5 || theta == 1.0 || theta == 2.0, "NormKind: theta must be 0.5, 1 or 2");
  require(eps_grad > 0.0, "NormKind: eps_grad must be positive");
}

NormResult norm_value_grad(std::span<const double> e, const NormKind& kind) {
  kind.validate();
  NormResult out;
  out.grad.resize(e.size());
  for (double v : e) require(v >= 0.0, "norm_value_grad: residuals must be non-negative");

  if (kind.theta == 1.0) {
    for (double v : e) out.value += v;
    std::fill(out.grad.begin(), out.grad.end(), 1.0);
  } else if (kind.theta == 2.0) {
    double s = 0.0;
    for (double v : e) s += v * v;
    out.value = std::sqrt(s);
    const double denom = std::max(out.value, kind.eps_grad);
    for (std::size_t i = 0; i < e.size(); ++i) out.grad[i] = e[i] / denom;
  } else {
    double k = 0.0;
    for (double v : e) k += std::sqrt(v);
    out.value = k * k;
    for (std::size_t i = 0; i < e.size(); ++i)
      out.grad[i] = k / std::sqrt(std::max(e[i], kind.eps_grad));
  }
  return out;
}

PhotometricResult photometric_consistency(std::span<const Image> warped,
                                          std::span<const BinaryMask> masks, const Image& ref,
                                          const NormKind& kind, bool with_grad) {
  kind.validate();
  require(warped.size() == masks.size(), "photometric_consistency: one mask per source");
  const int h = ref.height(), w = ref.width(), nc = ref.channels();
  const std::size_t npix = ref.pixels();
  const ImageGradient ref_grad = image_gradient(ref);

  PhotometricResult out;
  bool any_valid = false;
  for (std::size_t i = 0; i < warped.size(); ++i) {
    const Image& est = warped[i];
    const BinaryMask& m = masks[i];
    require(est.same_shape(ref) && m.same_shape(ref), "photometric_consistency: shape mismatch");

    Image grad = with_grad ? Image(h, w, nc) : Image();
    ScalarField residual = with_grad ? ScalarField(h, w) : ScalarField();
    const std::size_t n_valid = count(m);
    if (n_valid == 0) {
      out.per_source.push_back(0.0);
      out.grad.push_back(std::move(grad));
      out.residual.push_back(std::move(residual));
      continue;
    }
    any_valid = true;
    const double inv_n = 1.0 / static_cast<double>(n_valid);

    // Per-pixel residuals; -1 marks elements that are not part of the norm.
    std::vector<double> e_img(npix, -1.0), e_gx(npix, -1.0), e_gy(npix, -1.0);
#pragma omp parallel for
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        const std::size_t p = static_cast<std::size_t>(r) * w + c;
        if (!m.at(r, c)) continue;
        double s = 0.0;
        for (int k = 0; k < nc; ++k) s += std::abs(est.at(r, c, k) - ref.at(r, c, k));
        e_img[p] = s / nc;
        if (c + 1 < w && m.at(r, c + 1)) {
          double sx = 0.0;
          for (int k = 0; k < nc; ++k)
            sx += std::abs((est.at(r, c + 1, k) - est.at(r, c, k)) - ref_grad.gx.at(r, c, k));
          e_gx[p] = sx / nc;
        }
        if (r + 1 < h && m.at(r + 1, c)) {
          double sy = 0.0;
          for (int k = 0; k < nc; ++k)
            sy += std::abs((est.at(r + 1, c, k) - est.at(r, c, k)) - ref_grad.gy.at(r, c, k));
          e_gy[p] = sy / nc;
        }
      }
    }

    std::vector<double> img_terms, grad_terms;
    std::vector<std::size_t> img_idx, grad_idx;  // grad_idx: 2p for x, 2p+1 for y
    img_terms.reserve(n_valid);
    img_idx.reserve(n_valid);
    grad_terms.reserve(2 * n_valid);
    grad_idx.reserve(2 * n_valid);
    for (std::size_t p = 0; p < npix; ++p) {
      if (e_img[p] >= 0.0) {
        img_terms.push_back(e_img[p]);
        img_idx.push_back(p);
        if (with_grad) residual[p] = e_img[p];
      }
      if (e_gx[p] >= 0.0) {
        grad_terms.push_back(e_gx[p]);
        grad_idx.push_back(2 * p);
      }
      if (e_gy[p] >= 0.0) {
        grad_terms.push_back(e_gy[p]);
        grad_idx.push_back(2 * p + 1);
      }
    }
    const NormResult n_img = norm_value_grad(img_terms, kind);
    const NormResult n_grad = norm_value_grad(grad_terms, kind);
    const double value = (n_img.value + n_grad.value) * inv_n;
    out.per_source.push_back(value);
    out.value += value;
    if (!with_grad) continue;

    for (std::size_t j = 0; j < img_idx.size(); ++j) {
      const int r = static_cast<int>(img_idx[j] / w), c = static_cast<int>(img_idx[j] % w);
      const double g = n_img.grad[j] * inv_n / nc;
      for (int k = 0; k < nc; ++k) grad.at(r, c, k) += g * sgn(est.at(r, c, k) - ref.at(r, c, k));
    }
    for (std::size_t j = 0; j < grad_idx.size(); ++j) {
      const std::size_t p = grad_idx[j] / 2;
      const bool is_x = grad_idx[j] % 2 == 0;
      const int r = static_cast<int>(p / w), c = static_cast<int>(p % w);
      const int r2 = is_x ? r : r + 1, c2 = is_x ? c + 1 : c;
      const double g = n_grad.grad[j] * inv_n / nc;
      for (int k = 0; k < nc; ++k) {
        const double ref_d = is_x ? ref_grad.gx.at(r, c, k) : ref_grad.gy.at(r, c, k);
        const double s = g * sgn((est.at(r2, c2, k) - est.at(r, c, k)) - ref_d);
        grad.at(r2, c2, k) += s;
        grad.at(r, c, k) -= s;
      }
    }
    out.grad.push_back(std::move(grad));
    out.residual.push_back(std::move(residual));
  }
  require(any_valid, "photometric_consistency: every valid mask is empty");
  return out;
}

SsimResult ssim_loss(const Image& warped, const Image& ref, const BinaryMask& mask,
                     bool with_grad) {
  require(warped.same_shape(ref) && mask.same_shape(ref), "ssim_loss: shape mismatch");
  const int h = ref.height(), w = ref.width(), nc = ref.channels();
  auto active = [&](int r, int c) {
    return r >= 1 && r + 1 < h && c >= 1 && c + 1 < w && mask.at(r, c);
  };
  std::size_t n_active = 0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) n_active += active(r, c);
  require(n_active > 0, "ssim_loss: empty mask");

  // dS/dx_q = alpha_p + beta_p x_q + gamma_p y_q for every q in p's window.
  const std::size_t plane = ref.pixels();
  std::vector<double> ssim(plane * nc, 0.0), ca(plane * nc, 0.0), cb(plane * nc, 0.0),
      cg(plane * nc, 0.0);
  constexpr double n = 9.0;
#pragma omp parallel for
  for (int r = 1; r < h - 1; ++r) {
    for (int c = 1; c < w - 1; ++c) {
      if (!active(r, c)) continue;
      for (int k = 0; k < nc; ++k) {
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const double x = warped.at(r + dr, c + dc, k), y = ref.at(r + dr, c + dc, k);
            sx += x, sy += y, sxx += x * x, syy += y * y, sxy += x * y;
          }
        }
        const double mx = sx / n, my = sy / n;
        const double vx = sxx / n - mx * mx, vy = syy / n - my * my, cxy = sxy / n - mx * my;
        const double a1 = 2 * mx * my + kSsimC1, a2 = 2 * cxy + kSsimC2;
        const double b1 = mx * mx + my * my + kSsimC1, b2 = vx + vy + kSsimC2;
        const double s = a1 * a2 / (b1 * b2);
        const std::size_t i = (static_cast<std::size_t>(r) * w + c) * nc + k;
        ssim[i] = s;
        ca[i] = 2 * my * a2 / (n * b1 * b2) - 2 * a1 * my / (n * b1 * b2) -
                2 * s * mx / (n * b1) + 2 * s * mx / (n * b2);
        cb[i] = -2 * s / (n * b2);
        cg[i] = 2 * a1 / (n * b1 * b2);
      }
    }
  }

  SsimResult out{0.0, with_grad ? Image(h, w, nc) : Image()};
  double total = 0.0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      if (active(r, c))
        for (int k = 0; k < nc; ++k)
          total += 0.5 * (1.0 - ssim[(static_cast<std::size_t>(r) * w + c) * nc + k]);
  const double norm = 1.0 / (static_cast<double>(n_active) * nc);
  out.value = total * norm;
  if (!with_grad) return out;

#pragma omp parallel for
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int k = 0; k < nc; ++k) {
        const double x = warped.at(r, c, k), y = ref.at(r, c, k);
        double g = 0.0;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int pr = r + dr, pc = c + dc;
            if (pr < 0 || pr >= h || pc < 0 || pc >= w || !active(pr, pc)) continue;
            const std::size_t i = (static_cast<std::size_t>(pr) * w + pc) * nc + k;
            g += ca[i] + cb[i] * x + cg[i] * y;
          }
        }
        out.grad.at(r, c, k) = -0.5 * norm * g;
      }
    }
  }
  return out;
}

SmoothnessResult smoothness_loss(const ScalarField& depth, const Image& ref) {
  require(depth.same_shape(ref), "smoothness_loss: shape mismatch");
  const int h = depth.height(), w = depth.width(), nc = ref.channels();
  const double count_px = static_cast<double>(depth.size());
  double mean = 0.0;
  for (double d : depth.data()) mean += d;
  mean /= count_px;
  require(mean > 0.0, "smoothness_loss: mean depth must be positive");

  const ImageGradient ig = image_gradient(ref);
  SmoothnessResult out{0.0, ScalarField(h, w)};
  ScalarField g_hat(h, w);  // dL / d(normalised depth)
  double total = 0.0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double d = depth.at(r, c) / mean;
      if (c + 1 < w) {
        double ax = 0.0;
        for (int k = 0; k < nc; ++k) ax += std::abs(ig.gx.at(r, c, k));
        const double wx = std::exp(-ax / nc);
        const double dx = depth.at(r, c + 1) / mean - d;
        total += std::abs(dx) * wx;
        const double s = sgn(dx) * wx / count_px;
        g_hat.at(r, c + 1) += s;
        g_hat.at(r, c) -= s;
      }
      if (r + 1 < h) {
        double ay = 0.0;
        for (int k = 0; k < nc; ++k) ay += std::abs(ig.gy.at(r, c, k));
        const double wy = std::exp(-ay / nc);
        const double dy = depth.at(r + 1, c) / mean - d;
        total += std::abs(dy) * wy;
        const double s = sgn(dy) * wy / count_px;
        g_hat.at(r + 1, c) += s;
        g_hat.at(r, c) -= s;
      }
    }
  }
  out.value = total / count_px;

  // d(D_p / mean)/dD_q = delta_pq / mean - D_p / (mean^2 * HW)
  double coupling = 0.0;
  for (std::size_t i = 0; i < depth.size(); ++i) coupling += g_hat[i] * depth[i] / mean;
  coupling /= mean * count_px;
  for (std::size_t i = 0; i < depth.size(); ++i) out.grad[i] = g_hat[i] / mean - coupling;
  return out;
}

ConsistencyResult branch_consistency(const ScalarField& regular, const ScalarField& branch,
                                     const BinaryMask& confidence, bool symmetric) {
  require(regular.same_shape(branch) && confidence.same_shape(branch),
          "branch_consistency: shape mismatch");
  const int h = branch.height(), w = branch.width();
  ConsistencyResult out{0.0, ScalarField(h, w), ScalarField(h, w), false};
  const std::size_t n = count(confidence);
  if (n == 0) {
    out.empty_mask = true;
    return out;
  }
  const double inv = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < branch.size(); ++i) {
    if (!confidence[i]) continue;
    const double diff = regular[i] - branch[i];
    total += std::abs(diff);
    out.grad_branch[i] = -sgn(diff) * inv;
    if (symmetric) out.grad_regular[i] = sgn(diff) * inv;
  }
  out.value = total * inv;
  return out;
}

LossReport overall_loss(const LossParts& parts, const LossWeights& weights,
                        const Schedule& schedule) {
  require(parts.pc && parts.icc && parts.scc && parts.ssim && parts.smooth,
          "overall_loss: every loss component must be computed");
  LossReport rep;
  rep.weights = {{"lambda1", weights.pc},
                 {"lambda2", schedule.lambda2},
                 {"lambda3", weights.scc},
                 {"lambda4", weights.ssim},
                 {"lambda5", weights.smooth}};
  rep.components = {{"pc", *parts.pc},
                    {"icc", *parts.icc},
                    {"scc", *parts.scc},
                    {"ssim", *parts.ssim},
                    {"smooth", *parts.smooth}};
  for (const auto& [name, v] : rep.components)
    require(v >= 0.0 && std::isfinite(v), "overall_loss: component '" + name + "' invalid");
  rep.total = weights.pc * *parts.pc + schedule.lambda2 * *parts.icc + weights.scc * *parts.scc +
              weights.ssim * *parts.ssim + weights.smooth * *parts.smooth;
  return rep;
}

}  // namespace clmvs
