#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "clmvs/imgcore.hpp"
#include "clmvs/losses.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace clmvs;

namespace {

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-10});
}

// Central differences of f with respect to every element of x.
std::vector<double> numeric_grad(std::vector<double> x, const std::function<double(const std::vector<double>&)>& f,
                                 double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    x[i] = v + h;
    const double p = f(x);
    x[i] = v - h;
    const double m = f(x);
    x[i] = v;
    g[i] = (p - m) / (2 * h);
  }
  return g;
}

Image from_vector(const Image& like, const std::vector<double>& v) {
  Image img(like.height(), like.width(), like.channels());
  std::copy(v.begin(), v.end(), img.data().begin());
  return img;
}

std::vector<double> to_vector(const Image& img) { return {img.data().begin(), img.data().end()}; }

}  // namespace

TEST_CASE("norm values on a vector of ones") {
  const std::vector<double> e{1, 1, 1, 1};
  const NormResult l1 = norm_value_grad(e, {1.0});
  const NormResult l2 = norm_value_grad(e, {2.0});
  const NormResult lh = norm_value_grad(e, {0.5});
  CHECK(l1.value == 4.0);
  CHECK(l2.value == 2.0);
  CHECK(lh.value == 16.0);
  for (int i = 0; i < 4; ++i) {
    CHECK(l1.grad[i] == 1.0);
    CHECK(l2.grad[i] == 0.5);
    CHECK(lh.grad[i] == 4.0);
  }
}

TEST_CASE("single-element norms are the element") {
  for (double x : {0.0, 0.3, 2.5})
    for (double th : {0.5, 1.0, 2.0}) CHECK(norm_value_grad(std::vector<double>{x}, {th}).value == doctest::Approx(x));
}

TEST_CASE("norm gradients match central differences") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(1e-4, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> e(7);
    for (double& v : e) v = std::max(u(rng), 1e-2);
    for (double th : {0.5, 1.0, 2.0}) {
      const NormKind k{th};
      const NormResult an = norm_value_grad(e, k);
      const auto fd = numeric_grad(e, [&](const std::vector<double>& x) { return norm_value_grad(x, k).value; }, 1e-6);
      for (std::size_t i = 0; i < e.size(); ++i) CHECK(rel_err(an.grad[i], fd[i]) < 1e-3);
    }
  }
}

TEST_CASE("norm inputs are validated") {
  CHECK_THROWS_AS(norm_value_grad(std::vector<double>{0.1, -0.2}, {1.0}), Error);
  CHECK_THROWS_AS(norm_value_grad(std::vector<double>{0.1}, {1.5}), Error);
}

TEST_CASE("norm gradient ordering in the residual") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.01, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> e(5);
    for (double& v : e) v = u(rng);
    std::vector<double> lo = e, hi = e;
    lo[2] = 0.2;
    hi[2] = 0.8;
    CHECK(norm_value_grad(lo, {0.5}).grad[2] > norm_value_grad(hi, {0.5}).grad[2]);
    CHECK(norm_value_grad(lo, {1.0}).grad[2] == norm_value_grad(hi, {1.0}).grad[2]);
    CHECK(norm_value_grad(lo, {2.0}).grad[2] < norm_value_grad(hi, {2.0}).grad[2]);
  }
}

TEST_CASE("photometric loss of identical images is zero") {
  const Image ref = test::random_image(6, 7, 3, 2);
  const std::vector<Image> w{ref, ref};
  const std::vector<BinaryMask> m{BinaryMask(6, 7, 1), BinaryMask(6, 7, 1)};
  for (double th : {0.5, 1.0, 2.0}) {
    const PhotometricResult r = photometric_consistency(w, m, ref, {th});
    CHECK(r.value == 0.0);
    for (const Image& g : r.grad)
      for (double v : g.data()) CHECK(v == 0.0);
  }
}

TEST_CASE("photometric L1 of a uniform offset is the offset") {
  const Image ref = Image(5, 6, 3, 0.4);
  Image est = ref;
  for (double& v : est.data()) v += 0.07;
  const std::vector<Image> w{est};
  const std::vector<BinaryMask> m{BinaryMask(5, 6, 1)};
  CHECK(photometric_consistency(w, m, ref, {1.0}).value == doctest::Approx(0.07));
}

TEST_CASE("photometric L0.5 matches a recomputation from the norm") {
  const int h = 7, wd = 9;
  const Image ref = test::random_image(h, wd, 3, 5), est = test::random_image(h, wd, 3, 6);
  BinaryMask m(h, wd, 1);
  std::mt19937_64 rng(3);
  for (auto& v : m.data()) v = rng() % 4 ? 1 : 0;
  const std::vector<Image> w{est};
  const std::vector<BinaryMask> ms{m};
  const NormKind k{0.5};
  const double got = photometric_consistency(w, ms, ref, k).value;

  std::vector<double> e_img, e_grad;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < wd; ++c) {
      if (!m.at(r, c)) continue;
      double s = 0;
      for (int ch = 0; ch < 3; ++ch) s += std::abs(est.at(r, c, ch) - ref.at(r, c, ch));
      e_img.push_back(s / 3);
      if (c + 1 < wd && m.at(r, c + 1)) {
        double sx = 0;
        for (int ch = 0; ch < 3; ++ch)
          sx += std::abs((est.at(r, c + 1, ch) - est.at(r, c, ch)) - (ref.at(r, c + 1, ch) - ref.at(r, c, ch)));
        e_grad.push_back(sx / 3);
      }
      if (r + 1 < h && m.at(r + 1, c)) {
        double sy = 0;
        for (int ch = 0; ch < 3; ++ch)
          sy += std::abs((est.at(r + 1, c, ch) - est.at(r, c, ch)) - (ref.at(r + 1, c, ch) - ref.at(r, c, ch)));
        e_grad.push_back(sy / 3);
      }
    }
  const double want = (norm_value_grad(e_img, k).value + norm_value_grad(e_grad, k).value) /
                      static_cast<double>(count(m));
  CHECK(got == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("photometric gradients match central differences") {
  const int h = 6, wd = 7;
  const Image ref = test::random_image(h, wd, 3, 15);
  const Image est0 = test::random_image(h, wd, 3, 16);
  BinaryMask m(h, wd, 1);
  m.at(2, 3) = 0;
  m.at(4, 0) = 0;
  for (double th : {0.5, 1.0, 2.0}) {
    const NormKind k{th};
    const std::vector<BinaryMask> ms{m};
    auto f = [&](const std::vector<double>& x) {
      const std::vector<Image> w{from_vector(ref, x)};
      return photometric_consistency(w, ms, ref, k).value;
    };
    const std::vector<Image> w0{est0};
    const PhotometricResult an = photometric_consistency(w0, ms, ref, k);
    const auto fd = numeric_grad(to_vector(est0), f, 1e-7);
    const auto ag = an.grad[0].data();
    std::size_t checked = 0, ok = 0;
    for (std::size_t i = 0; i < fd.size(); ++i) {
      ++checked;
      // Exact zeros come back from differencing as round-off.
      ok += rel_err(ag[i], fd[i]) < 1e-3 || std::abs(ag[i] - fd[i]) < 1e-8;
    }
    CHECK(ok == checked);
  }
}

TEST_CASE("photometric loss needs at least one valid mask") {
  const Image ref(3, 3, 1, 0.5);
  const std::vector<Image> w{ref};
  const std::vector<BinaryMask> m{BinaryMask(3, 3, 0)};
  CHECK_THROWS_AS(photometric_consistency(w, m, ref, {1.0}), Error);
}

TEST_CASE("SSIM loss bounds") {
  const Image ref = test::random_image(8, 8, 3, 4);
  const BinaryMask all(8, 8, 1);
  CHECK(ssim_loss(ref, ref, all).value == doctest::Approx(0.0).epsilon(1e-12));

  // High-contrast checkerboard against its negation about the mean.
  Image chk(8, 8, 1), neg(8, 8, 1);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      chk.at(r, c) = (r + c) % 2 ? 0.9 : 0.1;
      neg.at(r, c) = 1.0 - chk.at(r, c);
    }
  CHECK(ssim_loss(neg, chk, all).value > 0.9);

  for (std::uint64_t s = 0; s < 30; ++s) {
    const double v = ssim_loss(test::random_image(6, 6, 3, s), test::random_image(6, 6, 3, s + 100),
                               BinaryMask(6, 6, 1)).value;
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK_THROWS_AS(ssim_loss(ref, ref, BinaryMask(8, 8, 0)), Error);
}

TEST_CASE("SSIM gradient matches central differences") {
  const Image ref = test::random_image(6, 7, 3, 31), est0 = test::random_image(6, 7, 3, 32);
  BinaryMask m(6, 7, 1);
  m.at(2, 2) = 0;
  const SsimResult an = ssim_loss(est0, ref, m);
  const auto fd = numeric_grad(to_vector(est0), [&](const std::vector<double>& x) {
    return ssim_loss(from_vector(ref, x), ref, m).value;
  }, 1e-6);
  const auto ag = an.grad.data();
  for (std::size_t i = 0; i < fd.size(); ++i) CHECK(rel_err(ag[i], fd[i]) < 1e-3);
}

TEST_CASE("smoothness examples") {
  const Image ref = test::random_image(6, 8, 3, 1);
  CHECK(smoothness_loss(ScalarField(6, 8, 500.0), ref).value == 0.0);

  // Strong vertical image edge between columns 4 and 5.
  Image edge(6, 10, 1, 0.0);
  for (int r = 0; r < 6; ++r)
    for (int c = 5; c < 10; ++c) edge.at(r, c) = 1.0;
  // Equal-height steps with the same mean depth: one on the edge, one in the
  // flat region left of it.
  ScalarField at_edge(6, 10, 500.0), in_flat(6, 10, 500.0);
  for (int r = 0; r < 6; ++r) {
    for (int c = 5; c < 10; ++c) at_edge.at(r, c) = 520.0;
    for (int c = 2; c < 7; ++c) in_flat.at(r, c) = 520.0;
  }
  CHECK(smoothness_loss(in_flat, edge).value > smoothness_loss(at_edge, edge).value);

  const ScalarField smooth = resize_bilinear(test::random_field(3, 3, 450, 900, 7), 6, 8);
  const double v = smoothness_loss(smooth, ref).value;
  CHECK(std::isfinite(v));
  CHECK(v >= 0.0);
  CHECK_THROWS_AS(smoothness_loss(ScalarField(6, 8, 0.0), ref), Error);
}

TEST_CASE("smoothness gradient matches central differences") {
  const Image ref = test::random_image(5, 6, 3, 41);
  const ScalarField d0 = test::random_field(5, 6, 450, 900, 42);
  const SmoothnessResult an = smoothness_loss(d0, ref);
  const auto fd = numeric_grad({d0.data().begin(), d0.data().end()}, [&](const std::vector<double>& x) {
    ScalarField d(5, 6);
    std::copy(x.begin(), x.end(), d.data().begin());
    return smoothness_loss(d, ref).value;
  }, 1e-3);
  for (std::size_t i = 0; i < fd.size(); ++i) CHECK(rel_err(an.grad[i], fd[i]) < 1e-3);
}

TEST_CASE("branch consistency examples") {
  const ScalarField dr = test::random_field(4, 6, 500, 700, 3);
  const BinaryMask all(4, 6, 1);
  CHECK(branch_consistency(dr, dr, all).value == 0.0);
  ScalarField db = dr;
  for (double& v : db.data()) v += 2.5;
  CHECK(branch_consistency(dr, db, all).value == doctest::Approx(2.5));

  BinaryMask half(4, 6, 0);
  ScalarField dh = dr;
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 6; ++c) {
      half.at(r, c) = 1;
      dh.at(r, c) += 1.75;
    }
  CHECK(branch_consistency(dr, dh, half).value == doctest::Approx(1.75));

  const ConsistencyResult empty = branch_consistency(dr, db, BinaryMask(4, 6, 0));
  CHECK(empty.empty_mask);
  CHECK(empty.value == 0.0);
}

TEST_CASE("branch consistency gradients") {
  const ScalarField dr = test::random_field(4, 5, 500, 700, 8);
  const ScalarField db0 = test::random_field(4, 5, 500, 700, 9);
  BinaryMask m(4, 5, 1);
  m.at(1, 1) = 0;
  const ConsistencyResult an = branch_consistency(dr, db0, m, true);
  const auto fd = numeric_grad({db0.data().begin(), db0.data().end()}, [&](const std::vector<double>& x) {
    ScalarField d(4, 5);
    std::copy(x.begin(), x.end(), d.data().begin());
    return branch_consistency(dr, d, m).value;
  }, 1e-4);
  for (std::size_t i = 0; i < fd.size(); ++i) {
    if (!m[i]) {
      CHECK(an.grad_branch[i] == 0.0);
      continue;
    }
    CHECK(rel_err(an.grad_branch[i], fd[i]) < 1e-3);
    CHECK(an.grad_regular[i] == -an.grad_branch[i]);
  }
  const ConsistencyResult detached = branch_consistency(dr, db0, m);
  for (double v : detached.grad_regular.data()) CHECK(v == 0.0);
}

TEST_CASE("overall loss weights") {
  LossParts ones{1.0, 1.0, 1.0, 1.0, 1.0};
  const LossReport r0 = overall_loss(ones, {}, curriculum(0, 4));
  CHECK(r0.total == doctest::Approx(1.0267).epsilon(1e-12));
  CHECK(r0.weights.at("lambda1") == 0.8);
  CHECK(r0.weights.at("lambda5") == 0.0067);

  LossParts zeros{0.0, 0.0, 0.0, 0.0, 0.0};
  CHECK(overall_loss(zeros, {}, curriculum(0, 4)).total == 0.0);

  LossParts icc_only{0.0, 1.0, 0.0, 0.0, 0.0};
  CHECK(overall_loss(icc_only, {}, curriculum(2, 4)).total == doctest::Approx(0.02));

  LossParts missing = ones;
  missing.scc.reset();
  CHECK_THROWS_AS(overall_loss(missing, {}, curriculum(0, 4)), Error);
}

TEST_CASE("loss report total is the weighted sum of its components") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> u(0, 3);
  for (int t = 0; t < 50; ++t) {
    const LossParts p{u(rng), u(rng), u(rng), u(rng), u(rng)};
    const LossReport r = overall_loss(p, {}, curriculum(t % 6, 6));
    const double sum = r.weights.at("lambda1") * r.components.at("pc") +
                       r.weights.at("lambda2") * r.components.at("icc") +
                       r.weights.at("lambda3") * r.components.at("scc") +
                       r.weights.at("lambda4") * r.components.at("ssim") +
                       r.weights.at("lambda5") * r.components.at("smooth");
    CHECK(std::abs(r.total - sum) < 1e-9);
    for (const auto& [k, v] : r.components) CHECK(v >= 0.0);
  }
}
