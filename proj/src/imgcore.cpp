#include "clmvs/imgcore.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace clmvs {

ImageGradient image_gradient(const Image& img) {
  const int h = img.height(), w = img.width(), nc = img.channels();
  ImageGradient g{Image(h, w, nc), Image(h, w, nc)};
#pragma omp parallel for
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int k = 0; k < nc; ++k) {
        const double v = img.at(r, c, k);
        g.gx.at(r, c, k) = c + 1 < w ? img.at(r, c + 1, k) - v : 0.0;
        g.gy.at(r, c, k) = r + 1 < h ? img.at(r + 1, c, k) - v : 0.0;
      }
    }
  }
  return g;
}

void field_gradient(const ScalarField& f, ScalarField& gx, ScalarField& gy) {
  const int h = f.height(), w = f.width();
  gx = ScalarField(h, w);
  gy = ScalarField(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double v = f.at(r, c);
      gx.at(r, c) = c + 1 < w ? f.at(r, c + 1) - v : 0.0;
      gy.at(r, c) = r + 1 < h ? f.at(r + 1, c) - v : 0.0;
    }
  }
}

namespace {

struct Tap {
  int i0;
  int i1;
  double frac;
};

std::vector<Tap> corner_aligned_taps(int in, int out) {
  std::vector<Tap> taps(out);
  for (int i = 0; i < out; ++i) {
    const double x = out > 1 ? static_cast<double>(i) * (in - 1) / (out - 1) : 0.0;
    int i0 = std::clamp(static_cast<int>(std::floor(x)), 0, std::max(in - 2, 0));
    const int i1 = std::min(i0 + 1, in - 1);
    taps[i] = {i0, i1, in > 1 ? x - i0 : 0.0};
  }
  return taps;
}

}  // namespace

Image resize_bilinear(const Image& img, int new_height, int new_width) {
  require(new_height >= 1 && new_width >= 1, "resize_bilinear: zero-sized target");
  require(!img.empty(), "resize_bilinear: empty input");
  const auto ty = corner_aligned_taps(img.height(), new_height);
  const auto tx = corner_aligned_taps(img.width(), new_width);
  Image out(new_height, new_width, img.channels());
  for (int r = 0; r < new_height; ++r) {
    const Tap& y = ty[r];
    for (int c = 0; c < new_width; ++c) {
      const Tap& x = tx[c];
      for (int k = 0; k < img.channels(); ++k) {
        const double top = (1 - x.frac) * img.at(y.i0, x.i0, k) + x.frac * img.at(y.i0, x.i1, k);
        const double bot = (1 - x.frac) * img.at(y.i1, x.i0, k) + x.frac * img.at(y.i1, x.i1, k);
        out.at(r, c, k) = (1 - y.frac) * top + y.frac * bot;
      }
    }
  }
  return out;
}

ScalarField resize_bilinear(const ScalarField& field, int new_height, int new_width) {
  require(new_height >= 1 && new_width >= 1, "resize_bilinear: zero-sized target");
  require(!field.empty(), "resize_bilinear: empty input");
  const auto ty = corner_aligned_taps(field.height(), new_height);
  const auto tx = corner_aligned_taps(field.width(), new_width);
  ScalarField out(new_height, new_width);
  for (int r = 0; r < new_height; ++r) {
    const Tap& y = ty[r];
    for (int c = 0; c < new_width; ++c) {
      const Tap& x = tx[c];
      const double top = (1 - x.frac) * field.at(y.i0, x.i0) + x.frac * field.at(y.i0, x.i1);
      const double bot = (1 - x.frac) * field.at(y.i1, x.i0) + x.frac * field.at(y.i1, x.i1);
      out.at(r, c) = (1 - y.frac) * top + y.frac * bot;
    }
  }
  return out;
}

ScalarField to_gray(const Image& img) {
  ScalarField g(img.height(), img.width());
  const int nc = img.channels();
  for (int r = 0; r < img.height(); ++r) {
    for (int c = 0; c < img.width(); ++c) {
      double s = 0;
      for (int k = 0; k < nc; ++k) s += img.at(r, c, k);
      g.at(r, c) = s / nc;
    }
  }
  return g;
}

Image from_gray(const ScalarField& gray, int channels) {
  Image img(gray.height(), gray.width(), channels);
  for (int r = 0; r < gray.height(); ++r)
    for (int c = 0; c < gray.width(); ++c)
      for (int k = 0; k < channels; ++k) img.at(r, c, k) = gray.at(r, c);
  return img;
}

ScalarField box_mean3(const ScalarField& f) {
  const int h = f.height(), w = f.width();
  ScalarField out(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double s = 0;
      int n = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          s += f.at(rr, cc);
          ++n;
        }
      }
      out.at(r, c) = s / n;
    }
  }
  return out;
}

ScalarField gaussian_blur(const ScalarField& f, double sigma) {
  if (sigma <= 0) return f;
  const int radius = std::max(1, static_cast<int>(std::ceil(3 * sigma)));
  std::vector<double> kernel(2 * radius + 1);
  double norm = 0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    norm += kernel[i + radius];
  }
  for (double& k : kernel) k /= norm;

  const int h = f.height(), w = f.width();
  ScalarField tmp(h, w), out(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double s = 0;
      for (int i = -radius; i <= radius; ++i)
        s += kernel[i + radius] * f.at(r, std::clamp(c + i, 0, w - 1));
      tmp.at(r, c) = s;
    }
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double s = 0;
      for (int i = -radius; i <= radius; ++i)
        s += kernel[i + radius] * tmp.at(std::clamp(r + i, 0, h - 1), c);
      out.at(r, c) = s;
    }
  }
  return out;
}

}  // namespace clmvs
