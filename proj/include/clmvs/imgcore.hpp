#pragma once

#include "clmvs/grid.hpp"

namespace clmvs {

/// Per-channel forward differences. gx(row,col) = I(row,col+1) - I(row,col);
/// gy(row,col) = I(row+1,col) - I(row,col). Trailing column/row are zero.
struct ImageGradient {
  Image gx;
  Image gy;
};

ImageGradient image_gradient(const Image& img);
void field_gradient(const ScalarField& f, ScalarField& gx, ScalarField& gy);

/// Corner-aligned bilinear resize: output sample i maps to input coordinate
/// i * (in - 1) / (out - 1), so the corner pixels stay registered.
Image resize_bilinear(const Image& img, int new_height, int new_width);
ScalarField resize_bilinear(const ScalarField& field, int new_height, int new_width);

ScalarField to_gray(const Image& img);
Image from_gray(const ScalarField& gray, int channels);

/// Mean over the 3x3 neighbourhood, shrinking the window at the border.
ScalarField box_mean3(const ScalarField& f);

/// Separable Gaussian blur with clamp-to-edge borders; sigma <= 0 copies.
ScalarField gaussian_blur(const ScalarField& f, double sigma);

}  // namespace clmvs
