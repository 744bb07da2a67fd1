#pragma once

#include <cstdint>
#include <random>

#include "clmvs/grid.hpp"

namespace clmvs::test {

inline Image random_image(int h, int w, int nc, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image img(h, w, nc);
  for (double& v : img.data()) v = u(rng);
  return img;
}

inline ScalarField random_field(int h, int w, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  ScalarField f(h, w);
  for (double& v : f.data()) v = u(rng);
  return f;
}

}  // namespace clmvs::test
