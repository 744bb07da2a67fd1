#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace clmvs {

/// Raised for shape mismatches, invalid parameters and malformed inputs.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(what);
}

/// Dense H x W x C image, row-major with interleaved channels. Values are
/// photometric intensities in [0,1].
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels),
        data_(static_cast<std::size_t>(height) * width * channels, fill) {
    require(height >= 0 && width >= 0, "Image: negative size");
    require(channels == 1 || channels == 3, "Image: channels must be 1 or 3");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const { return data_.empty(); }

  double& at(int row, int col, int ch = 0) {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + ch];
  }
  double at(int row, int col, int ch = 0) const {
    return data_[(static_cast<std::size_t>(row) * width_ + col) * channels_ + ch];
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Image& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }
  friend bool operator==(const Image&, const Image&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 1;
  std::vector<double> data_;
};

/// Single-channel H x W grid. ScalarField carries depth (mm), probabilities
/// or residuals; BinaryMask carries {0,1} gates.
template <typename T>
class Field {
 public:
  using value_type = T;

  Field() = default;
  Field(int height, int width, T fill = T{})
      : height_(height), width_(width),
        data_(static_cast<std::size_t>(height) * width, fill) {
    require(height >= 0 && width >= 0, "Field: negative size");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& at(int row, int col) { return data_[static_cast<std::size_t>(row) * width_ + col]; }
  const T& at(int row, int col) const {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  template <typename U>
  bool same_shape(const Field<U>& o) const {
    return height_ == o.height() && width_ == o.width();
  }
  bool same_shape(const Image& img) const {
    return height_ == img.height() && width_ == img.width();
  }
  friend bool operator==(const Field&, const Field&) = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

using ScalarField = Field<double>;
using BinaryMask = Field<std::uint8_t>;

inline std::size_t count(const BinaryMask& m) {
  std::size_t n = 0;
  for (auto v : m.data()) n += v != 0;
  return n;
}

}  // namespace clmvs
