#pragma once

#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lapgan/tensor.hpp"

namespace lapgan {

struct Extent {
  std::size_t height = 0;
  std::size_t width = 0;

  friend auto operator<=>(const Extent&, const Extent&) = default;
};

std::string to_string(const Extent& e);

/// Channels x height x width image, channel-major. Pixel values nominally in [-1, 1].
template <class T>
class BasicImage {
 public:
  using value_type = T;

  BasicImage() = default;
  BasicImage(std::size_t channels, std::size_t height, std::size_t width, T fill = T{0});
  BasicImage(std::size_t channels, std::size_t height, std::size_t width, std::vector<T> data);

  std::size_t channels() const noexcept { return channels_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  Extent extent() const noexcept { return {height_, width_}; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t plane_size() const noexcept { return height_ * width_; }

  T& at(std::size_t c, std::size_t y, std::size_t x) noexcept { return data_[(c * height_ + y) * width_ + x]; }
  const T& at(std::size_t c, std::size_t y, std::size_t x) const noexcept {
    return data_[(c * height_ + y) * width_ + x];
  }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  std::span<T> plane(std::size_t c) noexcept { return data().subspan(c * plane_size(), plane_size()); }
  std::span<const T> plane(std::size_t c) const noexcept { return data().subspan(c * plane_size(), plane_size()); }
  std::vector<T>& values() noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  bool all_finite() const noexcept;
  double squared_norm() const noexcept;

  template <class U>
  BasicImage<U> cast() const {
    return BasicImage<U>(channels_, height_, width_, std::vector<U>(data_.begin(), data_.end()));
  }

  BasicImage& operator+=(const BasicImage& other);
  BasicImage& operator-=(const BasicImage& other);
  BasicImage& operator*=(T scale);

  friend BasicImage operator+(BasicImage a, const BasicImage& b) { return a += b; }
  friend BasicImage operator-(BasicImage a, const BasicImage& b) { return a -= b; }
  friend bool operator==(const BasicImage&, const BasicImage&) = default;

 private:
  std::size_t channels_ = 0;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> data_;
};

using Image = BasicImage<float>;
using ImageD = BasicImage<double>;

extern template class BasicImage<float>;
extern template class BasicImage<double>;

/// Stacks equally sized images into a {N, C, H, W} tensor.
template <class T>
BasicTensor<T> stack(std::span<const BasicImage<T>> images);

/// Image `index` of a {N, C, H, W} tensor.
template <class T>
BasicImage<T> unstack(const BasicTensor<T>& batch, std::size_t index);

double max_abs_difference(const Image& a, const Image& b);

}  // namespace lapgan
