#include "lapgan/image.hpp"

#include <algorithm>
#include <cmath>

#include "lapgan/errors.hpp"

namespace lapgan {

std::string to_string(const Extent& e) { return std::to_string(e.height) + "x" + std::to_string(e.width); }

template <class T>
BasicImage<T>::BasicImage(std::size_t channels, std::size_t height, std::size_t width, T fill)
    : channels_(channels), height_(height), width_(width), data_(channels * height * width, fill) {}

template <class T>
BasicImage<T>::BasicImage(std::size_t channels, std::size_t height, std::size_t width, std::vector<T> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
  if (data_.size() != channels * height * width) {
    throw InvalidArgument("image data holds " + std::to_string(data_.size()) + " values, expected " +
                          std::to_string(channels * height * width));
  }
}

template <class T>
bool BasicImage<T>::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <class T>
double BasicImage<T>::squared_norm() const noexcept {
  double acc = 0;
  for (T v : data_) acc += static_cast<double>(v) * static_cast<double>(v);
  return acc;
}

namespace {

template <class T>
void require_same_shape(const BasicImage<T>& a, const BasicImage<T>& b) {
  if (a.channels() != b.channels() || a.extent() != b.extent()) {
    throw InvalidArgument("image shapes differ: " + std::to_string(a.channels()) + "x" + to_string(a.extent()) +
                          " vs " + std::to_string(b.channels()) + "x" + to_string(b.extent()));
  }
}

}  // namespace

template <class T>
BasicImage<T>& BasicImage<T>::operator+=(const BasicImage& other) {
  require_same_shape(*this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

template <class T>
BasicImage<T>& BasicImage<T>::operator-=(const BasicImage& other) {
  require_same_shape(*this, other);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

template <class T>
BasicImage<T>& BasicImage<T>::operator*=(T scale) {
  for (auto& v : data_) v *= scale;
  return *this;
}

template class BasicImage<float>;
template class BasicImage<double>;

template <class T>
BasicTensor<T> stack(std::span<const BasicImage<T>> images) {
  if (images.empty()) throw InvalidArgument("cannot stack an empty image list");
  const auto& first = images.front();
  BasicTensor<T> out({images.size(), first.channels(), first.height(), first.width()});
  for (std::size_t i = 0; i < images.size(); ++i) {
    require_same_shape(first, images[i]);
    std::copy(images[i].values().begin(), images[i].values().end(), out.row(i).begin());
  }
  return out;
}

template <class T>
BasicImage<T> unstack(const BasicTensor<T>& batch, std::size_t index) {
  if (batch.rank() != 4 || index >= batch.dim(0)) {
    throw InvalidArgument("unstack expects a {N, C, H, W} tensor and a valid index");
  }
  auto row = batch.row(index);
  return BasicImage<T>(batch.dim(1), batch.dim(2), batch.dim(3), std::vector<T>(row.begin(), row.end()));
}

template BasicTensor<float> stack(std::span<const BasicImage<float>>);
template BasicTensor<double> stack(std::span<const BasicImage<double>>);
template BasicImage<float> unstack(const BasicTensor<float>&, std::size_t);
template BasicImage<double> unstack(const BasicTensor<double>&, std::size_t);

double max_abs_difference(const Image& a, const Image& b) {
  require_same_shape(a, b);
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a.values()[i]) - static_cast<double>(b.values()[i])));
  return worst;
}

}  // namespace lapgan
