#include "lapgan/pyramid.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "lapgan/errors.hpp"

namespace lapgan {

bool SizeSchedule::is_dyadic() const {
  for (std::size_t k = 0; k + 1 < levels.size(); ++k) {
    if (levels[k].height != 2 * levels[k + 1].height || levels[k].width != 2 * levels[k + 1].width) return false;
  }
  return true;
}

void SizeSchedule::validate() const {
  if (levels.empty()) throw InvalidArgument("size schedule has no levels");
  for (std::size_t k = 0; k < levels.size(); ++k) {
    if (levels[k].height == 0 || levels[k].width == 0) throw InvalidArgument("size schedule has an empty level");
    if (k > 0 && (levels[k].height >= levels[k - 1].height || levels[k].width >= levels[k - 1].width)) {
      throw InvalidArgument("size schedule must strictly decrease: level " + std::to_string(k) + " is " +
                            to_string(levels[k]) + " after " + to_string(levels[k - 1]));
    }
  }
}

SizeSchedule SizeSchedule::automatic(Extent finest, std::size_t max_coarsest) {
  if (finest.height == 0 || finest.width == 0) throw InvalidArgument("image size must be positive");
  SizeSchedule s{{finest}};
  while (s.levels.back().height > max_coarsest || s.levels.back().width > max_coarsest) {
    const Extent& last = s.levels.back();
    if (last.height < 2 || last.width < 2) break;
    s.levels.push_back({last.height / 2, last.width / 2});
  }
  return s;
}

std::size_t reflect_index(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * (static_cast<long>(n) - 1);
  i = std::abs(i) % period;
  if (i >= static_cast<long>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

namespace {

using Line = std::vector<double>;
using LineOp = std::function<Line(const Line&)>;

Line blur(const Line& in) {
  const std::size_t n = in.size();
  Line out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0;
    for (std::size_t t = 0; t < kBinomialKernel.size(); ++t)
      acc += kBinomialKernel[t] * in[reflect_index(static_cast<long>(i + t) - 2, n)];
    out[i] = acc;
  }
  return out;
}

Line decimate(const Line& in, std::size_t m) {
  Line out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = in[2 * i];
  return out;
}

Line expand(const Line& in) {
  const std::size_t m = 2 * in.size();
  Line zeros(m, 0.0);
  for (std::size_t i = 0; i < in.size(); ++i) zeros[2 * i] = in[i];
  Line out = blur(zeros);
  for (auto& v : out) v *= 2.0;
  return out;
}

Line resample(const Line& in, std::size_t m) {
  const std::size_t n = in.size();
  Line out(m);
  const double scale = static_cast<double>(n) / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    const double x = std::clamp((static_cast<double>(i) + 0.5) * scale - 0.5, 0.0, static_cast<double>(n - 1));
    const std::size_t i0 = static_cast<std::size_t>(std::floor(x));
    const std::size_t i1 = std::min(i0 + 1, n - 1);
    const double frac = x - static_cast<double>(i0);
    out[i] = (1.0 - frac) * in[i0] + frac * in[i1];
  }
  return out;
}

// Applies `row_op` along x, then `col_op` along y, on every channel.
template <class T>
BasicImage<T> separable(const BasicImage<T>& img, Extent target, const LineOp& row_op, const LineOp& col_op) {
  const std::size_t C = img.channels(), H = img.height(), W = img.width();
  BasicImage<T> out(C, target.height, target.width);
  std::vector<double> rows(H * target.width);
  Line line;
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t y = 0; y < H; ++y) {
      line.assign(W, 0.0);
      for (std::size_t x = 0; x < W; ++x) line[x] = img.at(c, y, x);
      const Line r = row_op(line);
      std::copy(r.begin(), r.end(), rows.begin() + y * target.width);
    }
    for (std::size_t x = 0; x < target.width; ++x) {
      line.assign(H, 0.0);
      for (std::size_t y = 0; y < H; ++y) line[y] = rows[y * target.width + x];
      const Line col = col_op(line);
      for (std::size_t y = 0; y < target.height; ++y) out.at(c, y, x) = static_cast<T>(col[y]);
    }
  }
  return out;
}

template <class T>
void require_finite(const BasicImage<T>& img, const char* op) {
  if (!img.all_finite()) throw InvalidArgument(std::string(op) + ": input image has non-finite values");
}

}  // namespace

template <class T>
BasicImage<T> downsample(const BasicImage<T>& img, Extent target) {
  if (target.height == 0 || target.width == 0 || target.height >= img.height() || target.width >= img.width()) {
    throw InvalidArgument("downsample target " + to_string(target) + " must be smaller than " +
                          to_string(img.extent()));
  }
  require_finite(img, "downsample");
  if (img.height() == 2 * target.height && img.width() == 2 * target.width) {
    return separable(
        img, target, [&](const Line& l) { return decimate(blur(l), target.width); },
        [&](const Line& l) { return decimate(blur(l), target.height); });
  }
  return separable(
      img, target, [&](const Line& l) { return resample(blur(l), target.width); },
      [&](const Line& l) { return resample(blur(l), target.height); });
}

template <class T>
BasicImage<T> upsample(const BasicImage<T>& img, Extent target) {
  if (target.height <= img.height() || target.width <= img.width()) {
    throw InvalidArgument("upsample target " + to_string(target) + " must be larger than " +
                          to_string(img.extent()));
  }
  require_finite(img, "upsample");
  if (target.height == 2 * img.height() && target.width == 2 * img.width()) {
    return separable(img, target, expand, expand);
  }
  return separable(
      img, target, [&](const Line& l) { return resample(blur(l), target.width); },
      [&](const Line& l) { return resample(blur(l), target.height); });
}

template <class T>
std::vector<BasicImage<T>> gaussian_pyramid(const BasicImage<T>& img, const SizeSchedule& schedule) {
  schedule.validate();
  if (img.extent() != schedule.finest()) {
    throw InvalidArgument("image size " + to_string(img.extent()) + " does not match schedule finest level " +
                          to_string(schedule.finest()));
  }
  std::vector<BasicImage<T>> levels{img};
  for (std::size_t k = 1; k < schedule.levels.size(); ++k)
    levels.push_back(downsample(levels.back(), schedule.levels[k]));
  return levels;
}

template <class T>
BasicPyramid<T> build_pyramid(const BasicImage<T>& img, const SizeSchedule& schedule) {
  auto gaussian = gaussian_pyramid(img, schedule);
  BasicPyramid<T> pyr{{}, schedule};
  const std::size_t K = schedule.band_levels();
  for (std::size_t k = 0; k < K; ++k)
    pyr.coeffs.push_back(gaussian[k] - upsample(gaussian[k + 1], schedule.levels[k]));
  pyr.coeffs.push_back(std::move(gaussian[K]));
  return pyr;
}

template <class T>
BasicImage<T> reconstruct(const BasicPyramid<T>& pyr) {
  pyr.schedule.validate();
  if (pyr.coeffs.size() != pyr.schedule.levels.size()) {
    throw InvalidArgument("pyramid has " + std::to_string(pyr.coeffs.size()) + " levels, schedule has " +
                          std::to_string(pyr.schedule.levels.size()));
  }
  for (std::size_t k = 0; k < pyr.coeffs.size(); ++k) {
    if (pyr.coeffs[k].extent() != pyr.schedule.levels[k] || pyr.coeffs[k].channels() != pyr.coeffs[0].channels()) {
      throw InvalidArgument("pyramid level " + std::to_string(k) + " does not match its schedule size");
    }
  }
  BasicImage<T> current = pyr.coeffs.back();
  for (std::size_t k = pyr.coeffs.size() - 1; k-- > 0;)
    current = upsample(current, pyr.schedule.levels[k]) + pyr.coeffs[k];
  return current;
}

template <class T>
BlockCoefficients<T> block_forward(const BasicImage<T>& img) {
  if (img.height() % 2 || img.width() % 2 || img.size() == 0) {
    throw InvalidArgument("block transform needs even, non-zero dimensions, got " + to_string(img.extent()));
  }
  const std::size_t C = img.channels(), h = img.height() / 2, w = img.width() / 2;
  BlockCoefficients<T> out{BasicImage<T>(C, h, w), BasicTensor<T>({C, 3, h, w})};
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const double block[4] = {static_cast<double>(img.at(c, 2 * y, 2 * x)),
                                 static_cast<double>(img.at(c, 2 * y, 2 * x + 1)),
                                 static_cast<double>(img.at(c, 2 * y + 1, 2 * x)),
                                 static_cast<double>(img.at(c, 2 * y + 1, 2 * x + 1))};
        for (std::size_t r = 0; r < 4; ++r) {
          double coeff = 0;
          for (std::size_t j = 0; j < 4; ++j) coeff += kBlockBasis[r][j] * block[j];
          if (r == 0) {
            out.low.at(c, y, x) = static_cast<T>(coeff);
          } else {
            out.high[((c * 3 + (r - 1)) * h + y) * w + x] = static_cast<T>(coeff);
          }
        }
      }
  return out;
}

template <class T>
BasicImage<T> block_inverse(const BasicImage<T>& low, const BasicTensor<T>& high) {
  const std::size_t C = low.channels(), h = low.height(), w = low.width();
  if (high.shape() != Shape{C, 3, h, w}) {
    throw InvalidArgument("high-pass shape " + to_string(high.shape()) + " does not match low-pass " +
                          std::to_string(C) + "x" + to_string(low.extent()));
  }
  BasicImage<T> out(C, 2 * h, 2 * w);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double coeffs[4] = {static_cast<double>(low.at(c, y, x)), 0, 0, 0};
        for (std::size_t r = 1; r < 4; ++r) coeffs[r] = high[((c * 3 + (r - 1)) * h + y) * w + x];
        double block[4] = {0, 0, 0, 0};
        for (std::size_t j = 0; j < 4; ++j)
          for (std::size_t r = 0; r < 4; ++r) block[j] += kBlockBasis[r][j] * coeffs[r];
        out.at(c, 2 * y, 2 * x) = static_cast<T>(block[0]);
        out.at(c, 2 * y, 2 * x + 1) = static_cast<T>(block[1]);
        out.at(c, 2 * y + 1, 2 * x) = static_cast<T>(block[2]);
        out.at(c, 2 * y + 1, 2 * x + 1) = static_cast<T>(block[3]);
      }
  return out;
}

#define LAPGAN_INSTANTIATE(T)                                                                  \
  template BasicImage<T> downsample(const BasicImage<T>&, Extent);                             \
  template BasicImage<T> upsample(const BasicImage<T>&, Extent);                               \
  template std::vector<BasicImage<T>> gaussian_pyramid(const BasicImage<T>&, const SizeSchedule&); \
  template BasicPyramid<T> build_pyramid(const BasicImage<T>&, const SizeSchedule&);           \
  template BasicImage<T> reconstruct(const BasicPyramid<T>&);                                  \
  template BlockCoefficients<T> block_forward(const BasicImage<T>&);                           \
  template BasicImage<T> block_inverse(const BasicImage<T>&, const BasicTensor<T>&);

LAPGAN_INSTANTIATE(float)
LAPGAN_INSTANTIATE(double)

}  // namespace lapgan
