#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace geodepth {

/// Dense H x W x C raster, row-major with interleaved channels.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, int channels = 1, T fill = T{})
      : height_(height), width_(width), channels_(channels) {
    if (height < 0 || width < 0 || channels <= 0) {
      throw std::invalid_argument("invalid grid shape");
    }
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height_) * width_;
  }
  bool empty() const { return data_.empty(); }

  T& operator()(int y, int x, int c = 0) { return data_[index(y, x, c)]; }
  const T& operator()(int y, int x, int c = 0) const {
    return data_[index(y, x, c)];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return height_ == other.height() && width_ == other.width() &&
           channels_ == other.channels();
  }
  template <typename U>
  bool same_extent(const Grid<U>& other) const {
    return height_ == other.height() && width_ == other.width();
  }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool operator==(const Grid& other) const = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

/// Floating-point image; RGB images have three channels with values in [0, 1].
using Image = Grid<double>;
/// Per-pixel boolean, 1 = set.
using Mask = Grid<std::uint8_t>;

}  // namespace geodepth
