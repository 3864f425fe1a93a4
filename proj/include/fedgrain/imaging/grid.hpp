#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fedgrain/common/error.hpp"

namespace fedgrain {

// Row-major H x W grid of pixels.
template <typename T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(std::size_t height, std::size_t width, T fill = T{})
      : height_(height), width_(width), pixels_(height * width, fill) {}
  Grid(std::size_t height, std::size_t width, std::vector<T> pixels)
      : height_(height), width_(width), pixels_(std::move(pixels)) {
    if (pixels_.size() != height_ * width_)
      throw ShapeError("grid: " + std::to_string(height_) + "x" + std::to_string(width_) + " needs " +
                       std::to_string(height_ * width_) + " pixels, got " + std::to_string(pixels_.size()));
  }

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool same_shape(const auto& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  T& at(std::size_t y, std::size_t x) noexcept { return pixels_[y * width_ + x]; }
  const T& at(std::size_t y, std::size_t x) const noexcept { return pixels_[y * width_ + x]; }
  T& operator[](std::size_t i) noexcept { return pixels_[i]; }
  const T& operator[](std::size_t i) const noexcept { return pixels_[i]; }

  std::span<T> pixels() noexcept { return pixels_; }
  std::span<const T> pixels() const noexcept { return pixels_; }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<T> pixels_;
};

// Intensities in [0, 1].
using GrayImage = Grid<double>;
// 0 = grain boundary, 1 = grain.
using LabelMap = Grid<std::uint8_t>;
// 0 = boundary/background, k >= 1 = grain instance k.
using InstanceMap = Grid<std::uint32_t>;

inline constexpr std::uint8_t kBoundary = 0;
inline constexpr std::uint8_t kGrain = 1;

inline LabelMap labels_from_instances(const InstanceMap& inst) {
  LabelMap out(inst.height(), inst.width());
  for (std::size_t i = 0; i < inst.size(); ++i) out[i] = inst[i] == 0 ? kBoundary : kGrain;
  return out;
}

template <typename A, typename B>
void require_same_grid(const Grid<A>& a, const Grid<B>& b, const char* context) {
  if (a.height() != b.height() || a.width() != b.width())
    throw ShapeError(std::string(context) + ": grid mismatch " + std::to_string(a.height()) + "x" +
                     std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                     std::to_string(b.width()));
}

}  // namespace fedgrain
