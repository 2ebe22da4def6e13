#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "faceswap/error.hpp"

namespace faceswap {

/// Rounds to the nearest integer, ties to even, then clamps to [0, 255].
inline std::uint8_t quantize(double v) {
  if (!(v == v)) return 0;
  const double r = std::nearbyint(v);  // default rounding mode is ties-to-even
  return static_cast<std::uint8_t>(r < 0.0 ? 0.0 : r > 255.0 ? 255.0 : r);
}

/// Interleaved 8-bit RGB, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0) : width(w), height(h) {
    require(w > 0 && h > 0, "image dimensions must be positive");
    data.assign(static_cast<std::size_t>(w) * h * 3, fill);
  }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::uint8_t& at(int x, int y, int c) { return data[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Binary per-pixel labels; 1 = face.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;

  Mask() = default;
  Mask(int w, int h, bool fill = false) : width(w), height(h) {
    require(w > 0 && h > 0, "mask dimensions must be positive");
    labels.assign(static_cast<std::size_t>(w) * h, fill ? 1 : 0);
  }

  std::size_t pixel_count() const { return labels.size(); }
  std::uint8_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
  bool at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x] != 0; }
  std::size_t count() const {
    std::size_t n = 0;
    for (auto v : labels) n += v != 0;
    return n;
  }
  bool empty() const { return count() == 0; }

  friend bool operator==(const Mask&, const Mask&) = default;
};

/// Partition of the image into regions 0..count-1.
struct RegionMap {
  int width = 0;
  int height = 0;
  std::uint32_t count = 0;
  std::vector<std::uint32_t> ids;

  std::uint32_t at(int x, int y) const { return ids[static_cast<std::size_t>(y) * width + x]; }

  void validate() const {
    require(width > 0 && height > 0, "region map dimensions must be positive");
    require(ids.size() == static_cast<std::size_t>(width) * height, "region map size mismatch");
    std::vector<bool> seen(count, false);
    for (auto id : ids) {
      require(id < count, "region id " + std::to_string(id) + " >= count " + std::to_string(count));
      seen[id] = true;
    }
    for (std::uint32_t r = 0; r < count; ++r)
      require(seen[r], "region id " + std::to_string(r) + " unused; ids must be contiguous");
  }

  friend bool operator==(const RegionMap&, const RegionMap&) = default;
};

inline void require_same_size(int w1, int h1, int w2, int h2, const char* what) {
  require(w1 == w2 && h1 == h2, std::string(what) + ": dimensions differ (" + std::to_string(w1) + "x" +
                                    std::to_string(h1) + " vs " + std::to_string(w2) + "x" +
                                    std::to_string(h2) + ")");
}

}  // namespace faceswap
