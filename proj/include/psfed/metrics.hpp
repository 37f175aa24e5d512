#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "psfed/field.hpp"

namespace psfed {

struct BinaryMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int h, int w) : height(h), width(w), bits(static_cast<std::size_t>(h) * w, 0) {}

  std::uint8_t at(int y, int x) const {
    return bits[static_cast<std::size_t>(y) * width + x];
  }
  void set(int y, int x, bool v) {
    bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
  bool empty_mask() const {
    for (auto b : bits)
      if (b) return false;
    return true;
  }
};

BinaryMask class_mask(const LabelImage& labels, int cls);

// 2|P n G| / (|P| + |G|); both masks empty scores 1.
double dice(const BinaryMask& pred, const BinaryMask& gt);

// 95th-percentile Hausdorff distance between mask boundaries, in pixels.
// Boundary = mask pixel with a 4-neighbor outside the mask (the image border
// counts as outside). Nearest-rank percentile on each directed distance
// list, then the max of the two. Empty input masks make the metric
// undefined (nullopt).
std::optional<double> hd95(const BinaryMask& pred, const BinaryMask& gt);

// Boundary pixels as (y, x) pairs.
std::vector<std::pair<int, int>> boundary_pixels(const BinaryMask& mask);

}  // namespace psfed
