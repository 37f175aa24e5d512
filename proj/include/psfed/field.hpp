#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace psfed {

/// Dense H x W x C grid of doubles, channel-last. Raw classifier responses
/// (logits) and per-pixel probabilities both live in this layout.
struct Field {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Field() = default;
  Field(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        data(static_cast<std::size_t>(h) * w * c, fill) {
    if (h <= 0 || w <= 0 || c <= 0) throw std::invalid_argument("Field: bad shape");
  }

  double* px(int y, int x) {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }
  const double* px(int y, int x) const {
    return data.data() + (static_cast<std::size_t>(y) * width + x) * channels;
  }

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height) * width;
  }
  std::size_t size() const { return data.size(); }

  bool same_shape(const Field& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

using LogitField = Field;
using ProbField = Field;

/// H x W grid of class indices.
struct LabelImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> labels;

  LabelImage() = default;
  LabelImage(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), labels(static_cast<std::size_t>(h) * w, fill) {}

  std::uint8_t& at(int y, int x) {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t at(int y, int x) const {
    return labels[static_cast<std::size_t>(y) * width + x];
  }
  std::size_t size() const { return labels.size(); }
};

}  // namespace psfed
