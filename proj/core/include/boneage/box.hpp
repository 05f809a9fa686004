#pragma once

#include <string>

namespace boneage {

/// Axis-aligned pixel rectangle: columns [x, x+w), rows [y, y+h).
struct RoiBox {
  int x = 0;
  int y = 0;
  int w = 1;
  int h = 1;

  int right() const noexcept { return x + w; }
  int bottom() const noexcept { return y + h; }
  long area() const noexcept { return static_cast<long>(w) * h; }

  /// Positive extents and fully inside a width x height image.
  bool valid_for(int width, int height) const noexcept {
    return w > 0 && h > 0 && x >= 0 && y >= 0 && right() <= width && bottom() <= height;
  }

  bool operator==(const RoiBox&) const = default;
};

/// Intersection over union; 0 for disjoint boxes.
double iou(const RoiBox& a, const RoiBox& b);

/// Where `box` lands after rotate(img, 90) of an image `image_width` wide.
RoiBox rotate_box_90(const RoiBox& box, int image_width);

/// Maps a box from a (from_w x from_h) image onto a (to_w x to_h) resize of it,
/// rounding edges to the nearest pixel and keeping at least one pixel.
RoiBox scale_box(const RoiBox& box, int from_w, int from_h, int to_w, int to_h);

std::string to_string(const RoiBox& box);

}  // namespace boneage
