#include "boneage/box.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace boneage {

double iou(const RoiBox& a, const RoiBox& b) {
  const long ix = std::max(0, std::min(a.right(), b.right()) - std::max(a.x, b.x));
  const long iy = std::max(0, std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y));
  const long inter = ix * iy;
  const long uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

RoiBox rotate_box_90(const RoiBox& box, int image_width) {
  // Pixel (x, y) moves to (y, width - 1 - x).
  return {box.y, image_width - box.right(), box.h, box.w};
}

RoiBox scale_box(const RoiBox& box, int from_w, int from_h, int to_w, int to_h) {
  const double sx = static_cast<double>(to_w) / from_w;
  const double sy = static_cast<double>(to_h) / from_h;
  int x0 = std::clamp(static_cast<int>(std::lround(box.x * sx)), 0, to_w - 1);
  int y0 = std::clamp(static_cast<int>(std::lround(box.y * sy)), 0, to_h - 1);
  int x1 = std::clamp(static_cast<int>(std::lround(box.right() * sx)), x0 + 1, to_w);
  int y1 = std::clamp(static_cast<int>(std::lround(box.bottom() * sy)), y0 + 1, to_h);
  return {x0, y0, x1 - x0, y1 - y0};
}

std::string to_string(const RoiBox& box) {
  std::ostringstream out;
  out << box.x << ' ' << box.y << ' ' << box.w << ' ' << box.h;
  return out.str();
}

}  // namespace boneage
