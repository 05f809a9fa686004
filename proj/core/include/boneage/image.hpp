#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "boneage/tensor.hpp"

namespace boneage {

/// Single-channel image, row-major, pixel values in [0,1].
class GrayImage {
 public:
  GrayImage() = default;
  GrayImage(int width, int height, float fill = 0.0f);
  /// Throws ContractError if the pixel count or range is wrong.
  GrayImage(int width, int height, std::vector<float> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  float at(int x, int y) const { return pixels_[index(x, y)]; }
  float& at(int x, int y) { return pixels_[index(x, y)]; }

  std::span<const float> pixels() const noexcept { return pixels_; }
  std::span<float> pixels() noexcept { return pixels_; }

  bool operator==(const GrayImage&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<float> pixels_;
};

/// Reads 8-bit PGM (P5) or 8-bit PNG (grey, grey+alpha, RGB, RGBA). Colour is
/// reduced with luminance weights 0.299/0.587/0.114; byte p maps to p/255.
GrayImage load_image(const std::filesystem::path& path);

/// Writes binary PGM, maxval 255, byte = round-half-up(255 * p).
void save_image(const GrayImage& img, const std::filesystem::path& path);

/// Bilinear resampling with pixel-centre alignment and edge clamping.
GrayImage resize_bilinear(const GrayImage& img, int new_width, int new_height);

/// Counter-clockwise rotation about the image centre. Multiples of 90 degrees
/// are exact index permutations (90 and 270 swap the extents); other angles
/// keep the extents, sample bilinearly and fill uncovered pixels with 0.
GrayImage rotate(const GrayImage& img, double degrees);

GrayImage flip_horizontal(const GrayImage& img);

/// Translates content by (dx, dy); vacated pixels become 0.
GrayImage shift_crop(const GrayImage& img, int dx, int dy);

/// Pixelwise product; extents must match.
GrayImage multiply(const GrayImage& a, const GrayImage& b);

/// 1.0 where pixel >= threshold, else 0.0.
GrayImage binarize(const GrayImage& img, float threshold);

/// Stacks equally sized images into an [N,1,H,W] tensor.
Tensor images_to_tensor(std::span<const GrayImage> images);

/// Extracts sample `n` of an [N,1,H,W] tensor, clamping values into [0,1].
GrayImage tensor_to_image(const Tensor& t, std::size_t n = 0);

}  // namespace boneage
