#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "boneage/image.hpp"
#include "boneage/tensor.hpp"
#include "boneage/training.hpp"

namespace boneage {

/// Canonical inter-stage size of the skin-free bone image.
inline constexpr int kBoneImageWidth = 720;
inline constexpr int kBoneImageHeight = 480;

struct UNetConfig {
  int depth = 3;
  int base_channels = 8;
  int input_width = 96;
  int input_height = 64;
  float threshold = 0.5f;

  /// Throws ConfigError unless the input extents divide by 2^depth.
  void validate() const;
};

/// U-Net with two 3x3 conv+ReLU layers per level. Channels double on every
/// contracting level and halve on every expanding level; decoder level L
/// consumes concat(upsampled level L+1 features, encoder level L features).
///
/// Parameter names: enc<L>.conv{1,2}, bottleneck.conv{1,2}, dec<L>.conv{1,2},
/// head (1x1, one output channel).
class SegmentationModel {
 public:
  SegmentationModel(UNetConfig config, ParameterSet params);

  const UNetConfig& config() const noexcept { return config_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

  /// [N,1,H,W] image batch to [N,1,H,W] mask probabilities.
  Tensor forward(Tape& tape, const Tensor& images) const;

  void save(const std::filesystem::path& path) const;
  static SegmentationModel load(const std::filesystem::path& path);

 private:
  UNetConfig config_;
  ParameterSet params_;
};

SegmentationModel build_unet(const UNetConfig& config, std::uint64_t seed);

struct SegmentationResult {
  /// Sigmoid mask at the network resolution.
  GrayImage mask;
  /// Input with non-bone pixels zeroed, resized to 720x480.
  GrayImage bone_image;
};

/// The soft mask is computed at the network resolution, bilinearly resized
/// back to the input extents and binarised at the model threshold; the input
/// is multiplied by that binary mask and resized to the canonical size.
SegmentationResult segment(const SegmentationModel& model, const GrayImage& img);

struct SegmentationSample {
  GrayImage image;
  GrayImage mask;
};

/// Loss is bce + dice on the mask probabilities. Samples must already be at
/// the model's input size with binary masks.
std::vector<float> train_segmentation(SegmentationModel& model,
                                      std::span<const SegmentationSample> dataset,
                                      const TrainConfig& config);

/// Dice overlap of two binary masks (pixels >= 0.5 count as foreground).
/// Two empty masks score 1.
double dice_coefficient(const GrayImage& a, const GrayImage& b);

}  // namespace boneage
