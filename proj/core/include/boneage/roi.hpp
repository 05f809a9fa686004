#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "boneage/box.hpp"
#include "boneage/image.hpp"
#include "boneage/tensor.hpp"
#include "boneage/training.hpp"

namespace boneage {

/// Size of the rotated, rescaled image the localiser works on.
inline constexpr int kRoiInputWidth = 720;
inline constexpr int kRoiInputHeight = 960;

/// Number of raw head outputs: (cx, cy, log w, log h, confidence logit).
inline constexpr std::size_t kRoiHeadOutputs = 5;

struct RpnConfig {
  /// One VGG-style block (two 3x3 conv+ReLU, then 2x2 max-pool) per entry.
  std::vector<int> backbone_channels{8, 16, 32};
  int input_width = 96;
  int input_height = 128;
  int hidden = 64;
  /// Weight of the smooth-L1 box term relative to the confidence BCE.
  float box_loss_weight = 20.0f;

  void validate() const;
};

struct RoiOutputs {
  Tensor raw;   ///< [N,5] (cx, cy, log w, log h, confidence logit)
  Tensor heat;  ///< [N,cells] softmax over the final feature map
};

/// Bilinear weights of the normalised point (cx, cy) over the four nearest
/// cell centres of a width x height map; their weighted mean is the point.
std::vector<float> heat_target(float cx, float cy, std::size_t width, std::size_t height);

/// Direct single-box regressor with a "true elbow region" confidence head.
/// The box centre is the heat-weighted mean of the final feature-map cell
/// centres; size and confidence come from a dense head ("fc", "head") over
/// the flattened features.
class RoiModel {
 public:
  RoiModel(RpnConfig config, ParameterSet params);

  const RpnConfig& config() const noexcept { return config_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

  /// [N,1,H,W] at the configured input size to raw [N,5] head outputs.
  Tensor forward(Tape& tape, const Tensor& images) const;
  RoiOutputs forward_heads(Tape& tape, const Tensor& images) const;

  void save(const std::filesystem::path& path) const;
  static RoiModel load(const std::filesystem::path& path);

 private:
  RpnConfig config_;
  ParameterSet params_;
};

RoiModel build_rpn(const RpnConfig& config, std::uint64_t seed);

/// Rotates a 720x480 bone image by 90 degrees (to 480x720) and rescales each
/// axis independently to 720x960.
GrayImage prepare_roi_input(const GrayImage& bone_image);

/// Box as regression targets relative to the image extents:
/// (cx / W, cy / H, log(w / W), log(h / H)).
std::array<float, 4> encode_box(const RoiBox& box, int width, int height);

/// Inverse of encode_box, clamped so the result is a valid box for the image
/// whatever the raw values are.
RoiBox decode_box(std::span<const float> raw, int width, int height);

struct RoiPrediction {
  RoiBox box;
  float confidence = 0.0f;
};

/// Resizes `img` to the model input internally; the box is returned in
/// `img` pixel coordinates.
RoiPrediction predict_roi(const RoiModel& model, const GrayImage& img);

struct RoiSample {
  GrayImage image;
  RoiBox box;
  bool is_true = true;
};

/// Loss = box_loss_weight * smooth_l1(box params, true samples only)
///      + cross_entropy(heat, bilinear splat of the true centre; true samples only)
///      + bce(confidence, is_true).
std::vector<float> train_roi(RoiModel& model, std::span<const RoiSample> dataset,
                             const TrainConfig& config);

/// Exact pixel crop followed by a bilinear resize to out_width x out_height.
GrayImage crop_roi(const GrayImage& img, const RoiBox& box, int out_width = 64,
                   int out_height = 64);

}  // namespace boneage
