#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "boneage/age.hpp"
#include "boneage/augmentation.hpp"
#include "boneage/phantom.hpp"
#include "boneage/roi.hpp"
#include "boneage/segmentation.hpp"

namespace boneage {

// Adapters from phantom ground truth to the training samples of each stage.
// Every adapter walks the same size chain as the inference pipeline
// (bone image at 720x480, rotated and rescaled to 720x960), only with the
// phantom's true mask and box in place of the predicted ones.

/// Image and binarised mask resized to the U-Net input.
SegmentationSample make_segmentation_sample(const PhantomSample& sample, const UNetConfig& config);

/// Phantom image times its true bone mask, at 720x480.
GrayImage ground_truth_bone_image(const PhantomSample& sample);

/// Box of `sample.roi` after the 720x480 -> 720x960 preparation.
RoiBox prepared_roi_box(const PhantomSample& sample);

/// Prepared ROI input and its true box, rescaled to width x height (the RPN
/// input size, so training does not hold full 720x960 frames).
RoiSample make_roi_sample(const PhantomSample& sample, int width, int height);

/// True-box crop of the prepared image at crop_size x crop_size.
GrayImage ground_truth_crop(const PhantomSample& sample, int crop_size);

AgeSample make_age_sample(const PhantomSample& sample, const ReferenceAtlas& atlas, int crop_size);

struct AtlasPhantomSettings {
  std::uint64_t seed = 2024;
  int width = 240;
  int height = 160;
  double noise_level = 0.02;
  int crop_size = 64;
};

/// Twelve phantom references (male then female, 120..180 months), class ids
/// 0..11 in that order. Returns the full phantoms for augmentation and
/// pipeline use.
std::vector<PhantomSample> atlas_phantoms(const AtlasPhantomSettings& settings);

/// Atlas built from atlas_phantoms with true-box crops.
ReferenceAtlas build_phantom_atlas(const AtlasPhantomSettings& settings);

/// The atlas phantoms as augmentation references (provenance id = class id).
std::vector<LabeledImage> atlas_references(const AtlasPhantomSettings& settings);

}  // namespace boneage
