#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include "boneage/age.hpp"
#include "boneage/config.hpp"
#include "boneage/phantom.hpp"
#include "boneage/roi.hpp"
#include "boneage/segmentation.hpp"

namespace boneage {

// Phantom-backed training runs for each stage, driven entirely by a
// PipelineConfig so the CLI and the tests train identical models.

/// Independent stream seed for a named purpose ("unet.init", "rpn.data", ...).
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose);

/// Training phantoms for `stage` ("unet", "rpn" or "age"): the stage's sample
/// count, with negatives only for the ROI stage.
std::vector<PhantomSample> stage_phantoms(const PipelineConfig& config, std::string_view stage);

struct StageResult {
  std::vector<float> losses;
};

SegmentationModel train_unet_stage(const PipelineConfig& config, StageResult* result = nullptr,
                                   std::function<void(int, float)> on_epoch = {});
RoiModel train_rpn_stage(const PipelineConfig& config, StageResult* result = nullptr,
                         std::function<void(int, float)> on_epoch = {});
AgeModel train_age_stage(const PipelineConfig& config, const ReferenceAtlas& atlas,
                         StageResult* result = nullptr,
                         std::function<void(int, float)> on_epoch = {});

}  // namespace boneage
