#pragma once

#include <filesystem>
#include <string>

#include "boneage/age.hpp"
#include "boneage/config.hpp"
#include "boneage/roi.hpp"
#include "boneage/segmentation.hpp"

namespace boneage {

/// Intermediate images of one prediction, kept when the caller asks for them.
struct PipelineArtifacts {
  GrayImage mask;        ///< network resolution
  GrayImage bone_image;  ///< 720x480
  GrayImage roi_input;   ///< 720x960
  GrayImage crop;        ///< age-model input size
};

struct PredictionRecord {
  std::string image_path;
  double age_months = 0.0;
  int nearest_class = 0;
  float confidence = 0.0f;
  bool low_confidence = false;
  RoiBox box;  ///< in roi_input coordinates
};

/// `image_path age_months nearest_class confidence x y w h [low_confidence]`
std::string format_record(const PredictionRecord& record);

/// Writes mask.pgm, bone_image.pgm, roi_input.pgm and crop.pgm into `dir`.
void save_artifacts(const std::filesystem::path& dir, const PipelineArtifacts& artifacts);

/// The three trained stages plus the reference atlas.
class Pipeline {
 public:
  Pipeline(SegmentationModel unet, RoiModel rpn, AgeModel age, ReferenceAtlas atlas,
           float low_confidence_threshold);

  /// Loads every checkpoint named by `config.paths`. A missing or unreadable
  /// file raises StageError labelled with the stage it belongs to.
  static Pipeline load(const PipelineConfig& config);

  /// Runs segment, prepare_roi_input, predict_roi, crop_roi and estimate_age.
  /// Errors inside a stage are rethrown as StageError with that stage's name.
  PredictionRecord run(const GrayImage& image, PipelineArtifacts* artifacts = nullptr) const;
  PredictionRecord run(const std::filesystem::path& image_path,
                       PipelineArtifacts* artifacts = nullptr) const;

  const SegmentationModel& unet() const noexcept { return unet_; }
  const RoiModel& rpn() const noexcept { return rpn_; }
  const AgeModel& age_model() const noexcept { return age_; }
  const ReferenceAtlas& atlas() const noexcept { return atlas_; }

 private:
  SegmentationModel unet_;
  RoiModel rpn_;
  AgeModel age_;
  ReferenceAtlas atlas_;
  float low_confidence_threshold_;
};

}  // namespace boneage
