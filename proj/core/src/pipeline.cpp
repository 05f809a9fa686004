#include "boneage/pipeline.hpp"

#include <iomanip>
#include <sstream>
#include <utility>

#include "boneage/error.hpp"

namespace boneage {
namespace {

template <typename Fn>
auto in_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.what());
  }
}

template <typename Fn>
auto load_stage(const std::string& stage, const std::filesystem::path& path, Fn&& fn)
    -> decltype(fn()) {
  if (!std::filesystem::exists(path)) {
    throw StageError(stage, "missing checkpoint '" + path.string() + "'");
  }
  return in_stage(stage, std::forward<Fn>(fn));
}

}  // namespace

std::string format_record(const PredictionRecord& record) {
  std::ostringstream out;
  out << record.image_path << ' ' << std::fixed << std::setprecision(2) << record.age_months << ' '
      << record.nearest_class << ' ' << std::setprecision(4) << record.confidence << ' '
      << to_string(record.box);
  if (record.low_confidence) out << " low_confidence";
  return out.str();
}

void save_artifacts(const std::filesystem::path& dir, const PipelineArtifacts& artifacts) {
  std::filesystem::create_directories(dir);
  save_image(artifacts.mask, dir / "mask.pgm");
  save_image(artifacts.bone_image, dir / "bone_image.pgm");
  save_image(artifacts.roi_input, dir / "roi_input.pgm");
  save_image(artifacts.crop, dir / "crop.pgm");
}

Pipeline::Pipeline(SegmentationModel unet, RoiModel rpn, AgeModel age, ReferenceAtlas atlas,
                   float low_confidence_threshold)
    : unet_(std::move(unet)),
      rpn_(std::move(rpn)),
      age_(std::move(age)),
      atlas_(std::move(atlas)),
      low_confidence_threshold_(low_confidence_threshold) {
  in_stage("age", [this] {
    atlas_.validate();
    return 0;
  });
}

Pipeline Pipeline::load(const PipelineConfig& config) {
  const auto& paths = config.paths;
  const auto unet_path = paths.resolve(paths.unet_checkpoint);
  const auto rpn_path = paths.resolve(paths.rpn_checkpoint);
  const auto age_path = paths.resolve(paths.age_checkpoint);
  const auto atlas_path = paths.resolve(paths.atlas_manifest);
  auto unet = load_stage("segmentation", unet_path, [&] { return SegmentationModel::load(unet_path); });
  auto rpn = load_stage("roi", rpn_path, [&] { return RoiModel::load(rpn_path); });
  auto age = load_stage("age", age_path, [&] { return AgeModel::load(age_path); });
  auto atlas = load_stage("age", atlas_path, [&] { return ReferenceAtlas::load(atlas_path); });
  return Pipeline(std::move(unet), std::move(rpn), std::move(age), std::move(atlas),
                  config.low_confidence_threshold);
}

PredictionRecord Pipeline::run(const GrayImage& image, PipelineArtifacts* artifacts) const {
  SegmentationResult seg = in_stage("segmentation", [&] { return segment(unet_, image); });
  GrayImage roi_input = in_stage("roi", [&] { return prepare_roi_input(seg.bone_image); });
  const RoiPrediction roi = in_stage("roi", [&] { return predict_roi(rpn_, roi_input); });
  GrayImage crop = in_stage("roi", [&] {
    return crop_roi(roi_input, roi.box, age_.config().input_size, age_.config().input_size);
  });
  const AgeEstimate estimate = in_stage("age", [&] { return estimate_age(age_, crop, atlas_); });

  PredictionRecord record;
  record.age_months = estimate.age_months;
  record.nearest_class = estimate.nearest_class;
  record.confidence = roi.confidence;
  record.low_confidence = roi.confidence < low_confidence_threshold_;
  record.box = roi.box;
  if (artifacts) {
    artifacts->mask = std::move(seg.mask);
    artifacts->bone_image = std::move(seg.bone_image);
    artifacts->roi_input = std::move(roi_input);
    artifacts->crop = std::move(crop);
  }
  return record;
}

PredictionRecord Pipeline::run(const std::filesystem::path& image_path,
                               PipelineArtifacts* artifacts) const {
  const GrayImage image = in_stage("load", [&] { return load_image(image_path); });
  PredictionRecord record = run(image, artifacts);
  record.image_path = image_path.string();
  return record;
}

}  // namespace boneage
