#include "boneage/datasets.hpp"

namespace boneage {

SegmentationSample make_segmentation_sample(const PhantomSample& sample, const UNetConfig& config) {
  return {resize_bilinear(sample.image, config.input_width, config.input_height),
          binarize(resize_bilinear(sample.bone_mask, config.input_width, config.input_height),
                   0.5f)};
}

GrayImage ground_truth_bone_image(const PhantomSample& sample) {
  return resize_bilinear(multiply(sample.image, sample.bone_mask), kBoneImageWidth,
                         kBoneImageHeight);
}

RoiBox prepared_roi_box(const PhantomSample& sample) {
  const RoiBox canonical = scale_box(sample.roi, sample.image.width(), sample.image.height(),
                                     kBoneImageWidth, kBoneImageHeight);
  const RoiBox rotated = rotate_box_90(canonical, kBoneImageWidth);
  return scale_box(rotated, kBoneImageHeight, kBoneImageWidth, kRoiInputWidth, kRoiInputHeight);
}

RoiSample make_roi_sample(const PhantomSample& sample, int width, int height) {
  const GrayImage prepared = prepare_roi_input(ground_truth_bone_image(sample));
  RoiSample out;
  out.image = resize_bilinear(prepared, width, height);
  out.is_true = sample.is_true;
  out.box = sample.is_true
                ? scale_box(prepared_roi_box(sample), kRoiInputWidth, kRoiInputHeight, width, height)
                : RoiBox{0, 0, width, height};
  return out;
}

GrayImage ground_truth_crop(const PhantomSample& sample, int crop_size) {
  const GrayImage prepared = prepare_roi_input(ground_truth_bone_image(sample));
  return crop_roi(prepared, prepared_roi_box(sample), crop_size, crop_size);
}

AgeSample make_age_sample(const PhantomSample& sample, const ReferenceAtlas& atlas, int crop_size) {
  return {ground_truth_crop(sample, crop_size), sample.age_months,
          atlas.nearest_class(sample.sex, sample.age_months)};
}

std::vector<PhantomSample> atlas_phantoms(const AtlasPhantomSettings& settings) {
  std::vector<PhantomSample> phantoms;
  std::uint64_t index = 0;
  for (Sex sex : {Sex::kMale, Sex::kFemale}) {
    for (double age : default_atlas_ages()) {
      PhantomSpec spec;
      spec.seed = settings.seed * 1000 + index++;
      spec.maturity = age_to_maturity(age);
      spec.sex = sex;
      spec.width = settings.width;
      spec.height = settings.height;
      spec.noise_level = settings.noise_level;
      phantoms.push_back(generate_phantom(spec));
    }
  }
  return phantoms;
}

ReferenceAtlas build_phantom_atlas(const AtlasPhantomSettings& settings) {
  ReferenceAtlas atlas;
  int class_id = 0;
  for (const PhantomSample& p : atlas_phantoms(settings)) {
    atlas.entries.push_back(
        {class_id++, p.sex, p.age_months, ground_truth_crop(p, settings.crop_size)});
  }
  atlas.validate();
  return atlas;
}

std::vector<LabeledImage> atlas_references(const AtlasPhantomSettings& settings) {
  std::vector<LabeledImage> refs;
  int class_id = 0;
  for (PhantomSample& p : atlas_phantoms(settings)) {
    LabeledImage ref;
    ref.image = std::move(p.image);
    ref.age_months = p.age_months;
    ref.sex = p.sex;
    ref.provenance.reference_id = class_id++;
    refs.push_back(std::move(ref));
  }
  return refs;
}

}  // namespace boneage
