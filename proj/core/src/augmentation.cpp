#include "boneage/augmentation.hpp"

#include <sstream>

#include "boneage/error.hpp"

namespace boneage {

Sex parse_sex(std::string_view text) {
  if (text == "male" || text == "m" || text == "M") return Sex::kMale;
  if (text == "female" || text == "f" || text == "F") return Sex::kFemale;
  throw ContractError("unknown sex '" + std::string(text) + "'");
}

std::size_t AugmentationSpec::variants_per_image() const {
  return static_cast<std::size_t>(shift_counts_x) * static_cast<std::size_t>(shift_counts_y) *
         rotations.size() * flips.size();
}

void AugmentationSpec::validate() const {
  if (shift_stride <= 0) throw ContractError("augmentation shift stride must be positive");
  if (shift_counts_x < 1 || shift_counts_y < 1) {
    throw ContractError("augmentation shift counts must be >= 1");
  }
  if (rotations.empty()) throw ContractError("augmentation rotation set is empty");
  if (flips.empty()) throw ContractError("augmentation flip set is empty");
}

std::vector<LabeledImage> enumerate_variants(const LabeledImage& ref, const AugmentationSpec& spec) {
  spec.validate();
  const int max_dx = (spec.shift_counts_x - 1) * spec.shift_stride;
  const int max_dy = (spec.shift_counts_y - 1) * spec.shift_stride;
  if (max_dx >= ref.image.width() || max_dy >= ref.image.height()) {
    std::ostringstream msg;
    msg << "augmentation shifts up to (" << max_dx << ", " << max_dy
        << ") do not fit a " << ref.image.width() << "x" << ref.image.height() << " image";
    throw ContractError(msg.str());
  }

  std::vector<LabeledImage> variants;
  variants.reserve(spec.variants_per_image());
  for (int ix = 0; ix < spec.shift_counts_x; ++ix) {
    const int dx = ix * spec.shift_stride;
    for (int iy = 0; iy < spec.shift_counts_y; ++iy) {
      const int dy = iy * spec.shift_stride;
      const GrayImage shifted = shift_crop(ref.image, dx, dy);
      for (double rotation : spec.rotations) {
        const GrayImage rotated = rotate(shifted, rotation);
        for (bool flip : spec.flips) {
          LabeledImage v;
          v.image = flip ? flip_horizontal(rotated) : rotated;
          v.age_months = ref.age_months;
          v.sex = ref.sex;
          v.provenance = {ref.provenance.reference_id, dx, dy, rotation, flip};
          variants.push_back(std::move(v));
        }
      }
    }
  }
  return variants;
}

std::vector<LabeledImage> augment_dataset(std::span<const LabeledImage> refs,
                                          const AugmentationSpec& spec) {
  if (refs.empty()) throw ContractError("augment_dataset: reference list is empty");
  spec.validate();
  std::vector<LabeledImage> all;
  all.reserve(refs.size() * spec.variants_per_image());
  for (const LabeledImage& ref : refs) {
    auto variants = enumerate_variants(ref, spec);
    std::move(variants.begin(), variants.end(), std::back_inserter(all));
  }
  return all;
}

std::string augmentation_manifest_line(std::size_t id, const LabeledImage& v) {
  std::ostringstream line;
  line << id << ' ' << v.provenance.reference_id << ' ' << v.provenance.dx << ' '
       << v.provenance.dy << ' ' << v.provenance.rotation << ' ' << (v.provenance.flip ? 1 : 0)
       << ' ' << v.age_months << ' ' << to_string(v.sex);
  return line.str();
}

}  // namespace boneage
