#pragma once

#include <compare>
#include <span>
#include <string>
#include <vector>

#include "boneage/image.hpp"
#include "boneage/sex.hpp"

namespace boneage {

/// The enumerable augmentation family: every combination of an x-shift,
/// a y-shift, a rotation and a flip state.
///
/// Shifts are one-directional: x offsets are {0, stride, ..., (counts_x-1)*stride},
/// likewise for y. The defaults give 4 * 3 * 2 * 2 = 48 variants per image.
struct AugmentationSpec {
  int shift_stride = 10;
  int shift_counts_x = 4;
  int shift_counts_y = 3;
  std::vector<double> rotations{0.0, 15.0};
  std::vector<bool> flips{false, true};

  std::size_t variants_per_image() const;
  /// Throws ContractError on an empty factor or non-positive stride.
  void validate() const;
};

struct Provenance {
  int reference_id = 0;
  int dx = 0;
  int dy = 0;
  double rotation = 0.0;
  bool flip = false;

  auto operator<=>(const Provenance&) const = default;
};

struct LabeledImage {
  GrayImage image;
  double age_months = 0.0;
  Sex sex = Sex::kMale;
  Provenance provenance;
};

/// All variants of one reference in lexicographic (dx, dy, rotation, flip)
/// order. Each variant is shift_crop, then rotate, then flip; the label is
/// copied from the reference.
std::vector<LabeledImage> enumerate_variants(const LabeledImage& ref, const AugmentationSpec& spec);

/// Concatenated per-reference enumerations, reference order preserved.
std::vector<LabeledImage> augment_dataset(std::span<const LabeledImage> refs,
                                          const AugmentationSpec& spec);

/// `id ref_id dx dy rot flip age_months sex`
std::string augmentation_manifest_line(std::size_t id, const LabeledImage& variant);

}  // namespace boneage
