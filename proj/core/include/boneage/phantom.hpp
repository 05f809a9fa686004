#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "boneage/box.hpp"
#include "boneage/image.hpp"
#include "boneage/sex.hpp"

namespace boneage {

inline constexpr double kPhantomMinAgeMonths = 120.0;
inline constexpr double kPhantomMaxAgeMonths = 180.0;

/// Maturity in [0,1] maps linearly onto [120, 180] months.
double maturity_to_age(double maturity);
double age_to_maturity(double age_months);

struct PhantomSpec {
  std::uint64_t seed = 0;
  double maturity = 0.5;
  Sex sex = Sex::kMale;
  int width = 240;
  int height = 160;
  double noise_level = 0.02;
  bool joint_present = true;

  double age_months() const { return maturity_to_age(maturity); }
};

/// Rendered geometry, in pixels. Exposed so callers can check the monotone
/// maturity construction directly.
struct PhantomGeometry {
  double joint_x = 0.0, joint_y = 0.0;
  double bone_radius = 0.0;
  double skin_radius = 0.0;
  /// Free distance between the two bone ends at the joint.
  double gap_width = 0.0;
  /// Radius of the ossification-centre disc between the bone ends.
  double disc_radius = 0.0;
  /// Radius around the joint whose bone pixels make up the ROI.
  double joint_region_radius = 0.0;
};

struct PhantomSample {
  GrayImage image;
  GrayImage bone_mask;
  /// Tight bounds of the joint's bone pixels; the whole frame when no joint
  /// is visible.
  RoiBox roi;
  double maturity = 0.0;
  double age_months = 0.0;
  Sex sex = Sex::kMale;
  bool is_true = true;
  PhantomGeometry geometry;
};

inline constexpr float kPhantomBackground = 0.05f;
inline constexpr float kPhantomSkin = 0.35f;
inline constexpr float kPhantomBone = 0.80f;
inline constexpr float kPhantomDisc = 0.95f;

/// Renders an elbow-like phantom: two bright capsules ("humerus" and
/// "forearm") whose rounded ends meet at a joint, a bright ossification disc
/// in the gap between them, a dimmer soft-tissue halo, and Gaussian noise.
/// Gap width shrinks and disc radius grows with maturity. Deterministic in
/// `spec`.
PhantomSample generate_phantom(const PhantomSpec& spec);

PhantomGeometry phantom_geometry(const PhantomSpec& spec);

struct PhantomDatasetSpec {
  std::size_t count = 1;
  std::uint64_t seed = 0;
  double maturity_min = 0.0;
  double maturity_max = 1.0;
  double negative_fraction = 0.0;
  int width = 240;
  int height = 160;
  double noise_level = 0.02;
};

/// Stratified maturities over [maturity_min, maturity_max]; exactly
/// floor(count * negative_fraction) negatives; per-sample seeds derived from
/// the master seed.
std::vector<PhantomSample> generate_dataset(const PhantomDatasetSpec& spec);

/// `id age_months sex is_true x y w h`
std::string phantom_manifest_line(const std::string& id, const PhantomSample& sample);

}  // namespace boneage
