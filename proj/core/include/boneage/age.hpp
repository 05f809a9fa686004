#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "boneage/image.hpp"
#include "boneage/sex.hpp"
#include "boneage/tensor.hpp"
#include "boneage/training.hpp"

namespace boneage {

inline constexpr std::size_t kAtlasClasses = 12;
inline constexpr std::size_t kAtlasAgesPerSex = 6;
inline constexpr double kAtlasStepMonths = 12.0;

/// Default representative ages per sex: 120, 132, ..., 180 months.
std::vector<double> default_atlas_ages();

struct AtlasEntry {
  int class_id = 0;
  Sex sex = Sex::kMale;
  double age_months = 0.0;
  GrayImage image;
};

/// The representative-age classes: 2 sexes x 6 ages, one ROI crop each.
struct ReferenceAtlas {
  std::vector<AtlasEntry> entries;

  /// Throws ContractError unless there are 12 entries with class ids 0..11,
  /// unique (sex, age) pairs and six 12-month-spaced ages per sex.
  void validate() const;

  const AtlasEntry& entry(int class_id) const;
  /// Class of the same-sex entry whose age is closest to `age_months`.
  int nearest_class(Sex sex, double age_months) const;
  double min_age() const;
  double max_age() const;

  /// Manifest lines `class_id sex age_months image_path`; relative image
  /// paths resolve against the manifest's directory.
  static ReferenceAtlas load(const std::filesystem::path& manifest);
  /// Writes class_<id>.pgm images next to the manifest.
  void save(const std::filesystem::path& manifest) const;
};

struct AgeConfig {
  int input_size = 64;
  std::vector<int> channels{8, 16, 32};
  int hidden = 64;
  /// Weight of the regression term relative to the class cross-entropy.
  float regression_weight = 1.0f;
  /// Regression targets are (age_months - age_offset) / age_scale.
  float age_offset = 150.0f;
  float age_scale = 30.0f;

  void validate() const;
};

struct AgeOutputs {
  Tensor class_scores;  ///< [N,12] softmax
  Tensor regression;    ///< [N,1] (age - age_offset) / age_scale
};

/// Shared conv trunk ("block<B>.conv{1,2}", "fc") feeding a 12-way class head
/// ("cls") and a scalar regression head ("reg").
class AgeModel {
 public:
  AgeModel(AgeConfig config, ParameterSet params);

  const AgeConfig& config() const noexcept { return config_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }

  AgeOutputs forward(Tape& tape, const Tensor& crops) const;

  void save(const std::filesystem::path& path) const;
  static AgeModel load(const std::filesystem::path& path);

 private:
  AgeConfig config_;
  ParameterSet params_;
};

AgeModel build_age_model(const AgeConfig& config, std::uint64_t seed);

/// Softmax similarity of the crop to each atlas class. Crops of another size
/// are resized to the model input first.
std::vector<float> classify_similarity(const AgeModel& model, const GrayImage& crop);

struct AgeEstimate {
  double age_months = 0.0;
  std::vector<float> class_scores;
  int nearest_class = 0;
};

/// Regression-head age clamped to [min atlas age - 12, max atlas age + 12].
AgeEstimate estimate_age(const AgeModel& model, const GrayImage& crop,
                         const ReferenceAtlas& atlas);

/// Clamp applied by estimate_age to a raw age in months.
double clamp_to_atlas(double age_months, const ReferenceAtlas& atlas);

struct AgeSample {
  GrayImage crop;
  double age_months = 0.0;
  int class_index = 0;
};

/// Loss = cross_entropy(class head) + regression_weight * mse(reg, standardised age).
std::vector<float> train_age(AgeModel& model, std::span<const AgeSample> dataset,
                             const TrainConfig& config);

}  // namespace boneage
