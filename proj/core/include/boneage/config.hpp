#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "boneage/age.hpp"
#include "boneage/augmentation.hpp"
#include "boneage/datasets.hpp"
#include "boneage/roi.hpp"
#include "boneage/segmentation.hpp"

namespace boneage {

/// Relative checkpoint and atlas paths live under out_dir; a relative
/// out_dir in a config file is taken relative to that file.
struct PathsConfig {
  std::filesystem::path out_dir = "out";
  std::filesystem::path unet_checkpoint = "unet.ckpt";
  std::filesystem::path rpn_checkpoint = "rpn.ckpt";
  std::filesystem::path age_checkpoint = "age.ckpt";
  std::filesystem::path atlas_manifest = "atlas/atlas.txt";

  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return p.is_absolute() ? p : out_dir / p;
  }
};

struct StageTraining {
  int epochs = 10;
  int batch_size = 8;
  float learning_rate = 1e-3f;
  /// Number of phantoms generated for this stage's training set.
  std::size_t samples = 200;
};

struct PhantomSettings {
  int width = 240;
  int height = 160;
  double noise_level = 0.02;
  double negative_fraction = 0.2;
  std::uint64_t atlas_seed = 2024;
};

struct PipelineConfig {
  PathsConfig paths;
  AugmentationSpec augmentation;
  UNetConfig unet;
  RpnConfig rpn;
  AgeConfig age;
  PhantomSettings phantom;
  StageTraining train_unet{8, 8, 3e-3f, 200};
  StageTraining train_rpn{20, 8, 2e-3f, 200};
  StageTraining train_age{40, 8, 1e-3f, 300};
  float low_confidence_threshold = 0.5f;
  std::uint64_t seed = 42;

  AtlasPhantomSettings atlas_settings() const;
  /// Throws ConfigError for values the stages would reject.
  void validate() const;
};

/// Parses `[section]` / `key = value` text. A relative out_dir is resolved
/// against `base_dir`. Unknown sections or keys raise ConfigError.
PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& path);

/// Sets one `section.key` to `value` with the same parsing as the file.
void apply_override(PipelineConfig& config, const std::string& dotted_key, const std::string& value);

/// Every `section.key` the parser accepts, in file order.
std::vector<std::string> config_keys();

/// The configuration in the file format, readable by parse_config.
std::string format_config(const PipelineConfig& config);

}  // namespace boneage
