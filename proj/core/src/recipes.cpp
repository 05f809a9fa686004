#include "boneage/recipes.hpp"

#include "boneage/datasets.hpp"
#include "boneage/error.hpp"

namespace boneage {
namespace {

TrainConfig train_config(const StageTraining& stage, std::uint64_t seed,
                         std::function<void(int, float)> on_epoch) {
  TrainConfig tc;
  tc.epochs = stage.epochs;
  tc.batch_size = stage.batch_size;
  tc.optimizer.learning_rate = stage.learning_rate;
  tc.seed = seed;
  tc.on_epoch = std::move(on_epoch);
  return tc;
}

void keep(StageResult* result, std::vector<float> losses) {
  if (result) result->losses = std::move(losses);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : purpose) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  std::uint64_t z = seed ^ h;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::vector<PhantomSample> stage_phantoms(const PipelineConfig& config, std::string_view stage) {
  const StageTraining* training = nullptr;
  if (stage == "unet") training = &config.train_unet;
  if (stage == "rpn") training = &config.train_rpn;
  if (stage == "age") training = &config.train_age;
  if (!training) throw ContractError("unknown training stage '" + std::string(stage) + "'");

  PhantomDatasetSpec spec;
  spec.count = training->samples;
  spec.seed = derive_seed(config.seed, std::string(stage) + ".data");
  spec.negative_fraction = stage == "rpn" ? config.phantom.negative_fraction : 0.0;
  spec.width = config.phantom.width;
  spec.height = config.phantom.height;
  spec.noise_level = config.phantom.noise_level;
  return generate_dataset(spec);
}

SegmentationModel train_unet_stage(const PipelineConfig& config, StageResult* result,
                                   std::function<void(int, float)> on_epoch) {
  std::vector<SegmentationSample> samples;
  for (const PhantomSample& p : stage_phantoms(config, "unet")) {
    samples.push_back(make_segmentation_sample(p, config.unet));
  }
  SegmentationModel model = build_unet(config.unet, derive_seed(config.seed, "unet.init"));
  keep(result, train_segmentation(model, samples,
                                  train_config(config.train_unet,
                                               derive_seed(config.seed, "unet.shuffle"),
                                               std::move(on_epoch))));
  return model;
}

RoiModel train_rpn_stage(const PipelineConfig& config, StageResult* result,
                         std::function<void(int, float)> on_epoch) {
  std::vector<RoiSample> samples;
  for (const PhantomSample& p : stage_phantoms(config, "rpn")) {
    samples.push_back(make_roi_sample(p, config.rpn.input_width, config.rpn.input_height));
  }
  RoiModel model = build_rpn(config.rpn, derive_seed(config.seed, "rpn.init"));
  keep(result, train_roi(model, samples,
                         train_config(config.train_rpn, derive_seed(config.seed, "rpn.shuffle"),
                                      std::move(on_epoch))));
  return model;
}

AgeModel train_age_stage(const PipelineConfig& config, const ReferenceAtlas& atlas,
                         StageResult* result, std::function<void(int, float)> on_epoch) {
  std::vector<AgeSample> samples;
  for (const PhantomSample& p : stage_phantoms(config, "age")) {
    samples.push_back(make_age_sample(p, atlas, config.age.input_size));
  }
  AgeModel model = build_age_model(config.age, derive_seed(config.seed, "age.init"));
  keep(result, train_age(model, samples,
                         train_config(config.train_age, derive_seed(config.seed, "age.shuffle"),
                                      std::move(on_epoch))));
  return model;
}

}  // namespace boneage
