#include "boneage/segmentation.hpp"

#include <sstream>
#include <string>

#include "boneage/checkpoint.hpp"
#include "boneage/error.hpp"
#include "boneage/layers.hpp"
#include "boneage/ops.hpp"

namespace boneage {
namespace {

std::string level(const char* prefix, int l) { return prefix + std::to_string(l); }

std::size_t channels_at(const UNetConfig& c, int l) {
  return static_cast<std::size_t>(c.base_channels) << l;
}

}  // namespace

void UNetConfig::validate() const {
  if (depth < 1) throw ConfigError("U-Net depth must be >= 1");
  if (base_channels < 1) throw ConfigError("U-Net base channels must be >= 1");
  if (!(threshold > 0.0f && threshold < 1.0f)) throw ConfigError("mask threshold must be in (0,1)");
  const int divisor = 1 << depth;
  if (input_width < divisor || input_height < divisor || input_width % divisor != 0 ||
      input_height % divisor != 0) {
    std::ostringstream msg;
    msg << "U-Net input " << input_width << "x" << input_height << " is not divisible by 2^"
        << depth << " = " << divisor;
    throw ConfigError(msg.str());
  }
}

SegmentationModel::SegmentationModel(UNetConfig config, ParameterSet params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
}

SegmentationModel build_unet(const UNetConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParameterSet params;
  std::size_t in = 1;
  for (int l = 0; l < config.depth; ++l) {
    const std::size_t ch = channels_at(config, l);
    add_conv(params, level("enc", l) + ".conv1", in, ch, 3, rng);
    add_conv(params, level("enc", l) + ".conv2", ch, ch, 3, rng);
    in = ch;
  }
  const std::size_t bottom = channels_at(config, config.depth);
  add_conv(params, "bottleneck.conv1", in, bottom, 3, rng);
  add_conv(params, "bottleneck.conv2", bottom, bottom, 3, rng);
  std::size_t below = bottom;
  for (int l = config.depth - 1; l >= 0; --l) {
    const std::size_t ch = channels_at(config, l);
    add_conv(params, level("dec", l) + ".conv1", below + ch, ch, 3, rng);
    add_conv(params, level("dec", l) + ".conv2", ch, ch, 3, rng);
    below = ch;
  }
  add_conv(params, "head", below, 1, 1, rng);
  return SegmentationModel(config, std::move(params));
}

Tensor SegmentationModel::forward(Tape& tape, const Tensor& images) const {
  if (images.rank() != 4 || images.dim(1) != 1 ||
      images.dim(2) != static_cast<std::size_t>(config_.input_height) ||
      images.dim(3) != static_cast<std::size_t>(config_.input_width)) {
    throw DimensionError("U-Net expects [N,1," + std::to_string(config_.input_height) + "," +
                         std::to_string(config_.input_width) + "], got " +
                         shape_string(images.shape()));
  }
  std::vector<Tensor> skips;
  Tensor x = images;
  for (int l = 0; l < config_.depth; ++l) {
    x = conv_relu(tape, params_, level("enc", l) + ".conv1", x);
    x = conv_relu(tape, params_, level("enc", l) + ".conv2", x);
    skips.push_back(x);
    x = max_pool2d(tape, x);
  }
  x = conv_relu(tape, params_, "bottleneck.conv1", x);
  x = conv_relu(tape, params_, "bottleneck.conv2", x);
  for (int l = config_.depth - 1; l >= 0; --l) {
    x = concat_channels(tape, upsample2x(tape, x), skips[static_cast<std::size_t>(l)]);
    x = conv_relu(tape, params_, level("dec", l) + ".conv1", x);
    x = conv_relu(tape, params_, level("dec", l) + ".conv2", x);
  }
  Tensor logits = conv2d(tape, x, params_.at("head.weight"), params_.at("head.bias"));
  return sigmoid(tape, logits);
}

void SegmentationModel::save(const std::filesystem::path& path) const {
  save_checkpoint(path, params_,
                  {{"model", "unet"},
                   {"depth", std::to_string(config_.depth)},
                   {"base_channels", std::to_string(config_.base_channels)},
                   {"input_width", std::to_string(config_.input_width)},
                   {"input_height", std::to_string(config_.input_height)},
                   {"threshold", std::to_string(config_.threshold)}});
}

SegmentationModel SegmentationModel::load(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.meta("model") != "unet") {
    throw ConfigError("'" + path.string() + "' is not a U-Net checkpoint");
  }
  UNetConfig config;
  config.depth = std::stoi(ckpt.meta("depth"));
  config.base_channels = std::stoi(ckpt.meta("base_channels"));
  config.input_width = std::stoi(ckpt.meta("input_width"));
  config.input_height = std::stoi(ckpt.meta("input_height"));
  config.threshold = std::stof(ckpt.meta("threshold"));
  SegmentationModel model = build_unet(config, 0);
  assign_parameters(model.params(), ckpt.params);
  return model;
}

SegmentationResult segment(const SegmentationModel& model, const GrayImage& img) {
  const UNetConfig& c = model.config();
  const GrayImage small = resize_bilinear(img, c.input_width, c.input_height);
  Tape tape = Tape::inference();
  const Tensor probs = model.forward(tape, images_to_tensor(std::span(&small, 1)));
  SegmentationResult result;
  result.mask = tensor_to_image(probs);
  const GrayImage full_mask =
      binarize(resize_bilinear(result.mask, img.width(), img.height()), c.threshold);
  result.bone_image =
      resize_bilinear(multiply(img, full_mask), kBoneImageWidth, kBoneImageHeight);
  return result;
}

std::vector<float> train_segmentation(SegmentationModel& model,
                                      std::span<const SegmentationSample> dataset,
                                      const TrainConfig& config) {
  if (dataset.empty()) throw ContractError("segmentation dataset is empty");
  const UNetConfig& c = model.config();
  for (const SegmentationSample& s : dataset) {
    if (s.image.width() != c.input_width || s.image.height() != c.input_height ||
        s.mask.width() != c.input_width || s.mask.height() != c.input_height) {
      throw ContractError("segmentation samples must be at the model input size");
    }
    for (float m : s.mask.pixels()) {
      if (m != 0.0f && m != 1.0f) throw ContractError("segmentation masks must be binary");
    }
  }
  track_gradients(model.params());
  return run_training(model.params(), dataset.size(), config,
                      [&](Tape& tape, std::span<const std::size_t> indices) {
                        std::vector<GrayImage> images, masks;
                        for (std::size_t i : indices) {
                          images.push_back(dataset[i].image);
                          masks.push_back(dataset[i].mask);
                        }
                        const Tensor probs = model.forward(tape, images_to_tensor(images));
                        const Tensor target = images_to_tensor(masks);
                        return add(tape, loss(tape, probs, target, LossKind::kBce),
                                   loss(tape, probs, target, LossKind::kDice));
                      });
}

double dice_coefficient(const GrayImage& a, const GrayImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw ContractError("dice_coefficient: mask extents differ");
  }
  std::size_t inter = 0, total = 0;
  for (std::size_t i = 0; i < a.pixels().size(); ++i) {
    const bool pa = a.pixels()[i] >= 0.5f, pb = b.pixels()[i] >= 0.5f;
    inter += (pa && pb) ? 1 : 0;
    total += (pa ? 1 : 0) + (pb ? 1 : 0);
  }
  return total == 0 ? 1.0 : 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

}  // namespace boneage
