#include "boneage/roi.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "boneage/checkpoint.hpp"
#include "boneage/error.hpp"
#include "boneage/layers.hpp"
#include "boneage/ops.hpp"

namespace boneage {
namespace {

std::string block(std::size_t b) { return "block" + std::to_string(b); }

std::size_t flat_features(const RpnConfig& c) {
  const std::size_t cells = (static_cast<std::size_t>(c.input_width) >> c.backbone_channels.size()) *
                            (static_cast<std::size_t>(c.input_height) >> c.backbone_channels.size());
  return cells * static_cast<std::size_t>(c.backbone_channels.back());
}

std::string join(const std::vector<int>& values) {
  std::ostringstream out;
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
  return out.str();
}

std::vector<int> split_ints(const std::string& text) {
  std::vector<int> values;
  std::istringstream in(text);
  std::string token;
  while (std::getline(in, token, ',')) values.push_back(std::stoi(token));
  return values;
}

// [cells, 2] table of normalised (x, y) cell centres, row-major over the map.
Tensor cell_centres(std::size_t width, std::size_t height) {
  Tensor grid({width * height, 2});
  auto g = grid.data();
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      g[(y * width + x) * 2] = (static_cast<float>(x) + 0.5f) / static_cast<float>(width);
      g[(y * width + x) * 2 + 1] = (static_cast<float>(y) + 0.5f) / static_cast<float>(height);
    }
  }
  return grid;
}

}  // namespace

void RpnConfig::validate() const {
  if (backbone_channels.empty()) throw ConfigError("RPN backbone needs at least one block");
  for (int c : backbone_channels) {
    if (c < 1) throw ConfigError("RPN backbone widths must be >= 1");
  }
  if (hidden < 1) throw ConfigError("RPN hidden width must be >= 1");
  if (!(box_loss_weight >= 0.0f)) throw ConfigError("RPN box loss weight must be >= 0");
  const int divisor = 1 << backbone_channels.size();
  if (input_width % divisor != 0 || input_height % divisor != 0 || input_width < divisor ||
      input_height < divisor) {
    std::ostringstream msg;
    msg << "RPN input " << input_width << "x" << input_height << " is not divisible by "
        << divisor;
    throw ConfigError(msg.str());
  }
}

RoiModel::RoiModel(RpnConfig config, ParameterSet params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
}

RoiModel build_rpn(const RpnConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParameterSet params;
  std::size_t in = 1;
  for (std::size_t b = 0; b < config.backbone_channels.size(); ++b) {
    const auto ch = static_cast<std::size_t>(config.backbone_channels[b]);
    add_conv(params, block(b) + ".conv1", in, ch, 3, rng);
    add_conv(params, block(b) + ".conv2", ch, ch, 3, rng);
    in = ch;
  }
  add_conv(params, "heat", in, 1, 1, rng);
  add_dense(params, "fc", flat_features(config), static_cast<std::size_t>(config.hidden), rng);
  add_dense(params, "head", static_cast<std::size_t>(config.hidden), kRoiHeadOutputs - 2, rng);
  return RoiModel(config, std::move(params));
}

RoiOutputs RoiModel::forward_heads(Tape& tape, const Tensor& images) const {
  if (images.rank() != 4 || images.dim(1) != 1 ||
      images.dim(2) != static_cast<std::size_t>(config_.input_height) ||
      images.dim(3) != static_cast<std::size_t>(config_.input_width)) {
    throw DimensionError("RPN expects [N,1," + std::to_string(config_.input_height) + "," +
                         std::to_string(config_.input_width) + "], got " +
                         shape_string(images.shape()));
  }
  Tensor x = images;
  for (std::size_t b = 0; b < config_.backbone_channels.size(); ++b) {
    x = conv_relu(tape, params_, block(b) + ".conv1", x);
    x = conv_relu(tape, params_, block(b) + ".conv2", x);
    x = max_pool2d(tape, x);
  }
  const std::size_t n = images.dim(0);
  const std::size_t cells = x.dim(2) * x.dim(3);

  RoiOutputs out;
  // Box centre: expected cell-centre position under a softmax over the
  // 1x1-conv heat map.
  Tensor heat = conv2d(tape, x, params_.at("heat.weight"), params_.at("heat.bias"), 1, 0);
  out.heat = softmax_rows(tape, reshape(tape, heat, {n, cells}));
  const Tensor centre = dense(tape, out.heat, cell_centres(x.dim(3), x.dim(2)), Tensor({2}));

  Tensor features = reshape(tape, x, {n, flat_features(config_)});
  features = relu(tape, apply_dense(tape, params_, "fc", features));
  const Tensor rest = apply_dense(tape, params_, "head", features);
  const Tensor joined = concat_channels(tape, reshape(tape, centre, {n, 2, 1, 1}),
                                        reshape(tape, rest, {n, kRoiHeadOutputs - 2, 1, 1}));
  out.raw = reshape(tape, joined, {n, kRoiHeadOutputs});
  return out;
}

Tensor RoiModel::forward(Tape& tape, const Tensor& images) const {
  return forward_heads(tape, images).raw;
}

std::vector<float> heat_target(float cx, float cy, std::size_t width, std::size_t height) {
  std::vector<float> target(width * height, 0.0f);
  const float gx = std::clamp(cx * static_cast<float>(width) - 0.5f, 0.0f,
                              static_cast<float>(width - 1));
  const float gy = std::clamp(cy * static_cast<float>(height) - 0.5f, 0.0f,
                              static_cast<float>(height - 1));
  const auto x0 = static_cast<std::size_t>(gx), y0 = static_cast<std::size_t>(gy);
  const std::size_t x1 = std::min(x0 + 1, width - 1), y1 = std::min(y0 + 1, height - 1);
  const float fx = gx - static_cast<float>(x0), fy = gy - static_cast<float>(y0);
  target[y0 * width + x0] += (1 - fx) * (1 - fy);
  target[y0 * width + x1] += fx * (1 - fy);
  target[y1 * width + x0] += (1 - fx) * fy;
  target[y1 * width + x1] += fx * fy;
  return target;
}

void RoiModel::save(const std::filesystem::path& path) const {
  std::ostringstream weight;
  weight << config_.box_loss_weight;
  save_checkpoint(path, params_,
                  {{"model", "rpn"},
                   {"backbone_channels", join(config_.backbone_channels)},
                   {"input_width", std::to_string(config_.input_width)},
                   {"input_height", std::to_string(config_.input_height)},
                   {"hidden", std::to_string(config_.hidden)},
                   {"box_loss_weight", weight.str()}});
}

RoiModel RoiModel::load(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.meta("model") != "rpn") {
    throw ConfigError("'" + path.string() + "' is not an RPN checkpoint");
  }
  RpnConfig config;
  config.backbone_channels = split_ints(ckpt.meta("backbone_channels"));
  config.input_width = std::stoi(ckpt.meta("input_width"));
  config.input_height = std::stoi(ckpt.meta("input_height"));
  config.hidden = std::stoi(ckpt.meta("hidden"));
  config.box_loss_weight = std::stof(ckpt.meta("box_loss_weight"));
  RoiModel model = build_rpn(config, 0);
  assign_parameters(model.params(), ckpt.params);
  return model;
}

GrayImage prepare_roi_input(const GrayImage& bone_image) {
  if (bone_image.width() != 720 || bone_image.height() != 480) {
    std::ostringstream msg;
    msg << "ROI input must be 720x480, got " << bone_image.width() << "x" << bone_image.height();
    throw ContractError(msg.str());
  }
  return resize_bilinear(rotate(bone_image, 90.0), kRoiInputWidth, kRoiInputHeight);
}

std::array<float, 4> encode_box(const RoiBox& box, int width, int height) {
  const double w = width, h = height;
  return {static_cast<float>((box.x + box.w / 2.0) / w),
          static_cast<float>((box.y + box.h / 2.0) / h),
          static_cast<float>(std::log(box.w / w)), static_cast<float>(std::log(box.h / h))};
}

RoiBox decode_box(std::span<const float> raw, int width, int height) {
  if (raw.size() < 4) throw DimensionError("decode_box needs 4 values");
  auto finite_or = [](float v, float fallback) { return std::isfinite(v) ? v : fallback; };
  const double cx = std::clamp<double>(finite_or(raw[0], 0.5f), -1.0, 2.0) * width;
  const double cy = std::clamp<double>(finite_or(raw[1], 0.5f), -1.0, 2.0) * height;
  const double bw = std::exp(std::clamp<double>(finite_or(raw[2], 0.0f), -12.0, 1.0)) * width;
  const double bh = std::exp(std::clamp<double>(finite_or(raw[3], 0.0f), -12.0, 1.0)) * height;
  const int x0 = std::clamp(static_cast<int>(std::lround(cx - bw / 2.0)), 0, width - 1);
  const int y0 = std::clamp(static_cast<int>(std::lround(cy - bh / 2.0)), 0, height - 1);
  const int x1 = std::clamp(static_cast<int>(std::lround(cx + bw / 2.0)), x0 + 1, width);
  const int y1 = std::clamp(static_cast<int>(std::lround(cy + bh / 2.0)), y0 + 1, height);
  return {x0, y0, x1 - x0, y1 - y0};
}

RoiPrediction predict_roi(const RoiModel& model, const GrayImage& img) {
  const RpnConfig& c = model.config();
  const GrayImage small = resize_bilinear(img, c.input_width, c.input_height);
  Tape tape = Tape::inference();
  const Tensor raw = model.forward(tape, images_to_tensor(std::span(&small, 1)));
  const Tensor conf = sigmoid(tape, slice_cols(tape, raw, 4, 5));
  return {decode_box(raw.data().subspan(0, 4), img.width(), img.height()), conf.item()};
}

std::vector<float> train_roi(RoiModel& model, std::span<const RoiSample> dataset,
                             const TrainConfig& config) {
  if (dataset.empty()) throw ContractError("ROI dataset is empty");
  const RpnConfig& c = model.config();
  std::vector<GrayImage> inputs;
  std::vector<std::array<float, 4>> targets;
  inputs.reserve(dataset.size());
  for (const RoiSample& s : dataset) {
    if (s.is_true && !s.box.valid_for(s.image.width(), s.image.height())) {
      throw ContractError("ROI training box " + to_string(s.box) + " lies outside its image");
    }
    inputs.push_back(resize_bilinear(s.image, c.input_width, c.input_height));
    targets.push_back(s.is_true ? encode_box(s.box, s.image.width(), s.image.height())
                                : std::array<float, 4>{});
  }

  const std::size_t heat_w = static_cast<std::size_t>(c.input_width) >> c.backbone_channels.size();
  const std::size_t heat_h = static_cast<std::size_t>(c.input_height) >> c.backbone_channels.size();
  track_gradients(model.params());
  return run_training(
      model.params(), dataset.size(), config,
      [&](Tape& tape, std::span<const std::size_t> indices) {
        const std::size_t n = indices.size();
        std::vector<GrayImage> batch;
        Tensor box_target({n, 4}), box_mask({n, 4}), label({n, 1});
        for (std::size_t r = 0; r < n; ++r) {
          const std::size_t i = indices[r];
          batch.push_back(inputs[i]);
          const float positive = dataset[i].is_true ? 1.0f : 0.0f;
          label.data()[r] = positive;
          for (std::size_t k = 0; k < 4; ++k) {
            box_target.data()[r * 4 + k] = targets[i][k];
            box_mask.data()[r * 4 + k] = positive;
          }
        }
        Tensor heat_goal({n, heat_w * heat_h});
        for (std::size_t r = 0; r < n; ++r) {
          const std::size_t i = indices[r];
          if (!dataset[i].is_true) continue;
          const auto t = heat_target(targets[i][0], targets[i][1], heat_w, heat_h);
          std::copy(t.begin(), t.end(), heat_goal.data().begin() + r * t.size());
        }
        const RoiOutputs out = model.forward_heads(tape, images_to_tensor(batch));
        const Tensor box = mul(tape, slice_cols(tape, out.raw, 0, 4), box_mask);
        const Tensor conf = sigmoid(tape, slice_cols(tape, out.raw, 4, 5));
        const Tensor box_loss = loss(tape, box, box_target, LossKind::kSmoothL1);
        const Tensor heat_loss = loss(tape, out.heat, heat_goal, LossKind::kCrossEntropy);
        const Tensor conf_loss = loss(tape, conf, label, LossKind::kBce);
        return add(tape, add(tape, scale(tape, box_loss, c.box_loss_weight), heat_loss), conf_loss);
      });
}

GrayImage crop_roi(const GrayImage& img, const RoiBox& box, int out_width, int out_height) {
  if (!box.valid_for(img.width(), img.height())) {
    std::ostringstream msg;
    msg << "ROI box " << to_string(box) << " is not inside a " << img.width() << "x"
        << img.height() << " image";
    throw ContractError(msg.str());
  }
  GrayImage patch(box.w, box.h);
  for (int y = 0; y < box.h; ++y)
    for (int x = 0; x < box.w; ++x) patch.at(x, y) = img.at(box.x + x, box.y + y);
  return resize_bilinear(patch, out_width, out_height);
}

}  // namespace boneage
