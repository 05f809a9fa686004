#include "boneage/age.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include "boneage/checkpoint.hpp"
#include "boneage/error.hpp"
#include "boneage/layers.hpp"
#include "boneage/ops.hpp"

namespace boneage {
namespace {

std::string block(std::size_t b) { return "block" + std::to_string(b); }

std::size_t flat_features(const AgeConfig& c) {
  const std::size_t side = static_cast<std::size_t>(c.input_size) >> c.channels.size();
  return side * side * static_cast<std::size_t>(c.channels.back());
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

GrayImage fit_crop(const GrayImage& crop, int size) {
  if (crop.width() == size && crop.height() == size) return crop;
  return resize_bilinear(crop, size, size);
}

}  // namespace

std::vector<double> default_atlas_ages() {
  std::vector<double> ages;
  for (std::size_t i = 0; i < kAtlasAgesPerSex; ++i) ages.push_back(120.0 + kAtlasStepMonths * i);
  return ages;
}

void ReferenceAtlas::validate() const {
  if (entries.size() != kAtlasClasses) {
    throw ContractError("reference atlas needs 12 entries, has " + std::to_string(entries.size()));
  }
  std::set<int> ids;
  std::set<std::pair<Sex, double>> pairs;
  for (const AtlasEntry& e : entries) {
    if (e.class_id < 0 || e.class_id >= static_cast<int>(kAtlasClasses)) {
      throw ContractError("atlas class id out of range: " + std::to_string(e.class_id));
    }
    if (!(e.age_months > 0.0)) throw ContractError("atlas ages must be positive");
    ids.insert(e.class_id);
    pairs.insert({e.sex, e.age_months});
  }
  if (ids.size() != kAtlasClasses) throw ContractError("atlas class ids must be unique");
  if (pairs.size() != kAtlasClasses) throw ContractError("atlas (sex, age) pairs must be unique");
  for (Sex sex : {Sex::kMale, Sex::kFemale}) {
    std::vector<double> ages;
    for (const AtlasEntry& e : entries) {
      if (e.sex == sex) ages.push_back(e.age_months);
    }
    if (ages.size() != kAtlasAgesPerSex) {
      throw ContractError("atlas needs 6 ages for sex " + to_string(sex));
    }
    std::sort(ages.begin(), ages.end());
    for (std::size_t i = 1; i < ages.size(); ++i) {
      if (std::fabs(ages[i] - ages[i - 1] - kAtlasStepMonths) > 1e-9) {
        throw ContractError("atlas ages for sex " + to_string(sex) + " are not 12 months apart");
      }
    }
  }
}

const AtlasEntry& ReferenceAtlas::entry(int class_id) const {
  for (const AtlasEntry& e : entries) {
    if (e.class_id == class_id) return e;
  }
  throw ContractError("atlas has no class " + std::to_string(class_id));
}

int ReferenceAtlas::nearest_class(Sex sex, double age_months) const {
  int best = -1;
  double best_gap = 0.0;
  for (const AtlasEntry& e : entries) {
    if (e.sex != sex) continue;
    const double gap = std::fabs(e.age_months - age_months);
    if (best < 0 || gap < best_gap) {
      best = e.class_id;
      best_gap = gap;
    }
  }
  if (best < 0) throw ContractError("atlas has no entries for sex " + to_string(sex));
  return best;
}

double ReferenceAtlas::min_age() const {
  if (entries.empty()) throw ContractError("atlas is empty");
  return std::min_element(entries.begin(), entries.end(),
                          [](const auto& a, const auto& b) { return a.age_months < b.age_months; })
      ->age_months;
}

double ReferenceAtlas::max_age() const {
  if (entries.empty()) throw ContractError("atlas is empty");
  return std::max_element(entries.begin(), entries.end(),
                          [](const auto& a, const auto& b) { return a.age_months < b.age_months; })
      ->age_months;
}

ReferenceAtlas ReferenceAtlas::load(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open atlas manifest '" + manifest.string() + "'");
  ReferenceAtlas atlas;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    AtlasEntry e;
    std::string sex, image_path;
    if (!(fields >> e.class_id >> sex >> e.age_months >> image_path)) {
      throw IoError("malformed atlas line '" + line + "' in '" + manifest.string() + "'");
    }
    e.sex = parse_sex(sex);
    std::filesystem::path p(image_path);
    if (p.is_relative()) p = manifest.parent_path() / p;
    e.image = load_image(p);
    atlas.entries.push_back(std::move(e));
  }
  atlas.validate();
  return atlas;
}

void ReferenceAtlas::save(const std::filesystem::path& manifest) const {
  validate();
  if (manifest.has_parent_path()) std::filesystem::create_directories(manifest.parent_path());
  std::ofstream out(manifest);
  if (!out) throw IoError("cannot write atlas manifest '" + manifest.string() + "'");
  for (const AtlasEntry& e : entries) {
    const std::string name = "class_" + std::to_string(e.class_id) + ".pgm";
    save_image(e.image, manifest.parent_path() / name);
    out << e.class_id << ' ' << to_string(e.sex) << ' ' << e.age_months << ' ' << name << '\n';
  }
}

void AgeConfig::validate() const {
  if (channels.empty()) throw ConfigError("age model needs at least one conv block");
  for (int c : channels) {
    if (c < 1) throw ConfigError("age model channel widths must be >= 1");
  }
  const int divisor = 1 << channels.size();
  if (input_size < divisor || input_size % divisor != 0) {
    throw ConfigError("age model input size must be divisible by " + std::to_string(divisor));
  }
  if (hidden < 1) throw ConfigError("age model hidden width must be >= 1");
  if (!(age_scale > 0.0f)) throw ConfigError("age scale must be positive");
  if (!(regression_weight >= 0.0f)) throw ConfigError("regression weight must be >= 0");
}

AgeModel::AgeModel(AgeConfig config, ParameterSet params)
    : config_(std::move(config)), params_(std::move(params)) {
  config_.validate();
}

AgeModel build_age_model(const AgeConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  ParameterSet params;
  std::size_t in = 1;
  for (std::size_t b = 0; b < config.channels.size(); ++b) {
    const auto ch = static_cast<std::size_t>(config.channels[b]);
    add_conv(params, block(b) + ".conv1", in, ch, 3, rng);
    add_conv(params, block(b) + ".conv2", ch, ch, 3, rng);
    in = ch;
  }
  const auto hidden = static_cast<std::size_t>(config.hidden);
  add_dense(params, "fc", flat_features(config), hidden, rng);
  add_dense(params, "cls", hidden, kAtlasClasses, rng);
  add_dense(params, "reg", hidden, 1, rng);
  return AgeModel(config, std::move(params));
}

AgeOutputs AgeModel::forward(Tape& tape, const Tensor& crops) const {
  const auto side = static_cast<std::size_t>(config_.input_size);
  if (crops.rank() != 4 || crops.dim(1) != 1 || crops.dim(2) != side || crops.dim(3) != side) {
    throw DimensionError("age model expects [N,1," + std::to_string(side) + "," +
                         std::to_string(side) + "], got " + shape_string(crops.shape()));
  }
  Tensor x = crops;
  for (std::size_t b = 0; b < config_.channels.size(); ++b) {
    x = conv_relu(tape, params_, block(b) + ".conv1", x);
    x = conv_relu(tape, params_, block(b) + ".conv2", x);
    x = max_pool2d(tape, x);
  }
  x = reshape(tape, x, {crops.dim(0), flat_features(config_)});
  const Tensor features = relu(tape, apply_dense(tape, params_, "fc", x));
  return {softmax_rows(tape, apply_dense(tape, params_, "cls", features)),
          apply_dense(tape, params_, "reg", features)};
}

void AgeModel::save(const std::filesystem::path& path) const {
  std::ostringstream weight, scale, offset;
  weight << config_.regression_weight;
  scale << config_.age_scale;
  offset << config_.age_offset;
  save_checkpoint(path, params_,
                  {{"model", "age"},
                   {"input_size", std::to_string(config_.input_size)},
                   {"channels", join(config_.channels)},
                   {"hidden", std::to_string(config_.hidden)},
                   {"regression_weight", weight.str()},
                   {"age_offset", offset.str()},
                   {"age_scale", scale.str()}});
}

AgeModel AgeModel::load(const std::filesystem::path& path) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.meta("model") != "age") {
    throw ConfigError("'" + path.string() + "' is not an age-model checkpoint");
  }
  AgeConfig config;
  config.input_size = std::stoi(ckpt.meta("input_size"));
  config.channels = split_ints(ckpt.meta("channels"));
  config.hidden = std::stoi(ckpt.meta("hidden"));
  config.regression_weight = std::stof(ckpt.meta("regression_weight"));
  config.age_offset = std::stof(ckpt.meta("age_offset"));
  config.age_scale = std::stof(ckpt.meta("age_scale"));
  AgeModel model = build_age_model(config, 0);
  assign_parameters(model.params(), ckpt.params);
  return model;
}

std::vector<float> classify_similarity(const AgeModel& model, const GrayImage& crop) {
  const GrayImage input = fit_crop(crop, model.config().input_size);
  Tape tape = Tape::inference();
  const AgeOutputs out = model.forward(tape, images_to_tensor(std::span(&input, 1)));
  const auto scores = out.class_scores.data();
  return {scores.begin(), scores.end()};
}

double clamp_to_atlas(double age_months, const ReferenceAtlas& atlas) {
  return std::clamp(age_months, atlas.min_age() - kAtlasStepMonths,
                    atlas.max_age() + kAtlasStepMonths);
}

AgeEstimate estimate_age(const AgeModel& model, const GrayImage& crop,
                         const ReferenceAtlas& atlas) {
  atlas.validate();
  const GrayImage input = fit_crop(crop, model.config().input_size);
  Tape tape = Tape::inference();
  const AgeOutputs out = model.forward(tape, images_to_tensor(std::span(&input, 1)));
  AgeEstimate estimate;
  const auto scores = out.class_scores.data();
  estimate.class_scores.assign(scores.begin(), scores.end());
  estimate.nearest_class = static_cast<int>(
      std::max_element(scores.begin(), scores.end()) - scores.begin());
  estimate.age_months =
      clamp_to_atlas(static_cast<double>(out.regression.item()) * model.config().age_scale +
                         model.config().age_offset, atlas);
  return estimate;
}

std::vector<float> train_age(AgeModel& model, std::span<const AgeSample> dataset,
                             const TrainConfig& config) {
  if (dataset.empty()) throw ContractError("age dataset is empty");
  const AgeConfig& c = model.config();
  std::vector<GrayImage> inputs;
  for (const AgeSample& s : dataset) {
    if (s.class_index < 0 || s.class_index >= static_cast<int>(kAtlasClasses)) {
      throw ContractError("age sample class index out of range");
    }
    if (!(s.age_months > 0.0)) throw ContractError("age sample ages must be positive");
    inputs.push_back(fit_crop(s.crop, c.input_size));
  }
  track_gradients(model.params());
  return run_training(model.params(), dataset.size(), config,
                      [&](Tape& tape, std::span<const std::size_t> indices) {
                        const std::size_t n = indices.size();
                        std::vector<GrayImage> batch;
                        Tensor onehot({n, kAtlasClasses}), age({n, 1});
                        for (std::size_t r = 0; r < n; ++r) {
                          const AgeSample& s = dataset[indices[r]];
                          batch.push_back(inputs[indices[r]]);
                          onehot.data()[r * kAtlasClasses +
                                        static_cast<std::size_t>(s.class_index)] = 1.0f;
                          age.data()[r] = static_cast<float>((s.age_months - c.age_offset) / c.age_scale);
                        }
                        const AgeOutputs out = model.forward(tape, images_to_tensor(batch));
                        const Tensor ce =
                            loss(tape, out.class_scores, onehot, LossKind::kCrossEntropy);
                        const Tensor mse = loss(tape, out.regression, age, LossKind::kMse);
                        return add(tape, ce, scale(tape, mse, c.regression_weight));
                      });
}

}  // namespace boneage
