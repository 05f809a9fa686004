#include "boneage/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "boneage/error.hpp"

namespace boneage {
namespace {

namespace fs = std::filesystem;

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* first = text.data();
  const char* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    std::ostringstream msg;
    msg << "config key '" << key << "': cannot parse '" << text << "' as a number";
    throw ConfigError(msg.str());
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
  if (text == "0" || text == "false" || text == "no" || text == "off") return false;
  throw ConfigError("config key '" + key + "': expected a boolean, got '" + text + "'");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> items;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = item.find_last_not_of(" \t");
    items.push_back(item.substr(first, last - first + 1));
  }
  return items;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::ostringstream out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out << ',';
    if constexpr (std::is_same_v<T, bool>) {
      out << (values[i] ? "true" : "false");
    } else {
      out << values[i];
    }
  }
  return out.str();
}

template <typename T>
std::string show(const T& value) {
  std::ostringstream out;
  out << value;
  return out.str();
}

struct Key {
  std::string name;
  std::function<void(PipelineConfig&, const std::string&, const fs::path&)> set;
  std::function<std::string(const PipelineConfig&)> get;
};

fs::path resolve(const fs::path& base, const std::string& text) {
  fs::path p(text);
  if (p.is_relative() && !base.empty()) p = base / p;
  return p.lexically_normal();
}

Key path_key(std::string name, fs::path PathsConfig::*member) {
  const bool is_root = member == &PathsConfig::out_dir;
  return {std::move(name),
          [member, is_root](PipelineConfig& c, const std::string& v, const fs::path& base) {
            c.paths.*member = is_root ? resolve(base, v) : fs::path(v).lexically_normal();
          },
          [member](const PipelineConfig& c) { return (c.paths.*member).string(); }};
}

template <typename T, typename Field>
Key number_key(std::string name, Field field) {
  return {name,
          [name, field](PipelineConfig& c, const std::string& v, const fs::path&) {
            field(c) = parse_number<T>(name, v);
          },
          [field](const PipelineConfig& c) { return show(field(const_cast<PipelineConfig&>(c))); }};
}

template <typename Field>
Key int_list_key(std::string name, Field field) {
  return {name,
          [name, field](PipelineConfig& c, const std::string& v, const fs::path&) {
            std::vector<int> values;
            for (const auto& item : split_list(v)) values.push_back(parse_number<int>(name, item));
            field(c) = values;
          },
          [field](const PipelineConfig& c) { return join(field(const_cast<PipelineConfig&>(c))); }};
}

void add_training_keys(std::vector<Key>& keys, const std::string& section,
                       StageTraining PipelineConfig::*member) {
  keys.push_back(number_key<int>(section + ".epochs",
                                 [member](PipelineConfig& c) -> int& { return (c.*member).epochs; }));
  keys.push_back(number_key<int>(
      section + ".batch_size", [member](PipelineConfig& c) -> int& { return (c.*member).batch_size; }));
  keys.push_back(number_key<float>(section + ".learning_rate", [member](PipelineConfig& c) -> float& {
    return (c.*member).learning_rate;
  }));
  keys.push_back(number_key<std::size_t>(
      section + ".samples", [member](PipelineConfig& c) -> std::size_t& { return (c.*member).samples; }));
}

const std::vector<Key>& key_table() {
  static const std::vector<Key> table = [] {
    std::vector<Key> k;
    k.push_back(path_key("paths.out_dir", &PathsConfig::out_dir));
    k.push_back(path_key("paths.unet_checkpoint", &PathsConfig::unet_checkpoint));
    k.push_back(path_key("paths.rpn_checkpoint", &PathsConfig::rpn_checkpoint));
    k.push_back(path_key("paths.age_checkpoint", &PathsConfig::age_checkpoint));
    k.push_back(path_key("paths.atlas_manifest", &PathsConfig::atlas_manifest));

    k.push_back(number_key<int>("augmentation.shift_stride", [](PipelineConfig& c) -> int& {
      return c.augmentation.shift_stride;
    }));
    k.push_back(number_key<int>("augmentation.shift_counts_x", [](PipelineConfig& c) -> int& {
      return c.augmentation.shift_counts_x;
    }));
    k.push_back(number_key<int>("augmentation.shift_counts_y", [](PipelineConfig& c) -> int& {
      return c.augmentation.shift_counts_y;
    }));
    k.push_back({"augmentation.rotations",
                 [](PipelineConfig& c, const std::string& v, const fs::path&) {
                   c.augmentation.rotations.clear();
                   for (const auto& item : split_list(v)) {
                     c.augmentation.rotations.push_back(
                         parse_number<double>("augmentation.rotations", item));
                   }
                 },
                 [](const PipelineConfig& c) { return join(c.augmentation.rotations); }});
    k.push_back({"augmentation.flips",
                 [](PipelineConfig& c, const std::string& v, const fs::path&) {
                   c.augmentation.flips.clear();
                   for (const auto& item : split_list(v)) {
                     c.augmentation.flips.push_back(parse_bool("augmentation.flips", item));
                   }
                 },
                 [](const PipelineConfig& c) { return join(c.augmentation.flips); }});

    k.push_back(number_key<int>("unet.depth", [](PipelineConfig& c) -> int& { return c.unet.depth; }));
    k.push_back(number_key<int>("unet.base_channels",
                                [](PipelineConfig& c) -> int& { return c.unet.base_channels; }));
    k.push_back(number_key<int>("unet.input_width",
                                [](PipelineConfig& c) -> int& { return c.unet.input_width; }));
    k.push_back(number_key<int>("unet.input_height",
                                [](PipelineConfig& c) -> int& { return c.unet.input_height; }));
    k.push_back(number_key<float>("unet.threshold",
                                  [](PipelineConfig& c) -> float& { return c.unet.threshold; }));

    k.push_back(int_list_key("rpn.backbone_channels", [](PipelineConfig& c) -> std::vector<int>& {
      return c.rpn.backbone_channels;
    }));
    k.push_back(number_key<int>("rpn.input_width",
                                [](PipelineConfig& c) -> int& { return c.rpn.input_width; }));
    k.push_back(number_key<int>("rpn.input_height",
                                [](PipelineConfig& c) -> int& { return c.rpn.input_height; }));
    k.push_back(number_key<int>("rpn.hidden", [](PipelineConfig& c) -> int& { return c.rpn.hidden; }));
    k.push_back(number_key<float>("rpn.box_loss_weight",
                                  [](PipelineConfig& c) -> float& { return c.rpn.box_loss_weight; }));

    k.push_back(number_key<int>("age.input_size",
                                [](PipelineConfig& c) -> int& { return c.age.input_size; }));
    k.push_back(int_list_key("age.channels",
                             [](PipelineConfig& c) -> std::vector<int>& { return c.age.channels; }));
    k.push_back(number_key<int>("age.hidden", [](PipelineConfig& c) -> int& { return c.age.hidden; }));
    k.push_back(number_key<float>("age.regression_weight",
                                  [](PipelineConfig& c) -> float& { return c.age.regression_weight; }));
    k.push_back(number_key<float>("age.age_offset",
                                  [](PipelineConfig& c) -> float& { return c.age.age_offset; }));
    k.push_back(number_key<float>("age.age_scale",
                                  [](PipelineConfig& c) -> float& { return c.age.age_scale; }));

    k.push_back(number_key<int>("phantom.width",
                                [](PipelineConfig& c) -> int& { return c.phantom.width; }));
    k.push_back(number_key<int>("phantom.height",
                                [](PipelineConfig& c) -> int& { return c.phantom.height; }));
    k.push_back(number_key<double>("phantom.noise_level",
                                   [](PipelineConfig& c) -> double& { return c.phantom.noise_level; }));
    k.push_back(number_key<double>("phantom.negative_fraction", [](PipelineConfig& c) -> double& {
      return c.phantom.negative_fraction;
    }));
    k.push_back(number_key<std::uint64_t>(
        "phantom.atlas_seed", [](PipelineConfig& c) -> std::uint64_t& { return c.phantom.atlas_seed; }));

    add_training_keys(k, "train_unet", &PipelineConfig::train_unet);
    add_training_keys(k, "train_rpn", &PipelineConfig::train_rpn);
    add_training_keys(k, "train_age", &PipelineConfig::train_age);

    k.push_back(number_key<float>("pipeline.low_confidence_threshold", [](PipelineConfig& c) -> float& {
      return c.low_confidence_threshold;
    }));
    k.push_back(number_key<std::uint64_t>("pipeline.seed",
                                          [](PipelineConfig& c) -> std::uint64_t& { return c.seed; }));
    return k;
  }();
  return table;
}

const Key& find_key(const std::string& name) {
  for (const Key& key : key_table()) {
    if (key.name == name) return key;
  }
  throw ConfigError("unknown config key '" + name + "'");
}

}  // namespace

AtlasPhantomSettings PipelineConfig::atlas_settings() const {
  AtlasPhantomSettings settings;
  settings.seed = phantom.atlas_seed;
  settings.width = phantom.width;
  settings.height = phantom.height;
  settings.noise_level = phantom.noise_level;
  settings.crop_size = age.input_size;
  return settings;
}

void PipelineConfig::validate() const {
  try {
    augmentation.validate();
    unet.validate();
    rpn.validate();
    age.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (!(low_confidence_threshold >= 0.0f && low_confidence_threshold <= 1.0f)) {
    std::ostringstream msg;
    msg << "pipeline.low_confidence_threshold must lie in [0,1], got " << low_confidence_threshold;
    throw ConfigError(msg.str());
  }
  if (phantom.width < 16 || phantom.height < 16) {
    throw ConfigError("phantom extents must be at least 16x16");
  }
  if (!(phantom.negative_fraction >= 0.0 && phantom.negative_fraction < 1.0)) {
    throw ConfigError("phantom.negative_fraction must lie in [0,1)");
  }
  for (const StageTraining* t : {&train_unet, &train_rpn, &train_age}) {
    if (t->epochs < 0 || t->batch_size < 1 || !(t->learning_rate > 0.0f)) {
      std::ostringstream msg;
      msg << "training settings need epochs >= 0, batch_size >= 1 and learning_rate > 0 (got "
          << t->epochs << ", " << t->batch_size << ", " << t->learning_rate << ")";
      throw ConfigError(msg.str());
    }
  }
}

PipelineConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    std::ostringstream msg;
    msg << "config line " << e.line() << ": " << e.message();
    throw ConfigError(msg.str());
  }
  PipelineConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw ConfigError("config key '" + section + "' appears outside any section");
    }
    for (const auto& [key, value] : body) {
      const std::string name = section + "." + key;
      find_key(name).set(config, value.get_value<std::string>(), base_dir);
    }
  }
  config.validate();
  return config;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

void apply_override(PipelineConfig& config, const std::string& dotted_key, const std::string& value) {
  find_key(dotted_key).set(config, value, {});
  config.validate();
}

std::vector<std::string> config_keys() {
  std::vector<std::string> names;
  for (const Key& key : key_table()) names.push_back(key.name);
  return names;
}

std::string format_config(const PipelineConfig& config) {
  std::ostringstream out;
  std::string current;
  for (const Key& key : key_table()) {
    const auto dot = key.name.find('.');
    const std::string section = key.name.substr(0, dot);
    if (section != current) {
      if (!current.empty()) out << '\n';
      out << '[' << section << "]\n";
      current = section;
    }
    out << key.name.substr(dot + 1) << " = " << key.get(config) << '\n';
  }
  return out.str();
}

}  // namespace boneage
