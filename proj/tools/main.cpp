#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "boneage/augmentation.hpp"
#include "boneage/checkpoint.hpp"
#include "boneage/config.hpp"
#include "boneage/datasets.hpp"
#include "boneage/error.hpp"
#include "boneage/metrics.hpp"
#include "boneage/phantom.hpp"
#include "boneage/pipeline.hpp"
#include "boneage/recipes.hpp"

namespace fs = std::filesystem;
using namespace boneage;

namespace {

struct CommonOptions {
  std::string config_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out_dir;
  bool verbose = false;
  std::vector<std::string> overrides;
};

PipelineConfig resolve_config(const CommonOptions& opts) {
  PipelineConfig config = opts.config_path.empty() ? PipelineConfig{} : load_config(opts.config_path);
  for (const std::string& item : opts.overrides) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects section.key=value, got '" + item + "'");
    apply_override(config, item.substr(0, eq), item.substr(eq + 1));
  }
  if (opts.seed_given) config.seed = opts.seed;
  if (!opts.out_dir.empty()) config.paths.out_dir = opts.out_dir;
  return config;
}

std::function<void(int, float)> epoch_logger(bool verbose, const std::string& stage) {
  if (!verbose) return {};
  return [stage](int epoch, float loss) {
    std::cerr << stage << " epoch " << epoch + 1 << " loss " << loss << '\n';
  };
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
}

int cmd_phantom(const PipelineConfig& config, std::size_t count, double negatives, bool verbose) {
  PhantomDatasetSpec spec;
  spec.count = count;
  spec.seed = derive_seed(config.seed, "phantom.cli");
  spec.negative_fraction = negatives;
  spec.width = config.phantom.width;
  spec.height = config.phantom.height;
  spec.noise_level = config.phantom.noise_level;
  const auto samples = generate_dataset(spec);

  const fs::path dir = config.paths.out_dir / "phantoms";
  fs::create_directories(dir);
  std::ostringstream manifest, labels;
  labels << "id,months\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string id = std::to_string(i);
    save_image(samples[i].image, dir / (id + ".pgm"));
    save_image(samples[i].bone_mask, dir / (id + "_mask.pgm"));
    manifest << phantom_manifest_line(id, samples[i]) << '\n';
    labels << id << ',' << samples[i].age_months << '\n';
  }
  write_text(dir / "manifest.txt", manifest.str());
  write_text(dir / "labels.csv", labels.str());
  if (verbose) std::cerr << "wrote " << samples.size() << " phantoms to " << dir << '\n';
  std::cout << samples.size() << '\n';
  return 0;
}

int cmd_augment(const PipelineConfig& config, bool verbose) {
  const auto refs = atlas_references(config.atlas_settings());
  const auto variants = augment_dataset(refs, config.augmentation);
  const fs::path dir = config.paths.out_dir / "augmented";
  fs::create_directories(dir);
  std::ostringstream manifest;
  for (std::size_t i = 0; i < variants.size(); ++i) {
    save_image(variants[i].image, dir / (std::to_string(i) + ".pgm"));
    manifest << augmentation_manifest_line(i, variants[i]) << '\n';
  }
  write_text(dir / "manifest.txt", manifest.str());
  if (verbose) std::cerr << "wrote " << variants.size() << " variants to " << dir << '\n';
  std::cout << variants.size() << '\n';
  return 0;
}

int cmd_train_seg(const PipelineConfig& config, bool verbose) {
  StageResult result;
  const SegmentationModel model = train_unet_stage(config, &result, epoch_logger(verbose, "unet"));
  const fs::path path = config.paths.resolve(config.paths.unet_checkpoint);
  fs::create_directories(path.parent_path());
  model.save(path);
  std::cout << path.string() << '\n';
  return 0;
}

int cmd_train_roi(const PipelineConfig& config, bool verbose) {
  StageResult result;
  const RoiModel model = train_rpn_stage(config, &result, epoch_logger(verbose, "rpn"));
  const fs::path path = config.paths.resolve(config.paths.rpn_checkpoint);
  fs::create_directories(path.parent_path());
  model.save(path);
  std::cout << path.string() << '\n';
  return 0;
}

int cmd_train_age(const PipelineConfig& config, bool verbose) {
  const ReferenceAtlas atlas = build_phantom_atlas(config.atlas_settings());
  const fs::path atlas_path = config.paths.resolve(config.paths.atlas_manifest);
  fs::create_directories(atlas_path.parent_path());
  atlas.save(atlas_path);

  StageResult result;
  const AgeModel model = train_age_stage(config, atlas, &result, epoch_logger(verbose, "age"));
  const fs::path path = config.paths.resolve(config.paths.age_checkpoint);
  fs::create_directories(path.parent_path());
  model.save(path);
  std::cout << path.string() << '\n';
  return 0;
}

int cmd_segment(const PipelineConfig& config, const std::string& image_path) {
  const fs::path ckpt = config.paths.resolve(config.paths.unet_checkpoint);
  if (!fs::exists(ckpt)) throw StageError("segmentation", "missing checkpoint '" + ckpt.string() + "'");
  const SegmentationModel model = SegmentationModel::load(ckpt);
  const SegmentationResult result = segment(model, load_image(image_path));
  const std::string stem = fs::path(image_path).stem().string();
  fs::create_directories(config.paths.out_dir);
  save_image(result.mask, config.paths.out_dir / (stem + "_mask.pgm"));
  save_image(result.bone_image, config.paths.out_dir / (stem + "_bone.pgm"));
  std::cout << image_path << ' ' << result.bone_image.width() << 'x' << result.bone_image.height()
            << '\n';
  return 0;
}

int cmd_roi(const PipelineConfig& config, const std::string& image_path) {
  const fs::path ckpt = config.paths.resolve(config.paths.rpn_checkpoint);
  if (!fs::exists(ckpt)) throw StageError("roi", "missing checkpoint '" + ckpt.string() + "'");
  const RoiModel model = RoiModel::load(ckpt);
  const GrayImage prepared = prepare_roi_input(load_image(image_path));
  const RoiPrediction prediction = predict_roi(model, prepared);
  const std::string stem = fs::path(image_path).stem().string();
  fs::create_directories(config.paths.out_dir);
  save_image(crop_roi(prepared, prediction.box, config.age.input_size, config.age.input_size),
             config.paths.out_dir / (stem + "_crop.pgm"));
  std::cout << image_path << ' ' << to_string(prediction.box) << ' ' << prediction.confidence;
  if (prediction.confidence < config.low_confidence_threshold) std::cout << " low_confidence";
  std::cout << '\n';
  return 0;
}

int cmd_predict(const PipelineConfig& config, const std::vector<std::string>& images, bool verbose) {
  const Pipeline pipeline = Pipeline::load(config);
  for (const std::string& image : images) {
    PipelineArtifacts artifacts;
    const PredictionRecord record = pipeline.run(fs::path(image), verbose ? &artifacts : nullptr);
    if (verbose) {
      const fs::path dir = config.paths.out_dir / "artifacts" / fs::path(image).stem();
      save_artifacts(dir, artifacts);
      std::cerr << "artifacts for " << image << " in " << dir << '\n';
    }
    std::cout << format_record(record) << '\n';
  }
  return 0;
}

int cmd_eval(const PipelineConfig& config, const std::string& predictions, const std::string& labels) {
  const MetricsReport report = evaluate(read_id_csv(predictions), read_id_csv(labels));
  const fs::path path = config.paths.out_dir / "report.csv";
  write_text(path, report_csv(report));
  std::cout << report_summary(report) << "report: " << path.string() << '\n';
  return 0;
}

int cmd_selftest() {
  const MetricsReport report = table1_report();
  std::cout << report_summary(report);
  const bool mae_ok = std::fabs(report.mae_months - 2.8) <= 0.005;
  const bool mape_ok = std::fabs(report.mape - 0.0182) <= 0.0005;
  std::cout << "MAE " << (mae_ok ? "ok" : "MISMATCH") << ", MAPE " << (mape_ok ? "ok" : "MISMATCH")
            << '\n';
  return mae_ok && mape_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Elbow radiograph bone-age pipeline on synthetic phantoms"};
  app.require_subcommand(1);
  app.fallthrough();

  CommonOptions opts;
  app.add_option("--config", opts.config_path, "Configuration file")->check(CLI::ExistingFile);
  app.add_option_function<std::uint64_t>(
      "--seed",
      [&opts](std::uint64_t seed) {
        opts.seed = seed;
        opts.seed_given = true;
      },
      "Seed for every random stream");
  app.add_option("--out", opts.out_dir, "Output directory");
  app.add_flag("-v,--verbose", opts.verbose, "Log progress and write intermediate artifacts");
  app.add_option("--set", opts.overrides, "Override a config key (section.key=value)");

  std::size_t phantom_count = 12;
  double phantom_negatives = 0.0;
  auto* phantom = app.add_subcommand("phantom", "Generate labelled phantom radiographs");
  phantom->add_option("--count", phantom_count, "Number of phantoms")->check(CLI::PositiveNumber);
  phantom->add_option("--negatives", phantom_negatives, "Fraction without a visible joint")
      ->check(CLI::Range(0.0, 0.999));

  auto* augment = app.add_subcommand("augment", "Enumerate augmentation variants of the atlas");
  auto* train_seg = app.add_subcommand("train-seg", "Train the U-Net on phantoms");
  auto* train_roi = app.add_subcommand("train-roi", "Train the ROI network on phantoms");
  auto* train_age = app.add_subcommand("train-age", "Build the atlas and train the age network");

  std::string image;
  auto* segment_cmd = app.add_subcommand("segment", "Segment one image");
  segment_cmd->add_option("image", image, "Input image (PGM or PNG)")->required()->check(CLI::ExistingFile);
  auto* roi_cmd = app.add_subcommand("roi", "Locate the ROI in a 720x480 bone image");
  roi_cmd->add_option("image", image, "Bone image")->required()->check(CLI::ExistingFile);

  std::vector<std::string> images;
  auto* predict = app.add_subcommand("predict", "Run the full pipeline");
  predict->add_option("images", images, "Input images")->required()->check(CLI::ExistingFile);

  std::string predictions_csv, labels_csv;
  auto* eval = app.add_subcommand("eval", "Compare predictions with expert labels");
  eval->add_option("predictions", predictions_csv, "CSV of id,months")->required()->check(CLI::ExistingFile);
  eval->add_option("labels", labels_csv, "CSV of id,months")->required()->check(CLI::ExistingFile);

  auto* selftest = app.add_subcommand("selftest", "Check the metrics against the bundled table");

  CLI11_PARSE(app, argc, argv);

  const std::string stage = app.get_subcommands().front()->get_name();
  try {
    const PipelineConfig config = resolve_config(opts);
    if (*phantom) return cmd_phantom(config, phantom_count, phantom_negatives, opts.verbose);
    if (*augment) return cmd_augment(config, opts.verbose);
    if (*train_seg) return cmd_train_seg(config, opts.verbose);
    if (*train_roi) return cmd_train_roi(config, opts.verbose);
    if (*train_age) return cmd_train_age(config, opts.verbose);
    if (*segment_cmd) return cmd_segment(config, image);
    if (*roi_cmd) return cmd_roi(config, image);
    if (*predict) return cmd_predict(config, images, opts.verbose);
    if (*eval) return cmd_eval(config, predictions_csv, labels_csv);
    if (*selftest) return cmd_selftest();
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << stage << ": " << e.what() << '\n';
    return 2;
  }
  return 1;
}
