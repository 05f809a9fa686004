// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only if
// every selected criterion passes.
//
//   boneage_acceptance --work-dir DIR [--only N]...

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "boneage/augmentation.hpp"
#include "boneage/datasets.hpp"
#include "boneage/error.hpp"
#include "boneage/metrics.hpp"
#include "boneage/ops.hpp"
#include "boneage/pipeline.hpp"
#include "boneage/recipes.hpp"
#include "grad_cases.hpp"
#include "oracles.hpp"
#include "run_command.hpp"

namespace fs = std::filesystem;
using namespace boneage;
using boneage::testing::cli;
using boneage::testing::run_command;
using boneage::testing::shell_quote;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(precision) << v;
  return out.str();
}

std::vector<PhantomSample> held_out(const PipelineConfig& config, std::string_view purpose,
                                    std::size_t count, double negative_fraction) {
  PhantomDatasetSpec spec;
  spec.count = count;
  spec.seed = derive_seed(config.seed, "acceptance." + std::string(purpose));
  spec.negative_fraction = negative_fraction;
  spec.width = config.phantom.width;
  spec.height = config.phantom.height;
  spec.noise_level = config.phantom.noise_level;
  return generate_dataset(spec);
}

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double mean_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = mean_rank;
    i = j + 1;
  }
  return r;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return saa > 0.0 && sbb > 0.0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson(ranks(a), ranks(b));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Every regular file under `dir`, keyed by relative path.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) files[fs::relative(entry.path(), dir).string()] = read_file(entry.path());
  }
  return files;
}

class Acceptance {
 public:
  explicit Acceptance(fs::path work_dir) : work_(std::move(work_dir)) {
    config_.paths.out_dir = work_ / "out";
  }

  Outcome metrics_oracle() {
    Stopwatch timer;
    const auto r = run_command(cli("selftest"));
    const double secs = timer.seconds();
    const MetricsReport report = table1_report();
    const bool values = std::fabs(report.mae_months - 2.8) <= 0.005 &&
                        std::fabs(report.mape - 0.0182) <= 0.0005;
    const bool printed = r.output.find("MAE (months): 2.8000") != std::string::npos &&
                         r.output.find("MAPE: 0.0182") != std::string::npos;
    return {r.exit_code == 0 && values && printed && secs < 1.0,
            "MAE " + fmt(report.mae_months) + " MAPE " + fmt(report.mape) + ", selftest exit " +
                std::to_string(r.exit_code) + ", " + fmt(secs, 2) + " s"};
  }

  Outcome augmentation_cardinality() {
    Stopwatch timer;
    const auto refs = atlas_references(config_.atlas_settings());
    const auto variants = augment_dataset(refs, config_.augmentation);
    std::set<Provenance> provenance;
    for (const auto& v : variants) provenance.insert(v.provenance);

    const fs::path a = work_ / "augment_a", b = work_ / "augment_b";
    fs::remove_all(a);
    fs::remove_all(b);
    const auto ra = run_command(cli("--out " + shell_quote(a.string()) + " augment"));
    const auto rb = run_command(cli("--out " + shell_quote(b.string()) + " augment"));
    const bool cli_ok = ra.exit_code == 0 && rb.exit_code == 0 && ra.output == "576\n" &&
                        rb.output == "576\n";
    const auto files_a = snapshot(a), files_b = snapshot(b);
    const bool identical = cli_ok && !files_a.empty() && files_a == files_b;
    const double secs = timer.seconds();
    return {refs.size() == 12 && variants.size() == 576 && provenance.size() == 576 && identical &&
                secs < 30.0,
            std::to_string(refs.size()) + " references, " + std::to_string(variants.size()) +
                " images, " + std::to_string(provenance.size()) + " distinct provenance tuples, " +
                std::to_string(files_a.size()) + " files " +
                (identical ? "byte-identical" : "DIFFER") + " across two CLI runs, " +
                fmt(secs, 1) + " s"};
  }

  Outcome gradient_correctness() {
    Stopwatch timer;
    const auto cases = boneage::testing::grad_cases();
    double worst = 0.0;
    std::string worst_case;
    std::size_t checks = 0;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto [inputs, fn] = cases[i].make(1000 * i + seed);
        const auto result = boneage::testing::check_gradients(inputs, fn);
        ++checks;
        if (result.max_rel_error > worst) {
          worst = result.max_rel_error;
          worst_case = cases[i].name + " seed " + std::to_string(seed);
        }
      }
    }
    const double secs = timer.seconds();
    return {worst <= 1e-3 && secs < 120.0,
            std::to_string(cases.size()) + " operations x 20 seeds, worst relative error " +
                fmt(worst, 6) + (worst_case.empty() ? "" : " (" + worst_case + ")") + ", " +
                fmt(secs, 1) + " s"};
  }

  Outcome forward_equivalence() {
    using boneage::testing::random_tensor;
    std::mt19937_64 rng(4242);
    auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
    auto max_diff = [](std::span<const float> a, const std::vector<float>& b) {
      if (a.size() != b.size()) return std::numeric_limits<double>::infinity();
      double d = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(double(a[i]) - b[i]));
      return d;
    };
    double worst = 0.0;
    std::size_t cases = 0;
    for (int trial = 0; trial < 100; ++trial) {
      Tape tape = Tape::inference();
      const std::size_t n = pick(1, 2), c = pick(1, 3), f = pick(1, 4);
      const std::size_t h = pick(2, 8), w = pick(2, 8);
      const std::size_t k = pick(1, static_cast<int>(std::min(h, w)));
      const int stride = pick(1, 2), pad = pick(0, 1);
      const Tensor in = random_tensor({n, c, h, w}, rng);
      const Tensor kernel = random_tensor({f, c, k, k}, rng);
      const Tensor bias = random_tensor({f}, rng);
      worst = std::max(worst, max_diff(conv2d(tape, in, kernel, bias, stride, pad).data(),
                                       boneage::testing::oracle_conv2d(in, kernel, bias, stride, pad)));
      const Tensor pool_in = random_tensor({n, c, 2 * (h / 2 + 1), 2 * (w / 2 + 1)}, rng);
      worst = std::max(worst, max_diff(max_pool2d(tape, pool_in).data(),
                                       boneage::testing::oracle_max_pool(pool_in)));
      const Tensor x = random_tensor({n, h}, rng), wt = random_tensor({h, w}, rng),
                   b = random_tensor({w}, rng);
      worst = std::max(worst, max_diff(dense(tape, x, wt, b).data(),
                                       boneage::testing::oracle_dense(x, wt, b)));
      cases += 3;
    }
    return {worst <= 1e-5 && cases >= 100,
            std::to_string(cases) + " randomized cases (conv2d, max_pool2d, dense), max |diff| " +
                fmt(worst, 8)};
  }

  Outcome segmentation_capability() {
    Stopwatch timer;
    const SegmentationModel& model = unet();
    const double train_secs = timer.seconds();

    double dice_total = 0.0;
    const auto test = held_out(config_, "unet", 50, 0.0);
    for (const PhantomSample& p : test) {
      const SegmentationSample s = make_segmentation_sample(p, config_.unet);
      Tape tape = Tape::inference();
      const Tensor probs = model.forward(tape, images_to_tensor(std::span(&s.image, 1)));
      dice_total += dice_coefficient(binarize(tensor_to_image(probs), config_.unet.threshold), s.mask);
    }
    const double dice = dice_total / static_cast<double>(test.size());

    // Single-sample overfit with the same architecture.
    const SegmentationSample one = make_segmentation_sample(test.front(), config_.unet);
    SegmentationModel overfit = build_unet(config_.unet, derive_seed(config_.seed, "acceptance.overfit"));
    TrainConfig tc;
    tc.epochs = 300;
    tc.batch_size = 1;
    tc.optimizer.learning_rate = 1e-3f;
    train_segmentation(overfit, std::span(&one, 1), tc);
    Tape tape = Tape::inference();
    const float overfit_loss =
        loss(tape, overfit.forward(tape, images_to_tensor(std::span(&one.image, 1))),
             images_to_tensor(std::span(&one.mask, 1)), LossKind::kDice)
            .item();
    const double secs = timer.seconds();
    return {dice >= 0.90 && config_.train_unet.epochs <= 200 && overfit_loss < 0.05f && secs <= 600.0,
            "held-out Dice " + fmt(dice) + " on " + std::to_string(test.size()) + " phantoms after " +
                std::to_string(config_.train_unet.epochs) + " epochs on " +
                std::to_string(config_.train_unet.samples) + " (" + fmt(train_secs, 0) +
                " s), single-sample dice loss " + fmt(overfit_loss) + ", total " + fmt(secs, 0) + " s"};
  }

  Outcome roi_capability() {
    Stopwatch timer;
    const RoiModel& model = rpn();
    const double train_secs = timer.seconds();

    const auto test = held_out(config_, "rpn", 63, 0.2);
    double iou_total = 0.0, pos_conf = 0.0, neg_conf = 0.0;
    std::size_t positives = 0, negatives = 0;
    for (const PhantomSample& p : test) {
      const RoiPrediction pred = predict_roi(model, prepare_roi_input(ground_truth_bone_image(p)));
      if (p.is_true) {
        iou_total += iou(pred.box, prepared_roi_box(p));
        pos_conf += pred.confidence;
        ++positives;
      } else {
        neg_conf += pred.confidence;
        ++negatives;
      }
    }
    const double mean_iou = iou_total / static_cast<double>(positives);
    pos_conf /= static_cast<double>(positives);
    neg_conf /= static_cast<double>(negatives);
    const double secs = timer.seconds();
    return {positives >= 50 && mean_iou >= 0.5 && neg_conf < pos_conf && secs <= 600.0,
            "mean IoU " + fmt(mean_iou) + " on " + std::to_string(positives) +
                " held-out positives, confidence " + fmt(pos_conf) + " (positives) vs " +
                fmt(neg_conf) + " (" + std::to_string(negatives) + " negatives), trained on " +
                std::to_string(config_.train_rpn.samples) + " in " + fmt(train_secs, 0) + " s"};
  }

  Outcome age_capability() {
    Stopwatch timer;
    const AgeModel& model = age_model();
    const double train_secs = timer.seconds();

    double train_mean = 0.0;
    const auto train = stage_phantoms(config_, "age");
    for (const PhantomSample& p : train) train_mean += p.age_months;
    train_mean /= static_cast<double>(train.size());

    const auto test = held_out(config_, "age", 60, 0.0);
    std::vector<double> truth, predicted;
    double model_err = 0.0, baseline_err = 0.0;
    for (const PhantomSample& p : test) {
      const AgeEstimate e = estimate_age(model, ground_truth_crop(p, config_.age.input_size), atlas());
      truth.push_back(p.age_months);
      predicted.push_back(e.age_months);
      model_err += std::fabs(e.age_months - p.age_months);
      baseline_err += std::fabs(train_mean - p.age_months);
    }
    const double n = static_cast<double>(test.size());
    model_err /= n;
    baseline_err /= n;
    const double rho = spearman(predicted, truth);
    const double secs = timer.seconds();
    return {test.size() >= 50 && model_err < 0.5 * baseline_err && rho > 0.8 && secs <= 600.0,
            "MAE " + fmt(model_err, 2) + " vs baseline " + fmt(baseline_err, 2) + " months (ratio " +
                fmt(model_err / baseline_err, 3) + "), Spearman " + fmt(rho) + " on " +
                std::to_string(test.size()) + " held-out, trained on " +
                std::to_string(config_.train_age.samples) + " in " + fmt(train_secs, 0) + " s"};
  }

  Outcome end_to_end() {
    const fs::path out = config_.paths.out_dir;
    fs::create_directories(out);
    unet().save(config_.paths.resolve(config_.paths.unet_checkpoint));
    rpn().save(config_.paths.resolve(config_.paths.rpn_checkpoint));
    age_model().save(config_.paths.resolve(config_.paths.age_checkpoint));
    atlas().save(config_.paths.resolve(config_.paths.atlas_manifest));

    const auto phantoms = held_out(config_, "e2e", 1, 0.0);
    const fs::path image = work_ / "e2e_phantom.pgm";
    save_image(phantoms.front().image, image);

    const std::string cmd = cli("--out " + shell_quote(out.string()) + " -v predict " +
                                shell_quote(image.string()));
    const auto first = run_command(cmd);
    const auto second = run_command(cmd);
    const bool same = first.exit_code == 0 && second.exit_code == 0 && first.output == second.output;

    const fs::path artifacts = out / "artifacts" / image.stem();
    auto extent = [&](const char* name) -> std::pair<int, int> {
      const fs::path p = artifacts / name;
      if (!fs::exists(p)) return {0, 0};
      const GrayImage img = load_image(p);
      return {img.width(), img.height()};
    };
    const auto bone = extent("bone_image.pgm");
    const auto roi = extent("roi_input.pgm");
    const bool sizes = bone == std::pair{720, 480} && roi == std::pair{720, 960};

    std::string record;
    std::istringstream lines(first.output);
    for (std::string line; std::getline(lines, line);) {
      if (line.rfind(image.string(), 0) == 0) record = line;
    }
    std::ostringstream detail;
    detail << "records " << (same ? "identical" : "DIFFER") << " across two runs, bone image "
           << bone.first << "x" << bone.second << ", ROI input " << roi.first << "x" << roi.second
           << "; record: " << (record.empty() ? first.output : record) << " (true age "
           << fmt(phantoms.front().age_months, 2) << ")";
    return {same && sizes && !record.empty(), detail.str()};
  }

 private:
  const SegmentationModel& unet() {
    if (!unet_) unet_ = train_unet_stage(config_, nullptr, progress("unet"));
    return *unet_;
  }
  const RoiModel& rpn() {
    if (!rpn_) rpn_ = train_rpn_stage(config_, nullptr, progress("rpn"));
    return *rpn_;
  }
  const ReferenceAtlas& atlas() {
    if (!atlas_) atlas_ = build_phantom_atlas(config_.atlas_settings());
    return *atlas_;
  }
  const AgeModel& age_model() {
    if (!age_) age_ = train_age_stage(config_, atlas(), nullptr, progress("age"));
    return *age_;
  }

  static std::function<void(int, float)> progress(std::string stage) {
    return [stage](int epoch, float loss) {
      std::cerr << "  [" << stage << "] epoch " << epoch + 1 << " loss " << loss << '\n';
    };
  }

  fs::path work_;
  PipelineConfig config_;
  std::optional<SegmentationModel> unet_;
  std::optional<RoiModel> rpn_;
  std::optional<AgeModel> age_;
  std::optional<ReferenceAtlas> atlas_;
};

}  // namespace

int main(int argc, char** argv) {
  fs::path work_dir = fs::temp_directory_path() / "boneage_acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--work-dir" && i + 1 < argc) {
      work_dir = argv[++i];
    } else if (arg == "--only" && i + 1 < argc) {
      only.insert(std::stoi(argv[++i]));
    } else {
      std::cerr << "usage: " << argv[0] << " [--work-dir DIR] [--only N]...\n";
      return 64;
    }
  }
  fs::create_directories(work_dir);

  Acceptance acceptance(work_dir);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"metrics oracle", [&] { return acceptance.metrics_oracle(); }},
      {"augmentation cardinality", [&] { return acceptance.augmentation_cardinality(); }},
      {"gradient correctness", [&] { return acceptance.gradient_correctness(); }},
      {"forward-kernel equivalence", [&] { return acceptance.forward_equivalence(); }},
      {"segmentation capability", [&] { return acceptance.segmentation_capability(); }},
      {"ROI capability", [&] { return acceptance.roi_capability(); }},
      {"age-estimation capability", [&] { return acceptance.age_capability(); }},
      {"end-to-end determinism and size chain", [&] { return acceptance.end_to_end(); }},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(number)) continue;
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    failures += outcome.pass ? 0 : 1;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << " [" << number << "] " << criteria[i].first
              << ": " << outcome.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
