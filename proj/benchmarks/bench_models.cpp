#include <benchmark/benchmark.h>

#include "boneage/age.hpp"
#include "boneage/augmentation.hpp"
#include "boneage/datasets.hpp"
#include "boneage/phantom.hpp"
#include "boneage/roi.hpp"
#include "boneage/segmentation.hpp"

using namespace boneage;

static void BM_UNetForward(benchmark::State& state) {
  const SegmentationModel model = build_unet(UNetConfig{}, 1);
  const Tensor batch({static_cast<std::size_t>(state.range(0)), 1, 64, 96}, 0.3f);
  for (auto _ : state) {
    Tape tape = Tape::inference();
    benchmark::DoNotOptimize(model.forward(tape, batch).data().data());
  }
}
BENCHMARK(BM_UNetForward)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

static void BM_UNetTrainStep(benchmark::State& state) {
  SegmentationModel model = build_unet(UNetConfig{}, 1);
  PhantomDatasetSpec spec;
  spec.count = 8;
  std::vector<SegmentationSample> data;
  for (const auto& p : generate_dataset(spec)) data.push_back(make_segmentation_sample(p, model.config()));
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 8;
  for (auto _ : state) benchmark::DoNotOptimize(train_segmentation(model, data, tc));
}
BENCHMARK(BM_UNetTrainStep)->Unit(benchmark::kMillisecond);

static void BM_RoiPredict(benchmark::State& state) {
  const RoiModel model = build_rpn(RpnConfig{}, 2);
  const GrayImage img(720, 960, 0.4f);
  for (auto _ : state) benchmark::DoNotOptimize(predict_roi(model, img));
}
BENCHMARK(BM_RoiPredict)->Unit(benchmark::kMillisecond);

static void BM_AgeEstimate(benchmark::State& state) {
  const AgeModel model = build_age_model(AgeConfig{}, 3);
  const ReferenceAtlas atlas = build_phantom_atlas(AtlasPhantomSettings{});
  const GrayImage crop(64, 64, 0.5f);
  for (auto _ : state) benchmark::DoNotOptimize(estimate_age(model, crop, atlas));
}
BENCHMARK(BM_AgeEstimate)->Unit(benchmark::kMillisecond);

static void BM_GeneratePhantom(benchmark::State& state) {
  PhantomSpec spec;
  spec.width = static_cast<int>(state.range(0));
  spec.height = spec.width * 2 / 3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate_phantom(spec));
    ++spec.seed;
  }
}
BENCHMARK(BM_GeneratePhantom)->Arg(240)->Arg(720)->Unit(benchmark::kMillisecond);

static void BM_AugmentAtlas(benchmark::State& state) {
  const auto refs = atlas_references(AtlasPhantomSettings{});
  for (auto _ : state) benchmark::DoNotOptimize(augment_dataset(refs, AugmentationSpec{}));
}
BENCHMARK(BM_AugmentAtlas)->Unit(benchmark::kMillisecond);
