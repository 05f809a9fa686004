#include <benchmark/benchmark.h>

#include <random>

#include "boneage/image.hpp"
#include "boneage/ops.hpp"

using namespace boneage;

namespace {

Tensor filled(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> dist(-1.0f, 1.0f);
  Tensor t(std::move(shape));
  for (float& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace

// Args: channels in/out, spatial extent.
static void BM_Conv2dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto s = static_cast<std::size_t>(state.range(1));
  const Tensor x = filled({1, c, s, s}, 1), k = filled({c, c, 3, 3}, 2), b = filled({c}, 3);
  for (auto _ : state) {
    Tape tape = Tape::inference();
    benchmark::DoNotOptimize(conv2d(tape, x, k, b, 1, 1).data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(c * c * s * s * 9));
}
BENCHMARK(BM_Conv2dForward)->Args({8, 32})->Args({16, 64})->Args({32, 32});

static void BM_Conv2dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto s = static_cast<std::size_t>(state.range(1));
  Tensor x = filled({1, c, s, s}, 1), k = filled({c, c, 3, 3}, 2), b = filled({c}, 3);
  k.set_requires_grad(true);
  b.set_requires_grad(true);
  for (auto _ : state) {
    Tape tape;
    tape.backward(sum(tape, conv2d(tape, x, k, b, 1, 1)));
    benchmark::DoNotOptimize(k.grad().data());
  }
}
BENCHMARK(BM_Conv2dBackward)->Args({8, 32})->Args({16, 64});

static void BM_MaxPool(benchmark::State& state) {
  const Tensor x = filled({1, 16, 64, 64}, 4);
  for (auto _ : state) {
    Tape tape = Tape::inference();
    benchmark::DoNotOptimize(max_pool2d(tape, x).data().data());
  }
}
BENCHMARK(BM_MaxPool);

static void BM_Dense(benchmark::State& state) {
  const Tensor x = filled({8, 3072}, 5), w = filled({3072, 64}, 6), b = filled({64}, 7);
  for (auto _ : state) {
    Tape tape = Tape::inference();
    benchmark::DoNotOptimize(dense(tape, x, w, b).data().data());
  }
}
BENCHMARK(BM_Dense);

static void BM_ResizeToRoiInput(benchmark::State& state) {
  const GrayImage img(720, 480, 0.5f);
  for (auto _ : state) benchmark::DoNotOptimize(resize_bilinear(rotate(img, 90.0), 720, 960));
}
BENCHMARK(BM_ResizeToRoiInput)->Unit(benchmark::kMillisecond);

static void BM_RotateFifteen(benchmark::State& state) {
  const GrayImage img(240, 160, 0.5f);
  for (auto _ : state) benchmark::DoNotOptimize(rotate(img, 15.0));
}
BENCHMARK(BM_RotateFifteen);
