#include <gtest/gtest.h>

#include <numeric>

#include "boneage/error.hpp"
#include "boneage/ops.hpp"
#include "oracles.hpp"

using namespace boneage;
using boneage::testing::random_tensor;

namespace {

Tape& inference_tape() {
  static Tape tape = Tape::inference();
  return tape;
}

void expect_near_all(std::span<const float> actual, const std::vector<float>& expected, float tol) {
  ASSERT_EQ(actual.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    ASSERT_NEAR(actual[i], expected[i], tol) << "element " << i;
  }
}

}  // namespace

TEST(Conv2d, IdentityKernel) {
  const Tensor out = conv2d(inference_tape(), Tensor({1, 1, 3, 3}, 1.0f), Tensor({1, 1, 1, 1}, 1.0f),
                            Tensor({1}), 1, 0);
  EXPECT_EQ(out.shape(), (Shape{1, 1, 3, 3}));
  for (float v : out.data()) EXPECT_EQ(v, 1.0f);
}

TEST(Conv2d, FullSum) {
  const Tensor out = conv2d(inference_tape(), Tensor({1, 1, 2, 2}, {1, 2, 3, 4}),
                            Tensor({1, 1, 2, 2}, 1.0f), Tensor({1}), 1, 0);
  ASSERT_EQ(out.numel(), 1u);
  EXPECT_FLOAT_EQ(out.item(), 10.0f);
}

TEST(Conv2d, MatchesLoopOracleWithPadding) {
  std::mt19937_64 rng(5);
  const Tensor in = random_tensor({1, 2, 5, 5}, rng);
  const Tensor k = random_tensor({3, 2, 3, 3}, rng);
  const Tensor b = random_tensor({3}, rng);
  const Tensor out = conv2d(inference_tape(), in, k, b, 1, 1);
  EXPECT_EQ(out.shape(), (Shape{1, 3, 5, 5}));
  expect_near_all(out.data(), boneage::testing::oracle_conv2d(in, k, b, 1, 1), 1e-5f);
}

TEST(Conv2d, OutputExtentFormula) {
  const Tensor out = conv2d(inference_tape(), Tensor({2, 1, 7, 6}), Tensor({4, 1, 3, 2}), Tensor({4}), 2, 1);
  // floor((7+2-3)/2)+1 = 4, floor((6+2-2)/2)+1 = 4
  EXPECT_EQ(out.shape(), (Shape{2, 4, 4, 4}));
}

TEST(Conv2d, ChannelMismatchIsDimensionError) {
  EXPECT_THROW(conv2d(inference_tape(), Tensor({1, 2, 4, 4}), Tensor({1, 3, 3, 3}), Tensor({1}), 1, 0),
               DimensionError);
  EXPECT_THROW(conv2d(inference_tape(), Tensor({1, 1, 2, 2}), Tensor({1, 1, 3, 3}), Tensor({1}), 1, 0),
               DimensionError);
}

TEST(MaxPool, Examples) {
  const Tensor out = max_pool2d(inference_tape(), Tensor({1, 1, 2, 2}, {1, 2, 3, 4}));
  EXPECT_FLOAT_EQ(out.item(), 4.0f);
  const Tensor flat = max_pool2d(inference_tape(), Tensor({1, 2, 4, 6}, 0.25f));
  EXPECT_EQ(flat.shape(), (Shape{1, 2, 2, 3}));
  for (float v : flat.data()) EXPECT_EQ(v, 0.25f);
}

TEST(MaxPool, OddExtentIsDimensionError) {
  EXPECT_THROW(max_pool2d(inference_tape(), Tensor({1, 1, 3, 4})), DimensionError);
}

TEST(MaxPool, GradientGoesToArgmaxOnly) {
  Tape tape;
  Tensor x({1, 1, 2, 2}, {1, 5, 3, 2});
  x.set_requires_grad(true);
  tape.backward(sum(tape, max_pool2d(tape, x)));
  EXPECT_EQ(std::vector<float>(x.grad().begin(), x.grad().end()), (std::vector<float>{0, 1, 0, 0}));
}

TEST(Upsample, Examples) {
  const Tensor out = upsample2x(inference_tape(), Tensor({1, 1, 1, 1}, 5.0f));
  EXPECT_EQ(out.shape(), (Shape{1, 1, 2, 2}));
  for (float v : out.data()) EXPECT_EQ(v, 5.0f);

  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({1, 3, 4, 4}, rng);
  const Tensor up = upsample2x(inference_tape(), x);
  expect_near_all(up.data(), boneage::testing::oracle_upsample(x), 0.0f);
  const Tensor back = max_pool2d(inference_tape(), up);
  expect_near_all(back.data(), std::vector<float>(x.data().begin(), x.data().end()), 0.0f);
}

TEST(Upsample, GradientSumsChildren) {
  Tape tape;
  Tensor x({1, 1, 1, 2}, {1, 2});
  x.set_requires_grad(true);
  tape.backward(sum(tape, upsample2x(tape, x)));
  EXPECT_FLOAT_EQ(x.grad()[0], 4.0f);
  EXPECT_FLOAT_EQ(x.grad()[1], 4.0f);
}

TEST(Concat, PreservesOrder) {
  const Tensor out = concat_channels(inference_tape(), Tensor({1, 1, 2, 2}, {1, 2, 3, 4}),
                                     Tensor({1, 1, 2, 2}, {5, 6, 7, 8}));
  EXPECT_EQ(out.shape(), (Shape{1, 2, 2, 2}));
  EXPECT_EQ(std::vector<float>(out.data().begin(), out.data().end()),
            (std::vector<float>{1, 2, 3, 4, 5, 6, 7, 8}));
  EXPECT_THROW(concat_channels(inference_tape(), Tensor({1, 1, 2, 2}), Tensor({1, 1, 2, 3})),
               DimensionError);
}

TEST(Concat, SelectingChannelZeroRecoversInput) {
  std::mt19937_64 rng(9);
  const Tensor x = random_tensor({2, 1, 3, 3}, rng);
  const Tensor joined = concat_channels(inference_tape(), x, Tensor({2, 1, 3, 3}));
  const Tensor picked = conv2d(inference_tape(), joined, Tensor({1, 2, 1, 1}, {1, 0}), Tensor({1}), 1, 0);
  expect_near_all(picked.data(), std::vector<float>(x.data().begin(), x.data().end()), 0.0f);
}

TEST(Dense, Examples) {
  const Tensor out = dense(inference_tape(), Tensor({1, 2}, {1, 2}), Tensor({2, 1}, 1.0f), Tensor({1}, 0.5f));
  EXPECT_FLOAT_EQ(out.item(), 3.5f);
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({3, 4}, rng);
  Tensor eye({4, 4});
  for (int i = 0; i < 4; ++i) eye.data()[i * 5] = 1.0f;
  const Tensor same = dense(inference_tape(), x, eye, Tensor({4}));
  expect_near_all(same.data(), std::vector<float>(x.data().begin(), x.data().end()), 0.0f);
  EXPECT_THROW(dense(inference_tape(), x, Tensor({3, 2}), Tensor({2})), DimensionError);
}

// Forward kernels against the loop oracles on many random small inputs.
TEST(ForwardOracles, RandomizedConvPoolDense) {
  std::mt19937_64 rng(2024);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  for (int trial = 0; trial < 120; ++trial) {
    SCOPED_TRACE(trial);
    const std::size_t n = pick(1, 2), c = pick(1, 3), f = pick(1, 4);
    const std::size_t h = pick(2, 8), w = pick(2, 8);
    const std::size_t k = pick(1, static_cast<int>(std::min(h, w)));
    const int stride = pick(1, 2), pad = pick(0, 1);
    const Tensor in = random_tensor({n, c, h, w}, rng);
    const Tensor kernel = random_tensor({f, c, k, k}, rng);
    const Tensor bias = random_tensor({f}, rng);
    expect_near_all(conv2d(inference_tape(), in, kernel, bias, stride, pad).data(),
                    boneage::testing::oracle_conv2d(in, kernel, bias, stride, pad), 1e-5f);

    const Tensor pool_in = random_tensor({n, c, 2 * (h / 2 + 1), 2 * (w / 2 + 1)}, rng);
    expect_near_all(max_pool2d(inference_tape(), pool_in).data(),
                    boneage::testing::oracle_max_pool(pool_in), 0.0f);

    const Tensor x = random_tensor({n, h}, rng), wt = random_tensor({h, w}, rng), b = random_tensor({w}, rng);
    expect_near_all(dense(inference_tape(), x, wt, b).data(), boneage::testing::oracle_dense(x, wt, b), 1e-5f);
  }
}

TEST(Activation, Examples) {
  const Tensor r = relu(inference_tape(), Tensor({3}, {-1, 0, 2}));
  EXPECT_EQ(std::vector<float>(r.data().begin(), r.data().end()), (std::vector<float>{0, 0, 2}));
  EXPECT_FLOAT_EQ(sigmoid(inference_tape(), Tensor({1}, 0.0f)).item(), 0.5f);
  const Tensor s = sigmoid(inference_tape(), Tensor({3}, {-50, 0, 50}));
  for (float v : s.data()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
  EXPECT_THROW(softmax_rows(inference_tape(), Tensor({2, 2, 2})), DimensionError);
}

TEST(Activation, SoftmaxRowsSumToOne) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor x = random_tensor({3, 7}, rng, -20, 20);
    const Tensor p = softmax_rows(inference_tape(), x);
    for (std::size_t r = 0; r < 3; ++r) {
      double total = 0;
      for (std::size_t c = 0; c < 7; ++c) total += p.data()[r * 7 + c];
      EXPECT_NEAR(total, 1.0, 1e-6);
    }
  }
}

TEST(Loss, Examples) {
  std::mt19937_64 rng(4);
  const Tensor x = random_tensor({2, 5}, rng);
  EXPECT_FLOAT_EQ(loss(inference_tape(), x, x, LossKind::kMse).item(), 0.0f);
  const Tensor ones({1, 1, 4, 4}, 1.0f);
  EXPECT_NEAR(loss(inference_tape(), ones, ones, LossKind::kDice).item(), 0.0f, 1e-5f);
  EXPECT_THROW(loss(inference_tape(), Tensor({2, 2}), Tensor({2, 3}), LossKind::kMse), DimensionError);
}

TEST(Loss, SmoothL1MatchesPiecewiseDefinition) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor p = random_tensor({3, 4}, rng, -3, 3), t = random_tensor({3, 4}, rng, -3, 3);
    double expected = 0;
    for (std::size_t i = 0; i < p.numel(); ++i) {
      const double d = std::fabs(p.data()[i] - t.data()[i]);
      expected += d < 1.0 ? 0.5 * d * d : d - 0.5;
    }
    expected /= 3.0;
    EXPECT_NEAR(loss(inference_tape(), p, t, LossKind::kSmoothL1).item(), expected, 1e-5);
  }
}

TEST(Loss, BceAndDiceDefinitions) {
  const Tensor p({1, 2}, {0.8f, 0.4f}), t({1, 2}, {1.0f, 0.0f});
  EXPECT_NEAR(loss(inference_tape(), p, t, LossKind::kBce).item(), -std::log(0.8) - std::log(0.6), 1e-6);
  // dice = 1 - (2*0.8 + eps) / (1.2 + 1 + eps)
  EXPECT_NEAR(loss(inference_tape(), p, t, LossKind::kDice).item(), 1.0 - (1.6 + 1e-6) / (2.2 + 1e-6), 1e-6);
  // Batch mean: two identical rows give the same loss as one.
  const Tensor p2({2, 2}, {0.8f, 0.4f, 0.8f, 0.4f}), t2({2, 2}, {1, 0, 1, 0});
  EXPECT_NEAR(loss(inference_tape(), p2, t2, LossKind::kBce).item(),
              loss(inference_tape(), p, t, LossKind::kBce).item(), 1e-6);
}

TEST(Loss, NonNegativeOnRandomInputs) {
  std::mt19937_64 rng(13);
  for (LossKind kind : {LossKind::kBce, LossKind::kDice, LossKind::kSmoothL1, LossKind::kMse}) {
    for (int trial = 0; trial < 10; ++trial) {
      const Tensor p = random_tensor({2, 6}, rng, 0, 1), t = random_tensor({2, 6}, rng, 0, 1);
      EXPECT_GE(loss(inference_tape(), p, t, kind).item(), 0.0f);
    }
  }
}

TEST(Shaping, ReshapeSliceAndErrors) {
  const Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
  const Tensor cols = slice_cols(inference_tape(), x, 1, 3);
  EXPECT_EQ(std::vector<float>(cols.data().begin(), cols.data().end()), (std::vector<float>{2, 3, 5, 6}));
  EXPECT_EQ(reshape(inference_tape(), x, {3, 2}).shape(), (Shape{3, 2}));
  EXPECT_THROW(reshape(inference_tape(), x, {4, 2}), DimensionError);
  EXPECT_THROW(slice_cols(inference_tape(), x, 2, 2), DimensionError);
  EXPECT_THROW(add(inference_tape(), x, Tensor({3, 2})), DimensionError);
}
