#pragma once

#include <cstddef>

#include "boneage/tensor.hpp"

namespace boneage {

enum class Activation { kRelu, kSigmoid, kSoftmaxRows };

/// Training objectives. Every loss is reduced as a mean over the batch axis
/// (axis 0) and a sum over the remaining axes, and returns a {1} tensor.
enum class LossKind {
  kBce,           ///< binary cross-entropy on probabilities
  kDice,          ///< 1 - (2*sum(p*t) + eps) / (sum(p) + sum(t) + eps), per sample
  kSmoothL1,      ///< 0.5*d^2 for |d| < 1, |d| - 0.5 otherwise
  kMse,           ///< squared error
  kCrossEntropy,  ///< -sum(t * log p) over softmax rows
};

inline constexpr float kDiceEpsilon = 1e-6f;

/// 2-D cross-correlation over NCHW input with an FCkHkW kernel.
Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel, const Tensor& bias,
              std::size_t stride = 1, std::size_t padding = 0);

/// 2x2 max pooling with stride 2. Gradient flows to the first maximal cell
/// of each window.
Tensor max_pool2d(Tape& tape, const Tensor& input);

/// Nearest-neighbour 2x upsampling.
Tensor upsample2x(Tape& tape, const Tensor& input);

Tensor concat_channels(Tape& tape, const Tensor& a, const Tensor& b);

/// input[N,D] * weight[D,M] + bias[M].
Tensor dense(Tape& tape, const Tensor& input, const Tensor& weight, const Tensor& bias);

Tensor activation(Tape& tape, const Tensor& input, Activation kind);
inline Tensor relu(Tape& tape, const Tensor& x) { return activation(tape, x, Activation::kRelu); }
inline Tensor sigmoid(Tape& tape, const Tensor& x) {
  return activation(tape, x, Activation::kSigmoid);
}
inline Tensor softmax_rows(Tape& tape, const Tensor& x) {
  return activation(tape, x, Activation::kSoftmaxRows);
}

Tensor loss(Tape& tape, const Tensor& pred, const Tensor& target, LossKind kind);

// Structural helpers.
Tensor reshape(Tape& tape, const Tensor& input, Shape shape);
/// Columns [begin, end) of a rank-2 tensor.
Tensor slice_cols(Tape& tape, const Tensor& input, std::size_t begin, std::size_t end);
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
/// Elementwise product.
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& input, float factor);
/// Sum of every element as a {1} tensor.
Tensor sum(Tape& tape, const Tensor& input);

}  // namespace boneage
