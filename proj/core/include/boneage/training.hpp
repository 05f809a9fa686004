#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "boneage/optimizer.hpp"
#include "boneage/tensor.hpp"

namespace boneage {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 8;
  OptimizerConfig optimizer;
  std::uint64_t seed = 0;
  /// Called after every epoch with (epoch, mean batch loss).
  std::function<void(int, float)> on_epoch;
};

/// Builds the scalar loss for the samples at `indices`, recording on `tape`.
using BatchLoss = std::function<Tensor(Tape& tape, std::span<const std::size_t> indices)>;

/// Shuffled mini-batch training over `sample_count` samples. Returns the
/// mean loss of each epoch. A non-finite loss raises TrainingError with the
/// epoch and batch index. Zero epochs leave `params` untouched.
std::vector<float> run_training(ParameterSet& params, std::size_t sample_count,
                                const TrainConfig& config, const BatchLoss& batch_loss);

}  // namespace boneage
