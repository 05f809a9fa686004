#include "boneage/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "boneage/error.hpp"

namespace boneage {

std::vector<float> run_training(ParameterSet& params, std::size_t sample_count,
                                const TrainConfig& config, const BatchLoss& batch_loss) {
  if (sample_count == 0) throw ContractError("training dataset is empty");
  if (config.epochs < 0) throw ConfigError("epoch count must be >= 0");
  if (config.batch_size < 1) throw ConfigError("batch size must be >= 1");

  OptimizerState state = make_optimizer_state(params, config.optimizer);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(sample_count);
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(config.batch_size);

  std::vector<float> trace;
  trace.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < sample_count; start += batch, ++batches) {
      const std::size_t end = std::min(sample_count, start + batch);
      std::span<const std::size_t> indices(order.data() + start, end - start);
      Tape tape;
      params.zero_grad();
      Tensor loss = batch_loss(tape, indices);
      const float value = loss.item();
      if (!std::isfinite(value)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", batch " << batches;
        throw TrainingError(msg.str());
      }
      tape.backward(loss);
      optimizer_step(params, state, config.optimizer);
      epoch_loss += value;
    }
    trace.push_back(static_cast<float>(epoch_loss / static_cast<double>(batches)));
    if (config.on_epoch) config.on_epoch(epoch, trace.back());
  }
  params.zero_grad();
  return trace;
}

}  // namespace boneage
