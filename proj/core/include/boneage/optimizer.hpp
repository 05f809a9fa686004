#pragma once

#include <cstdint>
#include <vector>

#include "boneage/tensor.hpp"

namespace boneage {

enum class OptimizerKind { kSgd, kAdaptive };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdaptive;
  float learning_rate = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
};

/// Per-parameter moment buffers, index-aligned with the ParameterSet they
/// were created for.
struct OptimizerState {
  float learning_rate = 1e-3f;
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
  std::uint64_t step_count = 0;
};

OptimizerState make_optimizer_state(const ParameterSet& params, const OptimizerConfig& config);

/// Applies one update from the gradients currently held by `params`.
/// Parameters without a gradient buffer are treated as having zero gradient.
/// Throws TrainingError naming the first parameter with a non-finite
/// gradient; in that case nothing is updated.
void optimizer_step(ParameterSet& params, OptimizerState& state, const OptimizerConfig& config);

}  // namespace boneage
