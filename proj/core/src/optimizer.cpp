#include "boneage/optimizer.hpp"

#include <cmath>

#include "boneage/error.hpp"

namespace boneage {

OptimizerState make_optimizer_state(const ParameterSet& params, const OptimizerConfig& config) {
  if (!(config.learning_rate > 0.0f)) throw ConfigError("learning rate must be positive");
  OptimizerState state;
  state.learning_rate = config.learning_rate;
  if (config.kind == OptimizerKind::kAdaptive) {
    for (const auto& [name, tensor] : params) {
      state.first_moment.emplace_back(tensor.numel(), 0.0f);
      state.second_moment.emplace_back(tensor.numel(), 0.0f);
    }
  }
  return state;
}

void optimizer_step(ParameterSet& params, OptimizerState& state, const OptimizerConfig& config) {
  for (const auto& [name, tensor] : params) {
    for (float g : tensor.grad()) {
      if (!std::isfinite(g)) throw TrainingError("non-finite gradient in parameter '" + name + "'");
    }
  }
  if (config.kind == OptimizerKind::kAdaptive && state.first_moment.size() != params.size()) {
    throw ContractError("optimizer state does not match parameter set");
  }

  ++state.step_count;
  const float lr = state.learning_rate;
  if (config.kind == OptimizerKind::kSgd) {
    for (auto& [name, tensor] : params) {
      if (!tensor.has_grad()) continue;
      auto p = tensor.data();
      const auto g = tensor.grad();
      for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
    }
    return;
  }

  const auto t = static_cast<double>(state.step_count);
  const float correction1 = 1.0f - static_cast<float>(std::pow(config.beta1, t));
  const float correction2 = 1.0f - static_cast<float>(std::pow(config.beta2, t));
  std::size_t index = 0;
  for (auto& [name, tensor] : params) {
    auto& m = state.first_moment[index];
    auto& v = state.second_moment[index];
    ++index;
    if (m.size() != tensor.numel()) {
      throw ContractError("optimizer moment buffer shape mismatch for '" + name + "'");
    }
    if (!tensor.has_grad()) continue;
    auto p = tensor.data();
    const auto g = tensor.grad();
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0f - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0f - config.beta2) * g[i] * g[i];
      const float m_hat = m[i] / correction1;
      const float v_hat = v[i] / correction2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

}  // namespace boneage
