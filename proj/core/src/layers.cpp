#include "boneage/layers.hpp"

#include <cmath>

namespace boneage {

Tensor he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const float limit = std::sqrt(6.0f / static_cast<float>(fan_in));
  std::uniform_real_distribution<float> dist(-limit, limit);
  Tensor t(std::move(shape));
  for (float& v : t.data()) v = dist(rng);
  return t;
}

void add_conv(ParameterSet& params, const std::string& prefix, std::size_t in_channels,
              std::size_t out_channels, std::size_t kernel, Rng& rng) {
  params.add(prefix + ".weight", he_uniform({out_channels, in_channels, kernel, kernel},
                                            in_channels * kernel * kernel, rng)
                                     .set_requires_grad(true));
  params.add(prefix + ".bias", Tensor({out_channels}).set_requires_grad(true));
}

void add_dense(ParameterSet& params, const std::string& prefix, std::size_t in_features,
               std::size_t out_features, Rng& rng) {
  params.add(prefix + ".weight",
             he_uniform({in_features, out_features}, in_features, rng).set_requires_grad(true));
  params.add(prefix + ".bias", Tensor({out_features}).set_requires_grad(true));
}

Tensor conv_relu(Tape& tape, const ParameterSet& params, const std::string& prefix,
                 const Tensor& x) {
  const Tensor& w = params.at(prefix + ".weight");
  const std::size_t pad = w.dim(2) / 2;
  return relu(tape, conv2d(tape, x, w, params.at(prefix + ".bias"), 1, pad));
}

Tensor apply_dense(Tape& tape, const ParameterSet& params, const std::string& prefix,
                   const Tensor& x) {
  return dense(tape, x, params.at(prefix + ".weight"), params.at(prefix + ".bias"));
}

void track_gradients(ParameterSet& params) {
  for (auto& [name, t] : params) t.set_requires_grad(true);
}

}  // namespace boneage
