#pragma once

#include <cstdint>
#include <random>
#include <string>

#include "boneage/ops.hpp"
#include "boneage/tensor.hpp"

namespace boneage {

using Rng = std::mt19937_64;

/// Uniform(-sqrt(6/fan_in), +sqrt(6/fan_in)) initialisation.
Tensor he_uniform(Shape shape, std::size_t fan_in, Rng& rng);

/// Registers `<prefix>.weight` [out,in,k,k] and zero `<prefix>.bias` [out].
void add_conv(ParameterSet& params, const std::string& prefix, std::size_t in_channels,
              std::size_t out_channels, std::size_t kernel, Rng& rng);

/// Registers `<prefix>.weight` [in,out] and zero `<prefix>.bias` [out].
void add_dense(ParameterSet& params, const std::string& prefix, std::size_t in_features,
               std::size_t out_features, Rng& rng);

/// Same-padded conv followed by ReLU.
Tensor conv_relu(Tape& tape, const ParameterSet& params, const std::string& prefix,
                 const Tensor& x);

Tensor apply_dense(Tape& tape, const ParameterSet& params, const std::string& prefix,
                   const Tensor& x);

/// Marks every parameter as requiring a gradient.
void track_gradients(ParameterSet& params);

}  // namespace boneage
