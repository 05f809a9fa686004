#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "boneage/tensor.hpp"

namespace boneage {

/// On-disk layout (format=1):
///
///     format=1
///     <key>=<value>            model metadata, zero or more
///     <name> <shape> f32 <byte-offset>   one line per parameter
///     end
///     <raw little-endian float32 blob, parameters in manifest order>
///
/// Shapes are written as "8x1x3x3". Offsets are relative to the blob start.
struct Checkpoint {
  std::map<std::string, std::string> metadata;
  ParameterSet params;

  const std::string& meta(const std::string& key) const;
};

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     const std::map<std::string, std::string>& metadata = {});

Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Copies values from `source` into `target`; names and shapes must agree.
void assign_parameters(ParameterSet& target, const ParameterSet& source);

}  // namespace boneage
