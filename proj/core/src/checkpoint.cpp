#include "boneage/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "boneage/error.hpp"

namespace boneage {
namespace {

constexpr const char* kFormatLine = "format=1";
constexpr const char* kEndLine = "end";

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

}  // namespace

const std::string& Checkpoint::meta(const std::string& key) const {
  auto it = metadata.find(key);
  if (it == metadata.end()) throw ConfigError("checkpoint is missing metadata key '" + key + "'");
  return it->second;
}

void save_checkpoint(const std::filesystem::path& path, const ParameterSet& params,
                     const std::map<std::string, std::string>& metadata) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out << kFormatLine << '\n';
  for (const auto& [key, value] : metadata) {
    if (key.find_first_of("= \n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw ContractError("invalid checkpoint metadata entry '" + key + "'");
    }
    out << key << '=' << value << '\n';
  }
  std::size_t offset = 0;
  for (const auto& [name, tensor] : params) {
    out << name << ' ' << shape_string(tensor.shape()) << " f32 " << offset << '\n';
    offset += tensor.numel() * sizeof(float);
  }
  out << kEndLine << '\n';
  for (const auto& [name, tensor] : params) {
    for (float v : tensor.data()) {
      const std::uint32_t bits = to_little_endian(std::bit_cast<std::uint32_t>(v));
      out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
    }
  }
  if (!out) throw IoError("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  const std::string where = " in checkpoint '" + path.string() + "'";

  std::string line;
  if (!std::getline(in, line) || line != kFormatLine) {
    throw IoError("unsupported checkpoint header" + where);
  }

  struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset;
  };
  Checkpoint ckpt;
  std::vector<Entry> entries;
  bool terminated = false;
  while (std::getline(in, line)) {
    if (line == kEndLine) {
      terminated = true;
      break;
    }
    if (auto eq = line.find('='); eq != std::string::npos) {
      ckpt.metadata[line.substr(0, eq)] = line.substr(eq + 1);
      continue;
    }
    std::istringstream fields(line);
    std::string name, shape, dtype;
    std::size_t offset = 0;
    if (!(fields >> name >> shape >> dtype >> offset) || dtype != "f32") {
      throw IoError("malformed manifest line '" + line + "'" + where);
    }
    entries.push_back({name, parse_shape(shape), offset});
  }
  if (!terminated) throw IoError("manifest not terminated" + where);

  std::vector<char> blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t expected = 0;
  for (const Entry& e : entries) {
    if (e.offset != expected) throw IoError("non-contiguous offset for '" + e.name + "'" + where);
    expected += shape_numel(e.shape) * sizeof(float);
  }
  if (blob.size() != expected) {
    std::ostringstream msg;
    msg << "blob holds " << blob.size() << " bytes, manifest expects " << expected << where;
    throw IoError(msg.str());
  }
  for (const Entry& e : entries) {
    std::vector<float> values(shape_numel(e.shape));
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::uint32_t bits = 0;
      std::memcpy(&bits, blob.data() + e.offset + i * sizeof(bits), sizeof(bits));
      values[i] = std::bit_cast<float>(to_little_endian(bits));
    }
    ckpt.params.add(e.name, Tensor(e.shape, std::move(values)));
  }
  return ckpt;
}

void assign_parameters(ParameterSet& target, const ParameterSet& source) {
  if (target.size() != source.size()) {
    throw ConfigError("checkpoint parameter count does not match model");
  }
  auto it = source.begin();
  for (auto& [name, tensor] : target) {
    const auto& [src_name, src] = *it++;
    if (src_name != name || src.shape() != tensor.shape()) {
      throw ConfigError("checkpoint parameter '" + src_name + "' " + shape_string(src.shape()) +
                        " does not match model parameter '" + name + "' " +
                        shape_string(tensor.shape()));
    }
    std::copy(src.data().begin(), src.data().end(), tensor.data().begin());
  }
}

}  // namespace boneage
