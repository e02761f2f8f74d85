#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "desnow/network.hpp"
#include "desnow/tensor.hpp"

/// "WDSN" binary container: magic, u32 version, u32 count, then per tensor
/// u16 name length, name bytes, u8 rank, u32 extents, f64 payload. All
/// integers and reals little-endian.
namespace desnow::io {

inline constexpr std::uint32_t kWeightsVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
  bool operator==(const NamedTensor&) const = default;
};

void write_tensors(std::ostream& out, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensors(std::istream& in);

void save_tensors(const std::filesystem::path& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> load_tensors(const std::filesystem::path& path);

/// Model files lead with a "meta.net_config" tensor so they are self-describing.
void save_model(const std::filesystem::path& path, const net::ModelWeights& weights);
net::ModelWeights load_model(const std::filesystem::path& path);

}  // namespace desnow::io
