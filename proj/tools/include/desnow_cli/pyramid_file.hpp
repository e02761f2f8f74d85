#pragma once

#include <filesystem>
#include <variant>

#include "desnow/dtcwt.hpp"

namespace desnow::cli {

/// A decomposition as stored by `desnow decompose`, with the unpadded extent
/// of the image it came from.
struct StoredPyramid {
  std::variant<wavelet::Pyramid, wavelet::DwtPyramid> pyramid;
  std::size_t height = 0;
  std::size_t width = 0;
};

void save_pyramid(const std::filesystem::path& path, const StoredPyramid& p);
StoredPyramid load_pyramid(const std::filesystem::path& path);
Tensor reconstruct(const StoredPyramid& p);

}  // namespace desnow::cli
