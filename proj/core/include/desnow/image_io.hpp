#pragma once

#include <filesystem>

#include "desnow/tensor.hpp"

namespace desnow::io {

/// Decode an 8-bit PNG to a (3,H,W) tensor with values v/255. Grayscale is
/// replicated to three channels, alpha is dropped.
Tensor read_png(const std::filesystem::path& path);

/// Encode a (3,H,W) or (1,H,W) tensor: clamp to [0,1], scale by 255 and round
/// half to even.
void write_png(const std::filesystem::path& path, const Tensor& image);

/// 8-bit quantization used by write_png, exposed for tests.
unsigned char quantize(double v);

struct Padded {
  Tensor image;
  std::size_t height = 0;  ///< original extents
  std::size_t width = 0;
  bool changed() const { return image.dim(1) != height || image.dim(2) != width; }
};

/// Mirror-pad bottom/right (edge sample not repeated) up to a multiple of `multiple`.
Padded reflect_pad(const Tensor& image, std::size_t multiple);
Tensor crop(const Tensor& image, std::size_t height, std::size_t width);

}  // namespace desnow::io
