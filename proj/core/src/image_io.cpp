#include "desnow/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "desnow/error.hpp"

namespace desnow::io {

Tensor read_png(const std::filesystem::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DataError("cannot read PNG '" + path.string() + "': " + msg);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DataError("cannot decode PNG '" + path.string() + "': " + msg);
  }
  const std::size_t H = img.height, W = img.width;
  Tensor out({3, H, W});
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t c = 0; c < 3; ++c) out.at(c, y, x) = buf[(y * W + x) * 3 + c] / 255.0;
  return out;
}

unsigned char quantize(double v) {
  const double s = std::clamp(v, 0.0, 1.0) * 255.0;
  return static_cast<unsigned char>(std::nearbyint(s));  // default rounding: half to even
}

void write_png(const std::filesystem::path& path, const Tensor& image) {
  if (image.rank() != 3 || (image.dim(0) != 3 && image.dim(0) != 1))
    throw ShapeError("write_png: expected (3,H,W) or (1,H,W), got " + to_string(image.shape()));
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  std::vector<unsigned char> buf(C * H * W);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t c = 0; c < C; ++c) buf[(y * W + x) * C + c] = quantize(image.at(c, y, x));
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(W);
  img.height = static_cast<png_uint_32>(H);
  img.format = C == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DataError("cannot write PNG '" + path.string() + "': " + msg);
  }
}

Padded reflect_pad(const Tensor& image, std::size_t multiple) {
  if (image.rank() != 3) throw ShapeError("reflect_pad: expected (C,H,W), got " + to_string(image.shape()));
  const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
  const auto up = [multiple](std::size_t n) { return (n + multiple - 1) / multiple * multiple; };
  const std::size_t H2 = up(H), W2 = up(W);
  if (H2 == H && W2 == W) return {image, H, W};
  const auto mirror = [](std::size_t i, std::size_t n) {
    if (n == 1) return std::size_t{0};
    const std::size_t period = 2 * n - 2;
    i %= period;
    return i < n ? i : period - i;
  };
  Tensor out({C, H2, W2});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < H2; ++y)
      for (std::size_t x = 0; x < W2; ++x) out.at(c, y, x) = image.at(c, mirror(y, H), mirror(x, W));
  return {std::move(out), H, W};
}

Tensor crop(const Tensor& image, std::size_t height, std::size_t width) {
  if (image.rank() != 3 || image.dim(1) < height || image.dim(2) < width)
    throw ShapeError("crop: cannot crop " + to_string(image.shape()) + " to " + std::to_string(height) +
                     "x" + std::to_string(width));
  if (image.dim(1) == height && image.dim(2) == width) return image;
  const std::size_t C = image.dim(0);
  Tensor out({C, height, width});
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) out.at(c, y, x) = image.at(c, y, x);
  return out;
}

}  // namespace desnow::io
