#include "desnow/synth_snow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "desnow/error.hpp"

namespace desnow::data {

namespace {

void check_range(const Range& r, double lo, double hi, const char* what) {
  if (!(r.lo <= r.hi) || r.lo < lo || r.hi > hi)
    throw ConfigError(std::string("snow.") + what + ": range [" + std::to_string(r.lo) + ", " +
                      std::to_string(r.hi) + "] must be nonempty and within [" + std::to_string(lo) +
                      ", " + std::to_string(hi) + "]");
}

double draw(std::mt19937_64& rng, const Range& r) {
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
  const double dx = bx - ax, dy = by - ay;
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - ax) * dx + (py - ay) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(px - (ax + t * dx), py - (ay + t * dy));
}

}  // namespace

void SnowParams::validate() const {
  constexpr double kBig = 1e6;
  if (streak_count < 0 || flake_count < 0) throw ConfigError("snow: counts must be >= 0");
  check_range(streak_length, 0.0, kBig, "streak_length");
  check_range(streak_angle, -90.0, 90.0, "streak_angle");
  check_range(streak_width, 0.0, kBig, "streak_width");
  check_range(transparency, 0.0, 1.0, "transparency");
  check_range(flake_radius, 0.0, kBig, "flake_radius");
  if (blur_sigma < 0.0) throw ConfigError("snow.blur_sigma must be >= 0");
  if (veil_strength < 0.0 || veil_strength > 1.0) throw ConfigError("snow.veil_strength must be in [0,1]");
  if (atmospheric_light < 0.0 || atmospheric_light > 1.0)
    throw ConfigError("snow.atmospheric_light must be in [0,1]");
}

Tensor gaussian_blur(const Tensor& image, double sigma) {
  if (sigma <= 0.0) return image;
  if (image.rank() != 3) throw ShapeError("gaussian_blur: expected (C,H,W), got " + to_string(image.shape()));
  const long r = static_cast<long>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  for (long i = -r; i <= r; ++i) k[i + r] = std::exp(-double(i * i) / (2.0 * sigma * sigma));
  const long C = long(image.dim(0)), H = long(image.dim(1)), W = long(image.dim(2));
  Tensor tmp(image.shape()), out(image.shape());
  for (long c = 0; c < C; ++c) {
    for (long y = 0; y < H; ++y)
      for (long x = 0; x < W; ++x) {
        double s = 0.0, wsum = 0.0;
        for (long i = std::max(-r, -x); i <= std::min(r, W - 1 - x); ++i) {
          s += k[i + r] * image.at(c, y, x + i);
          wsum += k[i + r];
        }
        tmp.at(c, y, x) = s / wsum;
      }
    for (long y = 0; y < H; ++y)
      for (long x = 0; x < W; ++x) {
        double s = 0.0, wsum = 0.0;
        for (long i = std::max(-r, -y); i <= std::min(r, H - 1 - y); ++i) {
          s += k[i + r] * tmp.at(c, y + i, x);
          wsum += k[i + r];
        }
        out.at(c, y, x) = s / wsum;
      }
  }
  return out;
}

Tensor snow_layer(std::size_t height, std::size_t width, const SnowParams& p) {
  p.validate();
  std::mt19937_64 rng(p.rng_seed);
  const long H = long(height), W = long(width);
  Tensor a({1, height, width});
  const auto stamp = [&](long y, long x, double v) {
    double& dst = a.at(0, std::size_t(y), std::size_t(x));
    dst = std::max(dst, v);
  };

  for (int s = 0; s < p.streak_count; ++s) {
    const double cx = draw(rng, {0.0, double(W)}), cy = draw(rng, {0.0, double(H)});
    const double len = draw(rng, p.streak_length);
    const double ang = draw(rng, p.streak_angle) * std::numbers::pi / 180.0;
    const double half_w = draw(rng, p.streak_width) / 2.0;
    const double alpha = draw(rng, p.transparency);
    // direction measured from vertical, image rows grow downward
    const double dx = std::sin(ang) * len / 2.0, dy = std::cos(ang) * len / 2.0;
    const double ax = cx - dx, ay = cy - dy, bx = cx + dx, by = cy + dy;
    const double reach = 3.0 * half_w + 1.0;
    const long y0 = std::max(0L, long(std::floor(std::min(ay, by) - reach)));
    const long y1 = std::min(H - 1, long(std::ceil(std::max(ay, by) + reach)));
    const long x0 = std::max(0L, long(std::floor(std::min(ax, bx) - reach)));
    const long x1 = std::min(W - 1, long(std::ceil(std::max(ax, bx) + reach)));
    for (long y = y0; y <= y1; ++y)
      for (long x = x0; x <= x1; ++x) {
        const double d = segment_distance(x + 0.5, y + 0.5, ax, ay, bx, by);
        const double sd = std::max(half_w, 0.25);
        stamp(y, x, alpha * std::exp(-d * d / (2.0 * sd * sd)));
      }
  }

  for (int f = 0; f < p.flake_count; ++f) {
    const double cx = draw(rng, {0.0, double(W)}), cy = draw(rng, {0.0, double(H)});
    const double rad = draw(rng, p.flake_radius);
    const double alpha = draw(rng, p.transparency);
    const long y0 = std::max(0L, long(cy - rad - 1)), y1 = std::min(H - 1, long(cy + rad + 1));
    const long x0 = std::max(0L, long(cx - rad - 1)), x1 = std::min(W - 1, long(cx + rad + 1));
    for (long y = y0; y <= y1; ++y)
      for (long x = x0; x <= x1; ++x) {
        const double cover = std::clamp(rad + 0.5 - std::hypot(x + 0.5 - cx, y + 0.5 - cy), 0.0, 1.0);
        stamp(y, x, alpha * cover);
      }
  }
  return gaussian_blur(a, p.blur_sigma);
}

Tensor synth_snow(const Tensor& clean, const SnowParams& p) {
  if (clean.rank() != 3) throw ShapeError("synth_snow: expected (C,H,W), got " + to_string(clean.shape()));
  const std::size_t C = clean.dim(0), H = clean.dim(1), W = clean.dim(2);
  const Tensor a = snow_layer(H, W, p);
  const double t = 1.0 - p.veil_strength;
  const double A = p.atmospheric_light;
  Tensor out(clean.shape());
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < H * W; ++i) {
      const double m = a[i];
      const double j = clean[c * H * W + i] * (1.0 - m) + m;
      out[c * H * W + i] = j * t + A * (1.0 - t);
    }
  return out;
}

Tensor procedural_scene(std::size_t height, std::size_t width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor img({3, height, width});
  // Sum of a few low-frequency plane waves per channel plus flat-shaded boxes.
  for (std::size_t c = 0; c < 3; ++c) {
    const double base = 0.2 + 0.3 * u(rng);
    double fy[3], fx[3], ph[3], amp[3];
    for (int k = 0; k < 3; ++k) {
      fy[k] = (u(rng) - 0.5) * 0.5;
      fx[k] = (u(rng) - 0.5) * 0.5;
      ph[k] = u(rng) * 2.0 * std::numbers::pi;
      amp[k] = 0.08 * u(rng);
    }
    for (std::size_t y = 0; y < height; ++y)
      for (std::size_t x = 0; x < width; ++x) {
        double v = base;
        for (int k = 0; k < 3; ++k) v += amp[k] * std::sin(fy[k] * double(y) + fx[k] * double(x) + ph[k]);
        img.at(c, y, x) = v;
      }
  }
  const int boxes = 3;
  for (int b = 0; b < boxes; ++b) {
    const auto y0 = std::size_t(u(rng) * double(height)), x0 = std::size_t(u(rng) * double(width));
    const auto h = std::size_t(1 + u(rng) * double(height) / 2), w = std::size_t(1 + u(rng) * double(width) / 2);
    double col[3];
    for (double& v : col) v = 0.1 + 0.6 * u(rng);
    for (std::size_t y = y0; y < std::min(height, y0 + h); ++y)
      for (std::size_t x = x0; x < std::min(width, x0 + w); ++x)
        for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = col[c];
  }
  for (double& v : img.data()) v = std::clamp(v, 0.05, 0.8);
  return img;
}

}  // namespace desnow::data
