#pragma once

#include <cstdint>
#include <string>

#include "desnow/tensor.hpp"

namespace desnow::data {

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool operator==(const Range&) const = default;
};

/// Parameters of the synthetic snow degradation. Angles are in degrees from
/// vertical; lengths, widths and radii in pixels.
struct SnowParams {
  int streak_count = 24;
  Range streak_length{6.0, 18.0};
  Range streak_angle{-75.0, 75.0};
  Range streak_width{0.6, 1.6};
  Range transparency{0.5, 0.95};
  double blur_sigma = 0.6;
  int flake_count = 12;
  Range flake_radius{0.8, 2.2};
  double veil_strength = 0.15;
  double atmospheric_light = 0.9;
  std::uint64_t rng_seed = 0;

  void validate() const;
  bool operator==(const SnowParams&) const = default;
};

/// White streaks and flakes composited over `clean`, Gaussian-blurred, then
/// veiled: I = J t + A (1 - t) with t = 1 - veil_strength.
Tensor synth_snow(const Tensor& clean, const SnowParams& params);

/// Alpha coverage of the snow layer alone (1,H,W), before compositing.
Tensor snow_layer(std::size_t height, std::size_t width, const SnowParams& params);

/// Smooth procedural RGB scene in [0.05, 0.8] for building clean targets.
Tensor procedural_scene(std::size_t height, std::size_t width, std::uint64_t seed);

/// Separable Gaussian blur of every channel, kernel truncated at 3 sigma and
/// renormalized over the clipped support.
Tensor gaussian_blur(const Tensor& image, double sigma);

}  // namespace desnow::data
