#include "desnow/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "desnow/error.hpp"

namespace desnow::metrics {

double psnr(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "psnr");
  double se = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / (se / static_cast<double>(a.numel())));
}

double ssim(const Tensor& a, const Tensor& b, const SsimOptions& o) {
  require_same_shape(a, b, "ssim");
  if (a.rank() != 3) throw ShapeError("ssim: expected (C,H,W), got " + to_string(a.shape()));
  const std::size_t C = a.dim(0), H = a.dim(1), W = a.dim(2), K = std::size_t(o.window);
  if (H < K || W < K)
    throw ShapeError("ssim: image " + std::to_string(H) + "x" + std::to_string(W) + " is smaller than the " +
                     std::to_string(K) + "x" + std::to_string(K) + " window");
  // Separable normalized Gaussian.
  std::vector<double> g(K);
  double gs = 0.0;
  const double mid = double(K - 1) / 2.0;
  for (std::size_t i = 0; i < K; ++i) gs += g[i] = std::exp(-(i - mid) * (i - mid) / (2.0 * o.sigma * o.sigma));
  for (double& v : g) v /= gs;

  const double c1 = (o.k1 * o.dynamic_range) * (o.k1 * o.dynamic_range);
  const double c2 = (o.k2 * o.dynamic_range) * (o.k2 * o.dynamic_range);
  const std::size_t Ho = H - K + 1, Wo = W - K + 1;

  // Valid-mode separable filtering of one plane.
  const auto filter = [&](const std::vector<double>& p) {
    std::vector<double> rows(H * Wo, 0.0), out(Ho * Wo, 0.0);
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < Wo; ++x) {
        double s = 0.0;
        for (std::size_t k = 0; k < K; ++k) s += g[k] * p[y * W + x + k];
        rows[y * Wo + x] = s;
      }
    for (std::size_t y = 0; y < Ho; ++y)
      for (std::size_t x = 0; x < Wo; ++x) {
        double s = 0.0;
        for (std::size_t k = 0; k < K; ++k) s += g[k] * rows[(y + k) * Wo + x];
        out[y * Wo + x] = s;
      }
    return out;
  };

  double total = 0.0;
  std::vector<double> pa(H * W), pb(H * W), paa(H * W), pbb(H * W), pab(H * W);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t i = 0; i < H * W; ++i) {
      pa[i] = a[c * H * W + i];
      pb[i] = b[c * H * W + i];
      paa[i] = pa[i] * pa[i];
      pbb[i] = pb[i] * pb[i];
      pab[i] = pa[i] * pb[i];
    }
    const auto ma = filter(pa), mb = filter(pb), saa = filter(paa), sbb = filter(pbb), sab = filter(pab);
    double acc = 0.0;
    for (std::size_t i = 0; i < Ho * Wo; ++i) {
      const double va = saa[i] - ma[i] * ma[i], vb = sbb[i] - mb[i] * mb[i], cov = sab[i] - ma[i] * mb[i];
      acc += ((2 * ma[i] * mb[i] + c1) * (2 * cov + c2)) /
             ((ma[i] * ma[i] + mb[i] * mb[i] + c1) * (va + vb + c2));
    }
    total += acc / double(Ho * Wo);
  }
  return total / double(C);
}

QualityReport evaluate(const Tensor& restored, const Tensor& reference) {
  return {psnr(restored, reference), ssim(restored, reference)};
}

}  // namespace desnow::metrics
